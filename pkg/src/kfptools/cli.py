"""Command-line front end: scenario ingestion, dispatch, report emission.

Grammar:

    kfptool <check|volume|dims|kernel|apply|fracpow|perimeter|besov|verify>
            --config <scenario file> [--out <dir>] [--target <name>]

Every subcommand reads a declarative scenario, runs the mapped library
operations, and writes one JSON report (plus CSV tables) into the output
directory. Identical argv, config, and seed produce byte-identical JSON:
reports carry no timestamps and echo the fully defaulted configuration.
Exit codes: 0 all checks passed, 1 a check failed, 2 input or usage error.
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field as dfield
from pathlib import Path

import numpy as np

from . import __version__
from .dimensions import classify_regime, volume_table
from .embeddings import (check_blowup, check_coarea, check_embedding_mixed,
                         check_embedding_uniform, level_profile)
from .errors import IoError, KFPError, ParseError
from .fields import ScalarField
from .fractional import besov_seminorm, fractional_power, perimeter
from .kernel import apply_semigroup, kernel_eval, normalization_check
from .operators import hormander_grid_check
from .reports import VerificationReport, _jsonable
from .rng import SamplerState
from .scenarios import Scenario, load_config

__all__ = ["RunArtifact", "run_command", "emit_report", "main"]

SUBCOMMANDS = ("check", "volume", "dims", "kernel", "apply", "fracpow",
               "perimeter", "besov", "verify")
VERIFY_TARGETS = ("coarea", "blowup", "isoperimetric", "embedding",
                  "embedding-mixed")
SCHEMA = "kfptool-report/1"


@dataclass
class RunArtifact:
    """Everything one invocation produced."""

    reports: list
    csv_paths: list = dfield(default_factory=list)
    json_path: str | None = None
    payload: dict = dfield(default_factory=dict)
    exit_code: int = 0


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from None
    return str(path)


def _report_rows(reports):
    rows = []
    for r in reports:
        d = r.to_dict() if hasattr(r, "to_dict") else dict(r)
        rows.append([d.get("name", d.get("constant_name", "?")),
                     d.get("lhs"), d.get("rhs"), d.get("ratio"),
                     d.get("passed")])
    return rows


def _cmd_check(sc: Scenario, out, art):
    rep = hormander_grid_check(sc.spec, sc.t_grid())
    art.reports.append(rep)


def _cmd_volume(sc: Scenario, out, art):
    rows = volume_table(sc.spec, sc.t_grid())
    art.csv_paths.append(_write_csv(out / "volume.csv",
                                    ["t", "V", "local_slope"], rows))
    finite = [r for r in rows if np.isfinite(r[1])]
    art.reports.append(VerificationReport(
        name="volume_positive", passed=all(r[1] > 0 for r in finite),
        details={"n_points": len(rows), "n_overflow": len(rows) - len(finite)}))


def _cmd_dims(sc: Scenario, out, art):
    profile = classify_regime(sc.spec)
    rows = volume_table(sc.spec, sc.t_grid())
    art.csv_paths.append(_write_csv(out / "volume.csv",
                                    ["t", "V", "local_slope"], rows))
    art.reports.append(VerificationReport(
        name="dimension_profile", passed=profile.regime != "unsupported",
        details=profile.to_dict()))


def _cmd_kernel(sc: Scenario, out, art):
    cfg = sc.checks.get("kernel", {})
    t = float(cfg.get("t", 1.0))
    pairs = cfg.get("pairs")
    if pairs is None:
        pairs = [[sc.probes[0].tolist(), sc.probes[-1].tolist()]]
    vals = []
    for X, Y in pairs:
        vals.append({"X": X, "Y": Y, "t": t,
                     "p": float(kernel_eval(sc.spec, t, np.asarray(X), np.asarray(Y)))})
    rep = normalization_check(sc.spec, t, sc.probes[0],
                              rtol_y=sc.tolerances["kernel_normalization"])
    rep.details["values"] = vals
    art.reports.append(rep)


def _cmd_apply(sc: Scenario, out, art):
    cfg = sc.checks.get("apply", {})
    fname = cfg.get("field") or next(iter(sc.fields))
    t = float(cfg.get("t", 1.0))
    method = cfg.get("method", "auto")
    f = sc.fields[fname]
    rows = []
    ok = True
    for X in sc.probes:
        val, ci = apply_semigroup(sc.spec, t, f, X, method=method,
                                  state=SamplerState(sc.seed))
        rows.append({"X": X.tolist(), "value": float(val),
                     "ci_half_width": None if ci is None else float(ci)})
    art.reports.append(VerificationReport(
        name=f"apply_semigroup[{fname}]", passed=ok,
        details={"t": t, "method": method, "rows": rows}))


def _cmd_fracpow(sc: Scenario, out, art):
    cfg = sc.checks.get("fracpow", {})
    fname = cfg.get("field") or next(iter(sc.fields))
    f = sc.fields[fname]
    vals, rows = fractional_power(sc.spec, sc.params, f, sc.probes,
                                  return_trace=True)
    art.csv_paths.append(_write_csv(out / "fracpow.csv",
                                    ["t", "integrand", "cumulative"], rows))
    art.reports.append(VerificationReport(
        name=f"fractional_power[{fname}]", passed=bool(np.all(np.isfinite(vals))),
        details={"s": sc.params.s, "probes": sc.probes.tolist(),
                 "values": np.asarray(vals).tolist()}))


def _cmd_perimeter(sc: Scenario, out, art):
    cfg = sc.checks.get("perimeter", {})
    names = cfg.get("sets") or list(sc.sets)
    for name in names:
        res = perimeter(sc.spec, sc.params, sc.sets[name])
        ts = res.diagnostics["t_nodes"]
        ig = res.diagnostics["integrand"]
        cum = np.cumsum(np.asarray(ig) * np.asarray(res.diagnostics["dt_weights"]))
        art.csv_paths.append(_write_csv(
            out / f"perimeter_{name}.csv", ["t", "integrand", "cumulative"],
            list(zip(ts, ig, cum.tolist()))))
        art.reports.append(VerificationReport(
            name=f"perimeter[{name}]", passed=np.isfinite(res.value),
            lhs=res.value, details={"error_estimate": res.error,
                                    "s": sc.params.s,
                                    **{k: v for k, v in res.diagnostics.items()
                                       if not isinstance(v, list)}}))


def _cmd_besov(sc: Scenario, out, art):
    cfg = sc.checks.get("besov", {})
    names = cfg.get("fields") or list(sc.fields)
    for name in names:
        f = sc.fields[name]
        if f.backend not in ("grid", "indicator", "gaussian_mixture"):
            continue
        val = besov_seminorm(sc.spec, sc.params, f)
        art.reports.append(VerificationReport(
            name=f"besov_seminorm[{name}]", passed=np.isfinite(val), lhs=val,
            details={"s": sc.params.s, "p": sc.params.p, "order": 2 * sc.params.s}))
        prof = level_profile(f)
        art.csv_paths.append(_write_csv(
            out / f"profile_{name}.csv", ["sigma", "G"],
            list(zip(prof.sigmas.tolist(), prof.G.tolist()))))


def _families(sc, cfg):
    base = sc.sets[cfg.get("set") or next(iter(sc.sets))]
    scales = cfg.get("scales", [1.0, 2.0, 4.0])
    return [ScalarField.indicator(base.scaled(lam)) for lam in scales]


def _cmd_verify(sc: Scenario, out, art, target):
    if target == "coarea":
        cfg = sc.checks.get("coarea", {})
        fname = cfg.get("field") or next(iter(sc.fields))
        rep = check_coarea(sc.spec, sc.params, sc.fields[fname],
                           rel_tol=sc.tolerances["coarea"])
        art.reports.append(rep)
    elif target == "blowup":
        cfg = sc.checks.get("blowup", {})
        sname = cfg.get("set") or next(iter(sc.sets))
        t_seq = cfg.get("t_seq", [1e-2, 1e-3, 1e-4])
        rep = check_blowup(sc.spec, sc.sets[sname], t_seq,
                           shortfall=sc.tolerances["blowup_shortfall"])
        art.reports.append(rep)
    elif target == "isoperimetric":
        cfg = sc.checks.get("isoperimetric", {})
        D = float(cfg.get("D", 2 * sc.spec.dim))
        fam = _families(sc, cfg)
        s = sc.params.s
        rows = []
        for f in fam:
            per = perimeter(sc.spec, sc.params, f.region).value
            vol = f.region.volume
            rows.append({"volume": vol, "perimeter": per,
                         "ratio": per / vol ** ((D - 2 * s) / D)})
        ratios = np.array([r["ratio"] for r in rows])
        art.reports.append(VerificationReport(
            name="isoperimetric_lower_bound",
            passed=bool(np.all(np.isfinite(ratios)) and ratios.min() > 0),
            ratio=float(ratios.min()), details={"rows": rows, "D": D}))
        art.csv_paths.append(_write_csv(
            out / "isoperimetric.csv", ["volume", "perimeter", "ratio"],
            [[r["volume"], r["perimeter"], r["ratio"]] for r in rows]))
    elif target == "embedding":
        cfg = sc.checks.get("embedding", {})
        D = float(cfg.get("D", 2 * sc.spec.dim))
        fam = _families(sc, cfg)
        rep = check_embedding_uniform(sc.spec, sc.params, fam, D,
                                      spread_tol=sc.tolerances["embedding_spread"])
        art.reports.append(rep)
        art.csv_paths.append(_write_csv(
            out / "embedding_ratios.csv",
            ["lq_norm", "seminorm", "ratio"],
            [[r["lq_norm"], r["seminorm"], r["ratio"]] for r in rep.rows]))
    elif target == "embedding-mixed":
        cfg = sc.checks.get("embedding_mixed", {})
        fam = _families(sc, cfg)
        rep = check_embedding_mixed(sc.spec, sc.params, fam,
                                    band_tol=sc.tolerances["embedding_band"])
        art.reports.append(rep)
        art.csv_paths.append(_write_csv(
            out / "embedding_mixed_ratios.csv",
            ["sum_space_bound", "seminorm", "ratio"],
            [[r["sum_space_bound"], r["seminorm"], r["sum_space_ratio"]]
             for r in rep.rows]))
    else:
        raise ParseError(f"unknown verify target {target!r}; "
                         f"choose from {VERIFY_TARGETS}")


def emit_report(artifact: RunArtifact, out_dir, fmt="json"):
    """Write the artifact's reports; JSON is canonical, CSV the ratio table."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / "report.json"
        try:
            with open(path, "w") as fh:
                json.dump(artifact.payload, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise IoError(f"cannot write {path}: {exc}") from None
        artifact.json_path = str(path)
        return [str(path)]
    if fmt == "csv":
        path = _write_csv(out / "checks.csv",
                          ["name", "lhs", "rhs", "ratio", "passed"],
                          _report_rows(artifact.reports))
        artifact.csv_paths.append(path)
        return [path]
    raise ParseError(f"unknown report format {fmt!r}")


def run_command(argv) -> RunArtifact:
    """Execute one CLI invocation; never raises for user errors (exit codes)."""
    parser = argparse.ArgumentParser(
        prog="kfptool",
        description="degenerate Kolmogorov-Fokker-Planck semigroup toolkit")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", default="kfptool-out")
    parser.add_argument("--target", default=None)
    parser.add_argument("--version", action="version", version=__version__)
    try:
        args = parser.parse_args(argv)
    except SystemExit:
        return RunArtifact(reports=[], exit_code=2)
    art = RunArtifact(reports=[])
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        sc = load_config(args.config)
        if args.subcommand == "verify":
            target = args.target or "coarea"
            _cmd_verify(sc, out, art, target)
        else:
            handler = {
                "check": _cmd_check, "volume": _cmd_volume, "dims": _cmd_dims,
                "kernel": _cmd_kernel, "apply": _cmd_apply,
                "fracpow": _cmd_fracpow, "perimeter": _cmd_perimeter,
                "besov": _cmd_besov,
            }[args.subcommand]
            handler(sc, out, art)
    except KFPError as exc:
        art.exit_code = 2
        art.payload = {"schema": SCHEMA, "error": f"{type(exc).__name__}: {exc}",
                       "argv": list(argv)}
        emit_report(art, out)
        return art
    all_passed = all(getattr(r, "passed", True) for r in art.reports)
    art.exit_code = 0 if all_passed else 1
    art.payload = _jsonable({
        "schema": SCHEMA,
        "tool_version": __version__,
        "argv": list(argv),
        "scenario": sc.effective_config(),
        "reports": [r.to_dict() for r in art.reports],
        "csv_files": [Path(p).name for p in art.csv_paths],
        "passed": all_passed,
    })
    emit_report(art, out)
    return art


def main(argv=None) -> int:
    art = run_command(sys.argv[1:] if argv is None else argv)
    for r in art.reports:
        print(r)
    if art.payload.get("error"):
        print(art.payload["error"], file=sys.stderr)
    if art.json_path:
        print(f"report: {art.json_path}")
    return art.exit_code


if __name__ == "__main__":
    sys.exit(main())
