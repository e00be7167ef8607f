"""Declarative scenario configuration.

A scenario file is a YAML document naming the operator matrices, the
fractional parameters, reusable sets and fields, grids, seed, and per-check
settings. Loading validates everything up front, fills documented defaults,
and the effective configuration is echoed into every emitted report so a
run can be reproduced byte for byte from its own output.
"""

import importlib.resources
from dataclasses import dataclass, field as dfield
from pathlib import Path

import numpy as np
import yaml

from .errors import ParseError, ValidationError
from .fields import RegionSet, ScalarField, staircase_field, tent_field
from .fractional import FractionalParams
from .operators import OperatorSpec, validate_spec

__all__ = ["Scenario", "load_config", "builtin_scenario_path",
           "BUILTIN_SCENARIOS"]

BUILTIN_SCENARIOS = ("heat", "kolmogorov", "degenerate_ou", "rotation")

_DEFAULTS = {
    "fractional": {"s": 0.25, "p": 1},
    "grids": {
        "t_grid": {"min": 1e-8, "max": 1e3, "points": 40},
        "sigma_grid": {"min": 0.0, "max": 1.0, "points": 21},
    },
    "tolerances": {
        "kernel_normalization": 1e-6,
        "coarea": 0.03,
        "blowup_shortfall": 0.01,
        "embedding_spread": 1.5,
        "embedding_band": 2.0,
        "chapman_kolmogorov": 1e-3,
    },
}


@dataclass
class Scenario:
    """Validated scenario: operator, parameters, named fields and sets."""

    name: str
    spec: OperatorSpec
    params: FractionalParams
    seed: int
    sets: dict
    fields: dict
    grids: dict
    tolerances: dict
    probes: np.ndarray
    checks: dict
    raw: dict = dfield(repr=False, default_factory=dict)

    def t_grid(self):
        g = self.grids["t_grid"]
        return np.logspace(np.log10(g["min"]), np.log10(g["max"]), g["points"])

    def sigma_grid(self):
        g = self.grids["sigma_grid"]
        return np.linspace(g["min"], g["max"], g["points"])

    def effective_config(self):
        """The fully defaulted configuration this scenario runs under."""
        return self.raw


def _need(cfg, key, where):
    if key not in cfg:
        raise ParseError(f"missing required field {key!r} in {where}")
    return cfg[key]


def _matrix(entry, name):
    try:
        M = np.asarray(entry, float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field {name!r} is not a numeric matrix: {exc}") from None
    if M.ndim != 2:
        raise ParseError(f"field {name!r} must be a matrix (list of equal-length rows)")
    return M


def _build_set(name, cfg):
    kind = _need(cfg, "kind", f"set {name!r}")
    if kind == "boxes":
        boxes = [(np.asarray(b[0], float), np.asarray(b[1], float))
                 for b in _need(cfg, "boxes", f"set {name!r}")]
        return RegionSet.from_boxes(boxes)
    if kind == "ball":
        return RegionSet.ball(_need(cfg, "center", f"set {name!r}"),
                              _need(cfg, "radius", f"set {name!r}"))
    raise ParseError(f"set {name!r} has unknown kind {kind!r}")


def _build_field(name, cfg, sets):
    kind = _need(cfg, "kind", f"field {name!r}")
    if kind == "indicator":
        set_name = _need(cfg, "set", f"field {name!r}")
        if set_name not in sets:
            raise ParseError(f"field {name!r} references unknown set {set_name!r}")
        return ScalarField.indicator(sets[set_name])
    if kind == "gaussian_mixture":
        terms = [(t["weight"], t["mean"], t["cov"])
                 for t in _need(cfg, "terms", f"field {name!r}")]
        return ScalarField.gaussian_mixture(terms)
    if kind == "grid":
        return ScalarField.from_grid(_need(cfg, "lo", f"field {name!r}"),
                                     _need(cfg, "hi", f"field {name!r}"),
                                     _need(cfg, "values", f"field {name!r}"))
    if kind == "tent":
        return tent_field(_need(cfg, "lo", f"field {name!r}"),
                          _need(cfg, "hi", f"field {name!r}"),
                          int(cfg.get("n", 32)))
    if kind == "staircase":
        return staircase_field(_need(cfg, "boxes", f"field {name!r}"),
                               _need(cfg, "heights", f"field {name!r}"),
                               _need(cfg, "lo", f"field {name!r}"),
                               _need(cfg, "hi", f"field {name!r}"),
                               int(cfg.get("n", 48)))
    if kind == "constant":
        return ScalarField.constant(float(cfg.get("value", 1.0)))
    raise ParseError(f"field {name!r} has unknown kind {kind!r}")


def _merge_defaults(cfg):
    out = dict(cfg)
    for key, sub in _DEFAULTS.items():
        merged = dict(sub)
        merged.update(out.get(key, {}) or {})
        if key == "grids":
            for gname, gdef in _DEFAULTS["grids"].items():
                g = dict(gdef)
                g.update((out.get("grids", {}) or {}).get(gname, {}) or {})
                merged[gname] = g
        out[key] = merged
    out.setdefault("probes", [[0.0, 0.0]])
    out.setdefault("sets", {})
    out.setdefault("fields", {})
    out.setdefault("checks", {})
    if "seed" not in out:
        raise ParseError("scenario must declare a seed (Monte Carlo paths need it)")
    return out


def load_config(path) -> Scenario:
    """Parse and validate a scenario file; defaults are filled and echoed."""
    path = Path(path)
    if not path.exists():
        raise ParseError(f"scenario file {str(path)!r} does not exist")
    try:
        with open(path, "r") as fh:
            cfg = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path.name}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ParseError(f"scenario {path.name} must be a mapping at top level")
    cfg = _merge_defaults(cfg)
    name = cfg.get("name", path.stem)
    op = _need(cfg, "operator", "scenario")
    Q = _matrix(_need(op, "Q", "operator"), "operator.Q")
    B = _matrix(_need(op, "B", "operator"), "operator.B")
    try:
        spec = validate_spec(Q, B)
    except ValidationError:
        raise
    frac = cfg["fractional"]
    params = FractionalParams(s=float(frac["s"]), p=float(frac.get("p", 1)))
    sets = {k: _build_set(k, v) for k, v in cfg["sets"].items()}
    fields = {k: _build_field(k, v, sets) for k, v in cfg["fields"].items()}
    probes = np.asarray(cfg["probes"], float)
    if probes.ndim != 2 or probes.shape[1] != spec.dim:
        raise ParseError(
            f"probes must be a list of {spec.dim}-vectors, got shape {probes.shape}")
    return Scenario(name=name, spec=spec, params=params,
                    seed=int(cfg["seed"]), sets=sets, fields=fields,
                    grids=cfg["grids"], tolerances=cfg["tolerances"],
                    probes=probes, checks=cfg["checks"], raw=cfg)


def builtin_scenario_path(name) -> Path:
    """Filesystem path of a bundled scenario file."""
    if name not in BUILTIN_SCENARIOS:
        raise ValidationError(
            f"unknown builtin scenario {name!r}; have {BUILTIN_SCENARIOS}")
    ref = importlib.resources.files("kfptools") / "scenarios" / f"{name}.scenario"
    return Path(str(ref))
