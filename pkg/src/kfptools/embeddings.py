"""Norm functionals and verification suites for the embedding theorems.

The checks here are property-based: the embedding constants are existence
constants, so a "pass" certifies finiteness and stability of the computed
ratios across scaling families, never agreement with any particular value.

Level-set machinery works on exact step data: for grid-backed fields the
distribution function G(sigma) = |{|f| > sigma}| is a right-continuous step
function with jumps at the distinct cell values, and all layer-cake
integrals are evaluated as exact sums over those steps.
"""

import math
from dataclasses import dataclass, field as dfield
from typing import NamedTuple

import numpy as np

from .errors import BadExponents, RegimeMismatch, UnboundedSupport
from .fields import RegionSet, ScalarField
from .fractional import (FractionalParams, besov_seminorm, fractional_power,
                         mollified_fractional_norm, perimeter)
from .kernel import box_probability
from .operators import OperatorSpec
from .reports import VerificationReport

__all__ = ["LevelSetProfile", "EmbeddingReport", "level_profile", "lq_norm",
           "weak_lq_norm", "sum_space_split", "SplitResult", "min_norm_integral",
           "split_min_constant", "check_coarea", "check_blowup",
           "check_embedding_uniform", "check_embedding_mixed",
           "strong_embedding_ratio", "threshold_region"]


@dataclass
class LevelSetProfile:
    """Step data of the distribution function G(sigma) = |{|f| > sigma}|.

    sigmas is the increasing list of jump locations (the distinct nonzero
    absolute values of f, prepended with 0); G[i] is the measure of
    {|f| > sigmas[i]}, i.e. the right limit on [sigmas[i], sigmas[i+1]).
    sigma_f = sup{sigma : G(sigma) > 1}, zero when G never exceeds one.
    """

    sigmas: np.ndarray
    G: np.ndarray
    sigma_f: float

    def measure_above(self, sigma):
        """G(sigma) for arbitrary sigma (right-continuous step lookup)."""
        i = np.searchsorted(self.sigmas, sigma, side="right") - 1
        i = np.clip(i, 0, len(self.G) - 1)
        out = np.where(np.asarray(sigma) >= self.sigmas[-1], 0.0, self.G[i])
        # values above the largest jump have measure zero
        return out if np.ndim(sigma) else float(out)


def _step_data(field: ScalarField):
    """(values, areas) of |f| cells for grid/indicator backends."""
    if field.backend == "grid":
        v = np.abs(field.values.ravel())
        a = np.full(v.shape, field.cell_volume())
        return v, a
    if field.backend == "indicator":
        region = field.region
        if region.kind == "boxes":
            vols = np.prod(region.hi - region.lo, axis=1)
            return np.ones(len(vols)), vols
        return np.array([1.0]), np.array([region.volume])
    raise UnboundedSupport(
        f"level profiles need grid or indicator fields, got {field.backend!r}")


def level_profile(field: ScalarField, sigma_grid=None) -> LevelSetProfile:
    """Exact level-set profile of a grid or indicator field.

    sigma_grid, when given, adds extra evaluation points to the jump set
    (useful for plotting); measures remain exact cell counts.
    """
    v, a = _step_data(field)
    keep = v > 0.0
    v, a = v[keep], a[keep]
    order = np.argsort(v)
    v, a = v[order], a[order]
    jumps = np.unique(v)
    sigmas = np.concatenate([[0.0], jumps])
    if sigma_grid is not None:
        sigmas = np.unique(np.concatenate([sigmas, np.asarray(sigma_grid, float)]))
    total = a.sum()
    # G at sigma: strict mass above; cumulative from the right
    G = np.array([total - a[np.searchsorted(v, s, side="right"):].sum()
                  for s in sigmas])
    G = total - np.array([a[:np.searchsorted(v, s, side="right")].sum()
                          for s in sigmas])
    sigma_f = 0.0
    above = G > 1.0
    if above.any():
        # G > 1 on [0, sigma_f); the first sigma with G <= 1 is the sup
        idx = np.argmax(~above) if (~above).any() else len(sigmas)
        sigma_f = float(sigmas[idx]) if idx < len(sigmas) else float(sigmas[-1])
    return LevelSetProfile(sigmas=sigmas, G=G, sigma_f=sigma_f)


def lq_norm(field: ScalarField, q, profile=None):
    """L^q norm by exact layer-cake summation over the level profile."""
    if q < 1.0:
        raise BadExponents(f"q must be >= 1, got {q}")
    profile = profile or level_profile(field)
    s = profile.sigmas
    G = profile.G
    # integral of q sigma^(q-1) G(sigma) with G constant between jumps
    acc = 0.0
    for i in range(len(s) - 1):
        acc += G[i] * (s[i + 1] ** q - s[i] ** q)
    return acc ** (1.0 / q)


def weak_lq_norm(field: ScalarField, q, profile=None):
    """sup over levels of sigma |{|f| > sigma}|^(1/q).

    On step data the supremum over each constancy interval is attained at
    its right endpoint, so the scan over jump points is exact.
    """
    if q <= 1.0:
        raise BadExponents(f"weak norm needs q > 1, got {q}")
    profile = profile or level_profile(field)
    s = profile.sigmas
    G = profile.G
    best = 0.0
    for i in range(len(s) - 1):
        best = max(best, s[i + 1] * G[i] ** (1.0 / q))
    return best


class SplitResult(NamedTuple):
    f1: ScalarField
    f2: ScalarField
    sigma_f: float
    bound: float


def sum_space_split(field: ScalarField, q0, q_inf) -> SplitResult:
    """Two-piece decomposition at the level sigma_f.

    f1 = f on {|f| > sigma_f} (measure at most one), f2 the remainder;
    bound = ||f1||_q0 + ||f2||_q_inf dominates the sum-space norm.
    Pointwise |f| = |f1| + |f2| and f1 f2 = 0 hold exactly on grids.
    """
    if not (q_inf > q0 > 1.0):
        raise BadExponents(f"need q_inf > q0 > 1, got q0={q0}, q_inf={q_inf}")
    profile = level_profile(field)
    sf = profile.sigma_f
    if field.backend == "grid":
        mask = np.abs(field.values) > sf
        v1 = np.where(mask, field.values, 0.0)
        v2 = np.where(mask, 0.0, field.values)
        f1 = ScalarField.from_grid(field.grid_lo, field.grid_hi, v1)
        f2 = ScalarField.from_grid(field.grid_lo, field.grid_hi, v2)
    elif field.backend == "indicator":
        if sf > 0.0:
            f1 = ScalarField.constant(0.0)
            f2 = field
        else:
            f1 = field
            f2 = ScalarField.constant(0.0)
    else:
        raise UnboundedSupport("sum-space split needs grid or indicator fields")
    bound = _split_norm(f1, q0) + _split_norm(f2, q_inf)
    return SplitResult(f1=f1, f2=f2, sigma_f=sf, bound=bound)


def _split_norm(f, q):
    if f.backend == "constant":
        return 0.0
    return lq_norm(f, q)


def min_norm_integral(field: ScalarField, q0, q_inf, profile=None):
    """integral min{G^(1/q0), G^(1/q_inf)} d sigma, exact on step data."""
    profile = profile or level_profile(field)
    s, G = profile.sigmas, profile.G
    acc = 0.0
    for i in range(len(s) - 1):
        acc += min(G[i] ** (1.0 / q0), G[i] ** (1.0 / q_inf)) * (s[i + 1] - s[i])
    return acc


def split_min_constant(q0, q_inf, tol=1e-10):
    """min over x in [0,1] of x^(1/q0) + (1-x)^(1/q_inf).

    Golden-section search plus endpoint evaluation (equal exponents put the
    minimum at an endpoint, where the value is one).
    """
    if not (q_inf >= q0 >= 1.0):
        raise BadExponents(f"need q_inf >= q0 >= 1, got q0={q0}, q_inf={q_inf}")

    def h(x):
        return x ** (1.0 / q0) + (1.0 - x) ** (1.0 / q_inf)

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, 1.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    while abs(b - a) > tol:
        if h(c) < h(d):
            b = d
        else:
            a = c
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
    return min(h(0.0), h(1.0), h(0.5 * (a + b)))


def threshold_region(field: ScalarField, sigma) -> RegionSet | None:
    """Superlevel set {f > sigma} of a grid field as a box union.

    Cells are thresholded at their centers and merged into row runs; the
    measure error is one cell layer around the level curve. Returns None
    for an empty set.
    """
    if field.backend == "indicator":
        return field.region if sigma < 1.0 else None
    mask = field.values > sigma
    if not mask.any():
        return None
    lo = field.grid_lo
    cell = field.cell
    boxes = []
    n0, n1 = mask.shape
    for i in range(n0):
        j = 0
        while j < n1:
            if mask[i, j]:
                j0 = j
                while j < n1 and mask[i, j]:
                    j += 1
                boxes.append((np.array([lo[0] + i * cell[0], lo[1] + j0 * cell[1]]),
                              np.array([lo[0] + (i + 1) * cell[0], lo[1] + j * cell[1]])))
            else:
                j += 1
    return RegionSet.from_boxes(boxes)


def check_coarea(spec: OperatorSpec, params: FractionalParams,
                 field: ScalarField, rel_tol=0.03) -> VerificationReport:
    """Seminorm of f against the level integral of superlevel perimeters.

    The left side evaluates the order-2s seminorm through the seminorm
    pipeline; the right side thresholds f between its distinct levels and
    sums perimeters of the resulting box unions, exactly in sigma. Both
    sides see the same cell-quantized field, so the reported gap measures
    pipeline consistency at the stated tolerance.
    """
    if field.backend not in ("grid", "indicator"):
        raise UnboundedSupport("coarea check needs grid or indicator fields")
    if np.any(field.values < 0) if field.backend == "grid" else False:
        raise BadExponents("coarea check expects a nonnegative field")
    lhs = besov_seminorm(spec, params, field)
    profile = level_profile(field)
    s, G = profile.sigmas, profile.G
    rhs = 0.0
    rows = []
    for i in range(len(s) - 1):
        if G[i] <= 0.0:
            continue
        sigma_mid = 0.5 * (s[i] + s[i + 1])
        region = threshold_region(field, sigma_mid)
        if region is None:
            continue
        per = perimeter(spec, params, region).value
        rhs += per * (s[i + 1] - s[i])
        rows.append({"sigma_lo": float(s[i]), "sigma_hi": float(s[i + 1]),
                     "measure": float(G[i]), "perimeter": per})
    gap = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    return VerificationReport(
        name="coarea", passed=bool(gap < rel_tol), lhs=lhs, rhs=rhs,
        ratio=gap, tolerance=rel_tol,
        details={"levels": rows, "s": params.s})


def check_blowup(spec: OperatorSpec, region: RegionSet, t_seq,
                 resolution=800, level=0.5, shortfall=0.01) -> VerificationReport:
    """Measure of {P_t 1_E > 1/2} along shrinking times against |E|.

    The superlevel measure is counted on a padded grid of rectangle
    probabilities. Passing requires the final (smallest-time) measure to
    reach |E| (1 - shortfall); the trajectory is reported, and monotonicity
    is deliberately not asserted.
    """
    t_seq = np.asarray(t_seq, float)
    vol = region.volume
    if vol == 0.0:
        return VerificationReport(name="interior_blowup", passed=True,
                                  lhs=0.0, rhs=0.0, details={"empty": True})
    from .operators import gramian
    lo, hi = region.bounding_box()
    measures = []
    for t in t_seq:
        kp = gramian(spec, t)
        sig = 2.0 * kp.gramian_t
        pad = 8.0 * math.sqrt(float(np.max(np.diag(sig))))
        # pull the padded box back through the drift so the level set fits
        Minv = np.linalg.inv(kp.propagator)
        corners = np.array([[lo[0] - pad, lo[1] - pad], [hi[0] + pad, lo[1] - pad],
                            [hi[0] + pad, hi[1] + pad], [lo[0] - pad, hi[1] + pad]])
        pulled = corners @ Minv.T
        glo = pulled.min(axis=0)
        ghi = pulled.max(axis=0)
        xs = np.linspace(glo[0], ghi[0], resolution)
        ys = np.linspace(glo[1], ghi[1], resolution)
        cell = (xs[1] - xs[0]) * (ys[1] - ys[0])
        XX, YY = np.meshgrid(xs, ys, indexing="ij")
        pts = np.column_stack([XX.ravel(), YY.ravel()])
        pvals = box_probability(spec, t, pts, region)
        measures.append(float(np.sum(pvals > level)) * cell)
    final = measures[-1]
    passed = final >= vol * (1.0 - shortfall)
    return VerificationReport(
        name="interior_blowup", passed=bool(passed), lhs=final, rhs=vol,
        ratio=final / vol, tolerance=shortfall,
        details={"t_seq": t_seq.tolist(), "superlevel_measures": measures,
                 "resolution": resolution})


@dataclass
class EmbeddingReport:
    """Boundedness record for an embedding ratio family.

    lhs/rhs are the extreme ratios over the family, ratio their spread
    (max over min); pass certifies the spread stays under the declared
    tolerance with every member finite.
    """

    lhs: float
    rhs: float
    ratio: float
    constant_name: str
    passed: bool
    rows: list = dfield(default_factory=list)
    details: dict = dfield(default_factory=dict)

    def to_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio,
                "constant_name": self.constant_name, "passed": self.passed,
                "rows": self.rows, "details": self.details}

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] embedding {self.constant_name}: spread "
                f"{self.ratio:.4g} over {len(self.rows)} members")


def _seminorm_of(spec, params, f):
    if f.backend == "indicator":
        return perimeter(spec, params, f.region).value
    return besov_seminorm(spec, params, f)


def check_embedding_uniform(spec: OperatorSpec, params: FractionalParams,
                            family, D, spread_tol=1.5, profile=None,
                            with_weak=True) -> EmbeddingReport:
    """Ratios ||f||_{D/(D-2s)} / seminorm over a family, uniform regime.

    Also reports the weak-norm variant against the L^1 fractional-power
    norm and the isoperimetric ratio for indicator members. Raises
    RegimeMismatch when the operator does not satisfy uniform volume growth
    with this D.
    """
    from .dimensions import classify_regime
    if profile is None:
        profile = classify_regime(spec, D_request=D)
    if profile.regime != "uniform_growth":
        raise RegimeMismatch(f"operator regime is {profile.regime}, not uniform")
    s = params.s
    q = D / (D - 2.0 * s)
    rows = []
    ratios = []
    for f in family:
        nrm = lq_norm(f, q)
        semi = _seminorm_of(spec, params, f)
        row = {"lq_norm": nrm, "seminorm": semi, "ratio": nrm / semi}
        if f.backend == "indicator":
            vol = f.region.volume
            row["isoperimetric_ratio"] = semi / vol ** ((D - 2.0 * s) / D)
            if with_weak:
                frac = _extrapolated_fracnorm(spec, params, f.region)
                row["weak_ratio"] = weak_lq_norm(f, q) / frac
        ratios.append(nrm / semi)
        rows.append(row)
    ratios = np.asarray(ratios)
    spread = float(ratios.max() / ratios.min())
    passed = bool(np.all(np.isfinite(ratios)) and spread < spread_tol)
    return EmbeddingReport(
        lhs=float(ratios.max()), rhs=float(ratios.min()), ratio=spread,
        constant_name=f"L^{q:.4g} against order-2s seminorm, D={D:g}",
        passed=passed, rows=rows,
        details={"D": D, "s": s, "q": q, "spread_tolerance": spread_tol,
                 "d_zero": profile.d_zero,
                 "d_infinity": None if np.isinf(profile.d_infinity)
                 else profile.d_infinity})


def _extrapolated_fracnorm(spec, params, region, taus=(4e-4, 2e-4, 1e-4)):
    from .fractional import _fit_power_limit
    vals = [mollified_fractional_norm(spec, params, region, tau) for tau in taus]
    return _fit_power_limit(np.asarray(taus), np.asarray(vals))


def check_embedding_mixed(spec: OperatorSpec, params: FractionalParams,
                          family, band_tol=2.0, profile=None) -> EmbeddingReport:
    """Sum-space and isoperimetric ratios in the mixed-growth regime.

    Uses q0, q_inf from the estimated dimension pair (d_zero > d_infinity
    required). The isoperimetric ratio uses min{|E|^(1/q0), |E|^(1/q_inf)},
    exercised across small and large sets; pass requires the ratios to stay
    within a band of width band_tol.
    """
    from .dimensions import classify_regime
    if profile is None:
        profile = classify_regime(spec)
    if profile.regime != "mixed_growth":
        raise RegimeMismatch(f"operator regime is {profile.regime}, not mixed")
    s = params.s
    d0, dinf = profile.d_zero, profile.d_infinity
    q0 = d0 / (d0 - 2.0 * s)
    q_inf = dinf / (dinf - 2.0 * s)
    rows = []
    ratios = []
    for f in family:
        semi = _seminorm_of(spec, params, f)
        split = sum_space_split(f, q0, q_inf)
        row = {"sum_space_bound": split.bound, "sigma_f": split.sigma_f,
               "seminorm": semi, "sum_space_ratio": split.bound / semi}
        if f.backend == "indicator":
            vol = f.region.volume
            iso = semi / min(vol ** (1.0 / q0), vol ** (1.0 / q_inf))
            row["isoperimetric_ratio"] = iso
            ratios.append(iso)
        else:
            ratios.append(split.bound / semi)
        rows.append(row)
    ratios = np.asarray(ratios)
    spread = float(ratios.max() / ratios.min())
    passed = bool(np.all(np.isfinite(ratios)) and spread < band_tol)
    return EmbeddingReport(
        lhs=float(ratios.max()), rhs=float(ratios.min()), ratio=spread,
        constant_name=f"sum space L^{q0:.4g}+L^{q_inf:.4g}, mixed growth",
        passed=passed, rows=rows,
        details={"q0": q0, "q_inf": q_inf, "d_zero": d0, "d_infinity": dinf,
                 "band_tolerance": band_tol,
                 "split_min_constant": split_min_constant(q0, q_inf)})


def strong_embedding_ratio(spec: OperatorSpec, params: FractionalParams,
                           field: ScalarField, D, grid_n=64):
    """||f||_{pD/(D-2sp)} / ||(-A)^s f||_p for p > 1 mixtures.

    Both norms by tensor quadrature over the padded support box; finiteness
    of the ratio is the testable claim.
    """
    s, p = params.s, float(params.p)
    if p * 2.0 * s >= D:
        raise BadExponents(f"need p < D/(2s); got p={p}, D={D}, s={s}")
    q = p * D / (D - 2.0 * s * p)
    from .fractional import _support_box
    lo, hi = _support_box(field)
    xg, wg = np.polynomial.legendre.leggauss(grid_n)
    xs = 0.5 * (hi[0] - lo[0]) * xg + 0.5 * (hi[0] + lo[0])
    wx = 0.5 * (hi[0] - lo[0]) * wg
    ys = 0.5 * (hi[1] - lo[1]) * xg + 0.5 * (hi[1] + lo[1])
    wy = 0.5 * (hi[1] - lo[1]) * wg
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([XX.ravel(), YY.ravel()])
    W = np.outer(wx, wy).ravel()
    fv = field(pts)
    num = float(np.abs(fv) ** q @ W) ** (1.0 / q)
    frac = fractional_power(spec, params, field, pts)
    den = float(np.abs(frac) ** p @ W) ** (1.0 / p)
    return num / den
