"""Intrinsic dimension estimation from pseudo-ball volume growth.

V(t) behaves like t^(D0/2) as t -> 0; the exponent D0 >= N is the intrinsic
dimension at zero. At infinity the relevant number is

    D_inf = sup { alpha > 0 : integral_1^inf t^(alpha/2 - 1) / V(t) dt < inf },

between 2 and infinity whenever tr B >= 0. Both are estimated by slopes of
log V against log t over configurable windows; no finite computation decides
the convergence of the defining integral, so the integral test here is a
documented surrogate (tail-slope extrapolation at a large truncation time)
used to cross-check the slope estimate, never to overrule it silently.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDRequest, OverflowRegime
from .operators import OperatorSpec, log_volume

__all__ = ["DimensionProfile", "dim_zero", "dim_infinity", "classify_regime",
           "volume_lower_constant", "volume_table"]

# local slope above this, and still increasing, classifies V as
# superpolynomial (D_inf = infinity); flagged for review in the profile
SLOPE_INF_THRESHOLD = 100.0
# primary-vs-integral-test disagreement above this marks the profile inconclusive
ESTIMATOR_AGREE_TOL = 0.2


@dataclass
class DimensionProfile:
    """Estimated growth exponents and the matching theorem regime."""

    d_zero: float
    d_infinity: float
    regime: str                      # uniform_growth | mixed_growth | unsupported
    D: float | None = None           # exponent used in the uniform regime
    gamma: float = 0.0               # volume lower-bound constant
    inconclusive: bool = False
    fit_diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "d_zero": self.d_zero,
            "d_infinity": (None if np.isinf(self.d_infinity) else self.d_infinity),
            "d_infinity_is_infinite": bool(np.isinf(self.d_infinity)),
            "regime": self.regime,
            "D": self.D,
            "gamma": self.gamma,
            "inconclusive": self.inconclusive,
            "fit_diagnostics": self.fit_diagnostics,
        }


def _log_volume_grid(spec, ts):
    """log V over a grid; non-finite entries mark overflow times."""
    out = np.full(len(ts), np.nan)
    for i, t in enumerate(ts):
        try:
            out[i] = log_volume(spec, t)
        except OverflowRegime:
            out[i] = np.inf
    return out


def _fit_slope(logt, logv):
    A = np.vstack([logt, np.ones_like(logt)]).T
    coef, res, *_ = np.linalg.lstsq(A, logv, rcond=None)
    resid = logv - A @ coef
    return coef[0], float(np.sqrt(np.mean(resid ** 2)))


def dim_zero(spec: OperatorSpec, t_min=1e-8, t_max=1e-4, n=40):
    """Intrinsic dimension at zero: twice the small-time log-log slope."""
    ts = np.logspace(np.log10(t_min), np.log10(t_max), n)
    lv = _log_volume_grid(spec, ts)
    if not np.all(np.isfinite(lv)):
        raise OverflowRegime("V(t) not representable on the small-time grid")
    slope, rms = _fit_slope(np.log(ts), lv)
    return 2.0 * slope


def _dinf_slope_data(spec, t_min, t_max, n):
    ts = np.logspace(np.log10(t_min), np.log10(t_max), n)
    lv = _log_volume_grid(spec, ts)
    finite = np.isfinite(lv)
    # exponential growth can overflow the default window; walk down until
    # enough of the grid is representable
    while finite.sum() < 10 and t_min > 1.0:
        t_min = max(t_min / 100.0, 1.0)
        ts = np.logspace(np.log10(t_min), np.log10(t_max), 3 * n)
        lv = _log_volume_grid(spec, ts)
        finite = np.isfinite(lv)
    return ts[finite], lv[finite], bool((~finite).any())


def dim_infinity(spec: OperatorSpec, t_min=1e3, t_max=1e7, n=40,
                 T_integral=1e8):
    """Intrinsic dimension at infinity, or numpy.inf for superpolynomial V.

    Primary estimator: twice the large-time log-log slope. Declared infinite
    when local slopes exceed SLOPE_INF_THRESHOLD and are still increasing
    (or V overflows, which only exponential growth does on this window).
    Cross-checked by a bisection on the truncated integral criterion; see
    classify_regime for how disagreement is surfaced.
    """
    ts, lv, overflowed = _dinf_slope_data(spec, t_min, t_max, n)
    logt = np.log(ts)
    local = np.diff(lv) / np.diff(logt)
    increasing = local.size >= 2 and local[-1] > local[0] + 1e-6
    if (local.max(initial=-np.inf) > SLOPE_INF_THRESHOLD and increasing) or overflowed:
        return np.inf
    slope, _ = _fit_slope(logt, lv)
    return 2.0 * slope


def integral_test_dim_infinity(spec: OperatorSpec, T=1e8, n=60, slack=0.05):
    """Bisection over alpha of the truncated-integral convergence surrogate.

    The integrand t^(alpha/2 - 1)/V(t) on [1, T] converges at infinity iff
    its log-log slope at the truncation end stays below -1; the threshold
    alpha is located by bisection to 1e-3.
    """
    ts = np.logspace(0.0, np.log10(T), n)
    lv = _log_volume_grid(spec, ts)
    finite = np.isfinite(lv)
    if finite.sum() < 5:
        return np.inf
    ts, lv = ts[finite], lv[finite]
    logt = np.log(ts)
    tail_slope_V = np.polyfit(logt[-8:], lv[-8:], 1)[0]
    if not finite.all():
        return np.inf

    def converges(alpha):
        # integrand slope in log t at the tail: alpha/2 - tail slope of log V
        return alpha / 2.0 - tail_slope_V < -slack

    lo_a, hi_a = 1e-3, 400.0
    if converges(hi_a):
        return np.inf
    if not converges(lo_a):
        return 0.0
    while hi_a - lo_a > 1e-3:
        mid = 0.5 * (lo_a + hi_a)
        if converges(mid):
            lo_a = mid
        else:
            hi_a = mid
    return 0.5 * (lo_a + hi_a)


def volume_lower_constant(spec: OperatorSpec, exponents, t_grid):
    """inf over the grid of V(t) / min(t^(a/2), t^(b/2)) with endpoint guards.

    Returns 0 when the ratio trends to zero at either end of the grid, which
    signals failure of the corresponding volume growth hypothesis.
    """
    a, b = exponents
    ts = np.asarray(t_grid, float)
    logt = np.log(ts)
    lv = _log_volume_grid(spec, ts)
    lo_exp = max(a, b) / 2.0
    hi_exp = min(a, b) / 2.0
    log_min = np.where(logt < 0.0, lo_exp * logt, hi_exp * logt)
    log_ratio = lv - log_min
    finite = np.isfinite(log_ratio)
    if finite.sum() < 8:
        return 0.0
    lr = log_ratio[finite]
    lt = logt[finite]
    k = min(6, len(lr) // 3)
    slope_small = np.polyfit(lt[:k], lr[:k], 1)[0]
    slope_large = np.polyfit(lt[-k:], lr[-k:], 1)[0]
    if slope_small > 0.02 or slope_large < -0.02:
        return 0.0
    return float(np.exp(lr.min()))


def classify_regime(spec: OperatorSpec, D_request=None,
                    gamma_grid=None) -> DimensionProfile:
    """Match the operator to a volume-growth regime.

    d_zero <= d_infinity gives the uniform regime with a free exponent
    D in [d_zero, d_infinity] (default d_zero); d_zero > d_infinity gives
    the mixed regime. The profile is marked unsupported when no positive
    lower-bound constant exists on the test grid.
    """
    d0 = dim_zero(spec)
    dinf = dim_infinity(spec)
    dint = integral_test_dim_infinity(spec)
    inconclusive = (np.isfinite(dinf) != np.isfinite(dint)) or \
        (np.isfinite(dinf) and abs(dinf - dint) > ESTIMATOR_AGREE_TOL)
    if gamma_grid is None:
        gamma_grid = np.logspace(-6, 6, 121)
    diag = {"integral_test_d_infinity": None if np.isinf(dint) else float(dint)}
    # estimator noise tolerance when comparing the two dimensions
    same_tol = 0.02 * max(d0, 1.0)
    if dinf >= d0 - same_tol:
        D = d0 if D_request is None else float(D_request)
        if D_request is not None:
            hi = dinf if np.isfinite(dinf) else np.inf
            if D < d0 - same_tol or D > hi + same_tol:
                raise InvalidDRequest(
                    f"D={D_request:g} outside [{d0:.3g}, {hi:.3g}]")
        gamma = volume_lower_constant(spec, (D, D), gamma_grid)
        regime = "uniform_growth" if gamma > 0 else "unsupported"
        return DimensionProfile(d_zero=d0, d_infinity=dinf, regime=regime,
                                D=D, gamma=gamma, inconclusive=inconclusive,
                                fit_diagnostics=diag)
    if D_request is not None:
        raise InvalidDRequest(
            f"D={D_request:g} requested but d_zero {d0:.3g} > d_infinity {dinf:.3g}")
    gamma = volume_lower_constant(spec, (d0, dinf), gamma_grid)
    regime = "mixed_growth" if gamma > 0 else "unsupported"
    return DimensionProfile(d_zero=d0, d_infinity=dinf, regime=regime,
                            D=None, gamma=gamma, inconclusive=inconclusive,
                            fit_diagnostics=diag)


def volume_table(spec: OperatorSpec, t_grid):
    """Rows (t, V, local slope of log V) for CSV export; inf marks overflow."""
    ts = np.asarray(t_grid, float)
    lv = _log_volume_grid(spec, ts)
    logt = np.log(ts)
    slope = np.gradient(lv, logt)
    V = np.exp(np.clip(lv, -745.0, 709.0))
    V[~np.isfinite(lv)] = np.inf
    return list(zip(ts.tolist(), V.tolist(), slope.tolist()))
