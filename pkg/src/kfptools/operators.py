"""Operator validation, matrix exponentials, covariance integrals, volumes.

The generator is ``A u = tr(Q Hess u) + <B X, grad u>`` with constant real
matrices Q (symmetric positive semidefinite) and B. All downstream kernels
are controlled by the covariance integral

    C(t) = integral_0^t exp(sB) Q exp(sB^T) ds,

its determinant, and the drift propagator exp(tB). C(t) is positive definite
for every t > 0 exactly when the rank of the controllability block matrix
[Q^(1/2), B Q^(1/2), ..., B^(N-1) Q^(1/2)] is N.

C(t) is evaluated by the Van Loan augmented block exponential: the upper
right block of exp(t [[-B, Q], [0, B^T]]) equals exp(-tB) C(t), so a single
matrix exponential yields the integral to machine precision. Determinants of
C(t) can still lose digits to entry rounding when C is badly conditioned, so
the log-determinant (and the positive-definiteness certificate) is recomputed
from an extended-precision series-plus-doubling evaluation of C whenever the
condition estimate warrants it.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import (DimensionMismatch, NegativeEigenvalueQ, NonSymmetricQ,
                     OverflowRegime, SingularGramian)
from .reports import VerificationReport

__all__ = [
    "OperatorSpec",
    "KernelParams",
    "unit_ball_volume",
    "validate_spec",
    "kalman_rank",
    "propagator",
    "gramian",
    "volume",
    "log_volume",
    "hormander_grid_check",
]

# rank test: singular values below smax * N * RANK_RTOL count as zero
RANK_RTOL = 1e-12
# symmetry / PSD tolerance relative to ||Q||
SYM_RTOL = 1e-10
# series-plus-doubling switches to scaled time once ||tB|| exceeds this
DOUBLING_THETA = 0.25
# refine log det in extended precision when cond(C) * eps > this
DET_REFINE_AT = 1e-12


@lru_cache(maxsize=32)
def unit_ball_volume(n: int) -> float:
    """Lebesgue measure of the unit ball in R^n."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Validated operator data (Q, B) with cached structure flags."""

    dim: int
    Q: np.ndarray
    B: np.ndarray
    trace_B: float
    kalman_rank: int
    hypoelliptic: bool

    @property
    def trace_nonneg(self) -> bool:
        return self.trace_B >= 0.0

    def __repr__(self):
        return (f"OperatorSpec(dim={self.dim}, tr B={self.trace_B:g}, "
                f"kalman_rank={self.kalman_rank}, hypoelliptic={self.hypoelliptic})")


@dataclass(frozen=True, eq=False)
class KernelParams:
    """Per-time kernel data bundle.

    gramian_t is C(t) = t K(t); chol is the lower Cholesky factor of
    2 C(t), the covariance of the transition Gaussian; log_det is
    log det C(t); volume is the pseudo-ball volume V(t).
    """

    t: float
    propagator: np.ndarray
    gramian_t: np.ndarray
    chol: np.ndarray
    log_det: float
    volume: float

    @property
    def dim(self) -> int:
        return self.gramian_t.shape[0]


def _as_square(M, name):
    A = np.asarray(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"{name} must be a square matrix, got shape {A.shape}")
    return A


def _sqrt_psd(Q, tol):
    w, V = np.linalg.eigh(Q)
    if w.min() < -tol:
        raise NegativeEigenvalueQ(
            f"diffusion matrix has eigenvalue {w.min():.3e} below -{tol:.1e}")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def _controllability_blocks(Q, B):
    n = Q.shape[0]
    tol = SYM_RTOL * max(np.abs(Q).max(), 1e-300)
    R = _sqrt_psd(Q, tol)
    blocks = [R]
    for _ in range(n - 1):
        blocks.append(B @ blocks[-1])
    return np.hstack(blocks)


def kalman_rank(spec_or_Q, B=None) -> int:
    """Numerical rank of [Q^(1/2), B Q^(1/2), ..., B^(N-1) Q^(1/2)].

    Accepts either an OperatorSpec or the pair (Q, B). Singular values below
    smax * N * 1e-12 count as zero.
    """
    if isinstance(spec_or_Q, OperatorSpec):
        Q, B = spec_or_Q.Q, spec_or_Q.B
    else:
        Q = np.asarray(spec_or_Q, float)
        B = np.asarray(B, float)
    K = _controllability_blocks(Q, B)
    sv = np.linalg.svd(K, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > sv[0] * Q.shape[0] * RANK_RTOL))


def validate_spec(Q, B) -> OperatorSpec:
    """Validate the pair (Q, B) and cache structure flags.

    Checks symmetry and positive semidefiniteness of Q, matching dimensions
    with N >= 2, and computes the controllability rank deciding
    hypoellipticity. tr B >= 0 is recorded, not required; the seminorm and
    embedding operations check it themselves.
    """
    Q = _as_square(Q, "Q")
    B = _as_square(B, "B")
    if Q.shape != B.shape:
        raise DimensionMismatch(f"Q has shape {Q.shape} but B has shape {B.shape}")
    n = Q.shape[0]
    if n < 2:
        raise DimensionMismatch("operator dimension must be at least 2")
    qscale = max(np.abs(Q).max(), 1e-300)
    if np.abs(Q - Q.T).max() > SYM_RTOL * qscale:
        raise NonSymmetricQ(
            f"diffusion matrix asymmetry {np.abs(Q - Q.T).max():.3e} exceeds tolerance")
    Q = 0.5 * (Q + Q.T)
    w = np.linalg.eigvalsh(Q)
    if w.min() < -SYM_RTOL * qscale:
        raise NegativeEigenvalueQ(
            f"diffusion matrix has eigenvalue {w.min():.3e} below tolerance")
    rank = kalman_rank(Q, B)
    Q.setflags(write=False)
    B.setflags(write=False)
    return OperatorSpec(dim=n, Q=Q, B=B, trace_B=float(np.trace(B)),
                        kalman_rank=rank, hypoelliptic=(rank == n))


def propagator(spec: OperatorSpec, t: float) -> np.ndarray:
    """exp(tB) by scaling and squaring; exact identity at t = 0."""
    if t == 0.0:
        return np.eye(spec.dim)
    E = scipy.linalg.expm(spec.B * t)
    if not np.all(np.isfinite(E)):
        raise OverflowRegime(f"exp(tB) overflows double precision at t={t:g}")
    return E


def _expm_taylor(A):
    """Matrix exponential for small-norm A, dtype preserved (used for longdouble)."""
    n = A.shape[0]
    E = np.eye(n, dtype=A.dtype)
    term = np.eye(n, dtype=A.dtype)
    for k in range(1, 40):
        term = term @ A / A.dtype.type(k)
        E = E + term
        if np.abs(term).max() <= np.finfo(A.dtype).eps * np.abs(E).max():
            break
    return E


def _covariance_series(Q, B, t, kmax=60):
    """C(t) by the absolutely convergent series, valid for small ||tB||.

    C(t) = sum_k t^(k+1)/(k+1) * sum_{i+j=k} B^i Q (B^T)^j / (i! j!).
    Every entry is a sum whose terms shrink by O(t ||B||), so entries come
    out relatively accurate even when C is badly conditioned.
    """
    dt = Q.dtype
    n = Q.shape[0]
    pw = [np.eye(n, dtype=dt)]
    for _ in range(kmax):
        pw.append(pw[-1] @ B)
    fact = [dt.type(1)]
    for k in range(1, kmax + 1):
        fact.append(fact[-1] * dt.type(k))
    C = np.zeros((n, n), dtype=dt)
    for k in range(kmax + 1):
        S = np.zeros((n, n), dtype=dt)
        for i in range(k + 1):
            S = S + pw[i] @ Q @ pw[k - i].T / (fact[i] * fact[k - i])
        term = (t ** (k + 1) / dt.type(k + 1)) * S
        C = C + term
        if np.abs(term).max() <= 0.25 * np.finfo(dt).eps * max(np.abs(C).max(), 1e-300):
            break
    return 0.5 * (C + C.T)


def _covariance_extended(Q, B, t):
    """C(t) in extended precision via series start and covariance doubling.

    Doubling uses C(2h) = C(h) + E C(h) E^T with E = exp(hB); both summands
    are positive semidefinite, so no cancellation occurs on the diagonal.
    """
    dt = np.longdouble
    Qe = np.asarray(Q, dtype=dt)
    Be = np.asarray(B, dtype=dt)
    nb = float(np.abs(B).max()) * Q.shape[0]
    m = 0
    if nb * t > DOUBLING_THETA:
        m = int(np.ceil(np.log2(nb * t / DOUBLING_THETA)))
    h = dt(t) / dt(2.0) ** m
    C = _covariance_series(Qe, Be, h)
    E = _expm_taylor(Be * h)
    for _ in range(m):
        C = C + E @ C @ E.T
        C = 0.5 * (C + C.T)
        E = E @ E
        if not np.all(np.isfinite(C.astype(float))):
            raise OverflowRegime(f"covariance integral overflows at t={t:g}")
    return C


def _cholesky_any(A):
    """Lower Cholesky factor in the dtype of A; raises SingularGramian."""
    n = A.shape[0]
    L = np.zeros_like(A)
    scale = np.abs(np.diag(A)).max()
    for i in range(n):
        for j in range(i + 1):
            s = A[i, j] - np.dot(L[i, :j], L[j, :j])
            if i == j:
                if s <= 0.0 or not np.isfinite(float(s)):
                    raise SingularGramian(
                        f"covariance integral pivot {float(s):.3e} not positive "
                        f"(scale {float(scale):.3e})")
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    return L


def _van_loan(Q, B, t):
    n = Q.shape[0]
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -B
    M[:n, n:] = Q
    M[n:, n:] = B.T
    F = scipy.linalg.expm(M * t)
    if not np.all(np.isfinite(F)):
        raise OverflowRegime(f"augmented block exponential overflows at t={t:g}")
    C = F[n:, n:].T @ F[:n, n:]
    return 0.5 * (C + C.T)


def gramian(spec: OperatorSpec, t: float) -> KernelParams:
    """Covariance bundle at time t: C(t), its factorization, and V(t)."""
    if t <= 0.0:
        raise ValueError(f"gramian requires t > 0, got {t:g}")
    C = _van_loan(spec.Q, spec.B, t)
    L_ext = _cholesky_any(_covariance_extended(spec.Q, spec.B, t))
    log_det = float(2.0 * np.sum(np.log(np.diag(L_ext))))
    # cheap condition estimate from the extended factor's diagonal spread
    d = np.diag(L_ext).astype(float)
    cond_est = (d.max() / d.min()) ** 2
    if cond_est * np.finfo(float).eps > DET_REFINE_AT:
        # double-precision C would round the small eigendirections away
        C = L_ext.astype(float) @ L_ext.astype(float).T
    try:
        chol = np.linalg.cholesky(2.0 * C)
    except np.linalg.LinAlgError:
        chol = np.sqrt(2.0) * L_ext.astype(float)
    n = spec.dim
    log_vol = math.log(unit_ball_volume(n)) + 0.5 * log_det
    vol = math.exp(log_vol) if abs(log_vol) < 700 else float("inf") if log_vol > 0 else 0.0
    return KernelParams(t=float(t), propagator=propagator(spec, t), gramian_t=C,
                        chol=chol, log_det=log_det, volume=vol)


def log_volume(spec: OperatorSpec, t: float) -> float:
    """log V(t); stays finite where V itself under- or overflows."""
    L = _cholesky_any(_covariance_extended(spec.Q, spec.B, t))
    return math.log(unit_ball_volume(spec.dim)) + float(np.sum(np.log(np.diag(L))))


def volume(spec: OperatorSpec, t: float) -> float:
    """Pseudo-ball volume V(t) = omega_N det(C(t))^(1/2)."""
    lv = log_volume(spec, t)
    if abs(lv) > 700:
        raise OverflowRegime(f"V(t) {'overflows' if lv > 0 else 'underflows'} at t={t:g}")
    return math.exp(lv)


def hormander_grid_check(spec: OperatorSpec, t_grid) -> VerificationReport:
    """Positivity of K(t) = C(t)/t across a time grid.

    Passes when the smallest eigenvalue of K(t) is positive at every grid
    point and this is consistent with the controllability rank. Eigenvalues
    are taken from singular values of the Cholesky factor, which keeps tiny
    but genuinely positive spectra from rounding below zero.
    """
    t_grid = np.asarray(t_grid, float)
    min_eigs = np.empty(t_grid.shape)
    ok = np.zeros(t_grid.shape, dtype=bool)
    for i, t in enumerate(t_grid):
        try:
            L = _cholesky_any(_covariance_extended(spec.Q, spec.B, t))
            smin = np.linalg.svd(L.astype(float), compute_uv=False)[-1]
            min_eigs[i] = smin * smin / t
            ok[i] = min_eigs[i] > 0.0
        except (SingularGramian, OverflowRegime):
            w = np.linalg.eigvalsh(_van_loan(spec.Q, spec.B, t) / t)
            min_eigs[i] = w[0]
            ok[i] = False
    all_pos = bool(ok.all())
    consistent = all_pos == spec.hypoelliptic
    return VerificationReport(
        name="hormander_positivity",
        passed=all_pos and consistent,
        ratio=float(min_eigs.min()),
        details={
            "t_grid": t_grid.tolist(),
            "min_eigenvalues": min_eigs.tolist(),
            "kalman_rank": spec.kalman_rank,
            "consistent_with_rank": consistent,
        },
    )
