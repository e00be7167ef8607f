"""Scalar test fields and measurable test sets.

A ScalarField is a function on R^N in one of several backends:

* ``gaussian_mixture``: sum of amplitude-normalized Gaussian bumps
  ``w * exp(-(x - mu)^T S^{-1} (x - mu) / 2)`` (signed weights allowed).
  Closed under the semigroup action, which gives analytic reference paths.
* ``grid``: piecewise constant on the cells of a regular grid over a box,
  zero outside.
* ``indicator``: the indicator of a RegionSet (exact geometry available).
* ``callable``: an opaque vectorized evaluator.
* ``constant``: a constant on all of R^N.

A RegionSet is a finite union of pairwise disjoint axis-aligned boxes or a
Euclidean ball; its volume is closed form.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import UnboundedSupport, UnsupportedBackend, ValidationError
from .operators import unit_ball_volume

__all__ = ["GaussianTerm", "ScalarField", "RegionSet",
           "tent_field", "staircase_field"]


@dataclass(frozen=True)
class GaussianTerm:
    weight: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, float))
        object.__setattr__(self, "cov", np.asarray(self.cov, float))
        w = np.linalg.eigvalsh(self.cov)
        if w.min() <= 0:
            raise ValidationError("gaussian term covariance must be positive definite")
        if not np.isfinite(self.weight):
            raise ValidationError("gaussian term weight must be finite")

    def __call__(self, X):
        X = np.asarray(X, float)
        v = X - self.mean
        q = np.einsum("...i,...i->...", v, np.linalg.solve(self.cov, v[..., None])[..., 0])
        return self.weight * np.exp(-0.5 * q)

    def integral(self):
        n = len(self.mean)
        return self.weight * (2 * np.pi) ** (n / 2.0) * np.sqrt(np.linalg.det(self.cov))


class RegionSet:
    """Finite-measure test set: disjoint box union or a ball."""

    def __init__(self, kind, boxes=None, center=None, radius=None):
        self.kind = kind
        if kind == "boxes":
            lo = np.asarray([b[0] for b in boxes], float)
            hi = np.asarray([b[1] for b in boxes], float)
            if np.any(hi <= lo):
                raise ValidationError("box upper corners must exceed lower corners")
            self.lo, self.hi = lo, hi
            self._check_disjoint()
        elif kind == "ball":
            self.center = np.asarray(center, float)
            self.radius = float(radius)
            if self.radius <= 0:
                raise ValidationError("ball radius must be positive")
        else:
            raise ValidationError(f"unknown region kind {kind!r}")

    @classmethod
    def box(cls, lo, hi):
        return cls("boxes", boxes=[(lo, hi)])

    @classmethod
    def from_boxes(cls, boxes):
        return cls("boxes", boxes=boxes)

    @classmethod
    def ball(cls, center, radius):
        return cls("ball", center=center, radius=radius)

    def _check_disjoint(self):
        k = len(self.lo)
        for i in range(k):
            for j in range(i + 1, k):
                overlap = np.minimum(self.hi[i], self.hi[j]) - np.maximum(self.lo[i], self.lo[j])
                if np.all(overlap > 1e-12):
                    raise ValidationError(f"boxes {i} and {j} overlap with positive measure")

    @property
    def dim(self):
        return self.lo.shape[1] if self.kind == "boxes" else len(self.center)

    @property
    def volume(self):
        if self.kind == "boxes":
            return float(np.prod(self.hi - self.lo, axis=1).sum())
        return unit_ball_volume(self.dim) * self.radius ** self.dim

    def bounding_box(self):
        if self.kind == "boxes":
            return self.lo.min(axis=0), self.hi.max(axis=0)
        return self.center - self.radius, self.center + self.radius

    def contains(self, X):
        X = np.asarray(X, float)
        if self.kind == "boxes":
            inside = np.zeros(X.shape[:-1], dtype=bool)
            for lo, hi in zip(self.lo, self.hi):
                inside |= np.all((X > lo) & (X < hi), axis=-1)
            return inside
        return np.sum((X - self.center) ** 2, axis=-1) < self.radius ** 2

    def scaled(self, lam):
        """Dilation {lam x : x in E} about the origin."""
        if self.kind == "boxes":
            return RegionSet.from_boxes([(lo * lam, hi * lam)
                                         for lo, hi in zip(self.lo, self.hi)])
        return RegionSet.ball(self.center * lam, self.radius * lam)

    def translated(self, v):
        v = np.asarray(v, float)
        if self.kind == "boxes":
            return RegionSet.from_boxes([(lo + v, hi + v)
                                         for lo, hi in zip(self.lo, self.hi)])
        return RegionSet.ball(self.center + v, self.radius)

    def __repr__(self):
        if self.kind == "boxes":
            return f"RegionSet(boxes x{len(self.lo)}, |E|={self.volume:g})"
        return f"RegionSet(ball r={self.radius:g}, |E|={self.volume:g})"


class ScalarField:
    """Function on R^N; see module docstring for the backends."""

    def __init__(self, backend, *, terms=None, grid_lo=None, grid_hi=None,
                 values=None, func=None, region=None, value=None,
                 support_hint=None):
        self.backend = backend
        self.terms = terms
        self.func = func
        self.region = region
        self.value = value
        self._support = support_hint
        if backend == "grid":
            self.grid_lo = np.asarray(grid_lo, float)
            self.grid_hi = np.asarray(grid_hi, float)
            self.values = np.asarray(values, float)
            if self.values.ndim != len(self.grid_lo):
                raise ValidationError("grid values must have one axis per dimension")
            if min(self.values.shape) < 2:
                raise ValidationError("grid resolution must be at least 2 per axis")
            if not np.all(np.isfinite(self.values)):
                raise ValidationError("grid values must be finite")
            self.cell = (self.grid_hi - self.grid_lo) / np.array(self.values.shape)
            self._support = (self.grid_lo, self.grid_hi)

    # constructors ---------------------------------------------------------
    @classmethod
    def gaussian_mixture(cls, terms, support_hint=None):
        terms = [t if isinstance(t, GaussianTerm) else GaussianTerm(*t) for t in terms]
        return cls("gaussian_mixture", terms=terms, support_hint=support_hint)

    @classmethod
    def from_grid(cls, lo, hi, values):
        return cls("grid", grid_lo=lo, grid_hi=hi, values=values)

    @classmethod
    def from_callable(cls, func, support_hint=None):
        return cls("callable", func=func, support_hint=support_hint)

    @classmethod
    def indicator(cls, region: RegionSet):
        return cls("indicator", region=region, support_hint=region.bounding_box())

    @classmethod
    def constant(cls, value: float):
        return cls("constant", value=float(value))

    # evaluation -----------------------------------------------------------
    def __call__(self, X):
        X = np.asarray(X, float)
        if self.backend == "gaussian_mixture":
            return sum(t(X) for t in self.terms)
        if self.backend == "grid":
            return self._grid_eval(X)
        if self.backend == "indicator":
            return self.region.contains(X).astype(float)
        if self.backend == "constant":
            return np.full(X.shape[:-1], self.value)
        return self.func(X)

    def _grid_eval(self, X):
        idx = np.floor((X - self.grid_lo) / self.cell).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < np.array(self.values.shape)), axis=-1)
        idx = np.clip(idx, 0, np.array(self.values.shape) - 1)
        flat = np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), self.values.shape)
        out = self.values.ravel()[flat]
        return np.where(inside, out, 0.0)

    # properties -----------------------------------------------------------
    @property
    def dim(self):
        if self.backend == "gaussian_mixture":
            return len(self.terms[0].mean)
        if self.backend == "grid":
            return len(self.grid_lo)
        if self.backend == "indicator":
            return self.region.dim
        sup = self._support
        if sup is not None:
            return len(sup[0])
        raise ValidationError("field dimension undetermined; give a support hint")

    @property
    def support_hint(self):
        return self._support

    def require_support(self):
        if self._support is None:
            raise UnboundedSupport("operation requires a bounded support hint")
        return np.asarray(self._support[0], float), np.asarray(self._support[1], float)

    @property
    def is_constant(self):
        return self.backend == "constant"

    def cell_volume(self):
        return float(np.prod(self.cell))

    def lp_norm(self, p):
        """Exact for grid and indicator backends; closed form where possible."""
        if self.backend == "grid":
            return float((np.sum(np.abs(self.values) ** p) * self.cell_volume()) ** (1.0 / p))
        if self.backend == "indicator":
            return self.region.volume ** (1.0 / p)
        raise UnsupportedBackend(f"lp_norm not available for backend {self.backend!r}")

    def l1_norm(self):
        return self.lp_norm(1)


def tent_field(lo, hi, n):
    """Pyramid of height 1 over a box, sampled on an n-per-axis grid.

    Superlevel sets are concentric scaled copies of the box.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    axes = [(np.arange(n) + 0.5) / n for _ in lo]
    mesh = np.meshgrid(*axes, indexing="ij")
    dist = np.max([np.abs(2.0 * m - 1.0) for m in mesh], axis=0)
    return ScalarField.from_grid(lo, hi, 1.0 - dist)


def staircase_field(boxes, heights, lo, hi, n):
    """Sum of indicator steps over nested boxes, sampled on a grid.

    Cell edges must align with the box faces for the sampling to be exact;
    callers pick n accordingly.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    cell = (hi - lo) / n
    axes = [lo[d] + (np.arange(n) + 0.5) * cell[d] for d in range(len(lo))]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = np.zeros(mesh.shape[:-1])
    for (blo, bhi), h in zip(boxes, heights):
        inside = np.all((mesh > np.asarray(blo)) & (mesh < np.asarray(bhi)), axis=-1)
        vals = np.where(inside, h, vals)
    return ScalarField.from_grid(lo, hi, vals)
