"""Exact planar geometry kernels for Gaussian set functionals.

The central primitive is the batch intersection area between a fixed convex
polygon translated by many shift vectors and a fixed axis-aligned box
(Sutherland-Hodgman clipping plus the shoelace formula). On top of it sits
the shifted-overlap expectation

    E_{U ~ N(0, Sigma)} |(P + U) cap R|,

evaluated in whitened polar coordinates: periodic trapezoid in the angle and
panelwise Gauss-Legendre against the radial weight r exp(-r^2/2). The
overlap function is Lipschitz with kinks along rays through the origin, so
polar quadrature converges fast where a tensor rule stalls.

A numba kernel provides the throughput (roughly 150 ns per clip); a pure
numpy fallback keeps the package importable without a working JIT.
"""

import numpy as np

from .errors import DimensionMismatch

__all__ = ["box_corners", "quad_box_overlap_areas", "PolarRule",
           "shifted_overlap_expectation"]

try:
    from numba import njit
    _HAS_NUMBA = True
except ImportError:                                   # pragma: no cover
    _HAS_NUMBA = False


def box_corners(lo, hi):
    """Counterclockwise corners of a 2-d box."""
    return np.array([[lo[0], lo[1]], [hi[0], lo[1]],
                     [hi[0], hi[1]], [lo[0], hi[1]]], float)


if _HAS_NUMBA:

    @njit(cache=True)
    def _clip_areas_kernel(base, shifts, lo0, lo1, hi0, hi1, out):
        nv = base.shape[0]
        nb = shifts.shape[0]
        maxv = nv + 8
        bx = np.empty(maxv)
        by = np.empty(maxv)
        cx = np.empty(maxv)
        cy = np.empty(maxv)
        for b in range(nb):
            sx = shifts[b, 0]
            sy = shifts[b, 1]
            pminx = 1e300
            pmaxx = -1e300
            pminy = 1e300
            pmaxy = -1e300
            for i in range(nv):
                x = base[i, 0] + sx
                y = base[i, 1] + sy
                bx[i] = x
                by[i] = y
                if x < pminx:
                    pminx = x
                if x > pmaxx:
                    pmaxx = x
                if y < pminy:
                    pminy = y
                if y > pmaxy:
                    pmaxy = y
            if pmaxx <= lo0 or pminx >= hi0 or pmaxy <= lo1 or pminy >= hi1:
                out[b] = 0.0
                continue
            n = nv
            if not (pminx >= lo0 and pmaxx <= hi0 and pminy >= lo1 and pmaxy <= hi1):
                for hp in range(4):
                    if hp == 0:
                        axis = 0
                        sgn = -1.0
                        c = lo0
                    elif hp == 1:
                        axis = 0
                        sgn = 1.0
                        c = hi0
                    elif hp == 2:
                        axis = 1
                        sgn = -1.0
                        c = lo1
                    else:
                        axis = 1
                        sgn = 1.0
                        c = hi1
                    m = 0
                    for i in range(n):
                        j = i + 1
                        if j == n:
                            j = 0
                        if axis == 0:
                            di = sgn * (bx[i] - c)
                            dj = sgn * (bx[j] - c)
                        else:
                            di = sgn * (by[i] - c)
                            dj = sgn * (by[j] - c)
                        if di <= 0.0:
                            cx[m] = bx[i]
                            cy[m] = by[i]
                            m += 1
                        if (di <= 0.0) != (dj <= 0.0):
                            tpar = di / (di - dj)
                            cx[m] = bx[i] + tpar * (bx[j] - bx[i])
                            cy[m] = by[i] + tpar * (by[j] - by[i])
                            m += 1
                    for i2 in range(m):
                        bx[i2] = cx[i2]
                        by[i2] = cy[i2]
                    n = m
                    if n == 0:
                        break
            if n < 3:
                out[b] = 0.0
                continue
            s = 0.0
            for i in range(n):
                j = i + 1
                if j == n:
                    j = 0
                s += bx[i] * by[j] - bx[j] * by[i]
            out[b] = 0.5 * abs(s)


def _clip_halfplane_np(P, sign, axis, c):
    B, K, _ = P.shape
    d = sign * (P[:, :, axis] - c)
    inside = d <= 0.0
    Pn = np.roll(P, -1, axis=1)
    dn = np.roll(d, -1, axis=1)
    cross = inside ^ np.roll(inside, -1, axis=1)
    denom = np.where(cross, d - dn, 1.0)
    tpar = np.clip(d / denom, 0.0, 1.0)
    X = P + tpar[..., None] * (Pn - P)
    cand = np.empty((B, 2 * K, 2))
    cand[:, 0::2] = P
    cand[:, 1::2] = X
    valid = np.empty((B, 2 * K), bool)
    valid[:, 0::2] = inside
    valid[:, 1::2] = cross
    order = np.argsort(~valid, axis=1, kind="stable")
    cand = np.take_along_axis(cand, order[..., None], axis=1)[:, :K + 1]
    valid = np.take_along_axis(valid, order, axis=1)[:, :K + 1]
    return np.where(valid[..., None], cand, cand[:, :1])


def _clip_areas_numpy(base, shifts, lo0, lo1, hi0, hi1):
    P = base[None, :, :] + shifts[:, None, :]
    pmin = P.min(axis=1)
    pmax = P.max(axis=1)
    outside = ((pmax[:, 0] <= lo0) | (pmin[:, 0] >= hi0) |
               (pmax[:, 1] <= lo1) | (pmin[:, 1] >= hi1))
    inside = ((pmin[:, 0] >= lo0) & (pmax[:, 0] <= hi0) &
              (pmin[:, 1] >= lo1) & (pmax[:, 1] <= hi1))
    out = np.zeros(P.shape[0])

    def shoelace(Q):
        x, y = Q[..., 0], Q[..., 1]
        return 0.5 * np.abs(np.sum(x * np.roll(y, -1, 1) - np.roll(x, -1, 1) * y, axis=1))

    if np.any(inside):
        out[inside] = shoelace(P[inside])
    work = ~(outside | inside)
    if np.any(work):
        Q = P[work]
        Q = _clip_halfplane_np(Q, -1.0, 0, lo0)
        Q = _clip_halfplane_np(Q, +1.0, 0, hi0)
        Q = _clip_halfplane_np(Q, -1.0, 1, lo1)
        Q = _clip_halfplane_np(Q, +1.0, 1, hi1)
        out[work] = shoelace(Q)
    return out


def quad_box_overlap_areas(base, shifts, lo, hi):
    """Areas |(base + shifts[b]) cap box(lo, hi)| for a convex base polygon."""
    base = np.ascontiguousarray(base, np.float64)
    shifts = np.ascontiguousarray(shifts, np.float64)
    if base.shape[1] != 2 or shifts.shape[1] != 2:
        raise DimensionMismatch("clip kernels are 2-d only")
    if _HAS_NUMBA:
        out = np.empty(shifts.shape[0])
        _clip_areas_kernel(base, shifts, float(lo[0]), float(lo[1]),
                           float(hi[0]), float(hi[1]), out)
        return out
    return _clip_areas_numpy(base, shifts, float(lo[0]), float(lo[1]),
                             float(hi[0]), float(hi[1]))


_R_BREAKS = (0.0, 0.25, 0.55, 0.9, 1.3, 1.8, 2.4, 3.1, 4.0, 5.2, 6.8, 9.0, 12.0)


class PolarRule:
    """Quadrature nodes for E_{z ~ N(0, I_2)} g(z) in polar form.

    n_theta equispaced angles (periodic trapezoid) times panelwise
    Gauss-Legendre nodes in the radius against the weight r exp(-r^2/2).
    Radial panels reach |z| = 12, beyond which the normal mass is ~1e-32.
    """

    def __init__(self, n_theta=120, nodes_per_panel=8, breaks=_R_BREAKS):
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        self.dirs = np.column_stack([np.cos(theta), np.sin(theta)])
        xg, wg = np.polynomial.legendre.leggauss(nodes_per_panel)
        rs, ws = [], []
        for a, b in zip(breaks[:-1], breaks[1:]):
            r = 0.5 * (b - a) * xg + 0.5 * (a + b)
            rs.append(r)
            ws.append(0.5 * (b - a) * wg * r * np.exp(-r * r / 2.0))
        self.r = np.concatenate(rs)
        self.wr = np.concatenate(ws) / n_theta
        self.n_theta = n_theta

    def shifts(self, L):
        """All shift nodes U = r * (L @ direction), shape (n_theta*n_r, 2)."""
        d = self.dirs @ L.T
        return (d[:, None, :] * self.r[None, :, None]).reshape(-1, 2)

    @property
    def weights(self):
        return np.tile(self.wr, self.n_theta)


def shifted_overlap_expectation(base, lo, hi, L, rule: PolarRule):
    """E_{U ~ N(0, L L^T)} |(base + U) cap box(lo, hi)| for convex base."""
    U = rule.shifts(L)
    areas = quad_box_overlap_areas(base, U, lo, hi)
    return float(areas @ rule.weights)
