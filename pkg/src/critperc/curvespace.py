"""Distances between curves, collections of curves and closed sets.

Curves are polylines.  The distance between two curves is the discrete
Fréchet distance: the smallest leash length over all monotone couplings of
the vertex sequences.  It converges to the continuous value as the samples
are refined, with error at most the longest chord.  The ground metric is
either Euclidean or the spherical metric of the compactified plane, where
the point at infinity is written ``complex(inf, inf)`` (any infinite value).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "Curve", "CurveSet", "EmptySet", "uniform_dist", "sphere_dist", "sphere_dist_matrix",
    "hausdorff_curvesets", "hausdorff_sets", "ground_matrix",
]


class EmptySet(ValueError):
    pass


@dataclass(frozen=True)
class Curve:
    vertices: np.ndarray
    closed: bool = False

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.vertices, dtype=complex))
        if v.size == 0:
            raise EmptySet("a curve needs at least one vertex")
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)

    def refine(self, k: int) -> "Curve":
        """Insert ``k - 1`` equally spaced points on every segment."""
        v = self.vertices
        if self.closed:
            v = np.append(v, v[0])
        if len(v) == 1:
            return self
        t = np.arange(k) / k
        out = (v[:-1, None] + (v[1:] - v[:-1])[:, None] * t).ravel()
        if not self.closed:
            out = np.append(out, v[-1])
        return Curve(out, self.closed)

    def max_chord(self) -> float:
        v = self.vertices
        if self.closed:
            v = np.append(v, v[0])
        return float(np.abs(np.diff(v)).max()) if len(v) > 1 else 0.0


@dataclass(frozen=True)
class CurveSet:
    curves: tuple

    def __post_init__(self):
        object.__setattr__(self, "curves", tuple(self.curves))

    def __len__(self) -> int:
        return len(self.curves)


# --------------------------------------------------------------------------
# ground metrics


def sphere_dist(u, v):
    """Distance in the plane with density ``1 / (1 + |z|^2)``, infinity included.

    Along geodesics this is half the chordal angle on the Riemann sphere:
    ``atan2(|u - v|, |1 + u conj(v)|)``, and ``atan2(1, |u|)`` to infinity.
    The value never exceeds ``pi / 2``.
    """
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    iu = ~np.isfinite(u)
    iv = ~np.isfinite(v)
    with np.errstate(invalid="ignore"):
        uf = np.where(iu, 0, u)
        vf = np.where(iv, 0, v)
        d = np.arctan2(np.abs(uf - vf), np.abs(1 + uf * np.conj(vf)))
    d = np.where(iu & ~iv, np.arctan2(1.0, np.abs(vf)), d)
    d = np.where(iv & ~iu, np.arctan2(1.0, np.abs(uf)), d)
    d = np.where(iu & iv, 0.0, d)
    return d if d.ndim else float(d)


def sphere_dist_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return sphere_dist(np.asarray(a, complex)[:, None], np.asarray(b, complex)[None, :])


def ground_matrix(a: np.ndarray, b: np.ndarray, metric: str = "euclid") -> np.ndarray:
    if metric == "euclid":
        return np.abs(np.asarray(a, complex)[:, None] - np.asarray(b, complex)[None, :])
    if metric == "sphere":
        return sphere_dist_matrix(a, b)
    raise ValueError(f"unknown metric {metric!r}")


# --------------------------------------------------------------------------
# Fréchet


@numba.njit(cache=True)
def _frechet(d):
    n, m = d.shape
    ca = np.empty(m)
    ca[0] = d[0, 0]
    for j in range(1, m):
        ca[j] = max(ca[j - 1], d[0, j])
    for i in range(1, n):
        prev = ca[0]
        ca[0] = max(prev, d[i, 0])
        for j in range(1, m):
            best = min(prev, ca[j], ca[j - 1])
            prev = ca[j]
            ca[j] = max(best, d[i, j])
    return ca[m - 1]


def uniform_dist(g1: Curve, g2: Curve, metric: str = "euclid") -> float:
    """Discrete Fréchet distance between two curves.

    Open curves are coupled from start to end (reversal is not allowed).
    Closed curves are compared as loops: the base point of ``g2`` ranges over
    its vertices and the smallest value is returned.
    """
    if g1.closed != g2.closed:
        raise ValueError("cannot compare an open curve with a closed one")
    a, b = g1.vertices, g2.vertices
    if not g1.closed:
        return float(_frechet(ground_matrix(a, b, metric)))
    a = np.append(a, a[0])
    best = math.inf
    for s in range(len(b)):
        bs = np.roll(b, -s)
        bs = np.append(bs, bs[0])
        best = min(best, float(_frechet(ground_matrix(a, bs, metric))))
    return best


# --------------------------------------------------------------------------
# Hausdorff


def _two_sided(m: np.ndarray) -> float:
    return float(max(m.min(axis=1).max(), m.min(axis=0).max()))


def hausdorff_curvesets(F1: CurveSet, F2: CurveSet, metric: str = "euclid") -> float:
    """Hausdorff distance between finite sets of curves under :func:`uniform_dist`."""
    if len(F1) == 0 or len(F2) == 0:
        raise EmptySet("curve sets must be nonempty")
    m = np.array([[uniform_dist(a, b, metric) for b in F2.curves] for a in F1.curves])
    return _two_sided(m)


def hausdorff_sets(A, B) -> float:
    """Two-sided Euclidean Hausdorff distance between finite point sets."""
    A = np.atleast_1d(np.asarray(A, dtype=complex))
    B = np.atleast_1d(np.asarray(B, dtype=complex))
    if A.size == 0 or B.size == 0:
        raise EmptySet("point sets must be nonempty")
    pa = np.column_stack([A.real, A.imag])
    pb = np.column_stack([B.real, B.imag])
    da, _ = cKDTree(pb).query(pa)
    db, _ = cKDTree(pa).query(pb)
    return float(max(da.max(), db.max()))
