"""Cardy's crossing formula and the exit laws it determines.

For a Jordan domain with four counterclockwise boundary points the
probability of a blue crossing between the arcs ``z1 z2`` and ``z3 z4`` is a
function of the cross-ratio ``eta`` of the images of the points on the unit
circle only:

    Phi(eta) = 3 Gamma(2/3) / Gamma(1/3)**2 * eta**(1/3) * 2F1(1/3, 2/3; 4/3; eta)

The hypergeometric series is summed directly for ``eta <= 1/2``; above that
the identity ``Phi(eta) + Phi(1 - eta) = 1`` is used instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .conformal import ConformalMap, riemann_map
from .hexlattice import DomainSpec

__all__ = [
    "NotCyclicOrder", "GeometryInvalid", "CardyQuery", "cross_ratio", "cross_ratio_raw", "hyp2f1_third",
    "phi", "cardy_phi", "exit_cdf", "hull_avoid_prob", "PREFACTOR",
]

PREFACTOR = 3 * math.gamma(2 / 3) / math.gamma(1 / 3) ** 2


class NotCyclicOrder(ValueError):
    pass


class GeometryInvalid(ValueError):
    pass


def cross_ratio_raw(w1, w2, w3, w4):
    """``(w1 - w2)(w3 - w4) / ((w1 - w3)(w2 - w4))`` for arbitrary complex points."""
    return (w1 - w2) * (w3 - w4) / ((w1 - w3) * (w2 - w4))


def _ccw(angles: Sequence[float]) -> bool:
    rel = [(a - angles[0]) % (2 * math.pi) for a in angles[1:]]
    return all(0 < x < y for x, y in zip(rel, rel[1:])) and rel[0] > 0


def cross_ratio(w1: complex, w2: complex, w3: complex, w4: complex) -> float:
    """Cross-ratio of four counterclockwise points of the unit circle, in [0, 1]."""
    w = [complex(x) for x in (w1, w2, w3, w4)]
    if any(abs(abs(x) - 1) > 1e-9 for x in w):
        raise NotCyclicOrder("points must lie on the unit circle")
    if not _ccw([math.atan2(x.imag, x.real) for x in w]):
        raise NotCyclicOrder("points must be distinct and counterclockwise")
    eta = cross_ratio_raw(*w)
    if abs(eta.imag) > 1e-12 * max(1.0, abs(eta)):
        raise NotCyclicOrder(f"cross-ratio is not real ({eta})")
    return min(1.0, max(0.0, eta.real))


def _series(eta: float) -> float:
    # 2F1(1/3, 2/3; 4/3; eta) by its Taylor series, for 0 <= eta <= 1/2
    total, term, k = 1.0, 1.0, 0
    while True:
        term *= (1 / 3 + k) * (2 / 3 + k) / ((4 / 3 + k) * (k + 1)) * eta
        total += term
        k += 1
        if term < 1e-17 * total:
            return total


def phi(eta):
    """Cardy's crossing probability as a function of the cross-ratio."""
    eta = np.asarray(eta, dtype=float)
    if np.any((eta < 0) | (eta > 1)):
        raise ValueError("eta must lie in [0, 1]")
    out = np.empty(eta.shape)
    for idx, e in np.ndenumerate(eta):
        e = float(e)
        if e <= 0.5:
            out[idx] = PREFACTOR * e ** (1 / 3) * _series(e)
        else:
            out[idx] = 1.0 - PREFACTOR * (1 - e) ** (1 / 3) * _series(1 - e)
    return out if out.ndim else float(out)


def hyp2f1_third(eta: float) -> float:
    """``2F1(1/3, 2/3; 4/3; eta)`` on ``[0, 1]``."""
    eta = float(eta)
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    if eta <= 0.5:
        return _series(eta)
    return phi(eta) / (PREFACTOR * eta ** (1 / 3))


@dataclass(frozen=True)
class CardyQuery:
    """Four counterclockwise boundary points, each a complex point on the
    boundary or a float arclength coordinate."""

    domain: DomainSpec
    z1: complex | float
    z2: complex | float
    z3: complex | float
    z4: complex | float

    @property
    def points(self) -> tuple:
        return self.z1, self.z2, self.z3, self.z4


def _arclength(domain: DomainSpec, z) -> float:
    if isinstance(z, (complex, np.complexfloating)):
        return domain.arclength_of(complex(z))
    return float(z) % domain.perimeter


def _angles(fmap: ConformalMap, domain: DomainSpec, pts) -> np.ndarray:
    s = np.array([_arclength(domain, z) for z in pts])
    return np.asarray(fmap.boundary_angle(s), dtype=float)


def _map_for(domain: DomainSpec, fmap: ConformalMap | None) -> ConformalMap:
    if fmap is not None:
        return fmap
    b = domain.boundary
    # an interior point: centroid if inside, else the midpoint of a short chord
    z0 = complex(b.mean())
    if not domain.contains(z0)[0]:
        from shapely.geometry import Polygon

        p = Polygon(np.column_stack([b.real, b.imag])).representative_point()
        z0 = complex(p.x, p.y)
    return riemann_map(domain, z0)


def _eta_from_angles(t1, t2, t3, t4):
    w = [np.exp(1j * t) for t in (t1, t2, t3, t4)]
    eta = cross_ratio_raw(*w)
    return np.clip(np.real(eta), 0.0, 1.0)


def cardy_phi(q: CardyQuery, fmap: ConformalMap | None = None) -> float:
    """Probability of a blue crossing between the arcs ``z1 z2`` and ``z3 z4``."""
    fmap = _map_for(q.domain, fmap)
    th = _angles(fmap, q.domain, q.points)
    return phi(cross_ratio(*np.exp(1j * th)))


def exit_cdf(domain: DomainSpec, a, c, d, x, fmap: ConformalMap | None = None):
    """Probability that the exploration from ``a`` first reaches the arc
    ``c d`` between ``c`` and ``x``; equals ``1 - Phi(a, c; x, d)``.

    ``x`` may be an array of points (complex) or arclength coordinates;
    points are taken along the counterclockwise arc from ``c`` to ``d``.
    """
    fmap = _map_for(domain, fmap)
    ta, tc, td = _angles(fmap, domain, (a, c, d))
    if not _ccw([ta, tc, td]):
        raise GeometryInvalid("a, c, d must be counterclockwise")
    xs = np.atleast_1d(np.asarray(x))
    tx = _angles(fmap, domain, list(xs))
    # position of x along the arc c -> d; points off the arc go to the nearer end
    span = (td - tc) % (2 * np.pi)
    rel = (tx - tc) % (2 * np.pi)
    out = np.where(rel > span + (2 * np.pi - span) / 2, 0.0, 1.0)
    on = rel <= span
    out[on] = 1.0 - phi(_eta_from_angles(ta, tc, tc + rel[on], td))
    return out if np.ndim(x) else float(out[0])


def hull_avoid_prob(domain: DomainSpec, a, v1, u1, u2, v2, fmap: ConformalMap | None = None) -> float:
    """Probability that the exploration from ``a`` avoids both arms of the
    removed set, computed in the domain that remains after removing them.

    The points run counterclockwise ``a, v1, u1, u2, v2`` on the boundary of
    the remaining domain: ``v1 u1`` and ``u2 v2`` are the arms and
    ``u1 u2`` is what is left of the target arc.  The value is
    ``Phi(a, v1; u1, v2) - Phi(a, v1; u2, v2)``.
    """
    fmap = _map_for(domain, fmap)
    t = _angles(fmap, domain, (a, v1, u1, u2, v2))
    if not _ccw(list(t)):
        raise GeometryInvalid("a, v1, u1, u2, v2 must be distinct and counterclockwise")
    p1 = phi(_eta_from_angles(t[0], t[1], t[2], t[4]))
    p2 = phi(_eta_from_angles(t[0], t[1], t[3], t[4]))
    return float(min(1.0, max(0.0, p1 - p2)))
