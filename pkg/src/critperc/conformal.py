"""Numerical conformal maps onto the unit disk.

Jordan domains given by polylines are mapped with the geodesic zipper: the
boundary is sampled at nodes ``z_0, z_1, ..., z_n`` and unzipped one node at a
time by elementary maps of the upper half-plane, each of which opens a
circular arc orthogonal to the real axis onto a real interval.  Every
elementary map has a closed-form inverse, so ``forward`` and ``inverse`` are
exact inverses of each other up to rounding.  The map is exact for the
domain whose boundary interpolates the nodes by those arcs, and converges
to the map of the polyline as the nodes are refined.  Circles are
recognised and mapped by an explicit Möbius transformation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hexlattice import DomainSpec, winding_number

__all__ = [
    "MobiusTransform", "ConformalMap", "NonConvergence", "InvalidParameter", "ToleranceExceeded",
    "riemann_map", "halfplane_disk", "half_disk_to_halfplane", "semi_ball_pullback", "inner_outer_approx",
    "kernel_convergence_check", "KernelReport", "boundary_nodes",
]


class NonConvergence(RuntimeError):
    pass


class InvalidParameter(ValueError):
    pass


class ToleranceExceeded(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Möbius transformations


@dataclass(frozen=True)
class MobiusTransform:
    """``z -> (a z + b) / (c z + d)`` with ``ad - bc != 0``."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        if self.a * self.d - self.b * self.c == 0:
            raise InvalidParameter("degenerate Möbius transformation")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = (self.a * z + self.b) / (self.c * z + self.d)
            if self.c != 0:
                w = np.where(np.isinf(z), self.a / self.c, w)
                w = np.where(self.c * z + self.d == 0, complex(np.inf, np.inf), w)
            else:
                w = np.where(np.isinf(z), complex(np.inf, np.inf), w)
        return w if w.ndim else complex(w)

    def __matmul__(self, other: "MobiusTransform") -> "MobiusTransform":
        """Composition ``self(other(z))``."""
        m = np.array([[self.a, self.b], [self.c, self.d]]) @ np.array([[other.a, other.b], [other.c, other.d]])
        return MobiusTransform(*m.ravel())

    def inverse(self) -> "MobiusTransform":
        return MobiusTransform(self.d, -self.b, -self.c, self.a)

    @property
    def coefficients(self) -> tuple:
        return self.a, self.b, self.c, self.d


def halfplane_disk(zj: complex, theta: float = 0.0) -> tuple[MobiusTransform, MobiusTransform]:
    """``w = e^{i theta} (z + 1 - zj) / (z + 1 - conj(zj))`` and its inverse.

    Requires ``|1 - zj| = 1`` and ``Im zj > 0``; the map sends the closed
    upper half-plane onto the closed disk with ``zj - 1`` going to the centre.
    """
    zj = complex(zj)
    if not zj.imag > 0 or abs(abs(1 - zj) - 1) > 1e-12:
        raise InvalidParameter("need Im zj > 0 and |1 - zj| = 1")
    e = complex(math.cos(theta), math.sin(theta))
    m = MobiusTransform(e, e * (1 - zj), 1, 1 - zj.conjugate())
    return m, m.inverse()


def half_disk_to_halfplane() -> Callable:
    """``z -> ((1 + z) / (1 - z))**2`` from the upper unit half-disk onto the
    upper half-plane: ``0 -> 1``, ``1 -> inf``, ``-1 -> 0``, arc -> negative reals."""

    def f(z):
        z = np.asarray(z, dtype=complex)
        with np.errstate(divide="ignore", invalid="ignore"):
            return ((1 + z) / (1 - z)) ** 2

    return f


def _clamp(z: np.ndarray) -> np.ndarray:
    # keep rounding from pushing real points into the lower half-plane;
    # adding 0.0 also turns -0.0 into +0.0 for the branch cuts below
    return z.real + 1j * (np.maximum(z.imag, 0.0) + 0.0)


# --------------------------------------------------------------------------
# zipper


def boundary_nodes(spec: DomainSpec, n: int, corner_angle: float = 0.3,
                   grading: float = 0.3) -> tuple[np.ndarray, np.ndarray]:
    """About ``n`` boundary points and their arclength coordinates.

    The polyline vertices that turn by more than ``corner_angle`` radians are
    always nodes.  Between two of them the nodes are spaced by
    ``u - grading * sin(2 pi u) / (2 pi)``, which packs them ``1 / (1 - grading)``
    times more densely next to the corners.
    """
    b = spec.boundary
    turn = np.angle((np.roll(b, -1) - b) / (b - np.roll(b, 1)))
    s = spec.arclength_positions()
    P = spec.perimeter
    corners = np.flatnonzero(np.abs(turn) > corner_angle)
    if len(corners) == 0:
        corners = np.array([0])
    cs = s[corners]
    out = []
    for i, s0 in enumerate(cs):
        s1 = cs[(i + 1) % len(cs)] + (P if i + 1 == len(cs) else 0.0)
        m = max(2, int(round(n * (s1 - s0) / P)))
        u = np.arange(m) / m
        if len(corners) > 1 or abs(turn[corners[0]]) > corner_angle:
            u = u - grading * np.sin(2 * np.pi * u) / (2 * np.pi)
        out.append(s0 + (s1 - s0) * u)
    ss = np.concatenate(out) % P
    order = np.argsort(ss, kind="stable")
    ss = ss[order]
    return spec.point_at(ss), ss


@dataclass
class ConformalMap:
    """Conformal map ``f`` of a Jordan domain onto the unit disk with
    ``f(z0) = 0`` and ``f'(z0) > 0``."""

    spec: DomainSpec
    z0: complex
    nodes: np.ndarray
    node_s: np.ndarray
    node_angles: np.ndarray
    kind: str = "zipper"
    _z01: tuple = (0j, 0j)
    _c: np.ndarray = field(default_factory=lambda: np.zeros(0))
    _h: np.ndarray = field(default_factory=lambda: np.zeros(0))
    _cfin: float = math.inf
    _sigma: float = 1.0
    _disk: MobiusTransform | None = None

    # ---- evaluation -------------------------------------------------------

    def _to_halfplane(self, z: np.ndarray) -> np.ndarray:
        z0, z1 = self._z01
        with np.errstate(divide="ignore", invalid="ignore"):
            w = 1j * np.sqrt((z - z1) / (z - z0))
        w = _clamp(w)
        for c, h in zip(self._c, self._h):
            if np.isfinite(c):
                w = w / (1 - w / c)
            with np.errstate(divide="ignore", invalid="ignore"):
                w = np.where(w == 0, -h, w * np.sqrt(1 + (h / w) ** 2))
            w = _clamp(w)
        if np.isfinite(self._cfin):
            w = w / (1 - w / self._cfin)
        return self._sigma * w * w

    def _from_halfplane(self, w: np.ndarray) -> np.ndarray:
        u = np.sqrt(self._sigma * w)
        if self._sigma < 0:
            u = -u
        if np.isfinite(self._cfin):
            u = u / (1 + u / self._cfin)
        u = _clamp(u)
        for c, h in zip(self._c[::-1], self._h[::-1]):
            u = _clamp(np.sqrt(u - h) * np.sqrt(u + h))
            if np.isfinite(c):
                u = u / (1 + u / c)
        z0, z1 = self._z01
        u2 = u * u
        with np.errstate(divide="ignore", invalid="ignore"):
            return (z1 + u2 * z0) / (1 + u2)

    def forward(self, z):
        z = np.asarray(z, dtype=complex)
        if self.kind == "disk":
            out = self._disk(z)
        else:
            out = self._disk(self._to_halfplane(np.atleast_1d(z)))
            out = out.reshape(z.shape)
        return out if np.ndim(out) else complex(out)

    def inverse(self, w):
        w = np.asarray(w, dtype=complex)
        inv = self._disk.inverse()
        if self.kind == "disk":
            out = inv(w)
        else:
            out = self._from_halfplane(np.atleast_1d(inv(w))).reshape(w.shape)
        return out if np.ndim(out) else complex(out)

    __call__ = forward

    # ---- boundary correspondence ------------------------------------------

    def boundary_angle(self, s):
        """Angle on the unit circle of the boundary point at arclength ``s``,
        by interpolation between nodes.  Angles increase with ``s`` and
        start at the angle of the first node."""
        P = self.spec.perimeter
        s = np.mod(np.asarray(s, dtype=float) - self.node_s[0], P) + self.node_s[0]
        xs = np.append(self.node_s, self.node_s[0] + P)
        th = np.append(self.node_angles, self.node_angles[0] + 2 * np.pi)
        return np.interp(s, xs, th)

    def boundary_map(self, z):
        """Image on the unit circle of boundary points ``z`` (complex) or of
        arclength coordinates (real)."""
        z = np.asarray(z)
        if np.iscomplexobj(z):
            s = np.array([self.spec.arclength_of(p) for p in np.atleast_1d(z)]).reshape(z.shape)
        else:
            s = z
        return np.exp(1j * self.boundary_angle(s))

    def boundary_inverse(self, theta):
        """Boundary point (as arclength) whose image has angle ``theta``."""
        P = self.spec.perimeter
        t0 = self.node_angles[0]
        theta = np.mod(np.asarray(theta, dtype=float) - t0, 2 * np.pi) + t0
        xs = np.append(self.node_angles, t0 + 2 * np.pi)
        ss = np.append(self.node_s, self.node_s[0] + P)
        return np.mod(np.interp(theta, xs, ss), P)

    def to_json(self) -> str:
        return json.dumps({
            "kind": self.kind, "z0": [self.z0.real, self.z0.imag], "n_nodes": len(self.nodes),
            "boundary": json.loads(self.spec.to_json())["boundary"],
            "correspondence": [[float(s), float(t)] for s, t in zip(self.node_s, self.node_angles)],
        })


def _is_circle(b: np.ndarray) -> tuple[complex, float] | None:
    if len(b) < 32:
        return None
    c = b.mean()
    r = np.abs(b - c)
    if r.max() - r.min() <= 1e-12 * r.max():
        return complex(c), float(r.mean())
    return None


def _derivative(fwd: Callable, z0: complex, r: float, n: int = 16) -> complex:
    # Cauchy integral on a small circle; exact up to terms of order r**n
    w = np.exp(2j * np.pi * np.arange(n) / n)
    return complex(np.mean(fwd(z0 + r * w) / w) / r)


def _normalise(fwd: Callable, spec: DomainSpec, z0: complex, zeta0: complex) -> MobiusTransform:
    """Möbius from the upper half-plane to the disk sending ``zeta0`` to 0,
    rotated so that the composed map has positive derivative at ``z0``."""
    m = MobiusTransform(1, -zeta0, 1, -zeta0.conjugate())
    r = 0.25 * float(np.min(np.abs(spec.point_at(np.linspace(0, spec.perimeter, 4096, endpoint=False)) - z0)))
    rot = np.exp(-1j * np.angle(_derivative(lambda z: m(fwd(z)), z0, r)))
    return MobiusTransform(rot, -rot * zeta0, 1, -zeta0.conjugate())


def riemann_map(spec: DomainSpec, z0: complex, n: int = 2048, corner_angle: float = 0.3,
                grading: float = 0.3) -> ConformalMap:
    """Conformal map of the domain inside ``spec`` onto the unit disk."""
    z0 = complex(z0)
    b = spec.boundary
    if not spec.contains(z0)[0]:
        raise NonConvergence("z0 is not inside the domain")
    circ = _is_circle(b)
    if circ is not None:
        c, R = circ
        w0 = (z0 - c) / R
        # z -> (z - c)/R then the disk automorphism sending w0 to 0
        m = MobiusTransform(1 / R, -(c / R) - w0, -w0.conjugate() / R, 1 + w0.conjugate() * c / R)
        s = spec.arclength_positions()
        ang = np.unwrap(np.angle(m(b)))
        fm = ConformalMap(spec, z0, b.copy(), s, ang, kind="disk", _disk=m)
        return fm

    nodes, ss = boundary_nodes(spec, n, corner_angle, grading)
    # start the unzipping on the widest gap: the first map sends every other
    # node close to i, at relative distance of order the gap length
    gaps = np.abs(np.roll(nodes, -1) - nodes)
    k0 = int(np.argmax(gaps))
    nodes, ss = np.roll(nodes, -k0), np.roll(ss, -k0)
    ss = np.where(ss < ss[0], ss + spec.perimeter, ss)
    N = len(nodes)
    za, zb = nodes[0], nodes[1]
    with np.errstate(divide="ignore", invalid="ignore"):
        w = _clamp(1j * np.sqrt((nodes - zb) / (nodes - za)))
        p = _clamp(np.atleast_1d(1j * np.sqrt((z0 - zb) / (z0 - za))))
    w[1] = 0.0
    inf0 = True  # image of the first node is still at infinity
    c0 = math.inf
    cs = np.empty(N - 2)
    hs = np.empty(N - 2)
    for k in range(2, N):
        a = w[k]
        if not a.imag > 0:
            raise NonConvergence(f"node {k} left the upper half-plane (image {a})")
        c = abs(a) ** 2 / a.real if a.real != 0 else math.inf
        h = abs(a) ** 2 / a.imag
        cs[k - 2], hs[k - 2] = c, h
        tail = w[1:]
        if np.isfinite(c):
            tail = tail / (1 - tail / c)
            p = p / (1 - p / c)
            if inf0:
                c0, inf0 = -c, False
            else:
                c0 = c0 / (1 - c0 / c)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(tail == 0, -h, tail * np.sqrt(1 + (h / tail) ** 2))
        tail = _clamp(tail)
        tail[k - 1] = 0.0
        w[1:] = tail
        p = _clamp(p * np.sqrt(1 + (h / p) ** 2))
        if not inf0:
            c0 = c0 * math.sqrt(1 + (h / c0) ** 2)
    cfin = c0 if not inf0 else math.inf
    u = p / (1 - p / cfin) if np.isfinite(cfin) else p
    sigma = 1.0 if u[0].real > 0 else -1.0
    fm = ConformalMap(spec, z0, nodes, ss, np.zeros(N), _z01=(za, zb), _c=cs, _h=hs, _cfin=cfin, _sigma=sigma)
    zeta0 = complex(fm._to_halfplane(np.array([z0]))[0])
    fm._disk = _normalise(fm._to_halfplane, spec, z0, zeta0)
    # node images: real points of the final half-plane, first node at infinity
    x = w[1:].real
    if np.isfinite(cfin):
        with np.errstate(divide="ignore"):
            x = x / (1 - x / cfin)
    img = np.empty(N, dtype=complex)
    img[1:] = fm._disk(sigma * x * x + 0j)
    img[0] = fm._disk(complex(np.inf, np.inf))
    ang = np.unwrap(np.angle(img))
    if not np.all(np.diff(ang) > 0):
        raise NonConvergence("boundary correspondence is not monotone; add nodes")
    if ang[-1] - ang[0] >= 2 * np.pi:
        raise NonConvergence("boundary correspondence wraps more than once")
    fm.node_angles = ang
    return fm


# --------------------------------------------------------------------------
# pullbacks and approximations


def semi_ball_pullback(inverse: Callable, eps: float, center: float = 0.0, n: int = 257) -> np.ndarray:
    """Image under ``inverse`` (a map defined on the upper half-plane) of the
    semicircle of radius ``eps`` about the real point ``center``, traversed
    from ``center + eps`` to ``center - eps``."""
    if eps <= 0:
        raise InvalidParameter("eps must be positive")
    t = np.linspace(0, np.pi, n)
    z = center + eps * np.exp(1j * t)
    z[0], z[-1] = center + eps, center - eps
    out = np.asarray(inverse(z), dtype=complex)
    if not np.all(np.isfinite(out)):
        raise ToleranceExceeded("pullback left the domain of the map")
    return out


@dataclass
class Approximants:
    inner: DomainSpec
    outer: DomainSpec
    radius: float
    inner_distance: float
    outer_distance: float


def inner_outer_approx(spec: DomainSpec, marked: Sequence[complex], eps: float, fmap: ConformalMap | None = None,
                       z0: complex | None = None, n: int = 1024) -> Approximants:
    """Jordan domains inside and outside ``spec`` within Hausdorff distance
    ``eps`` of its boundary, with the marked points carried along.

    The inner domain is bounded by the preimage of the circle of radius
    ``r < 1``; ``r`` is moved towards 1 until the boundary is within
    ``eps``.  The outer domain is the set of points within ``eps / 2`` of the
    closed domain.  Marked boundary points go to the preimage of ``r f(z)``
    and to the nearest point of the outer boundary.
    """
    from shapely.geometry import Point, Polygon
    from shapely.ops import nearest_points

    from .curvespace import hausdorff_sets

    if eps <= 0:
        raise InvalidParameter("eps must be positive")
    if fmap is None:
        if z0 is None:
            z0 = complex(spec.boundary.mean())
        fmap = riemann_map(spec, z0)
    dense = spec.point_at(np.linspace(0, spec.perimeter, 4 * n, endpoint=False))
    # angles of evenly spaced boundary points, so that corners are not starved
    theta = np.asarray(fmap.boundary_angle(np.linspace(0, spec.perimeter, n, endpoint=False)))
    gap = 0.5
    for _ in range(60):
        r = 1 - gap
        inner = fmap.inverse(r * np.exp(1j * theta))
        d_in = hausdorff_sets(inner, dense)
        if d_in <= eps and np.all(spec.contains(inner)):
            break
        gap /= 2
    else:
        raise NonConvergence("inner approximation did not reach the tolerance")
    ang = np.angle(fmap.boundary_map(np.asarray(marked, dtype=complex)))
    inner_marked = tuple(complex(z) for z in fmap.inverse(r * np.exp(1j * ang)))
    poly = Polygon(np.column_stack([spec.boundary.real, spec.boundary.imag]))
    grown = poly.buffer(eps / 2, quad_segs=32)
    ext = np.asarray(grown.exterior.coords)
    outer_b = ext[:-1, 0] + 1j * ext[:-1, 1]
    outer_marked = []
    for z in marked:
        q, _ = nearest_points(grown.exterior, Point(z.real, z.imag))
        outer_marked.append(complex(q.x, q.y))
    d_out = hausdorff_sets(outer_b, dense)
    return Approximants(DomainSpec(inner, inner_marked), DomainSpec(outer_b, tuple(outer_marked)), r, d_in, d_out)


@dataclass
class KernelReport:
    deviations: list
    grid_size: int

    @property
    def monotone(self) -> bool:
        d = self.deviations
        return all(b <= a for a, b in zip(d, d[1:]))


def kernel_convergence_check(maps: Sequence[Callable], limit: Callable, grid) -> KernelReport:
    """Sup-norm distance of each map to the limit on the sample ``grid``."""
    grid = np.asarray(grid, dtype=complex)
    ref = np.asarray(limit(grid))
    dev = [float(np.max(np.abs(np.asarray(f(grid)) - ref))) for f in maps]
    return KernelReport(dev, grid.size)


def disk_grid(n: int = 25, radius: float = 1.0) -> np.ndarray:
    """Square grid points of the closed disk of the given radius, plus its boundary circle."""
    x = np.linspace(-radius, radius, n)
    X, Y = np.meshgrid(x, x)
    z = (X + 1j * Y).ravel()
    z = z[np.abs(z) <= radius]
    return np.concatenate([z, radius * np.exp(2j * np.pi * np.arange(4 * n) / (4 * n))])


def winding_inside(poly: np.ndarray, z) -> np.ndarray:
    return winding_number(poly, z) != 0
