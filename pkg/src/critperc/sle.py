"""Chordal SLE(6) in the upper half-plane.

The Loewner chain is discretised by slit maps: a vertical slit of capacity
``c`` at ``U`` is removed by ``h(z) = U + sqrt((z - U)**2 + 4 c)``.  A grid
step from ``U_j`` to ``U_{j+1}`` of length ``dt`` is the slit ``(U_j, dt/2)``
followed by the slit ``(U_{j+1}, dt/2)``.  Splitting the step this way makes
the scheme weakly second order for the flow of real points; the one-sided
choice (a single slit at ``U_{j+1}``) leaves an error of order ``dt**2`` per
step that accumulates visibly in exit laws.  With ``U = 0`` every slit sits
at the origin and the trace is exactly ``2 i sqrt(t)``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np

from .curvespace import Curve

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the parallel exit sampler runs one flat loop; avoid probing for TBB
    numba.config.THREADING_LAYER = "workqueue"

__all__ = [
    "KAPPA", "DrivingFunction", "LoewnerChain", "StoppingSchedule", "Hull", "StepTooLarge", "TraceExhausted",
    "NonConvergence", "sample_driving", "slits", "solve_trace", "capacity", "map_to_domain", "stopping_schedule",
    "polygonal_approx", "fill_trace", "exit_points", "half_disk_angles", "exit_angles_half_disk",
    "cardy_semicircle_angles",
]

KAPPA = 6.0


class StepTooLarge(ValueError):
    pass


class TraceExhausted(RuntimeError):
    pass


class NonConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class DrivingFunction:
    times: np.ndarray
    values: np.ndarray
    seed: int | None = None

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.times)

    def __len__(self) -> int:
        return len(self.times)


def sample_driving(T: float, dt: float, seed: int) -> DrivingFunction:
    """``sqrt(6)`` times a Brownian motion on a uniform grid of step ``dt``."""
    if dt <= 0 or T <= 0:
        raise StepTooLarge("T and dt must be positive")
    n = int(round(T / dt))
    rng = np.random.default_rng(seed)
    inc = rng.standard_normal(n) * math.sqrt(KAPPA * dt)
    U = np.concatenate([[0.0], np.cumsum(inc)])
    return DrivingFunction(dt * np.arange(n + 1), U, seed)


def slits(d: DrivingFunction) -> tuple[np.ndarray, np.ndarray]:
    """Positions and capacities of the slits making up the chain."""
    U = np.asarray(d.values, dtype=float)
    dt = np.diff(np.asarray(d.times, dtype=float))
    pos = np.empty(2 * len(dt))
    pos[0::2], pos[1::2] = U[:-1], U[1:]
    cap = np.repeat(dt / 2, 2)
    return pos, cap


# --------------------------------------------------------------------------
# slit maps


@numba.njit(cache=True, inline="always")
def _inv_slit(w, U, c):
    # inverse of U + sqrt((z - U)^2 + 4 c) onto the closed upper half-plane
    r = 2.0 * math.sqrt(c)
    v = np.sqrt(w - U - r) * np.sqrt(w - U + r)
    return complex(v.real + U, max(v.imag, 0.0) + 0.0)


@numba.njit(cache=True)
def _point(P, C, m0, m, c):
    """Point at capacity ``c`` on slit ``m``, pulled back through the
    slits ``m - 1, ..., m0``."""
    w = complex(P[m], 2.0 * math.sqrt(c))
    for j in range(m - 1, m0 - 1, -1):
        w = _inv_slit(w, P[j], C[j])
    return w


@numba.njit(cache=True)
def _trace(P, C, idx):
    out = np.empty(len(idx), dtype=np.complex128)
    for n in range(len(idx)):
        k = idx[n]
        if k == 0:
            out[n] = complex(P[0], 0.0) if len(P) else 0j
        else:
            out[n] = _point(P, C, 0, 2 * k - 1, C[2 * k - 1])
    return out


@dataclass
class LoewnerChain:
    driving: DrivingFunction
    index: np.ndarray
    trace: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.driving.times[self.index]

    def curve(self) -> Curve:
        return Curve(self.trace)


def solve_trace(d: DrivingFunction, stride: int = 1, max_jump: float = 50.0) -> LoewnerChain:
    """Trace at every ``stride``-th grid time and at the last one.

    Raises :class:`StepTooLarge` when the grid does not increase, a driving
    increment exceeds ``max_jump`` standard deviations of its step, or the
    trace leaves the closed half-plane.
    """
    U = np.asarray(d.values, dtype=float)
    dt = np.diff(np.asarray(d.times, dtype=float))
    if np.any(dt <= 0):
        raise StepTooLarge("times must increase")
    if len(dt) and np.any(np.abs(np.diff(U)) > max_jump * np.sqrt(KAPPA * dt)):
        raise StepTooLarge("driving increment too large for the step")
    idx = np.arange(0, len(U), stride)
    if idx[-1] != len(U) - 1:
        idx = np.append(idx, len(U) - 1)
    P, C = slits(d)
    tr = _trace(P, C, idx)
    if not np.all(np.isfinite(tr)) or np.any(tr.imag < 0):
        raise StepTooLarge("trace left the half-plane")
    return LoewnerChain(d, idx, tr)


# --------------------------------------------------------------------------
# capacity


def capacity(points) -> float:
    """Half-plane capacity ``t`` (``g(z) = z + 2t/z + ...``) of the set
    bounded by a polyline attached to the real axis.

    ``points`` runs from a real point into the upper half-plane; it either
    ends in the half-plane (a slit) or returns to the real axis (the outline
    of a hull).  The polyline is unzipped point by point with vertical slit
    maps, each contributing a quarter of its squared height.
    """
    w = np.asarray(points, dtype=complex).copy()
    if abs(w[0].imag) > 1e-12 * max(1.0, abs(w[0])):
        raise NonConvergence("the set must start on the real axis")
    if np.any(w.imag < -1e-12):
        raise NonConvergence("points below the real axis")
    w.imag = np.maximum(w.imag, 0.0)
    t = 0.0
    for k in range(1, len(w)):
        a = w[k]
        U, c = a.real, a.imag ** 2 / 4
        t += c
        rest = w[k + 1:] - U
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(rest == 0, 0, rest * np.sqrt(1 + 4 * c / rest ** 2))
        w[k + 1:] = U + v.real + 1j * (np.maximum(v.imag, 0.0) + 0.0)
    if not np.isfinite(t):
        raise NonConvergence("unzipping failed")
    return float(t)


# --------------------------------------------------------------------------
# maps and stopping


def map_to_domain(chain: LoewnerChain | np.ndarray, f) -> Curve:
    """Image of the trace under ``f`` (a map from the half-plane onto the domain)."""
    tr = chain.trace if isinstance(chain, LoewnerChain) else np.asarray(chain, dtype=complex)
    return Curve(np.asarray(f(tr), dtype=complex))


@dataclass
class StoppingSchedule:
    epsilon: float
    times: np.ndarray
    tips: np.ndarray
    increments: np.ndarray
    centres: np.ndarray
    pullback_regions: list = field(default_factory=list)
    exhausted: bool = False
    # argument of each exit point about its centre, in the normalised frame
    exit_angles: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return len(self.times)


@numba.njit(cache=True)
def _next_exit(P, C, m0, eps):
    """First slit ``m >= m0`` whose tip, seen from the start of slit ``m0``,
    is at distance at least ``eps`` from ``P[m0]``; -1 if there is none."""
    for m in range(m0, len(P)):
        if abs(_point(P, C, m0, m, C[m]) - P[m0]) >= eps:
            return m
    return -1


@numba.njit(cache=True)
def _exit_capacity(P, C, m0, m, eps):
    lo, hi = 0.0, C[m]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if abs(_point(P, C, m0, m, mid) - P[m0]) >= eps:
            hi = mid
        else:
            lo = mid
    return hi


@numba.njit(cache=True)
def _pull(P, C, m0, w):
    for j in range(m0 - 1, -1, -1):
        w = _inv_slit(w, P[j], C[j])
    return w


@numba.njit(cache=True)
def _pullback(P, C, m0, centre, eps, n):
    # boundary arc of the semi-ball about ``centre`` seen after slit m0 - 1
    out = np.empty(n, dtype=np.complex128)
    for i in range(n):
        a = math.pi * i / (n - 1)
        w = complex(centre + eps * math.cos(a), max(eps * math.sin(a), 0.0))
        for j in range(m0 - 1, -1, -1):
            w = _inv_slit(w, P[j], C[j])
        out[i] = w
    return out


def stopping_schedule(d: DrivingFunction, eps: float, J: int, domain_map=None, strict: bool = True,
                      n_curve: int = 0, scales=None) -> StoppingSchedule:
    """Successive exits from conformal semi-balls of radius ``eps``.

    ``T_1`` is the exit time of the trace from the semi-ball about the
    starting point.  Given ``T_j`` the rest of the trace is mapped by
    ``g_{T_j}`` and ``T_{j+1}`` is its exit time from the semi-ball about
    the image ``U(T_j)`` of the tip.  Exits are located inside a slit by
    bisection on its capacity, so ``T_{j+1} - T_j`` is the capacity of a
    hull inside the semi-ball and never exceeds ``eps**2 / 2``.

    If the first semi-ball is never left, the schedule has the single time
    at the end of the horizon.  Otherwise running out of trace raises
    :class:`TraceExhausted` (or returns the exits found, with
    ``exhausted`` set, when ``strict`` is false).  With ``n_curve > 0``
    the pulled back semi-circles are kept in ``pullback_regions``, mapped
    by ``domain_map`` when given; tips are mapped the same way.

    ``scales`` fixes the free multiplicative factor of each normalising
    map: step ``j`` uses the semi-ball of radius ``eps`` for the map
    ``scales[j] * (g - U)``, that is radius ``eps / scales[j]`` for ``g - U``
    (cycling through ``scales``).  The default is factor one throughout.
    """
    if eps <= 0 or J < 1:
        raise ValueError("eps must be positive and J at least 1")
    scales = np.ones(1) if scales is None else np.asarray(scales, dtype=float)
    if scales.size == 0 or np.any(scales <= 0):
        raise ValueError("scales must be positive")
    radius = float(eps)
    P, C = slits(d)
    P, C = list(P), list(C)
    times, tips, centres, regions, angles = [], [], [], [], []
    m0, t0, exhausted = 0, 0.0, False
    for j in range(J):
        eps = radius / scales[j % scales.size]
        Pa, Ca = np.array(P), np.array(C)
        centre = Pa[m0] if m0 < len(Pa) else np.nan
        if n_curve:
            ring = _pullback(Pa, Ca, m0, centre, eps, n_curve)
            regions.append(domain_map(ring) if domain_map is not None else ring)
        m = _next_exit(Pa, Ca, m0, eps) if m0 < len(Pa) else -1
        if m < 0:
            if j == 0:
                times.append(float(np.sum(Ca)))
                tips.append(_point(Pa, Ca, 0, len(Pa) - 1, Ca[-1]) if len(Pa) else 0j)
                centres.append(centre)
                break
            if strict:
                raise TraceExhausted(f"horizon ended after {j} exits")
            exhausted = True
            break
        base = _point(Pa, Ca, m0, m, 0.0)
        if abs(base - centre) >= eps:
            # the ball was left during a driving jump: exit at the foot of
            # the semicircle on the side of the jump
            c = 0.0
            foot = complex(centre + np.sign(base.real - centre) * eps, 0.0)
            tips.append(_pull(Pa, Ca, m0, foot))
            angles.append(0.0 if foot.real > centre else math.pi)
        else:
            c = _exit_capacity(Pa, Ca, m0, m, eps)
            tips.append(_point(Pa, Ca, 0, m, c))
            angles.append(float(np.angle(_point(Pa, Ca, m0, m, c) - centre)))
        T = t0 + float(np.sum(Ca[m0:m])) + c
        times.append(T)
        centres.append(centre)
        # split slit m at the exit so that the next semi-ball starts there
        P[m:m + 1] = [P[m], P[m]]
        C[m:m + 1] = [c, max(C[m] - c, 1e-300)]
        m0, t0 = m + 1, T
    times = np.array(times)
    tips_a = np.array(tips, dtype=complex)
    if domain_map is not None:
        tips_a = np.asarray(domain_map(tips_a), dtype=complex)
    inc = np.diff(np.concatenate([[0.0], times]))
    return StoppingSchedule(radius, times, tips_a, inc, np.array(centres), regions, exhausted, np.array(angles))


def polygonal_approx(schedule: StoppingSchedule, per_segment: int = 16, start: complex = 0j) -> Curve:
    """Straight segments through ``start`` and the successive tips, sampled
    at constant speed on each segment."""
    if len(schedule) == 0:
        raise ValueError("empty schedule")
    pts = np.concatenate([[start], schedule.tips])
    t = np.arange(per_segment) / per_segment
    segs = [(a + (b - a) * t) for a, b in zip(pts[:-1], pts[1:])]
    return Curve(np.concatenate(segs + [pts[-1:]]))


# --------------------------------------------------------------------------
# hulls


@dataclass
class Hull:
    cells: set | np.ndarray
    tip: complex | int
    time: float
    grid: tuple | None = None

    def contains(self, z) -> np.ndarray:
        if self.grid is None:
            raise TypeError("lattice hulls are sets of hexagons")
        x0, y0, res, shape = self.grid
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        i = np.floor((z.imag - y0) / res).astype(int)
        j = np.floor((z.real - x0) / res).astype(int)
        ok = (i >= 0) & (j >= 0) & (i < shape[0]) & (j < shape[1])
        out = np.zeros(z.shape, dtype=bool)
        out[ok] = self.cells[i[ok], j[ok]]
        return out

    @property
    def area(self) -> float:
        if self.grid is None:
            raise TypeError("lattice hulls are sets of hexagons")
        return float(self.cells.sum()) * self.grid[2] ** 2


def fill_trace(curve, domain=None, b: complex | None = None, resolution: float | None = None,
               time: float = 0.0) -> Hull:
    """Hull of a curve: the curve with everything it separates from ``b``.

    For an exploration path this is the discrete filling (explored cells and
    the cells they cut off from the target).  For a polyline in a
    :class:`DomainSpec` the domain is rasterised at ``resolution`` (default
    1/1000 of its diameter); cells crossed by the curve are blocked and the
    hull is every cell outside the component of ``b``.
    """
    from .exploration import ExplorationPath, discrete_filling

    if isinstance(curve, ExplorationPath):
        return Hull(discrete_filling(curve), curve.tip, float(len(curve.edges)))
    from scipy import ndimage

    if domain is None or b is None:
        raise ValueError("a domain and a target point are needed")
    z = np.asarray(curve.vertices if isinstance(curve, Curve) else curve, dtype=complex)
    bd = domain.boundary
    res = resolution or 1e-3 * domain.diameter
    x0, y0 = bd.real.min() - res, bd.imag.min() - res
    nx = int(np.ceil((bd.real.max() + res - x0) / res))
    ny = int(np.ceil((bd.imag.max() + res - y0) / res))
    X = x0 + (np.arange(nx) + 0.5) * res
    Y = y0 + (np.arange(ny) + 0.5) * res
    inside = domain.contains((X[None, :] + 1j * Y[:, None]).ravel()).reshape(ny, nx)
    blocked = np.zeros_like(inside)
    pts = [z[:1]]
    for a, e in zip(z[:-1], z[1:]):
        m = max(2, int(np.ceil(4 * abs(e - a) / res)) + 1)
        pts.append(a + (e - a) * np.linspace(0, 1, m))
    p = np.concatenate(pts)
    blocked[np.clip(((p.imag - y0) // res).astype(int), 0, ny - 1),
            np.clip(((p.real - x0) // res).astype(int), 0, nx - 1)] = True
    free = inside & ~blocked
    lab, _ = ndimage.label(free)
    bi = int(np.clip((b.imag - y0) // res, 0, ny - 1))
    bj = int(np.clip((b.real - x0) // res, 0, nx - 1))
    keep = lab[bi, bj]
    if keep == 0:
        # target on the boundary: use the nearest free cell
        ii, jj = np.nonzero(free)
        k = np.argmin((ii - bi) ** 2 + (jj - bj) ** 2)
        keep = lab[ii[k], jj[k]]
    hull = inside & (lab != keep)
    return Hull(hull, complex(z[-1]), time, (x0, y0, res, hull.shape))


# --------------------------------------------------------------------------
# exit laws


@numba.njit(cache=True)
def _exit_point(seed, h, eps, max_steps):
    """Where a trace from 0 first reaches the real axis outside (-1, 1).

    Only the distances ``er = g(1) - U`` and ``el = U - g(-1)`` are evolved,
    which keeps full relative precision however close the driving comes to
    a marked image.  Steps are ``h * min(er, el)**2`` in capacity.  The
    approach of the driving to an image is followed until the distance is
    below ``eps`` times the hull scale ``sqrt(t)``; the collapsing gap is
    then pulled back to the original plane through all slits, each step
    inverted in the cancellation-free form.
    """
    np.random.seed(seed)
    Br = np.empty(max_steps)
    Bl = np.empty(max_steps)
    cs = np.empty(max_steps)
    n = 0
    er, el, t = 1.0, 1.0, 0.0
    sd = math.sqrt(KAPPA)
    while n < max_steps - 2:
        e = min(er, el)
        if e < eps * math.sqrt(t + 1e-300):
            right = er < el
            B = Br if right else Bl
            y = e
            for j in range(n - 1, -1, -1):
                b = B[j]
                E = math.sqrt(b * b + 4.0 * cs[j])
                y = y * (y + 2.0 * E) / (math.sqrt((y + E) ** 2 - 4.0 * cs[j]) + b)
            return 1.0 + y if right else -1.0 - y
        dt = h * e * e
        dU = sd * math.sqrt(dt) * np.random.standard_normal()
        # slit at the old driving value
        er1 = math.sqrt(er * er + 2.0 * dt)
        el1 = math.sqrt(el * el + 2.0 * dt)
        if dU >= er1 or -dU >= el1:
            continue  # increment beyond a marked image: vanishingly rare for small h; redraw
        Br[n], Bl[n], cs[n] = er, el, dt / 2
        # slit at the new driving value
        br, bl = er1 - dU, el1 + dU
        Br[n + 1], Bl[n + 1], cs[n + 1] = br, bl, dt / 2
        n += 2
        t += dt
        er = math.sqrt(br * br + 2.0 * dt)
        el = math.sqrt(bl * bl + 2.0 * dt)
    return math.nan


@numba.njit(cache=True, parallel=True)
def _exit_points(seeds, h, eps, max_steps):
    out = np.empty(len(seeds))
    for i in numba.prange(len(seeds)):
        out[i] = _exit_point(seeds[i], h, eps, max_steps)
    return out


def _seeds(seed: int, n: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(n, dtype=np.uint32).astype(np.int64)


def exit_points(n: int, seed: int, h: float = 5e-3, eps: float = 1e-20, max_steps: int = 2_000_000) -> np.ndarray:
    """First points of ``(-inf, -1] U [1, inf)`` reached by ``n`` independent
    SLE(6) traces from 0 to infinity in the upper half-plane.  Runs that
    exceed ``max_steps`` give ``nan``."""
    if not 0 < h < 0.02:
        raise StepTooLarge("h must lie in (0, 0.02)")
    return _exit_points(_seeds(seed, n), h, eps, max_steps)


def half_disk_angles(x) -> np.ndarray:
    """Angles on the unit semicircle of points of ``R \\ (-1, 1)``, under the
    map of the half-plane onto the upper half-disk with ``0 -> 0``,
    ``1 -> 1``, ``-1 -> -1`` and ``inf -> i``."""
    x = np.asarray(x, dtype=float)
    W = (1 + x) / (1 - x)  # in (-inf, 0)
    s = 1j * np.sqrt(-W)
    return np.angle((s - 1) / (s + 1))


def exit_angles_half_disk(n: int, seed: int, **kw) -> np.ndarray:
    """Exit angles on the semicircle of SLE(6) in the upper half-disk from 0,
    measured counterclockwise from 1."""
    return half_disk_angles(exit_points(n, seed, **kw))


def cardy_semicircle_angles(n: int, seed: int) -> np.ndarray:
    """Exit angles on the semicircle drawn directly from Cardy's law by
    inverting its distribution function (no trace)."""
    from scipy.optimize import brentq

    from .cardy import phi

    def cdf(theta):
        # exit below theta: 1 - Phi(eta) with eta the cross-ratio of 0, 1, e^{i theta}, -1
        X = -1.0 / math.tan(theta / 2) ** 2
        return 1 - phi(-X / (1 - X))

    u = np.random.default_rng(seed).random(n)
    return np.array([brentq(lambda th: cdf(th) - v, 1e-14, math.pi - 1e-14, xtol=1e-13) for v in u])
