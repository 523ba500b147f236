from __future__ import annotations

import functools
import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.optimize import fsolve

from critperc.conformal import (
    InvalidParameter, MobiusTransform, NonConvergence, half_disk_to_halfplane, halfplane_disk, inner_outer_approx,
    kernel_convergence_check, riemann_map, semi_ball_pullback, disk_grid,
)
from critperc.cardy import CardyQuery, cardy_phi, cross_ratio_raw
from critperc.curvespace import hausdorff_sets
from critperc.hexlattice import DomainSpec, winding_number

SQUARE = DomainSpec.rectangle(-1, 1, -1, 1)


@functools.lru_cache(maxsize=None)
def square_map():
    return riemann_map(SQUARE, 0j)


def _grid(r=0.95, n=15):
    z = disk_grid(n, r)
    return z


def test_unit_disk_is_the_identity():
    f = riemann_map(DomainSpec.disk(radius=1.0), 0j)
    z = _grid(0.999)
    assert np.abs(f(z) - z).max() < 1e-10
    assert np.abs(f.inverse(z) - z).max() < 1e-10


def test_disk_of_radius_r_scales():
    f = riemann_map(DomainSpec.disk(radius=3.0), 0j)
    z = 3 * _grid()
    assert np.abs(f(z) - z / 3).max() < 1e-10


def test_normalisation_at_interior_point():
    spec = DomainSpec.polygon([0, 3, 3 + 1j, 1 + 1j, 1 + 3j, 3j])  # an L shape
    z0 = 0.5 + 0.5j
    f = riemann_map(spec, z0)
    assert abs(f(z0)) < 1e-12
    # derivative from a Cauchy integral over a circle of twelve points
    w = np.exp(2j * np.pi * np.arange(12) / 12)
    d = np.mean(f(z0 + 0.1 * w) / w) / 0.1
    assert abs(np.angle(d)) < 1e-8 and d.real > 0
    with pytest.raises(NonConvergence):
        riemann_map(spec, 2 + 2j)


def _sc_square(w):
    """Schwarz-Christoffel map of the disk onto the square, by quadrature."""
    k0, _ = quad(lambda t: 1 / math.sqrt(1 - t ** 4), 0, 1, epsabs=1e-14)
    C = math.sqrt(2) / k0
    re, _ = quad(lambda t: (w / np.sqrt(1 + (t * w) ** 4)).real, 0, 1, epsabs=1e-14)
    im, _ = quad(lambda t: (w / np.sqrt(1 + (t * w) ** 4)).imag, 0, 1, epsabs=1e-14)
    return C * complex(re, im)


def test_square_matches_schwarz_christoffel_oracle():
    f = square_map()
    rng = np.random.default_rng(1)
    w = 0.95 * np.sqrt(rng.random(100)) * np.exp(2j * np.pi * rng.random(100))
    ref = np.array([_sc_square(x) for x in w])
    assert np.abs(f.inverse(w) - ref).max() < 1e-6
    assert np.abs(f(ref) - w).max() < 1e-6


def test_square_corners_are_rotationally_symmetric():
    f = square_map()
    c = f.boundary_map(np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]))
    assert np.abs(1j * c - np.roll(c, -1)).max() < 1e-6


@pytest.mark.parametrize("spec,z0", [
    (SQUARE, 0j),
    (DomainSpec.polygon([0, 3, 3 + 1j, 1 + 1j, 1 + 3j, 3j]), 0.5 + 0.5j),
    (DomainSpec.polygon(np.exp(2j * np.pi * np.arange(7) / 7) * (1 + 0.4 * (-1) ** np.arange(7))), 0.1j),
])
def test_roundtrip_and_cauchy_riemann(spec, z0):
    f = riemann_map(spec, z0)
    w = _grid(0.99, 21)
    assert np.abs(f(f.inverse(w)) - w).max() < 1e-8
    z = f.inverse(_grid(0.8, 9))
    h = 1e-5
    fx = (f(z + h) - f(z - h)) / (2 * h)
    fy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
    assert np.abs(fy - 1j * fx).max() < 1e-6 * np.abs(fx).max()


def test_boundary_trace_is_monotone_and_invertible():
    f = square_map()
    assert np.all(np.diff(f.node_angles) > 0)
    s = np.linspace(0, SQUARE.perimeter, 97, endpoint=False)
    th = f.boundary_angle(s)
    back = f.boundary_inverse(th)
    assert np.abs((back - s + 4) % 8 - 4).max() < 1e-9
    # the interpolated correspondence agrees with the map itself slightly inside
    z = SQUARE.point_at(s) * (1 - 1e-6)
    ang = np.angle(f(z) / np.exp(1j * th))
    assert np.abs(ang).max() < 1e-4


def test_cross_ratio_of_preimages_is_automorphism_invariant():
    f = square_map()
    pts = np.array([1 + 0.2j, -0.5 + 1j, -1 - 0.3j, 0.7 - 1j])
    w = f.boundary_map(pts)
    eta = cross_ratio_raw(*w)
    a = 0.3 - 0.4j
    aut = MobiusTransform(1, -a, -np.conj(a), 1)
    assert abs(cross_ratio_raw(*aut(w)) - eta) < 1e-12


def test_mobius_algebra():
    m = MobiusTransform(1 + 2j, 3, -1j, 2)
    n = MobiusTransform(0.5, -1j, 1, 1)
    z = np.array([0.3 + 0.1j, -2 + 5j, 7j])
    assert np.allclose((m @ n)(z), m(n(z)), atol=1e-13)
    assert np.allclose(m.inverse()(m(z)), z, atol=1e-13)
    with pytest.raises(InvalidParameter):
        MobiusTransform(1, 2, 2, 4)


def test_halfplane_to_disk():
    zj = 1 + np.exp(1j * 2.0)
    fwd, inv = halfplane_disk(zj, theta=0.7)
    x = np.linspace(-50, 50, 1001)
    assert np.abs(np.abs(fwd(x)) - 1).max() < 1e-15 * 4
    rng = np.random.default_rng(0)
    z = rng.normal(size=1000) * 3 + 1j * np.abs(rng.normal(size=1000)) * 3
    assert np.abs(inv(fwd(z)) - z).max() < 1e-12
    assert np.all(np.abs(fwd(z)) < 1)
    direct = np.exp(0.7j) * ((1j + 1 - zj) / (1j + 1 - np.conj(zj)))
    assert abs(fwd(1j) - direct) < 1e-15
    with pytest.raises(InvalidParameter):
        halfplane_disk(0.5 + 0.5j)


def test_half_disk_to_halfplane_marks():
    psi = half_disk_to_halfplane()
    assert psi(0) == pytest.approx(1)
    arc = np.exp(1j * np.linspace(0.1, 3.0, 20))
    w = psi(arc)
    assert np.abs(w.imag).max() < 1e-12 and np.all(w.real < 0)
    assert psi(-1 + 0j) == 0


def test_semi_ball_pullback_identity_and_scaling():
    c = semi_ball_pullback(lambda w: w, 0.3)
    assert np.allclose(np.abs(c), 0.3) and np.all(c.imag >= 0)
    c = semi_ball_pullback(lambda w: w / 2, 0.3)
    assert np.allclose(np.abs(c), 0.15)
    with pytest.raises(InvalidParameter):
        semi_ball_pullback(lambda w: w, 0.0)


def test_semi_ball_pullback_into_half_disk_matches_root_finding():
    psi = half_disk_to_halfplane()

    def inverse(w):
        s = np.sqrt(w)
        return (s - 1) / (s + 1)

    curve = semi_ball_pullback(inverse, 0.5, center=1.0, n=33)
    for z, t in zip(curve, np.linspace(0, np.pi, 33)):
        target = 1 + 0.5 * np.exp(1j * t)

        def eq(p):
            r = psi(complex(p[0], p[1])) - target
            return [r.real, r.imag]

        x, y = fsolve(eq, [z.real + 1e-3, z.imag + 1e-3], xtol=1e-12)
        assert abs(complex(x, y) - z) < 1e-6
    # endpoints land on the real diameter of the half-disk
    assert abs(curve[0].imag) < 1e-12 and abs(curve[-1].imag) < 1e-12


def test_inner_outer_approximations_of_disk():
    spec = DomainSpec.disk(radius=1.0)
    marks = [1, 1j, -1, -1j]
    ap = inner_outer_approx(spec, marks, 0.05)
    dense = spec.point_at(np.linspace(0, spec.perimeter, 2000, endpoint=False))
    assert hausdorff_sets(ap.inner.boundary, dense) <= 0.05
    assert hausdorff_sets(ap.outer.boundary, dense) <= 0.05
    for m, p, q in zip(marks, ap.inner.marked_points, ap.outer.marked_points):
        assert abs(m - p) <= 0.05 and abs(m - q) <= 0.05


def test_inner_outer_of_square_are_nested():
    ap = inner_outer_approx(SQUARE, [1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j], 0.1, fmap=square_map())
    assert np.all(winding_number(SQUARE.boundary, ap.inner.boundary) != 0)
    assert np.all(winding_number(SQUARE.boundary, ap.outer.boundary) == 0)
    assert np.all(winding_number(ap.outer.boundary, SQUARE.boundary) != 0)


def test_cardy_value_on_approximants_converges():
    rect = DomainSpec.rectangle(0, 2, 0, 1)
    marks = [0j, 2 + 0j, 2 + 1j, 1j]
    target = cardy_phi(CardyQuery(rect, *marks))
    errs = []
    for eps in (0.2, 0.1, 0.05, 0.025):
        ap = inner_outer_approx(rect, marks, eps)
        errs.append(max(abs(cardy_phi(CardyQuery(d, *d.marked_points)) - target) for d in (ap.inner, ap.outer)))
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.02


def test_kernel_convergence_constant_and_scaled_disks():
    grid = disk_grid(15)
    rep = kernel_convergence_check([lambda z: z] * 3, lambda z: z, grid)
    assert rep.deviations == [0.0, 0.0, 0.0]
    maps = [riemann_map(DomainSpec.disk(radius=1 + 1 / n), 0j) for n in range(1, 9)]
    rep = kernel_convergence_check(maps, lambda z: z, grid)
    assert rep.deviations == pytest.approx([1 / (n + 1) for n in range(1, 9)], rel=1e-9)
    assert rep.monotone


def test_kernel_convergence_of_perturbed_squares():
    base = SQUARE.point_at(np.linspace(0, 8, 400, endpoint=False))
    limit = riemann_map(DomainSpec.polygon(base), 0j)
    grid = 0.5 * disk_grid(9)
    maps = []
    for n in (4, 8, 16, 32, 64):
        bump = 1 + 0.02 / n * np.sin(6 * np.angle(base))
        maps.append(riemann_map(DomainSpec.polygon(base * bump), 0j))
    rep = kernel_convergence_check(maps, limit, grid)
    assert rep.monotone and rep.deviations[-1] < 1e-3
