from __future__ import annotations

import functools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from critperc.curvespace import (
    Curve, CurveSet, EmptySet, hausdorff_curvesets, hausdorff_sets, sphere_dist, uniform_dist,
)

finite = st.floats(-5, 5, allow_nan=False)
points = st.builds(complex, finite, finite)
polylines = st.lists(points, min_size=1, max_size=9)


def _frechet_oracle(a, b, ground=lambda u, v: abs(u - v)):
    """Recursive coupling distance, memoised over index pairs."""

    @functools.lru_cache(maxsize=None)
    def c(i, j):
        d = ground(a[i], b[j])
        if i == 0 and j == 0:
            return d
        if i == 0:
            return max(c(0, j - 1), d)
        if j == 0:
            return max(c(i - 1, 0), d)
        return max(min(c(i - 1, j), c(i - 1, j - 1), c(i, j - 1)), d)

    # warm the cache row by row to keep the recursion shallow
    for i in range(len(a)):
        for j in range(len(b)):
            c(i, j)
    return c(len(a) - 1, len(b) - 1)


@settings(max_examples=80, deadline=None)
@given(polylines, polylines)
def test_frechet_matches_recursive_oracle(a, b):
    assert uniform_dist(Curve(a), Curve(b)) == pytest.approx(_frechet_oracle(a, b), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(polylines, st.lists(st.integers(1, 4), min_size=9, max_size=9))
def test_vertex_reparametrisation_gives_exact_zero(a, reps):
    stretched = [z for z, k in zip(a, reps) for _ in range(k)]
    assert uniform_dist(Curve(a), Curve(stretched)) == 0.0
    assert uniform_dist(Curve(stretched), Curve(a)) == 0.0


@settings(max_examples=60, deadline=None)
@given(polylines, polylines, polylines)
def test_frechet_metric_axioms(a, b, c):
    A, B, C = Curve(a), Curve(b), Curve(c)
    assert uniform_dist(A, A) == 0.0
    assert uniform_dist(A, B) == uniform_dist(B, A)
    assert uniform_dist(A, C) <= uniform_dist(A, B) + uniform_dist(B, C) + 1e-12
    # the Fréchet distance dominates the Hausdorff distance of the traces
    assert uniform_dist(A, B) >= hausdorff_sets(a, b) - 1e-12
    # spherical ground metric is never larger than Euclidean
    assert uniform_dist(A, B, "sphere") <= uniform_dist(A, B) + 1e-12


def test_translated_segment_is_at_distance_of_the_translation():
    t = np.linspace(0, 1, 201)
    g = Curve(t.astype(complex))
    for v in (0.1, 0.7, 2.0):
        h = Curve(t + 1j * v)
        assert uniform_dist(g, h) == pytest.approx(v, abs=1e-15)
        assert uniform_dist(g, h) == pytest.approx(_frechet_oracle(list(g.vertices), list(h.vertices)))


def test_single_points():
    assert uniform_dist(Curve([0]), Curve([3 + 4j])) == pytest.approx(5.0)


def test_refinement_converges_within_chord_length():
    g = Curve(np.exp(1j * np.linspace(0, 3, 7)))
    for k in (2, 4, 16, 64):
        fine = g.refine(k)
        assert uniform_dist(g, fine) <= g.max_chord() / 2 + 1e-12
    assert uniform_dist(g.refine(3), g.refine(6)) <= g.max_chord() / 6 + 1e-12


def test_closed_curves_ignore_base_point_and_not_direction():
    z = np.exp(2j * np.pi * np.arange(12) / 12)
    a = Curve(z, closed=True)
    assert uniform_dist(a, Curve(np.roll(z, 5), closed=True)) == 0.0
    assert uniform_dist(a, Curve(z[::-1], closed=True)) > 0.5
    with pytest.raises(ValueError):
        uniform_dist(a, Curve(z))


def _stereo(z):
    if not np.isfinite(z):
        return np.array([0.0, 0.0, 1.0])
    r2 = abs(z) ** 2
    return np.array([2 * z.real, 2 * z.imag, r2 - 1]) / (1 + r2)


def _sphere_oracle(u, v):
    """Half the great-circle angle between stereographic images."""
    c = float(np.clip(_stereo(u) @ _stereo(v), -1, 1))
    return math.acos(c) / 2


@settings(max_examples=100, deadline=None)
@given(points, points, points)
def test_sphere_metric(u, v, w):
    assert sphere_dist(u, u) == 0.0
    assert sphere_dist(u, v) == pytest.approx(sphere_dist(v, u), abs=1e-15)
    assert sphere_dist(u, v) <= sphere_dist(u, w) + sphere_dist(w, v) + 1e-12
    assert sphere_dist(u, v) <= math.pi / 2
    assert sphere_dist(u, v) <= abs(u - v) + 1e-12
    assert sphere_dist(u, v) == pytest.approx(_sphere_oracle(u, v), abs=1e-7)


def test_sphere_distance_along_rays_matches_quadrature():
    inf = complex(math.inf, math.inf)
    ref, _ = quad(lambda r: 1 / (1 + r * r), 0, math.inf)
    assert sphere_dist(0, inf) == pytest.approx(math.pi / 2)
    assert sphere_dist(0, inf) == pytest.approx(ref, abs=1e-10)
    for z in (0.3, 2j, -4 + 1j, 1e3):
        ref, _ = quad(lambda r: 1 / (1 + r * r), 0, abs(z))
        assert sphere_dist(0, z) == pytest.approx(ref, abs=1e-10)
        ref, _ = quad(lambda r: 1 / (1 + r * r), abs(z), math.inf)
        assert sphere_dist(z, inf) == pytest.approx(ref, abs=1e-10)
    assert sphere_dist(inf, inf) == 0.0


def test_sphere_distance_is_euclidean_to_first_order():
    for z in (0, 0.5 + 0.5j, 3):
        h = 1e-6
        assert sphere_dist(z, z + h) / h == pytest.approx(1 / (1 + abs(z) ** 2), rel=1e-5)


def _curveset_oracle(F1, F2):
    d = [[_frechet_oracle(list(a.vertices), list(b.vertices)) for b in F2] for a in F1]
    one = max(min(row) for row in d)
    two = max(min(d[i][j] for i in range(len(F1))) for j in range(len(F2)))
    return max(one, two)


@settings(max_examples=30, deadline=None)
@given(st.lists(polylines, min_size=1, max_size=4), st.lists(polylines, min_size=1, max_size=4))
def test_curveset_hausdorff_matches_exhaustive_oracle(f1, f2):
    F1 = CurveSet([Curve(c) for c in f1])
    F2 = CurveSet([Curve(c) for c in f2])
    assert hausdorff_curvesets(F1, F2) == pytest.approx(_curveset_oracle(F1.curves, F2.curves), abs=1e-12)
    assert hausdorff_curvesets(F1, F1) == 0.0


def test_curveset_with_one_extra_curve():
    g = Curve([0, 1])
    h = Curve([1j, 1 + 1j])
    assert hausdorff_curvesets(CurveSet([g]), CurveSet([g, h])) == pytest.approx(uniform_dist(g, h))
    with pytest.raises(EmptySet):
        hausdorff_curvesets(CurveSet([]), CurveSet([g]))


@settings(max_examples=60, deadline=None)
@given(st.lists(points, min_size=1, max_size=30), st.lists(points, min_size=1, max_size=30))
def test_point_set_hausdorff_matches_double_loop(a, b):
    one = max(min(abs(x - y) for y in b) for x in a)
    two = max(min(abs(x - y) for x in a) for y in b)
    assert hausdorff_sets(a, b) == pytest.approx(max(one, two), abs=1e-12)
    assert hausdorff_sets(a, a) == 0.0


def test_point_set_hausdorff_trivial_cases():
    assert hausdorff_sets([0], [3 - 4j]) == pytest.approx(5.0)
    with pytest.raises(EmptySet):
        hausdorff_sets([], [1])
