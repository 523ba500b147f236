from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from critperc.exploration import PM, explore
from critperc.hexlattice import (
    BLUE, DIRS, DiscreteDomain, NotSimplyConnected, boundary_arcs, cell, nearest_e_vertex, position,
    unpack,
)
from critperc.loopbuilder import (
    PriorityOrder, alternation_violations, dm, dm2, pick_pair, reconstruct_chordal, run, run_until,
    select_endpoints, start, step,
)
from critperc.percolation import sample, trace_contours

from .conftest import disk


def test_dm_of_single_hexagon_is_two_circumradii():
    D = DiscreteDomain(frozenset({cell(0, 0)}), mesh=0.5)
    assert dm(D) == pytest.approx(1.0)


@st.composite
def blobs(draw):
    cells = {cell(0, 0)}
    for _ in range(draw(st.integers(0, 30))):
        base = draw(st.sampled_from(sorted(cells)))
        cells.add(base + DIRS[draw(st.integers(0, 5))])
    return cells


@settings(max_examples=40, deadline=None)
@given(blobs())
def test_dm_equals_pairwise_extent_of_boundary_points(cells):
    try:
        D = DiscreteDomain(frozenset(cells))
    except NotSimplyConnected:
        return
    z = D.points()
    ref = max(max(abs(a.real - b.real), abs(a.imag - b.imag)) for a, b in itertools.combinations(z, 2))
    assert dm(D) == pytest.approx(ref)
    assert dm2(D) == round(4 * ref * ref)


def _pair_oracle(points):
    """Exhaustive pair enumeration: max horizontal gap, then max vertical gap,
    then smallest imaginary parts."""
    best = None
    for i, j in itertools.permutations(range(len(points)), 2):
        (a, b), (c, d) = points[i], points[j]
        if a > c:
            continue
        key = (c - a, abs(d - b), -b, -d)
        if best is None or key > best[0]:
            best = (key, (i, j))
    return best[1]


def test_pick_pair_on_rectangle_corners():
    pts = [(0, 0), (2, 0), (0, 1), (2, 1)]
    i, j = pick_pair(pts)
    assert {pts[i], pts[j]} == {(0, 0), (2, 1)}
    assert (i, j) == _pair_oracle(pts)


@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=2, max_size=12, unique=True))
def test_pick_pair_matches_exhaustive_oracle(pts):
    if len({p[0] for p in pts}) < 2:
        return
    assert pick_pair(pts) == _pair_oracle(pts)


def test_select_endpoints_is_deterministic_and_on_extreme_columns():
    D = disk(7.0)
    x, y = select_endpoints(D)
    assert (x, y) == select_endpoints(D)
    xs = [unpack(v)[0] for v in D.e_vertices]
    assert unpack(x)[0] == min(xs) and unpack(y)[0] == max(xs)


def test_pm_piece_keeps_natural_endpoints():
    D = disk(10.0)
    st_ = start(D, sample(D.hexes, 1).as_dict())
    step(st_)
    pm = [it[-1] for it in st_.queue if it[-1].bc == PM]
    assert pm
    for p in pm:
        assert select_endpoints(p) == (p.x, p.y)


def test_priority_keys_match_brute_force_enumeration():
    D = disk(3.0, 0.5)
    keys = PriorityOrder(0.5).keys(D.hexes)
    z = np.array([position(c, 0.5) for c in D.hexes])
    box = (z.real.min() - 1, z.real.max() + 1, z.imag.min() - 1, z.imag.max() + 1)
    todo = set(D.hexes)
    ref = {}
    from critperc.hexlattice import hex_round

    for n, j, k in PriorityOrder(0.5).dense_points(6, box):
        c = int(hex_round(np.array([complex(j, k) / 2**n]), 0.5)[0])
        if c in todo:
            ref[c] = (n, j, k)
            todo.discard(c)
    assert not todo
    assert keys == ref
    # ranks give a total order
    assert len(set(keys.values())) == len(keys)


def test_first_step_on_disk_closes_no_loop():
    D = disk(1.0, 1 / 16)
    st_ = start(D, sample(D.hexes, 3, mesh=1 / 16).as_dict())
    step(st_)
    assert st_.loops == []


@pytest.mark.parametrize("seed", range(16))
def test_run_to_exhaustion_equals_contour_oracle(seed):
    D = disk(2.0 + 2 * seed)
    col = sample(D.hexes, seed).as_dict()
    ls = run(D, col, check=True)
    assert ls.keys() == trace_contours(col, D.hexes, BLUE).keys()


def test_every_pm_step_closes_exactly_its_contour():
    D = disk(12.0)
    col = sample(D.hexes, 9).as_dict()
    oracle = trace_contours(col, D.hexes, BLUE).keys()
    st_ = start(D, col, check=True)
    while st_.queue:
        n = len(st_.loops)
        step(st_)
        for lp in st_.loops[n:]:
            assert lp.key in oracle and lp.is_simple()


@pytest.mark.parametrize("seed", range(6))
def test_coupling_invariance_across_endpoint_rules(seed):
    D = disk(9.0 + seed)
    col = sample(D.hexes, seed).as_dict()
    assert run(D, col, rule="horizontal").keys() == run(D, col, rule="vertical").keys()


def test_run_until_large_eps_takes_no_steps():
    D = disk(1.0, 1 / 16)
    ls, K, _ = run_until(D, sample(D.hexes, 0, mesh=1 / 16).as_dict(), eps=5.0)
    assert K == 0 and len(ls) == 0
    with pytest.raises(ValueError):
        run_until(D, {}, eps=0.0)


@pytest.mark.parametrize("seed", range(6))
def test_run_until_finds_every_contour_larger_than_eps(seed):
    D = disk(1.0, 1 / 16)
    col = sample(D.hexes, seed, mesh=1 / 16).as_dict()
    ls, K, state = run_until(D, col, eps=0.25)
    full = trace_contours(col, D.hexes, BLUE, mesh=1 / 16)
    big = {l.key for l in full.loops if l.diameter > 0.25}
    assert big <= ls.keys()
    assert ls.keys() <= full.keys()
    assert all(it[-1].diameter < 0.25 for it in state.queue)


@pytest.mark.parametrize("seed", range(4))
def test_nested_loops_alternate_and_daughters_meet_only_at_two_hexagons(seed):
    D = disk(16.0)
    col = sample(D.hexes, 50 + seed).as_dict()
    _, _, state = run_until(D, col, eps=0.5, census=True)
    while state.queue:
        step(state)
    assert alternation_violations(state.loops) == 0
    assert state.overlap_violations == 0


def test_reconstruction_of_all_blue_is_the_left_arc(small_disk):
    D = small_disk
    x, y = nearest_e_vertex(D, -100j), nearest_e_vertex(D, 100j)
    col = {c: BLUE for c in D.hexes}
    edges, segs = reconstruct_chordal(run(D, col), D, x, y)
    assert edges == boundary_arcs(D, x, y)[1] and segs == 0


@pytest.mark.parametrize("seed", range(10))
def test_reconstruction_from_loops_equals_exploration(seed):
    D = disk(5.0 + seed)
    x, y = nearest_e_vertex(D, -100j), nearest_e_vertex(D, 100j)
    col = sample(D.hexes, seed).as_dict()
    loops = run(D, col)
    edges, _ = reconstruct_chordal(loops, D, x, y, eps=D.mesh / 2)
    assert edges == explore(D, x, y, col).edges


def test_reconstruction_with_huge_eps_uses_no_loops():
    D = disk(8.0)
    x, y = nearest_e_vertex(D, -100j), nearest_e_vertex(D, 100j)
    col = sample(D.hexes, 4).as_dict()
    edges, segs = reconstruct_chordal(run(D, col), D, x, y, eps=1e3)
    assert segs == 0
    assert edges == boundary_arcs(D, x, y)[1]
