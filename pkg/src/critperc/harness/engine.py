"""Fast Monte Carlo kernels shared by the experiments.

Crossing events are decided for whole batches of colourings at once: the
cells of a quad are laid out on an axial ``(r, q)`` array and a stack of
colourings is labelled by :func:`scipy.ndimage.label` with the hexagonal
neighbourhood in each slice.  Colours come from the seeded site hash of
:mod:`critperc.percolation`, sample ``i`` using stream ``i``, so a run is
replayable from its seed and any sub-range of samples can be computed on
its own.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import ndimage

from ..exploration import Explorer
from ..hexlattice import (
    BLUE, DIRS, SQRT3, DiscreteDomain, DomainSpec, cell, cell_qr, delta_approximation, nearest_e_vertex,
    positions,
)
from ..percolation import LazyColoring, site_colors

__all__ = ["QuadGrid", "ExitSampler", "parallel_map", "chunks"]

# hexagonal neighbourhood on an (r, q) array
_HEX = np.array([[0, 1, 1], [1, 1, 1], [1, 1, 0]], dtype=bool)
_HEX3 = np.zeros((3, 3, 3), dtype=bool)
_HEX3[1] = _HEX


def chunks(n: int, size: int) -> list[tuple[int, int]]:
    return [(a, min(n, a + size)) for a in range(0, n, size)]


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """``[fn(x) for x in items]``, in order, over ``workers`` processes."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items), os.cpu_count() or 1)) as ex:
        return list(ex.map(fn, items))


@dataclass
class QuadGrid:
    """A set of cells with two marked boundary arcs, on an axial array."""

    ids: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    shape: tuple[int, int]
    start: np.ndarray  # positions in ``ids`` of the cells along the first arc
    goal: np.ndarray
    mesh: float = 1.0

    @classmethod
    def from_cells(cls, cells: Iterable[int], start: Iterable[int], goal: Iterable[int], mesh: float = 1.0):
        ids = np.array(sorted(cells), dtype=np.int64)
        qr = np.array([cell_qr(int(c)) for c in ids])
        q, r = qr[:, 0], qr[:, 1]
        pos = {int(c): k for k, c in enumerate(ids)}
        s = np.array(sorted(pos[c] for c in start), dtype=np.int64)
        g = np.array(sorted(pos[c] for c in goal), dtype=np.int64)
        if not len(s) or not len(g):
            raise ValueError("both arcs need at least one cell")
        return cls(ids, r - r.min(), q - q.min(), (int(r.max() - r.min() + 1), int(q.max() - q.min() + 1)), s, g,
                   mesh)

    @classmethod
    def rhombus(cls, n: int, mesh: float = 1.0):
        """``n`` by ``n`` cells with sides along two lattice directions at 60
        degrees; the arcs are the two sides ``q = 0`` and ``q = n - 1``.
        Swapping ``q`` and ``r`` maps it onto itself, so a blue crossing
        between these sides has probability exactly one half."""
        cells = [cell(q, r) for q in range(n) for r in range(n)]
        return cls.from_cells(cells, [cell(0, r) for r in range(n)], [cell(n - 1, r) for r in range(n)], mesh)

    @classmethod
    def from_domain(cls, spec: DomainSpec, mesh: float, marks: Sequence[complex], domain: DiscreteDomain | None = None):
        """Discretisation of ``spec`` with arcs ``z1 z2`` and ``z3 z4``: each
        cell next to the outside joins the arc containing its nearest
        boundary point."""
        D = domain or delta_approximation(spec, mesh)
        hexes = D.hexes
        edge = [c for c in hexes if any(c + d not in hexes for d in DIRS)]
        per = spec.perimeter
        s = np.array([spec.arclength_of(spec.boundary[0])] + [spec.arclength_of(complex(z)) for z in marks])[1:]
        cs = np.array([spec.arclength_of(complex(z)) for z in positions(edge, mesh)])

        def on(a, b):
            return (cs - s[a]) % per <= (s[b] - s[a]) % per

        start = [c for c, f in zip(edge, on(0, 1)) if f]
        goal = [c for c, f in zip(edge, on(2, 3)) if f]
        return cls.from_cells(hexes, start, goal, mesh)

    def __len__(self) -> int:
        return len(self.ids)

    def colours(self, seed: int, streams: Iterable[int]) -> np.ndarray:
        return np.stack([site_colors(seed, int(k), self.ids) for k in streams])

    def crossings(self, seed: int, lo: int, hi: int, colour: int = BLUE) -> np.ndarray:
        """Crossing indicators for samples ``lo .. hi - 1``."""
        col = self.colours(seed, range(lo, hi)) == colour
        grid = np.zeros((hi - lo,) + self.shape, dtype=bool)
        grid[:, self.rows, self.cols] = col
        lab, _ = ndimage.label(grid, structure=_HEX3)
        flat = lab[:, self.rows, self.cols]
        mark = np.zeros(int(lab.max()) + 1, dtype=bool)
        mark[flat[:, self.start].ravel()] = True
        mark[0] = False
        return mark[flat[:, self.goal]].any(axis=1)


@dataclass
class ExitSampler:
    """Where the exploration from ``a`` towards ``b`` first touches a
    target part of the boundary, for the lattice discretisation of a domain.

    ``target`` selects boundary vertices by position; the recorded value is
    ``angle(position)`` about ``centre`` unless ``coordinate`` is given.
    """

    domain: DiscreteDomain
    x: int
    y: int
    stop: frozenset
    support: np.ndarray  # coordinates of every target vertex, sorted
    coordinate: Callable

    @classmethod
    def build(cls, spec: DomainSpec, mesh: float, a: complex, b: complex, target: Callable,
              coordinate: Callable = np.angle):
        D = delta_approximation(spec, mesh)
        bv = np.array(D.boundary_vertices, dtype=np.int64)
        w = positions(bv, mesh)
        sel = target(w, mesh)
        stop = frozenset(bv[sel].tolist())
        x, y = nearest_e_vertex(D, a), nearest_e_vertex(D, b)
        stop = stop - {x}
        sup = np.unique(coordinate(positions(sorted(stop), mesh)))
        return cls(D, x, y, stop, sup, coordinate)

    def sample(self, seed: int, lo: int, hi: int) -> np.ndarray:
        out = np.empty(hi - lo)
        for k in range(lo, hi):
            ex = Explorer(self.domain, self.x, self.y, LazyColoring(seed, k)).run(stop_vertices=self.stop)
            out[k - lo] = self.coordinate(positions([ex.tip], self.domain.mesh))[0]
        return out

    def snap(self, values: np.ndarray) -> np.ndarray:
        """Nearest point of the support (cells split at midpoints)."""
        sup = self.support
        mid = (sup[:-1] + sup[1:]) / 2
        return sup[np.searchsorted(mid, values)]


def upper_arc(w: np.ndarray, mesh: float) -> np.ndarray:
    """Boundary vertices of a half-disk lying on its arc rather than on
    the diameter (the lowest row of vertices and the one above it)."""
    return w.imag > w.imag.min() + mesh


def lattice_mesh_for_side(side: float, mesh: float) -> int:
    """Number of cells along a side of length ``side`` at the given mesh."""
    return max(2, int(round(side / (SQRT3 * mesh))))
