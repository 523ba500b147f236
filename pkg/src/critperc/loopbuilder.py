"""Discovery of every cluster boundary in a domain by iterated explorations.

The construction keeps a priority queue of unexplored pieces.  Each step pops
the piece with the largest extent ``d_m`` (ties broken by the first dyadic
point it contains), explores it, splits what is left and records the
contours that close.  Pieces with monochromatic surroundings are explored
between two far apart e-vertices; pieces with a colour change are explored
between their natural endpoints and complete a pending contour.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .exploration import (
    MONO_BLUE, PM, DegeneratePiece, DomainPiece, ExplorationPath, PendingLoop,
    daughter_overlaps, explore, pending_loops, split_domains,
)
from .hexlattice import (
    BLUE, CORNERS, YELLOW, DiscreteDomain, _hull_diameter, ahead, edge_head, edge_tail,
    hex_round, positions, unpack, vertex_sides,
)
from .percolation import OrientedLoop

__all__ = [
    "OrientedLoop", "LoopSet", "ConstructionState", "PriorityOrder", "dm", "dm2", "select_endpoints",
    "pick_pair", "start", "step", "run", "run_until", "reconstruct_chordal",
]


def dm2(domain: DiscreteDomain) -> int:
    """Exact integer form of ``d_m``: ``d_m = mesh * sqrt(dm2) / 2``."""
    xs, ys = [], []
    for v in domain.boundary_vertices:
        x, y = unpack(v)
        xs.append(x)
        ys.append(y)
    dx = max(xs) - min(xs)
    dy = max(ys) - min(ys)
    return max(3 * dx * dx, dy * dy)


def dm(domain: DiscreteDomain) -> float:
    """Largest horizontal or vertical distance between boundary points."""
    return domain.mesh * math.sqrt(dm2(domain)) / 2


def pick_pair(points, horizontal: bool = True) -> tuple[int, int]:
    """Indices of the extreme pair among ``points`` (coordinate pairs).

    Along the chosen axis the candidates are the points of extreme coordinate;
    the pair with the largest separation in the other coordinate wins and the
    remaining ties go to the smallest other coordinates.  The first index
    is the one with the smaller coordinate along the axis.
    """
    a, b = (0, 1) if horizontal else (1, 0)
    lo = min(p[a] for p in points)
    hi = max(p[a] for p in points)
    low = [i for i, p in enumerate(points) if p[a] == lo]
    high = [i for i, p in enumerate(points) if p[a] == hi]
    return max(((u, w) for u in low for w in high),
               key=lambda uw: (abs(points[uw[0]][b] - points[uw[1]][b]), -points[uw[0]][b], -points[uw[1]][b]))


def select_endpoints(piece, rule: str = "horizontal") -> tuple[int, int]:
    """Two e-vertices far apart along the longer coordinate direction.

    A piece with a colour change keeps its natural endpoints.  Otherwise the
    axis of larger extent is used (horizontal on equality) and
    :func:`pick_pair` chooses among the e-vertices.  ``rule="vertical"``
    always uses the vertical axis; it serves to check that the loops found
    do not depend on the rule.
    """
    if isinstance(piece, DomainPiece):
        if piece.bc == PM:
            return piece.x, piece.y
        piece = piece.domain
    ev = piece.e_vertices
    if len(ev) < 2:
        raise DegeneratePiece("fewer than two e-vertices")
    pts = [unpack(v) for v in ev]
    if rule == "vertical":
        horizontal = False
    else:
        dx = max(p[0] for p in pts) - min(p[0] for p in pts)
        dy = max(p[1] for p in pts) - min(p[1] for p in pts)
        horizontal = 3 * dx * dx >= dy * dy
    i, j = pick_pair(pts, horizontal)
    return ev[i], ev[j]


@dataclass(frozen=True)
class PriorityOrder:
    """Dyadic tie-breaking: the rank of a cell is that of the first point
    ``(j, k) / 2**n`` it contains when points are listed by increasing ``n``
    and lexicographically in ``(j, k)`` within a level."""

    mesh: float

    def keys(self, cells) -> dict[int, tuple[int, int, int]]:
        cells = np.fromiter(cells, dtype=np.int64)
        pos = positions(cells, self.mesh)
        out: dict[int, tuple[int, int, int]] = {}
        todo = set(cells.tolist())
        x0, x1 = pos.real.min() - self.mesh, pos.real.max() + self.mesh
        y0, y1 = pos.imag.min() - self.mesh, pos.imag.max() + self.mesh
        n = 0
        while todo:
            s = 2.0 ** -n
            j = np.arange(math.ceil(x0 / s), math.floor(x1 / s) + 1)
            k = np.arange(math.ceil(y0 / s), math.floor(y1 / s) + 1)
            if len(j) and len(k):
                J, K = np.meshgrid(j, k, indexing="ij")
                ids = hex_round((J * s + 1j * K * s).ravel(), self.mesh)
                uniq, first = np.unique(ids, return_index=True)
                jj, kk = J.ravel(), K.ravel()
                for c, f in zip(uniq.tolist(), first.tolist()):
                    if c in todo:
                        out[c] = (n, int(jj[f]), int(kk[f]))
                        todo.discard(c)
            n += 1
        return out

    def dense_points(self, n_max: int, box: tuple[float, float, float, float]):
        """The dyadic points of levels ``0..n_max`` inside ``box`` in rank order."""
        x0, x1, y0, y1 = box
        seen = set()
        for n in range(n_max + 1):
            s = 2.0 ** -n
            for j in range(math.ceil(x0 / s), math.floor(x1 / s) + 1):
                for k in range(math.ceil(y0 / s), math.floor(y1 / s) + 1):
                    z = (j * s, k * s)
                    if z not in seen:
                        seen.add(z)
                        yield n, j, k


@dataclass
class LoopSet:
    loops: list
    mesh: float = 1.0

    def keys(self) -> set:
        return {l.key for l in self.loops}

    def __len__(self) -> int:
        return len(self.loops)

    def __iter__(self):
        return iter(self.loops)

    def edge_owner(self) -> dict:
        return {e: i for i, l in enumerate(self.loops) for e in l.edges}

    def to_json(self) -> str:
        import json

        out = []
        for l in self.loops:
            out.append({"vertices": [list(unpack(v)) for v in l.vertices], "orientation": l.orientation})
        return json.dumps({"mesh": self.mesh, "loops": out})


@dataclass
class StepRecord:
    dm: float
    bc: str
    size: int
    n_pieces: int
    max_daughter_dm: float
    loops_closed: int


@dataclass
class ConstructionState:
    domain: DiscreteDomain
    colors: Mapping[int, int]
    rule: str = "horizontal"
    check: bool = False
    queue: list = field(default_factory=list)
    loops: list = field(default_factory=list)
    steps: int = 0
    records: list = field(default_factory=list)
    big: int = 0
    eps: float | None = None
    census: bool = False
    overlap_violations: int = 0
    label_census: dict = field(default_factory=dict)
    _rank: dict = field(default_factory=dict)
    _counter: itertools.count = field(default_factory=itertools.count)

    def real_color(self, c: int) -> int:
        return self.colors[c] if c in self.domain.hexes else BLUE

    def loopset(self) -> LoopSet:
        return LoopSet(list(self.loops), self.domain.mesh)

    def alive(self) -> list[DomainPiece]:
        return [item[-1] for item in self.queue]


def _rank_of(state: ConstructionState, piece: DomainPiece) -> tuple:
    r = state._rank
    return min(r[c] for c in piece.domain.hexes)


def _ring_points(pieces) -> set:
    pts = set()
    for p in pieces:
        for _, o in p.domain.boundary_edges:
            pts.update(o + k for k in CORNERS)
    return pts


def _ring_diameter(pieces) -> float:
    return _hull_diameter(positions(_ring_points(pieces), pieces[0].domain.mesh))


def _push(state: ConstructionState, piece: DomainPiece, key2: int) -> None:
    # with a target eps, pieces that may still hide a contour that large go first
    big = state.eps is not None and piece.diameter >= state.eps
    item = (not big, -key2, _rank_of(state, piece), next(state._counter), piece)
    heapq.heappush(state.queue, item)
    if big:
        state.big += 1


def start(domain: DiscreteDomain, colors: Mapping[int, int], rule: str = "horizontal",
          check: bool = False, eps: float | None = None) -> ConstructionState:
    """Initial state: the whole domain as one piece with blue outside."""
    state = ConstructionState(domain, colors, rule, check, eps=eps)
    state._rank = PriorityOrder(domain.mesh).keys(domain.hexes)
    piece = DomainPiece(domain, MONO_BLUE, 0, frozenset())
    if eps is not None:
        piece.diameter = _ring_diameter([piece])
    piece.key2 = dm2(domain)
    _push(state, piece, piece.key2)
    return state


def _close(state: ConstructionState, pending: PendingLoop) -> OrientedLoop:
    loop = OrientedLoop(pending.edges(), state.domain.mesh)
    if state.check:
        _validate_loop(state, loop)
    state.loops.append(loop)
    return loop


def _validate_loop(state: ConstructionState, loop: OrientedLoop) -> None:
    if not loop.is_closed():
        raise DegeneratePiece("pasted loop is not closed")
    if not loop.is_simple():
        raise DegeneratePiece("pasted loop is not simple")
    for L, R in loop.edges:
        if state.real_color(L) != YELLOW or state.real_color(R) != BLUE:
            raise DegeneratePiece("pasted loop crosses a monochromatic edge")


def step(state: ConstructionState) -> ExplorationPath | None:
    """Explore the highest priority piece; returns its exploration path."""
    if not state.queue:
        return None
    item = heapq.heappop(state.queue)
    piece: DomainPiece = item[-1]
    if state.eps is not None and piece.diameter >= state.eps:
        state.big -= 1
    D = piece.domain
    x, y = select_endpoints(piece, state.rule)
    path = explore(D, x, y, state.colors)
    closed = 0
    if piece.bc == PM and piece.pending.fill(piece, path.edges):
        _close(state, piece.pending)
        closed += 1
    real = state.real_color
    pieces = split_domains(path, real, parent_bc=piece.bc)
    pending = pending_loops(path, pieces, piece.bc, real)
    for p in pieces:
        p.key2 = dm2(p.domain)
    for pl in pending:
        members = [p for p in pl.parts if isinstance(p, DomainPiece)]
        if not members:
            _close(state, pl)
            closed += 1
            continue
        # pieces of one pending loop are explored together, at the priority of the largest
        top = max(p.key2 for p in members)
        for p in members:
            p.key2 = top
        if state.eps is not None:
            pts = _ring_points(members)
            for part in pl.parts:
                if not isinstance(part, DomainPiece):
                    pts.update(edge_tail(e) for e in part)
            pl.extent = _hull_diameter(positions(pts, D.mesh))
            for p in members:
                p.diameter = pl.extent
    if state.eps is not None:
        for p in pieces:
            if p.bc != PM:
                p.diameter = _ring_diameter([p])
    for p in pieces:
        if state.check and p.bc == PM and p.pending is None:
            raise DegeneratePiece("PM piece without a pending loop")
        _push(state, p, p.key2)
    if state.census:
        state.overlap_violations += len(daughter_overlaps(path, pieces))
        if state.eps is not None:
            # label census: pieces alive with d_m >= eps / sqrt(2)
            thr = 2 * state.eps ** 2 / D.mesh ** 2  # dm2 >= (2 eps / (mesh sqrt 2))**2
            alive = sum(1 for it in state.queue if dm2(it[-1].domain) >= thr)
            state.label_census[state.steps] = alive
    daughters = max((dm(p.domain) for p in pieces), default=0.0)
    state.records.append(StepRecord(dm(D), piece.bc, len(D), len(pieces), daughters, closed))
    state.steps += 1
    return path


def run(domain: DiscreteDomain, colors: Mapping[int, int], rule: str = "horizontal", check: bool = False) -> LoopSet:
    """Run the construction to exhaustion and return every loop found."""
    state = start(domain, colors, rule, check)
    while state.queue:
        step(state)
    return state.loopset()


def run_until(domain: DiscreteDomain, colors: Mapping[int, int], eps: float, rule: str = "horizontal",
              check: bool = False, census: bool = False) -> tuple[LoopSet, int, ConstructionState]:
    """Step until no queued piece can still hide a contour of diameter ``eps``.

    The diameter of a monochromatic piece is that of its cells together with
    the cells just outside it.  A piece completing a pending contour carries
    the diameter of everything that contour can occupy.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    state = start(domain, colors, rule, check, eps=eps)
    state.census = census
    while state.big > 0:
        step(state)
    return state.loopset(), state.steps, state


# --------------------------------------------------------------------------
# chordal path from loops


def reconstruct_chordal(loops, domain: DiscreteDomain, x: int, y: int, eps: float = 0.0) -> tuple[list, int]:
    """Rebuild the exploration path from ``x`` to ``y`` out of the loops of the
    configuration in ``domain`` (blue outside).

    The walk follows the left boundary clockwise and switches onto a loop
    whenever one leaves the boundary there; it drops back to the boundary when
    the loop runs along the left arc counterclockwise.  Only loops of
    diameter larger than ``eps`` are used, so with ``eps = 0`` and all loops
    the result is exactly the exploration path.  Returns the edges and the
    number of loop segments used.
    """
    hexes = domain.hexes
    sides = vertex_sides(domain, x, y)
    succ = {}
    for l in loops:
        if eps > 0 and l.diameter <= eps:
            continue
        E = l.edges
        for a, b in zip(E, E[1:] + E[:1]):
            succ[a] = b
    cur = domain.e_edge(x)
    out = []
    segments = 0
    on_loop = False
    limit = 6 * len(hexes) + 12
    while edge_head(cur) != y:
        v = edge_head(cur)
        if on_loop:
            nxt = succ[cur]
            if nxt[1] not in hexes and sides.get(v) == YELLOW:
                # the loop runs ccw along the left arc; the path stays on the boundary
                nxt = (nxt[1], cur[1])
                on_loop = False
        else:
            xi = ahead(cur)
            cand = (xi, cur[1])
            if cand in succ:
                nxt = cand
                on_loop = True
                segments += 1
            elif xi in hexes:
                nxt = (cur[0], xi)
            else:
                nxt = cand
        out.append(nxt)
        cur = nxt
        if len(out) > limit:
            raise RuntimeError("reconstruction did not reach y")
    return out, segments


def nesting_parents(loops) -> list[int | None]:
    """Innermost loop geometrically enclosing each loop (None at top level)."""
    from .hexlattice import winding_number

    loops = list(loops)
    areas = [abs(l.signed_area) for l in loops]
    probes = []
    for l in loops:
        L, R = l.edges[0]
        inside = L if l.signed_area > 0 else R
        probes.append(positions([inside], l.mesh)[0])
    probes = np.array(probes, dtype=complex)
    parent: list[int | None] = [None] * len(loops)
    best = [math.inf] * len(loops)
    for j, l in enumerate(loops):
        inside = winding_number(l.points(), probes) != 0
        for i in np.flatnonzero(inside):
            if i != j and areas[j] > areas[i] and areas[j] < best[i]:
                best[i] = areas[j]
                parent[i] = j
    return parent


def alternation_violations(loops) -> int:
    """Nested pairs (child, innermost parent) with equal orientation."""
    loops = list(loops)
    par = nesting_parents(loops)
    return sum(1 for i, p in enumerate(par) if p is not None and loops[i].orientation == loops[p].orientation)
