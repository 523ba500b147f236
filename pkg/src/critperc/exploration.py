"""Exploration paths in Jordan sets of hexagons and the pieces they leave behind.

The exploration from ``x`` to ``y`` starts on the edge ``e_x`` just outside the
domain and keeps blue on its right and yellow on its left.  Cells outside the
domain get a fictitious colour from the boundary arc of the vertex where they
are met: blue on the right arc (counterclockwise from ``x`` to ``y``), yellow
on the left arc.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .hexlattice import (
    BLUE, CORNERS, DEC, DIR_INDEX, DIRS, INC, YELLOW, DiscreteDomain,
    edge_head, edge_tail, positions, vertex_sides,
)

MONO_BLUE = "blue"
MONO_YELLOW = "yellow"
PM = "pm"

LEFT = "left"
RIGHT = "right"


class OnExploredSet(ValueError):
    pass


class DegeneratePiece(RuntimeError):
    pass


@dataclass
class ExplorationPath:
    """Edges of the exploration (``e_x`` excluded) and the explored cells.

    ``explored`` maps each cell of the domain touched by the path to its colour,
    in the order the cells were met; ``explored_step[c]`` is the number of path
    edges at the moment ``c`` was looked at.
    """

    domain: DiscreteDomain
    x: int
    y: int
    edges: list
    explored: dict
    explored_step: dict
    stopped_at: int | None = None

    @property
    def tip(self) -> int:
        return edge_head(self.edges[-1]) if self.edges else self.x

    @property
    def complete(self) -> bool:
        return self.tip == self.y

    @property
    def gamma_blue(self) -> set[int]:
        return {c for c, v in self.explored.items() if v == BLUE}

    @property
    def gamma_yellow(self) -> set[int]:
        return {c for c, v in self.explored.items() if v == YELLOW}

    def vertices(self) -> list[int]:
        return [self.x] + [edge_head(e) for e in self.edges]

    def points(self):
        return positions(self.vertices(), self.domain.mesh)

    def __len__(self) -> int:
        return len(self.edges)


class Explorer:
    """Incremental exploration with lazily queried colours."""

    def __init__(self, domain: DiscreteDomain, x: int, y: int, colors: Mapping[int, int]):
        self.domain = domain
        self.x = x
        self.y = y
        self.colors = colors
        self.sides = vertex_sides(domain, x, y)
        L, R = domain.e_edge(x)
        self.L, self.R = L, R
        self.i = DIR_INDEX[R - L]
        self.edges: list = []
        self.explored: dict = {}
        self.explored_step: dict = {}

    @property
    def tip(self) -> int:
        return self.L + CORNERS[self.i]

    @property
    def done(self) -> bool:
        return self.tip == self.y

    def run(self, stop_vertices=None, max_steps: int | None = None) -> "Explorer":
        """Advance until the tip reaches ``y``, a vertex in ``stop_vertices`` or
        ``max_steps`` further edges have been added."""
        hexes = self.domain.hexes
        colors = self.colors
        sides = self.sides
        explored = self.explored
        step_of = self.explored_step
        edges = self.edges
        append = edges.append
        L, R, i = self.L, self.R, self.i
        y = self.y
        limit = 6 * len(hexes) + 12
        budget = max_steps if max_steps is not None else limit
        stop = stop_vertices or ()
        n = 0
        while n < budget:
            v = L + CORNERS[i]
            if v == y:
                break
            if edges and v in stop:
                break
            xi = L + DIRS[INC[i]]
            if xi in hexes:
                c = explored.get(xi)
                if c is None:
                    c = colors[xi]
                    explored[xi] = c
                    step_of[xi] = len(edges)
            else:
                c = sides[v]
            if c:
                R = xi
                i = INC[i]
            else:
                L = xi
                i = DEC[i]
            append((L, R))
            n += 1
            if len(edges) > limit:
                raise RuntimeError("exploration failed to terminate")
        self.L, self.R, self.i = L, R, i
        return self

    def result(self) -> ExplorationPath:
        tip = self.tip
        return ExplorationPath(self.domain, self.x, self.y, list(self.edges), dict(self.explored),
                               dict(self.explored_step), None if tip == self.y else tip)


def explore(domain: DiscreteDomain, x: int, y: int, colors: Mapping[int, int]) -> ExplorationPath:
    """Full exploration path from ``x`` to ``y``."""
    return Explorer(domain, x, y, colors).run().result()


def explore_until(domain: DiscreteDomain, x: int, y: int, colors: Mapping[int, int],
                  stop: Iterable[int] | Callable | None = None, max_steps: int | None = None) -> ExplorationPath:
    """Exploration stopped at the first tip vertex in ``stop`` (a set of
    vertices) or the first step after which ``stop(explorer)`` is true."""
    ex = Explorer(domain, x, y, colors)
    if callable(stop):
        while not ex.done:
            ex.run(max_steps=1)
            if stop(ex):
                break
            if max_steps is not None and len(ex.edges) >= max_steps:
                break
    else:
        ex.run(stop_vertices=set(stop) if stop is not None else None, max_steps=max_steps)
    return ex.result()


# --------------------------------------------------------------------------
# excursions


@dataclass(frozen=True)
class Excursion:
    side: str
    start: int  # index of the first edge in the path
    stop: int  # one past the last edge

    def edges(self, path: ExplorationPath) -> list:
        return path.edges[self.start:self.stop]

    def endpoints(self, path: ExplorationPath) -> tuple[int, int]:
        return edge_tail(path.edges[self.start]), edge_head(path.edges[self.stop - 1])


def boundary_flags(path: ExplorationPath, side: str) -> list[bool]:
    hexes = path.domain.hexes
    k = 0 if side == LEFT else 1
    return [e[k] not in hexes for e in path.edges]


def decompose_excursions(path: ExplorationPath, side: str = LEFT) -> list[Excursion]:
    """Maximal runs of path edges that are not boundary edges on ``side``."""
    if side not in (LEFT, RIGHT):
        raise ValueError(side)
    flags = boundary_flags(path, side)
    out = []
    start = None
    for k, on in enumerate(flags):
        if not on and start is None:
            start = k
        elif on and start is not None:
            out.append(Excursion(side, start, k))
            start = None
    if start is not None:
        out.append(Excursion(side, start, len(flags)))
    return out


# --------------------------------------------------------------------------
# pieces


@dataclass(eq=False)
class DomainPiece:
    """A component of the domain left unexplored by a path.

    ``bc`` describes the real colours just outside the piece: monochromatic
    blue or yellow, or ``PM`` with natural endpoints ``x`` and ``y`` where the
    colour changes (blue on the counterclockwise arc from ``x`` to ``y``).
    """

    domain: DiscreteDomain
    bc: str
    type_tag: int
    touches: frozenset
    x: int | None = None
    y: int | None = None
    creating_excursion: Excursion | None = None
    pending: "PendingLoop | None" = field(default=None, repr=False)
    diameter: float = 0.0

    @property
    def hexes(self) -> frozenset:
        return self.domain.hexes

    def __len__(self) -> int:
        return len(self.domain.hexes)


def unexplored_components(domain: DiscreteDomain, explored) -> list[set[int]]:
    rest = set(domain.hexes) - set(explored)
    comps = []
    while rest:
        seed = max(rest)
        rest.discard(seed)
        comp = {seed}
        todo = [seed]
        while todo:
            c = todo.pop()
            for d in DIRS:
                n = c + d
                if n in rest:
                    rest.discard(n)
                    comp.add(n)
                    todo.append(n)
        comps.append(comp)
    return comps


def _arc_of_boundary_edges(domain: DiscreteDomain, x: int, y: int) -> dict:
    """Map each boundary edge (inside, outside) of ``domain`` to LEFT or RIGHT."""
    vi = domain.vertex_index
    kx, ky = vi[x], vi[y]
    n = len(domain.boundary_edges)
    span = (ky - kx) % n
    return {e: (RIGHT if (k - kx) % n < span else LEFT) for k, e in enumerate(domain.boundary_edges)}


def split_domains(path: ExplorationPath, real_color: Callable[[int], int] | None = None,
                  parent_bc: str = MONO_BLUE) -> list[DomainPiece]:
    """Pieces of ``path.domain`` minus the explored cells, with boundary
    conditions and type tags relative to the parent's boundary condition.

    ``real_color`` gives the colour of cells outside the parent domain; by
    default they are all blue.
    """
    D = path.domain
    if not path.complete:
        raise ValueError("split needs a complete exploration path")
    explored = path.explored
    real = real_color or (lambda c: BLUE)
    arc = _arc_of_boundary_edges(D, path.x, path.y)
    pieces = []
    for comp in unexplored_components(D, explored):
        sub = DiscreteDomain(frozenset(comp), D.mesh)
        touches = set()
        cols = []
        for e in sub.boundary_edges:
            o = e[1]
            c = explored.get(o)
            if c is not None:
                touches.add("GB" if c == BLUE else "GY")
            else:
                touches.add(arc[e])
                c = real(o)
            cols.append(c)
        pieces.append(_make_piece(sub, frozenset(touches), cols, parent_bc))
    return pieces


def _make_piece(sub: DiscreteDomain, touches: frozenset, cols: list, parent_bc: str) -> DomainPiece:
    n = len(cols)
    trans = [k for k in range(n) if cols[k - 1] != cols[k]]
    x = y = None
    if not trans:
        bc = MONO_BLUE if cols[0] == BLUE else MONO_YELLOW
    elif len(trans) == 2:
        bc = PM
        for k in trans:
            if not sub.is_e_position(k):
                raise DegeneratePiece("colour change away from an e-vertex")
            if cols[k] == BLUE:
                x = sub.boundary_vertices[k]
            else:
                y = sub.boundary_vertices[k]
    else:
        raise DegeneratePiece(f"{len(trans)} colour changes around a piece")
    swap = parent_bc == MONO_YELLOW
    gy, gb = ("GB", "GY") if swap else ("GY", "GB")
    near, far = (RIGHT, LEFT) if swap else (LEFT, RIGHT)
    if gy in touches and near in touches:
        tag = 1
    elif gb in touches and far in touches:
        tag = 2
    elif touches == {gy}:
        tag = 3
    elif touches == {gb}:
        tag = 4
    else:
        tag = 0
    return DomainPiece(sub, bc, tag, touches, x, y)


def discrete_filling(path: ExplorationPath, t: int | None = None) -> set[int]:
    """Cells explored in the first ``t`` steps together with the cells they
    (with the boundary) cut off from the target ``y``."""
    D = path.domain
    if t is None:
        t = len(path.edges)
    explored = {c for c, s in path.explored_step.items() if s < t}
    target = [c for c in (path.y - k for k in CORNERS) if c in D.hexes]
    free = set(D.hexes) - explored
    reach = set()
    todo = [c for c in target if c in free]
    reach.update(todo)
    while todo:
        c = todo.pop()
        for d in DIRS:
            n = c + d
            if n in free and n not in reach:
                reach.add(n)
                todo.append(n)
    return set(D.hexes) - reach


def containing_piece(pieces: list[DomainPiece], c: int) -> DomainPiece:
    for p in pieces:
        if c in p.domain.hexes:
            return p
    raise OnExploredSet(c)


# --------------------------------------------------------------------------
# loops waiting for the pieces they enclose


@dataclass(eq=False)
class PendingLoop:
    """A contour known up to the exploration paths of some PM pieces.

    ``parts`` lists edge runs (tuples) and pieces in loop order.
    """

    parts: list
    waiting: int
    extent: float = 0.0
    filled: dict = field(default_factory=dict)

    def fill(self, piece: DomainPiece, edges) -> bool:
        self.filled[id(piece)] = tuple(edges)
        self.waiting -= 1
        return self.waiting == 0

    def edges(self) -> tuple:
        out = []
        for part in self.parts:
            if isinstance(part, DomainPiece):
                out.extend(self.filled[id(part)])
            else:
                out.extend(part)
        return tuple(out)


def pending_loops(path: ExplorationPath, pieces: list[DomainPiece], parent_bc: str,
                  real_color: Callable[[int], int]) -> list[PendingLoop]:
    """Attach each PM piece to the excursion enclosing it and return one pending
    loop per excursion on the side where excursions trace real contours."""
    if parent_bc == PM:
        return []
    D = path.domain
    side = LEFT if parent_bc == MONO_BLUE else RIGHT
    ccw = parent_bc == MONO_BLUE
    excursions = decompose_excursions(path, side)
    starts: dict[int, object] = {}
    for ex in excursions:
        starts[ex.endpoints(path)[0]] = ex
    pm = [p for p in pieces if p.bc == PM]
    for p in pm:
        if p.x in starts:
            raise DegeneratePiece("two loop segments start at one vertex")
        starts[p.x] = p
    bv = D.boundary_vertices
    be = D.boundary_edges
    vi = D.vertex_index
    n = len(be)
    explored = path.explored

    def colour(c):
        v = explored.get(c)
        return real_color(c) if v is None else v

    def connector(v):
        run = []
        k = vi[v]
        while True:
            if ccw:
                e = be[k]
                k = (k + 1) % n
            else:
                k = (k - 1) % n
                e = (be[k][1], be[k][0])
            if colour(e[0]) != YELLOW or colour(e[1]) != BLUE:
                raise DegeneratePiece("connector runs along a monochromatic edge")
            run.append(e)
            nxt = starts.get(bv[k])
            if nxt is not None:
                return tuple(run), nxt
            if len(run) > n:
                raise DegeneratePiece("connector does not close")

    out = []
    used = set()
    for ex in excursions:
        a, b = ex.endpoints(path)
        parts = [tuple(ex.edges(path))]
        members = []
        v = b
        while True:
            if v in starts:
                run, nxt = (), starts[v]
            else:
                run, nxt = connector(v)
            if run:
                parts.append(run)
            if nxt is ex:
                break
            if not isinstance(nxt, DomainPiece) or id(nxt) in used:
                raise DegeneratePiece("excursion closes through a foreign segment")
            used.add(id(nxt))
            members.append(nxt)
            parts.append(nxt)
            v = nxt.y
        loop = PendingLoop(parts, len(members))
        for p in members:
            p.pending = loop
            p.creating_excursion = ex
        out.append(loop)
    if len(used) != len(pm):
        raise DegeneratePiece("PM piece not enclosed by any excursion")
    return out


def fictitious_color(path: ExplorationPath, c: int) -> int | None:
    """Colour the exploration assigns to ``c``: its real colour if explored,
    the arc colour for outside cells (``None`` if ``c`` touches both arcs)."""
    v = path.explored.get(c)
    if v is not None:
        return v
    arc = _arc_of_boundary_edges(path.domain, path.x, path.y)
    sides = {s for e, s in arc.items() if e[1] == c}
    if len(sides) != 1:
        return None
    return BLUE if sides == {RIGHT} else YELLOW


def daughter_overlaps(path: ExplorationPath, pieces: list[DomainPiece]) -> list[frozenset]:
    """Shared s-boundaries of pieces from one exploration that are not a pair
    of adjacent cells of one colour (under the exploration's colouring)."""
    rings = [set(p.domain.s_boundary) for p in pieces]
    bad = []
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            S = rings[i] & rings[j]
            if not S:
                continue
            ok = False
            if len(S) == 2:
                a, b = sorted(S)
                cols = {fictitious_color(path, a), fictitious_color(path, b)}
                ok = (b - a) in DIR_INDEX and len(cols) == 1 and None not in cols
            if not ok:
                bad.append(frozenset(S))
    return bad
