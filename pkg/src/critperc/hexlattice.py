"""Hexagonal cells, vertices and Jordan domains on the triangular lattice.

Cells (hexagons) and hexagon vertices live in one integer plane.  A point
(X, Y) of that plane sits at ``(X * sqrt(3) / 2, Y / 2) * mesh`` in the
complex plane.  The cell with axial coordinates (q, r) has its centre at
X = 2q + r, Y = 3r, and its six corners at the offsets ``_CORNER_XY``.
Both cells and vertices are packed into a single Python int so that moving
to a neighbour or to a corner is one integer addition.

A directed edge is a pair ``(left, right)`` of adjacent cells.  Walking along
the shared hexagon edge with ``left`` on the left hand side goes from the
corner at angle ``60 i - 30`` to the corner at angle ``60 i + 30`` of
``left``, where ``right - left == DIRS[i]``.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

SHIFT = 20
_HALF = 1 << (SHIFT - 1)
SQRT3 = math.sqrt(3.0)


def pack(x: int, y: int) -> int:
    return (x << SHIFT) + y


def unpack(k: int) -> tuple[int, int]:
    x = (k + _HALF) >> SHIFT
    return x, k - (x << SHIFT)


_DIR_QR = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))
_CORNER_XY = ((1, 1), (0, 2), (-1, 1), (-1, -1), (0, -2), (1, -1))

DIRS: tuple[int, ...] = tuple(pack(2 * dq + dr, 3 * dr) for dq, dr in _DIR_QR)
CORNERS: tuple[int, ...] = tuple(pack(x, y) for x, y in _CORNER_XY)
DIR_INDEX = {d: i for i, d in enumerate(DIRS)}
INC = (1, 2, 3, 4, 5, 0)
DEC = (5, 0, 1, 2, 3, 4)

BLUE = 1
YELLOW = 0


class HexCoord(NamedTuple):
    q: int
    r: int

    @property
    def id(self) -> int:
        return cell(self.q, self.r)


class HexVertex(NamedTuple):
    owner: HexCoord
    corner: int

    @property
    def id(self) -> int:
        return self.owner.id + CORNERS[self.corner]


class EmptyApproximation(ValueError):
    pass


class NotEVertex(ValueError):
    pass


class NotSimplyConnected(ValueError):
    pass


def cell(q: int, r: int) -> int:
    return pack(2 * q + r, 3 * r)


def cell_qr(c: int) -> HexCoord:
    x, y = unpack(c)
    r = y // 3
    return HexCoord((x - r) // 2, r)


def is_cell(k: int) -> bool:
    x, y = unpack(k)
    return y % 3 == 0 and (x - y // 3) % 2 == 0


def is_vertex(k: int) -> bool:
    x, y = unpack(k)
    if y % 3 == 0:
        return False
    # every vertex is a corner of exactly three cells
    return any(is_cell(k - c) for c in CORNERS)


def position(k: int, mesh: float = 1.0) -> complex:
    x, y = unpack(k)
    return complex(x * SQRT3 / 2 * mesh, y / 2 * mesh)


def positions(ks: Iterable[int], mesh: float = 1.0) -> np.ndarray:
    a = np.fromiter(ks, dtype=np.int64)
    x = (a + _HALF) >> SHIFT
    y = a - (x << SHIFT)
    return (x * (SQRT3 / 2) + 1j * (y / 2)) * mesh


def neighbors(c: int) -> list[int]:
    """The six cells adjacent to ``c`` in counterclockwise order from the east."""
    return [c + d for d in DIRS]


def corner(c: int, i: int) -> int:
    return c + CORNERS[i % 6]


def corners(c: int) -> list[int]:
    return [c + k for k in CORNERS]


def vertex_cells(v: int) -> tuple[int, int, int]:
    """The three cells sharing vertex ``v``."""
    _, y = unpack(v)
    if y % 3 == 2:
        return v - CORNERS[1], v - CORNERS[3], v - CORNERS[5]
    return v - CORNERS[4], v - CORNERS[0], v - CORNERS[2]


def edge_dir(e: tuple[int, int]) -> int:
    return DIR_INDEX[e[1] - e[0]]


def edge_head(e: tuple[int, int]) -> int:
    """Vertex the directed edge points to."""
    return e[0] + CORNERS[DIR_INDEX[e[1] - e[0]]]


def edge_tail(e: tuple[int, int]) -> int:
    return e[0] + CORNERS[DEC[DIR_INDEX[e[1] - e[0]]]]


def edge_endpoints(e: tuple[int, int]) -> tuple[int, int]:
    i = DIR_INDEX[e[1] - e[0]]
    return e[0] + CORNERS[DEC[i]], e[0] + CORNERS[i]


def ahead(e: tuple[int, int]) -> int:
    """The cell touching the head vertex of ``e`` that is neither side of ``e``."""
    return e[0] + DIRS[INC[DIR_INDEX[e[1] - e[0]]]]


def reverse(e: tuple[int, int]) -> tuple[int, int]:
    return e[1], e[0]


def undirected(e: tuple[int, int]) -> tuple[int, int]:
    return (e[0], e[1]) if e[0] < e[1] else (e[1], e[0])


def hex_round(z: complex | np.ndarray, mesh: float = 1.0):
    """Cell id of the hexagon containing the point ``z`` (array aware)."""
    z = np.asarray(z, dtype=complex) / mesh
    # fractional axial coordinates of a pointy-top layout with circumradius 1
    fr = z.imag * (2.0 / 3.0)
    fq = z.real / SQRT3 - z.imag / 3.0
    fs = -fq - fr
    q = np.rint(fq)
    r = np.rint(fr)
    s = np.rint(fs)
    dq = np.abs(q - fq)
    dr = np.abs(r - fr)
    ds = np.abs(s - fs)
    fix_q = (dq > dr) & (dq > ds)
    fix_r = ~fix_q & (dr > ds)
    q = np.where(fix_q, -r - s, q)
    r = np.where(fix_r, -q - s, r)
    q = q.astype(np.int64)
    r = r.astype(np.int64)
    out = ((2 * q + r) << SHIFT) + 3 * r
    return int(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# continuum domains


@dataclass
class DomainSpec:
    """A bounded planar domain given by a closed counterclockwise polyline."""

    boundary: np.ndarray
    marked_points: tuple[complex, ...] = ()

    def __post_init__(self):
        b = np.asarray(self.boundary, dtype=complex).ravel()
        if len(b) > 1 and b[0] == b[-1]:
            b = b[:-1]
        if len(b) < 3:
            raise ValueError("boundary needs at least three points")
        if _signed_area(b) < 0:
            b = b[::-1].copy()
        self.boundary = b
        self.marked_points = tuple(complex(p) for p in self.marked_points)

    @classmethod
    def disk(cls, center: complex = 0j, radius: float = 1.0, n: int = 720, marked=()):
        t = 2 * np.pi * np.arange(n) / n
        return cls(center + radius * np.exp(1j * t), marked)

    @classmethod
    def polygon(cls, points: Sequence[complex], marked=()):
        return cls(np.asarray(points, dtype=complex), marked)

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float, marked=()):
        return cls(np.array([x0 + 1j * y0, x1 + 1j * y0, x1 + 1j * y1, x0 + 1j * y1]), marked)

    @classmethod
    def half_disk(cls, radius: float = 1.0, n: int = 720, marked=()):
        t = np.pi * np.arange(n + 1) / n
        return cls(radius * np.exp(1j * t), marked)

    @property
    def diameter(self) -> float:
        b = self.boundary
        return float(np.max(np.abs(b[:, None] - b[None, :]))) if len(b) < 3000 else _hull_diameter(b)

    @property
    def perimeter(self) -> float:
        b = self.boundary
        return float(np.sum(np.abs(np.roll(b, -1) - b)))

    def contains(self, z) -> np.ndarray:
        return winding_number(self.boundary, z) != 0

    def arclength_positions(self) -> np.ndarray:
        b = self.boundary
        seg = np.abs(np.roll(b, -1) - b)
        return np.concatenate([[0.0], np.cumsum(seg)[:-1]])

    def point_at(self, s: float | np.ndarray):
        """Boundary point at arclength ``s`` measured from ``boundary[0]``."""
        b = self.boundary
        nxt = np.roll(b, -1)
        seg = np.abs(nxt - b)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        s = np.mod(np.asarray(s, dtype=float), cum[-1])
        k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(b) - 1)
        t = (s - cum[k]) / np.where(seg[k] > 0, seg[k], 1.0)
        return b[k] + t * (nxt[k] - b[k])

    def arclength_of(self, z: complex) -> float:
        """Arclength coordinate of the boundary point nearest to ``z``."""
        b = self.boundary
        nxt = np.roll(b, -1)
        d = nxt - b
        t = np.clip(((z - b) * np.conj(d)).real / np.maximum(np.abs(d) ** 2, 1e-300), 0, 1)
        proj = b + t * d
        k = int(np.argmin(np.abs(proj - z)))
        cum = np.concatenate([[0.0], np.cumsum(np.abs(d))])
        return float(cum[k] + t[k] * abs(d[k]))

    def to_json(self) -> str:
        return json.dumps({
            "boundary": [[p.real, p.imag] for p in self.boundary],
            "marked_points": [[p.real, p.imag] for p in self.marked_points],
        })

    @classmethod
    def from_json(cls, s: str) -> "DomainSpec":
        d = json.loads(s)
        return cls(np.array([complex(a, b) for a, b in d["boundary"]]),
                   tuple(complex(a, b) for a, b in d.get("marked_points", [])))


def _signed_area(b: np.ndarray) -> float:
    x, y = b.real, b.imag
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _hull_diameter(pts: np.ndarray) -> float:
    from scipy.spatial import ConvexHull

    xy = np.column_stack([pts.real, pts.imag])
    if len(xy) >= 3:
        try:
            xy = xy[ConvexHull(xy).vertices]
        except Exception:  # collinear input
            pass
    z = xy[:, 0] + 1j * xy[:, 1]
    return float(np.max(np.abs(z[:, None] - z[None, :])))


def winding_number(poly: np.ndarray, z) -> np.ndarray:
    """Winding number of the closed polyline ``poly`` around each point of ``z``.

    Points within ``1e-12`` (relative to the polygon size) of an edge count
    as outside, which makes hexagons touching the boundary fail the
    containment test.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    a = np.asarray(poly, dtype=complex)
    b = np.roll(a, -1)
    scale = max(float(np.max(np.abs(a - a.mean()))), 1e-300)
    tol = 1e-12 * scale
    wn = np.zeros(z.shape, dtype=np.int64)
    on_edge = np.zeros(z.shape, dtype=bool)
    for p, q in zip(a, b):
        d = q - p
        w = z - p
        cross = d.real * w.imag - d.imag * w.real
        up = (p.imag <= z.imag) & (q.imag > z.imag) & (cross > 0)
        down = (p.imag > z.imag) & (q.imag <= z.imag) & (cross < 0)
        wn += up.astype(np.int64) - down.astype(np.int64)
        L = abs(d)
        if L > 0:
            t = (w.real * d.real + w.imag * d.imag) / (L * L)
            dist = np.abs(cross) / L
            on_edge |= (dist <= tol) & (t >= -tol / L) & (t <= 1 + tol / L)
    wn[on_edge] = 0
    return wn


# --------------------------------------------------------------------------
# discrete domains


@dataclass(eq=False)
class DiscreteDomain:
    """A Jordan set of hexagons together with its counterclockwise boundary.

    ``boundary_edges[k]`` is the directed edge (inside, outside) running from
    ``boundary_vertices[k]`` to ``boundary_vertices[k + 1]``.
    """

    hexes: frozenset
    mesh: float = 1.0
    boundary_edges: tuple = field(default=(), repr=False)
    boundary_vertices: tuple = field(default=(), repr=False)
    _vindex: dict | None = field(default=None, repr=False)
    _eindex: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        if not isinstance(self.hexes, frozenset):
            self.hexes = frozenset(self.hexes)
        if not self.hexes:
            raise EmptyApproximation("empty set of hexagons")
        if not self.boundary_edges:
            edges = _boundary_cycle(self.hexes)
            self.boundary_edges = edges
            self.boundary_vertices = tuple(edge_tail(e) for e in edges)

    @property
    def vertex_index(self) -> dict:
        if self._vindex is None:
            self._vindex = {v: k for k, v in enumerate(self.boundary_vertices)}
        return self._vindex

    @property
    def edge_index(self) -> dict:
        if self._eindex is None:
            self._eindex = {e: k for k, e in enumerate(self.boundary_edges)}
        return self._eindex

    def __len__(self) -> int:
        return len(self.hexes)

    def __contains__(self, c: int) -> bool:
        return c in self.hexes

    @property
    def e_vertices(self) -> tuple[int, ...]:
        return tuple(v for k, v in enumerate(self.boundary_vertices) if self.is_e_position(k))

    def is_e_position(self, k: int) -> bool:
        e = self.boundary_edges
        return e[k - 1][0] == e[k][0]

    def is_e_vertex(self, v: int) -> bool:
        k = self.vertex_index.get(v)
        return k is not None and self.is_e_position(k)

    @property
    def s_boundary(self) -> tuple[int, ...]:
        """Outside cells adjacent to the domain in counterclockwise order."""
        out = []
        for _, o in self.boundary_edges:
            if not out or out[-1] != o:
                out.append(o)
        while len(out) > 1 and out[0] == out[-1]:
            out.pop()
        return tuple(out)

    def is_jordan(self) -> bool:
        s = self.s_boundary
        if len(set(s)) != len(s):
            return False
        # consecutive cells of the s-boundary must be lattice neighbours
        return all((b - a) in DIR_INDEX for a, b in zip(s, s[1:] + s[:1])) if len(s) > 1 else True

    def e_edge(self, v: int) -> tuple[int, int]:
        """The edge e_v outside the domain whose head is the e-vertex ``v``.

        Its left cell is the outside cell before ``v`` in counterclockwise order,
        its right cell the one after.
        """
        k = self.vertex_index.get(v)
        if k is None or not self.is_e_position(k):
            raise NotEVertex(v)
        return self.boundary_edges[k - 1][1], self.boundary_edges[k][1]

    def points(self) -> np.ndarray:
        return positions(self.boundary_vertices, self.mesh)

    def to_json(self) -> str:
        return json.dumps({"mesh": self.mesh, "hexes": [list(cell_qr(c)) for c in sorted(self.hexes)]})

    @classmethod
    def from_json(cls, s: str) -> "DiscreteDomain":
        d = json.loads(s)
        return cls(frozenset(cell(q, r) for q, r in d["hexes"]), d["mesh"])


def _boundary_cycle(hexes: frozenset) -> tuple:
    start_cell = max(hexes)  # largest X, then largest Y: its east neighbour is outside
    e0 = (start_cell, start_cell + DIRS[0])
    edges = [e0]
    L, R = e0
    i = 0
    limit = 6 * len(hexes) + 6
    while True:
        xi = L + DIRS[INC[i]]
        if xi in hexes:
            L = xi
            i = DEC[i]
        else:
            R = xi
            i = INC[i]
        if L == e0[0] and R == e0[1]:
            break
        edges.append((L, R))
        if len(edges) > limit:
            raise RuntimeError("boundary walk did not close")
    total = sum(1 for c in hexes for d in DIRS if c + d not in hexes)
    if total != len(edges):
        raise NotSimplyConnected("domain has holes or is disconnected")
    return tuple(edges)


def connected_components(cells: Iterable[int]) -> list[set[int]]:
    rest = set(cells)
    comps = []
    while rest:
        seed = rest.pop()
        comp = {seed}
        todo = [seed]
        while todo:
            c = todo.pop()
            for d in DIRS:
                n = c + d
                if n in rest:
                    rest.remove(n)
                    comp.add(n)
                    todo.append(n)
        comps.append(comp)
    return comps


def _holes(hexes: set[int]) -> list[set[int]]:
    """Bounded components of the complement of ``hexes``."""
    xy = [unpack(c) for c in hexes]
    x0, x1 = min(x for x, _ in xy) - 4, max(x for x, _ in xy) + 4
    y0, y1 = min(y for _, y in xy) - 6, max(y for _, y in xy) + 6
    ring = {c + d for c in hexes for d in DIRS} - hexes
    start = min(ring)  # a westmost outside cell lies on the unbounded face
    outside = {start}
    todo = [start]
    while todo:
        c = todo.pop()
        for d in DIRS:
            n = c + d
            if n in hexes or n in outside:
                continue
            x, y = unpack(n)
            if x0 <= x <= x1 and y0 <= y <= y1:
                outside.add(n)
                todo.append(n)
    inner = [c for c in ring if c not in outside]
    holes = []
    seen: set[int] = set()
    for s in inner:
        if s in seen:
            continue
        comp = {s}
        todo = [s]
        while todo:
            c = todo.pop()
            for d in DIRS:
                n = c + d
                if n not in hexes and n not in comp:
                    comp.add(n)
                    todo.append(n)
        seen |= comp
        holes.append(comp)
    return holes


def delta_approximation(spec: DomainSpec, mesh: float, origin: complex = 0j) -> DiscreteDomain:
    """Largest Jordan set of closed hexagons contained in the domain.

    Hexagons whose six corners lie strictly inside the polyline (and that
    contain no polyline vertex) are kept, the largest connected component is
    retained and cells are peeled off until the result is a Jordan set.
    """
    b = spec.boundary
    lo = (b.real.min() - origin.real, b.imag.min() - origin.imag)
    hi = (b.real.max() - origin.real, b.imag.max() - origin.imag)
    rmin = math.floor(lo[1] / (1.5 * mesh)) - 1
    rmax = math.ceil(hi[1] / (1.5 * mesh)) + 1
    qs, rs = [], []
    for r in range(rmin, rmax + 1):
        qlo = math.floor(lo[0] / (SQRT3 * mesh) - r / 2) - 1
        qhi = math.ceil(hi[0] / (SQRT3 * mesh) - r / 2) + 1
        qs.extend(range(qlo, qhi + 1))
        rs.extend([r] * (qhi - qlo + 1))
    q = np.array(qs, dtype=np.int64)
    r = np.array(rs, dtype=np.int64)
    ids = ((2 * q + r) << SHIFT) + 3 * r
    centres = positions(ids, mesh) + origin
    ok = spec.contains(centres)
    for cx, cy in _CORNER_XY:
        idx = np.flatnonzero(ok)
        ok[idx] = spec.contains(centres[idx] + complex(cx * SQRT3 / 2 * mesh, cy / 2 * mesh))
    # reject hexagons that swallow a reflex vertex of the polyline
    if ok.any():
        inside_ids = set(ids[ok].tolist())
        bad = set(hex_round(b - origin, mesh).tolist())
        keep = inside_ids - bad
    else:
        keep = set()
    if not keep:
        raise EmptyApproximation(f"no hexagon of mesh {mesh} fits inside the domain")
    return DiscreteDomain(frozenset(_jordanize(keep)), mesh)


def _jordanize(cells: set[int]) -> set[int]:
    cells = max(connected_components(cells), key=lambda s: (len(s), max(s)))
    for _ in range(10 * len(cells) + 10):
        holes = _holes(cells)
        if holes:
            # cut a channel of domain cells from the hole to the outside
            h = holes[0]
            path = _channel(cells, h)
            cells = cells - set(path)
            cells = max(connected_components(cells), key=lambda s: (len(s), max(s)))
            continue
        dom = DiscreteDomain(frozenset(cells))
        s = dom.s_boundary
        seen, repeat = set(), None
        for o in s:
            if o in seen:
                repeat = o
                break
            seen.add(o)
        if repeat is None and dom.is_jordan():
            return cells
        if repeat is None:
            repeat = s[0]
        # drop the domain cells pinched against the repeated outside cell
        cells = cells - {repeat + d for d in DIRS}
        if not cells:
            raise EmptyApproximation("peeling removed every hexagon")
        cells = max(connected_components(cells), key=lambda s: (len(s), max(s)))
    raise RuntimeError("could not reduce the hexagon set to a Jordan set")


def _channel(cells: set[int], hole: set[int]) -> list[int]:
    """Shortest run of ``cells`` connecting ``hole`` to the unbounded complement."""
    prev: dict[int, int | None] = {}
    todo = deque()
    for c in hole:
        for d in DIRS:
            n = c + d
            if n in cells and n not in prev:
                prev[n] = None
                todo.append(n)
    while todo:
        c = todo.popleft()
        for d in DIRS:
            n = c + d
            if n not in cells and n not in hole:
                # reached the outside (holes other than this one are fine too)
                out = [c]
                while prev[out[-1]] is not None:
                    out.append(prev[out[-1]])
                return out
            if n in cells and n not in prev:
                prev[n] = c
                todo.append(n)
    raise RuntimeError("hole is not enclosed by the domain")  # pragma: no cover


# --------------------------------------------------------------------------
# boundary queries


def classify_e_vertices(domain: DiscreteDomain) -> list[int]:
    return list(domain.e_vertices)


def _arc_positions(domain: DiscreteDomain, x: int, y: int) -> tuple[int, int]:
    if not domain.is_e_vertex(x):
        raise NotEVertex(x)
    if not domain.is_e_vertex(y):
        raise NotEVertex(y)
    if x == y:
        raise ValueError("x and y must differ")
    vi = domain.vertex_index
    return vi[x], vi[y]


def boundary_arcs(domain: DiscreteDomain, x: int, y: int):
    """Right and left boundary arcs between e-vertices ``x`` and ``y``.

    The right arc is returned as counterclockwise (inside, outside) edges from
    ``x`` to ``y``.  The left arc is returned in the direction an exploration
    walks along it, i.e. clockwise from ``x`` to ``y`` with reversed edges.
    """
    kx, ky = _arc_positions(domain, x, y)
    n = len(domain.boundary_edges)
    E = domain.boundary_edges
    right = [E[(kx + j) % n] for j in range((ky - kx) % n)]
    left = [reverse(E[(kx - 1 - j) % n]) for j in range((kx - ky) % n)]
    return right, left


def vertex_sides(domain: DiscreteDomain, x: int, y: int) -> dict[int, int]:
    """Map boundary vertex -> BLUE on the right arc, YELLOW on the left arc.

    The endpoints ``x`` and ``y`` themselves are assigned to the left arc; the
    exploration never needs their value.
    """
    kx, ky = _arc_positions(domain, x, y)
    n = len(domain.boundary_vertices)
    span = (ky - kx) % n
    out = {}
    for k, v in enumerate(domain.boundary_vertices):
        out[v] = BLUE if 0 < (k - kx) % n < span else YELLOW
    return out


def nearest_e_vertex(domain: DiscreteDomain, p: complex) -> int:
    """e-vertex closest to ``p``; ties go to the first one met clockwise from
    the boundary vertex of largest real part (then largest imaginary part)."""
    bv = domain.boundary_vertices
    pts = positions(bv, domain.mesh)
    n = len(bv)
    start = max(range(n), key=lambda k: (round(pts[k].real, 12), round(pts[k].imag, 12)))
    best, best_d = None, math.inf
    tol = 1e-9 * domain.mesh ** 2
    for j in range(n):
        k = (start - j) % n
        if not domain.is_e_position(k):
            continue
        d = abs(pts[k] - p) ** 2
        if d < best_d - tol:
            best, best_d = bv[k], d
    return best
