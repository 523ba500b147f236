"""Site percolation on the triangular lattice.

Colours are drawn from a counter based hash of (seed, stream, site), so a site
has the same colour whether it is sampled eagerly over a region or lazily
the first time an exploration looks at it.
"""
from __future__ import annotations

import math
import struct
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .hexlattice import (
    BLUE, CORNERS, DIR_INDEX, DIRS, INC, YELLOW, DiscreteDomain, cell, cell_qr,
    edge_head, edge_tail, position, positions,
)

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB


def _mix64(z: int) -> int:
    z = (z + _GOLDEN) & _M64
    z = ((z ^ (z >> 30)) * _C1) & _M64
    z = ((z ^ (z >> 27)) * _C2) & _M64
    return z ^ (z >> 31)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_C1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_C2)
    return z ^ (z >> np.uint64(31))


def _stream_key(seed: int, stream: int) -> int:
    return _mix64(_mix64(seed & _M64) ^ (stream & _M64))


def site_color(seed: int, stream: int, site: int, p: float = 0.5) -> int:
    """Colour of one site: BLUE with probability ``p``."""
    h = _mix64(_stream_key(seed, stream) ^ (site & _M64))
    if p == 0.5:
        return h >> 63
    return int((h >> 11) * 2.0 ** -53 < p)


def site_colors(seed: int, stream: int, sites, p: float = 0.5) -> np.ndarray:
    """Vectorised :func:`site_color`; agrees with it bit for bit."""
    a = np.asarray(sites, dtype=np.int64).astype(np.uint64)
    h = _mix64_np(a ^ np.uint64(_stream_key(seed, stream)))
    if p == 0.5:
        return (h >> np.uint64(63)).astype(np.uint8)
    return ((h >> np.uint64(11)).astype(np.float64) * 2.0 ** -53 < p).astype(np.uint8)


class LazyColoring(dict):
    """Colours computed on first access and cached (a dict with ``__missing__``)."""

    def __init__(self, seed: int, stream: int = 0, p: float = 0.5):
        super().__init__()
        self.seed = seed
        self.stream = stream
        self.p = p
        self._key = _stream_key(seed, stream)

    def __missing__(self, site: int) -> int:
        h = _mix64(self._key ^ (site & _M64))
        v = (h >> 63) if self.p == 0.5 else int((h >> 11) * 2.0 ** -53 < self.p)
        self[site] = v
        return v


@dataclass
class Coloring:
    cells: np.ndarray
    colors: np.ndarray
    mesh: float = 1.0
    seed: int = 0
    stream: int = 0

    def as_dict(self) -> dict[int, int]:
        return dict(zip(self.cells.tolist(), self.colors.tolist()))

    def __len__(self) -> int:
        return len(self.cells)


def sample(region: Iterable[int], seed: int, stream: int = 0, mesh: float = 1.0, p: float = 0.5) -> Coloring:
    cells = np.fromiter(sorted(region), dtype=np.int64)
    return Coloring(cells, site_colors(seed, stream, cells, p), mesh, seed, stream)


# --------------------------------------------------------------------------
# run-length export


_MAGIC = b"HXRL"


def export_rle(coloring: Coloring) -> bytes:
    """Header (magic, float32 mesh, int16 q0, int16 r0, uint16 width, uint16 height)
    followed by (value, varint run length) pairs over the bounding box raster.
    Value 2 marks cells outside the coloured region."""
    qr = np.array([cell_qr(int(c)) for c in coloring.cells], dtype=np.int64).reshape(-1, 2)
    q0, r0 = qr.min(axis=0)
    w, h = qr.max(axis=0) - (q0, r0) + 1
    raster = np.full((h, w), 2, dtype=np.uint8)
    raster[qr[:, 1] - r0, qr[:, 0] - q0] = coloring.colors
    out = bytearray(_MAGIC + struct.pack("<fhhHH", coloring.mesh, q0, r0, w, h))
    flat = raster.ravel()
    change = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [len(flat)]])
    for s, e in zip(starts, ends):
        out.append(int(flat[s]))
        n = int(e - s)
        while True:
            b = n & 0x7F
            n >>= 7
            out.append(b | (0x80 if n else 0))
            if not n:
                break
    return bytes(out)


def import_rle(data: bytes) -> Coloring:
    if data[:4] != _MAGIC:
        raise ValueError("not a run-length colouring")
    mesh, q0, r0, w, h = struct.unpack("<fhhHH", data[4:16])
    flat = np.empty(w * h, dtype=np.uint8)
    pos, i = 0, 16
    while i < len(data):
        v = data[i]
        i += 1
        n, shift = 0, 0
        while True:
            b = data[i]
            i += 1
            n |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                break
        flat[pos:pos + n] = v
        pos += n
    raster = flat.reshape(h, w)
    rr, qq = np.nonzero(raster != 2)
    cells = np.array([cell(int(q) + q0, int(r) + r0) for q, r in zip(qq, rr)], dtype=np.int64)
    order = np.argsort(cells)
    return Coloring(cells[order], raster[rr, qq][order].astype(np.uint8), float(mesh))


# --------------------------------------------------------------------------
# clusters


class _DSU:
    def __init__(self):
        self.parent: dict[int, int] = {}

    def find(self, a: int) -> int:
        p = self.parent
        root = a
        while p[root] != root:
            root = p[root]
        while p[a] != root:
            p[a], a = root, p[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            if ra < rb:
                ra, rb = rb, ra
            self.parent[ra] = rb


OUTSIDE = -1


@dataclass
class ClusterLabels:
    """Cluster label of every cell; label ``OUTSIDE`` is the cluster of the
    exterior when a boundary colour is given."""

    labels: dict[int, int]
    color: dict[int, int]
    sizes: dict[int, int]

    def members(self, label: int) -> list[int]:
        return [c for c, l in self.labels.items() if l == label]


def label_clusters(colors: Mapping[int, int], region: Iterable[int], boundary_color: int | None = None) -> ClusterLabels:
    region = set(region)
    dsu = _DSU()
    par = dsu.parent
    for c in region:
        par[c] = c
    if boundary_color is not None:
        par[OUTSIDE] = OUTSIDE
    for c in region:
        col = colors[c]
        for d in DIRS[:3]:
            n = c + d
            if n in region:
                if colors[n] == col:
                    dsu.union(c, n)
        if boundary_color is not None and col == boundary_color:
            for d in DIRS:
                if c + d not in region:
                    dsu.union(c, OUTSIDE)
                    break
    roots: dict[int, int] = {}
    labels: dict[int, int] = {}
    color: dict[int, int] = {}
    sizes: dict[int, int] = {}
    if boundary_color is not None:
        roots[dsu.find(OUTSIDE)] = OUTSIDE
        color[OUTSIDE] = boundary_color
        sizes[OUTSIDE] = 0
    for c in sorted(region):
        r = dsu.find(c)
        lab = roots.get(r)
        if lab is None:
            lab = len(roots) - (1 if boundary_color is not None else 0)
            roots[r] = lab
            color[lab] = colors[c]
            sizes[lab] = 0
        labels[c] = lab
        sizes[lab] += 1
    return ClusterLabels(labels, color, sizes)


# --------------------------------------------------------------------------
# loops


@dataclass(eq=False)
class OrientedLoop:
    """Closed chain of directed hexagon edges with yellow on the left and blue
    on the right of every edge."""

    edges: tuple
    mesh: float = 1.0
    _key: frozenset | None = field(default=None, repr=False)

    @property
    def key(self) -> frozenset:
        if self._key is None:
            self._key = frozenset(self.edges)
        return self._key

    def __eq__(self, other) -> bool:
        return isinstance(other, OrientedLoop) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def vertices(self) -> list[int]:
        return [edge_tail(e) for e in self.edges]

    def points(self) -> np.ndarray:
        return positions(self.vertices, self.mesh)

    @property
    def signed_area(self) -> float:
        z = self.points()
        return 0.5 * float(np.sum(z.real * np.roll(z.imag, -1) - np.roll(z.real, -1) * z.imag))

    @property
    def orientation(self) -> str:
        return "ccw" if self.signed_area > 0 else "cw"

    @property
    def enclosed_color(self) -> int:
        # the left side is inside for a counterclockwise loop
        return YELLOW if self.signed_area > 0 else BLUE

    @property
    def diameter(self) -> float:
        from .hexlattice import _hull_diameter

        return _hull_diameter(self.points())

    def is_simple(self) -> bool:
        vs = self.vertices
        return len(set(vs)) == len(vs)

    def is_closed(self) -> bool:
        return all(edge_head(a) == edge_tail(b) for a, b in zip(self.edges, self.edges[1:] + self.edges[:1]))

    def canonical(self) -> tuple:
        k = self.edges.index(min(self.edges))
        return self.edges[k:] + self.edges[:k]


@dataclass
class ContourSet:
    loops: list[OrientedLoop]
    open_paths: list[tuple] = field(default_factory=list)
    parent: list[int | None] = field(default_factory=list)

    def depth(self, i: int) -> int:
        d = 0
        while self.parent[i] is not None:
            i = self.parent[i]
            d += 1
        return d

    def keys(self) -> set[frozenset]:
        return {l.key for l in self.loops}


class MissingBoundaryCondition(ValueError):
    pass


def trace_contours(colors: Mapping[int, int], window: Iterable[int], boundary_color: int | None = None,
                   mesh: float = 1.0, ring: bool = False, nest: bool = True) -> ContourSet:
    """All cluster boundaries in ``window``, oriented with blue on the right.

    With ``boundary_color`` every cell outside the window takes that colour and
    all contours close.  With ``ring=True`` the cells outside are unknown:
    chains that leave the window are returned as ``open_paths``.
    """
    window = window if isinstance(window, (set, frozenset)) else set(window)
    if boundary_color is None and not ring:
        raise MissingBoundaryCondition("give boundary_color or ring=True")

    def col(c):
        if c in window:
            return colors[c]
        return boundary_color

    edges = set()
    for c in window:
        cc = colors[c]
        for d in DIRS:
            n = c + d
            inside = n in window
            if inside and n < c:
                continue
            if not inside and boundary_color is None:
                continue
            nc = colors[n] if inside else boundary_color
            if nc != cc:
                edges.add((c, n) if cc == YELLOW else (n, c))

    def succ(e):
        L, R = e
        i = DIR_INDEX[R - L]
        xi = L + DIRS[INC[i]]
        if xi not in window and boundary_color is None:
            return None
        nxt = (L, xi) if col(xi) == BLUE else (xi, R)
        return nxt if nxt in edges else None

    loops, open_paths = [], []
    remaining = set(edges)
    if ring:
        has_pred = set()
        nxt_of = {}
        for e in edges:
            s = succ(e)
            nxt_of[e] = s
            if s is not None:
                has_pred.add(s)
        for e in sorted(edges - has_pred):
            chain = [e]
            remaining.discard(e)
            while nxt_of[chain[-1]] is not None:
                chain.append(nxt_of[chain[-1]])
                remaining.discard(chain[-1])
            open_paths.append(tuple(chain))
    for e in sorted(remaining):
        if e not in remaining:
            continue
        chain = [e]
        remaining.discard(e)
        while True:
            s = succ(chain[-1])
            if s == e:
                break
            chain.append(s)
            remaining.discard(s)
        loops.append(OrientedLoop(tuple(chain), mesh))
    out = ContourSet(loops, open_paths)
    if nest and boundary_color is not None:
        out.parent = _nesting(loops, colors, window, boundary_color)
    return out


def _nesting(loops, colors, window, boundary_color):
    lab = label_clusters(colors, window, boundary_color).labels

    def label(c):
        return lab.get(c, OUTSIDE)

    inner, outer = [], []
    for lp in loops:
        L, R = lp.edges[0]
        if lp.signed_area > 0:
            inner.append(label(L))
            outer.append(label(R))
        else:
            inner.append(label(R))
            outer.append(label(L))
    by_inner = {c: i for i, c in enumerate(inner)}
    return [by_inner.get(o) if o != OUTSIDE else None for o in outer]


# --------------------------------------------------------------------------
# arm events via unit vertex capacity max-flow


def max_disjoint_paths(cells: set[int], sources: set[int], sinks: set[int], limit: int | None = None) -> int:
    """Maximum number of vertex disjoint lattice paths inside ``cells`` from
    ``sources`` to ``sinks`` (augmenting paths on the split graph)."""
    SRC, SNK = "s", "t"
    # residual capacities: node ids are (cell, 0) for "in" and (cell, 1) for "out"
    cap: dict = {SRC: {}, SNK: {}}

    def add(u, v, c):
        cap.setdefault(u, {})
        cap.setdefault(v, {})
        cap[u][v] = cap[u].get(v, 0) + c
        cap[v].setdefault(u, 0)

    for c in cells:
        add((c, 0), (c, 1), 1)
        for d in DIRS:
            n = c + d
            if n in cells:
                add((c, 1), (n, 0), 1)
    for s in sources:
        if s in cells:
            add(SRC, (s, 0), 1)
    for t in sinks:
        if t in cells:
            add((t, 1), SNK, 1)
    flow = 0
    while limit is None or flow < limit:
        prev = {SRC: None}
        q = deque([SRC])
        while q and SNK not in prev:
            u = q.popleft()
            for v, r in cap[u].items():
                if r > 0 and v not in prev:
                    prev[v] = u
                    q.append(v)
        if SNK not in prev:
            break
        v = SNK
        while prev[v] is not None:
            u = prev[v]
            cap[u][v] -= 1
            cap[v][u] += 1
            v = u
        flow += 1
    return flow


@dataclass
class ArmEvent:
    blue: int
    yellow: int

    @property
    def total(self) -> int:
        return self.blue + self.yellow

    def polychromatic(self, j: int) -> bool:
        """At least ``j`` disjoint arms using both colours.  Only counts are
        compared; the cyclic order of the colours is not checked."""
        return self.blue >= 1 and self.yellow >= 1 and self.total >= j


def annulus_cells(center: complex, r_in: float, r_out: float, mesh: float = 1.0) -> tuple[set, set, set]:
    """Cells with centre in the closed annulus, and its inner and outer rims."""
    from .hexlattice import hex_round

    R = r_out + 2 * mesh
    n = int(math.ceil(R / mesh)) + 2
    c0 = hex_round(center, mesh)
    cand = [c0 + cell(q, r) for q in range(-2 * n, 2 * n + 1) for r in range(-n, n + 1)]
    pos = positions(cand, mesh)
    dist = np.abs(pos - center)
    ann = {c for c, d in zip(cand, dist) if r_in <= d <= r_out}
    dist_of = dict(zip(cand, dist))
    inner = {c for c in ann if any(dist_of.get(c + d, 0) < r_in for d in DIRS)}
    outer = {c for c in ann if any(dist_of.get(c + d, math.inf) > r_out for d in DIRS)}
    return ann, inner, outer


def count_annulus_arms(colors: Mapping[int, int], center: complex, r_in: float, r_out: float,
                       mesh: float = 1.0) -> ArmEvent:
    """Maximum number of disjoint monochromatic crossings of the annulus, per colour."""
    if not 0 < r_in < r_out:
        raise ValueError("need 0 < r_in < r_out")
    ann, inner, outer = annulus_cells(center, r_in, r_out, mesh)
    out = {}
    for col in (BLUE, YELLOW):
        cells = {c for c in ann if colors[c] == col}
        out[col] = max_disjoint_paths(cells, inner & cells, outer & cells)
    return ArmEvent(out[BLUE], out[YELLOW])


# --------------------------------------------------------------------------
# mushroom event near a boundary vertex


@dataclass
class MushroomEvent:
    present: bool
    color: int = BLUE
    cap_cell: int | None = None
    stem_cell: int | None = None


def _boundary_offsets(domain: DiscreteDomain, v: int) -> dict[int, int]:
    """Signed boundary distance (in edges) from ``v`` for cells touching ``∂D``."""
    k0 = domain.vertex_index[v]
    n = len(domain.boundary_edges)
    off: dict[int, int] = {}
    for k, (p, _) in enumerate(domain.boundary_edges):
        s = (k - k0) % n
        s = s if s <= n // 2 else s - n
        if p not in off or abs(s) < abs(off[p]):
            off[p] = s
    return off


def detect_mushroom(colors: Mapping[int, int], domain: DiscreteDomain, v: int, eps: float,
                    color: int = BLUE, _far: dict | None = None) -> MushroomEvent:
    """Cap-and-stem configuration at boundary vertex ``v``.

    The cap is a simple path of colour ``color`` inside the ball of radius
    ``eps/3`` around ``v`` that runs from the boundary cells before ``v`` to
    those after it (both taken at distance ``eps/8`` to ``eps/3``) through a
    cell touching ``v``.  The stem is a path of the other colour from a
    neighbour of that cell to distance ``eps``.
    """
    mesh = domain.mesh
    z = position(v, mesh)
    other = 1 - color
    touching = [c for c in (v - CORNERS[i] for i in range(6)) if c in domain.hexes]
    caps = [c for c in touching if colors[c] == color]
    if not caps:
        return MushroomEvent(False, color)
    off = _boundary_offsets(domain, v)
    hexes = domain.hexes
    for b0 in caps:
        stems = [b0 + d for d in DIRS if b0 + d in hexes and colors[b0 + d] == other]
        stem = None
        for y0 in stems:
            if _reaches(colors, hexes, y0, other, z, eps, mesh, _far):
                stem = y0
                break
        if stem is None:
            continue
        ball = _ball(hexes, b0, z, eps / 3, mesh)
        blue = {c for c in ball if colors[c] == color}
        ring_d = {c: abs(position(c, mesh) - z) for c in off if c in blue}
        s1 = {c for c, d in ring_d.items() if d >= eps / 8 and off[c] < 0}
        s2 = {c for c, d in ring_d.items() if d >= eps / 8 and off[c] > 0}
        if s1 and s2 and _cap_through(blue, b0, s1, s2):
            return MushroomEvent(True, color, b0, stem)
    return MushroomEvent(False, color)


def _ball(hexes, start, z, radius, mesh):
    out = {start}
    todo = [start]
    while todo:
        c = todo.pop()
        for d in DIRS:
            n = c + d
            if n in hexes and n not in out and abs(position(n, mesh) - z) < radius:
                out.add(n)
                todo.append(n)
    return out


def _reaches(colors, hexes, start, col, z, dist, mesh, cache) -> bool:
    if cache is not None and start in cache:
        far = cache[start]
    else:
        comp = {start}
        todo = [start]
        while todo:
            c = todo.pop()
            for d in DIRS:
                n = c + d
                if n in hexes and n not in comp and colors[n] == col:
                    comp.add(n)
                    todo.append(n)
        far = positions(comp, mesh)
        if cache is not None:
            for c in comp:
                cache[c] = far
    return bool(np.max(np.abs(far - z)) >= dist)


def _cap_through(cells, b0, s1, s2) -> bool:
    """Is there a simple path in ``cells`` from ``s1`` through ``b0`` to ``s2``?"""
    if b0 in s1 and b0 in s2:
        return True
    # two disjoint paths leaving b0, one ending in s1 and one in s2
    SRC, SNK = "s", "t"
    cap: dict = {}

    def add(u, v, c):
        cap.setdefault(u, {})
        cap.setdefault(v, {})
        cap[u][v] = cap[u].get(v, 0) + c
        cap[v].setdefault(u, 0)

    for c in cells:
        if c != b0:
            add((c, 0), (c, 1), 1)
        for d in DIRS:
            n = c + d
            if n in cells and n != b0:
                add((c, 1), (n, 0), 1)
    add(SRC, (b0, 1), 2)
    for c in s1:
        add((c, 1) if c != b0 else (c, 1), "T1", 1)
    for c in s2:
        add((c, 1), "T2", 1)
    add("T1", SNK, 1)
    add("T2", SNK, 1)
    flow = 0
    for _ in range(2):
        prev = {SRC: None}
        q = deque([SRC])
        while q and SNK not in prev:
            u = q.popleft()
            for w, r in cap[u].items():
                if r > 0 and w not in prev:
                    prev[w] = u
                    q.append(w)
        if SNK not in prev:
            break
        w = SNK
        while prev[w] is not None:
            u = prev[w]
            cap[u][w] -= 1
            cap[w][u] += 1
            w = u
        flow += 1
    return flow == 2


# --------------------------------------------------------------------------
# crossings of rectangles


def rectangle_cells(x0: float, x1: float, y0: float, y1: float, mesh: float, origin: complex = 0j) -> set[int]:
    from .hexlattice import DomainSpec, delta_approximation

    return set(delta_approximation(DomainSpec.rectangle(x0, x1, y0, y1), mesh, origin).hexes)


def crosses(colors: Mapping[int, int], cells: set[int], start: set[int], goal: set[int], col: int) -> bool:
    seen = {c for c in start if c in cells and colors[c] == col}
    todo = list(seen)
    while todo:
        c = todo.pop()
        if c in goal:
            return True
        for d in DIRS:
            n = c + d
            if n in cells and n not in seen and colors[n] == col:
                seen.add(n)
                todo.append(n)
    return False


def rsw_bichromatic_vertical(colors: Mapping[int, int], cells: set[int], mesh: float = 1.0) -> tuple[bool, bool]:
    """Blue and yellow bottom-to-top crossings of a set of cells (a rectangle)."""
    ys = {c: position(c, mesh).imag for c in cells}
    lo, hi = min(ys.values()), max(ys.values())
    bottom = {c for c, y in ys.items() if y - lo < 0.75 * mesh}
    top = {c for c, y in ys.items() if hi - y < 0.75 * mesh}
    return crosses(colors, cells, bottom, top, BLUE), crosses(colors, cells, bottom, top, YELLOW)
