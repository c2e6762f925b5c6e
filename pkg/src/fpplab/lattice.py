"""Geometry of the square lattice: boxes, edge ids, dyadic annuli, paths.

Conventions fixed here and used everywhere else:

* ``|v|`` means the l-infinity norm of a vertex; all boxes and annuli are
  l-infinity shaped.
* The box of radius R is the vertex set [-R, R]^2 with nearest-neighbor
  edges between contained vertices: (2R+1)^2 vertices, 2*(2R+1)*(2R) edges.
* Every edge is addressed by its lexicographically smaller endpoint (x, y)
  and an axis bit (0: step +x, 1: step +y).  Edge slots are packed integers
  ordered lexicographically by (x, y, axis); that order is the deterministic
  tie-break key throughout the package.
* The scale-k annulus edge set Lambda_k contains the edges with both
  endpoints in [-2^{k+1}, 2^{k+1}]^2 \\ [-2^k, 2^k]^2 plus the edges with one
  endpoint there and the other in the box [-2^k, 2^k]^2.  Equivalently: both
  endpoint norms are <= 2^{k+1} and the larger one exceeds 2^k, so each edge
  belongs to at most one Lambda_k and membership is a two-comparison test on
  the larger endpoint norm.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "GridBox",
    "AnnulusIndex",
    "PathSetPk",
    "UnsupportedScaleError",
    "PathCapExceeded",
    "annulus_contains",
    "annulus_edges",
    "annulus_size",
    "annulus_vertex_count",
    "edge_scale_from_max_norm",
    "scales",
    "enumerate_paths_pk",
    "iter_paths_pk",
    "path_count_bound",
    "has_scale_crossing",
]


class UnsupportedScaleError(ValueError):
    """Scale n too small for the dyadic construction (needs n >= 16)."""


class PathCapExceeded(RuntimeError):
    """Exhaustive enumeration exceeded the caller's cap."""

    def __init__(self, k: int, cap: int, partial_count: int):
        super().__init__(
            f"path enumeration at scale k={k} exceeded cap={cap} "
            f"(partial count {partial_count}); lower k or raise the cap"
        )
        self.k = k
        self.cap = cap
        self.partial_count = partial_count


class GridBox:
    """Vertices [-R, R]^2 with nearest-neighbor edges, addressable by slot.

    Edge slots are padded: slot = 2 * ((x+R)*(2R+1) + (y+R)) + axis for the
    lexicographically smaller endpoint (x, y).  Slots whose partner vertex
    would leave the box are invalid and never carry data.
    """

    def __init__(self, radius: int):
        if radius < 1:
            raise ValueError(f"box radius must be >= 1, got {radius}")
        self.radius = int(radius)
        self.side = 2 * self.radius + 1

    @property
    def n_vertices(self) -> int:
        return self.side * self.side

    @property
    def n_edges(self) -> int:
        return 2 * self.side * (self.side - 1)

    @property
    def n_edge_slots(self) -> int:
        return 2 * self.side * self.side

    def contains_vertex(self, v: tuple[int, int]) -> bool:
        return abs(v[0]) <= self.radius and abs(v[1]) <= self.radius

    def vertex_index(self, v: tuple[int, int]) -> int:
        if not self.contains_vertex(v):
            raise ValueError(f"vertex {v} outside box of radius {self.radius}")
        return (v[0] + self.radius) * self.side + (v[1] + self.radius)

    def vertex_from_index(self, idx: int) -> tuple[int, int]:
        x, y = divmod(int(idx), self.side)
        return (x - self.radius, y - self.radius)

    def edge_slot(self, u: tuple[int, int], v: tuple[int, int]) -> int:
        """Slot of the undirected edge {u, v}; rejects non-adjacent pairs."""
        if u > v:
            u, v = v, u
        dx, dy = v[0] - u[0], v[1] - u[1]
        if (dx, dy) == (1, 0):
            axis = 0
        elif (dx, dy) == (0, 1):
            axis = 1
        else:
            raise ValueError(f"{u}-{v} is not a nearest-neighbor edge")
        if not (self.contains_vertex(u) and self.contains_vertex(v)):
            raise ValueError(f"edge {u}-{v} outside box of radius {self.radius}")
        return 2 * self.vertex_index(u) + axis

    def edge_from_slot(self, slot: int) -> tuple[tuple[int, int], tuple[int, int]]:
        vidx, axis = divmod(int(slot), 2)
        u = self.vertex_from_index(vidx)
        v = (u[0] + 1, u[1]) if axis == 0 else (u[0], u[1] + 1)
        if not self.contains_vertex(v):
            raise ValueError(f"slot {slot} is not a valid edge slot")
        return (u, v)

    @cached_property
    def edge_arrays(self) -> dict[str, np.ndarray]:
        """Vectorized description of every valid edge, in slot order.

        Keys: 'slot', 'ux', 'uy', 'vx', 'vy', 'max_norm' (larger endpoint
        l-infinity norm).
        """
        R = self.radius
        coords = np.arange(-R, R + 1)
        gx, gy = np.meshgrid(coords, coords, indexing="ij")
        gx = gx.ravel()
        gy = gy.ravel()
        vidx = np.arange(self.n_vertices)
        parts = []
        for axis, (dx, dy) in enumerate(((1, 0), (0, 1))):
            ok = (gx + dx <= R) & (gy + dy <= R)
            parts.append((2 * vidx[ok] + axis, gx[ok], gy[ok], gx[ok] + dx, gy[ok] + dy))
        slot = np.concatenate([p[0] for p in parts])
        order = np.argsort(slot, kind="stable")
        slot = slot[order]
        u_x = np.concatenate([p[1] for p in parts])[order]
        u_y = np.concatenate([p[2] for p in parts])[order]
        v_x = np.concatenate([p[3] for p in parts])[order]
        v_y = np.concatenate([p[4] for p in parts])[order]
        mn = np.maximum(
            np.maximum(np.abs(u_x), np.abs(u_y)),
            np.maximum(np.abs(v_x), np.abs(v_y)),
        )
        return {
            "slot": slot.astype(np.int64),
            "ux": u_x,
            "uy": u_y,
            "vx": v_x,
            "vy": v_y,
            "max_norm": mn,
        }

    def __repr__(self) -> str:  # pragma: no cover
        return f"GridBox(radius={self.radius})"


def _vnorm(v: tuple[int, int]) -> int:
    return max(abs(v[0]), abs(v[1]))


def annulus_contains(k: int, u: tuple[int, int], v: tuple[int, int]) -> bool:
    """Is the edge {u, v} in Lambda_k?"""
    if k < 0:
        raise ValueError(f"annulus scale must be >= 0, got {k}")
    m = max(_vnorm(u), _vnorm(v))
    return (1 << k) < m <= (1 << (k + 1))


def edge_scale_from_max_norm(max_norm) -> np.ndarray:
    """Vectorized scale index: k with 2^k < m <= 2^{k+1}, or -1 if m <= 1."""
    m = np.asarray(max_norm)
    kmax = max(int(m.max()).bit_length(), 2)
    pows = 1 << np.arange(kmax + 1, dtype=np.int64)
    return np.searchsorted(pows, m, side="left").astype(np.int64) - 1


def annulus_size(k: int) -> int:
    """|Lambda_k|, exactly: 24*4^k + 4*2^k.

    Difference of the box edge counts 2*(2M+1)*2M at M = 2^{k+1} and 2^k,
    since Lambda_k is exactly the edges inside the larger box that are not
    inside the smaller one.
    """
    if k < 0:
        raise ValueError(f"annulus scale must be >= 0, got {k}")
    return 24 * 4**k + 4 * 2**k


def annulus_vertex_count(k: int) -> int:
    """Number of vertices with 2^k <= |v| <= 2^{k+1} (all Lambda_k endpoints)."""
    if k < 0:
        raise ValueError(f"annulus scale must be >= 0, got {k}")
    a = 2 ** (k + 1)
    return (2 * a + 1) ** 2 - (a - 1) ** 2


def annulus_edges(k: int) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """All edges of Lambda_k in lexicographic (x, y, axis) order.

    Materializes the set; intended for dumps, tests, and schedule audits at
    moderate k (size grows like 24*4^k).
    """
    box = GridBox(2 ** (k + 1))
    arr = box.edge_arrays
    lo, hi = 1 << k, 1 << (k + 1)
    mask = (arr["max_norm"] > lo) & (arr["max_norm"] <= hi)
    ux, uy = arr["ux"][mask], arr["uy"][mask]
    vx, vy = arr["vx"][mask], arr["vy"][mask]
    return [
        ((int(a), int(b)), (int(c), int(d)))
        for a, b, c, d in zip(ux, uy, vx, vy)
    ]


@dataclass(frozen=True)
class AnnulusIndex:
    """Scale bookkeeping for distance n: k0 = floor(log2 sqrt(n)),
    k1 = floor(log2 n) - 1."""

    n: int
    k0: int
    k1: int

    @property
    def ks(self) -> range:
        return range(self.k0, self.k1 + 1)


def scales(n: int) -> AnnulusIndex:
    """Annulus scale range for distance n; requires n >= 16 so k0 <= k1.

    Integer-exact: k0 is the largest k with 4^k <= n, k1 is
    floor(log2 n) - 1.
    """
    if n < 16:
        raise UnsupportedScaleError(f"distance scale n must be >= 16, got {n}")
    bl = int(n).bit_length()
    return AnnulusIndex(n=int(n), k0=(bl - 1) // 2, k1=bl - 2)


def _annulus_adjacency(k: int):
    """Vertices touching Lambda_k and their Lambda_k neighbors, both sorted."""
    lo, hi = 1 << k, 1 << (k + 1)
    verts = []
    for x in range(-hi, hi + 1):
        for y in range(-hi, hi + 1):
            if lo <= max(abs(x), abs(y)) <= hi:
                verts.append((x, y))
    vset = set(verts)
    adj: dict[tuple[int, int], tuple[tuple[int, int], ...]] = {}
    for vtx in verts:
        x, y = vtx
        nbrs = []
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            w = (x + dx, y + dy)
            if w in vset and annulus_contains(k, vtx, w):
                nbrs.append(w)
        adj[vtx] = tuple(sorted(nbrs))
    return verts, adj


def iter_paths_pk(k: int):
    """Yield every path of P_k once: self-avoiding vertex sequences with
    exactly 2^k edges, all in Lambda_k, canonicalized so start < end.

    Deterministic order: starts ascend lexicographically and extensions
    follow sorted neighbor order.
    """
    if k < 0:
        raise ValueError(f"scale must be >= 0, got {k}")
    L = 1 << k
    verts, adj = _annulus_adjacency(k)
    for start in verts:
        stack: list[tuple[tuple[int, int], iter]] = [(start, iter(adj[start]))]
        visited = {start}
        path = [start]
        while stack:
            vtx, it = stack[-1]
            advanced = False
            for w in it:
                if w in visited:
                    continue
                if len(path) == L:  # next vertex would complete the path
                    if start < w:
                        yield tuple(path) + (w,)
                    continue
                visited.add(w)
                path.append(w)
                stack.append((w, iter(adj[w])))
                advanced = True
                break
            if not advanced:
                stack.pop()
                visited.discard(vtx)
                path.pop()


@dataclass(frozen=True)
class PathSetPk:
    """Enumeration result for P_k."""

    k: int
    count: int
    paths: tuple[tuple[tuple[int, int], ...], ...] | None
    exhaustive: bool

    @property
    def length(self) -> int:
        return 1 << self.k


def enumerate_paths_pk(
    k: int,
    cap: int = 10**7,
    keep_paths: bool | None = None,
) -> PathSetPk:
    """Exhaustively enumerate P_k (k <= 4; growth is ~3^(2^k) per start).

    Raises PathCapExceeded carrying the partial count if more than ``cap``
    paths exist.  Paths are materialized when keep_paths is true (default:
    only for k <= 2, where the set is small).
    """
    if k > 4:
        raise ValueError(f"enumeration is limited to k <= 4, got {k}")
    if keep_paths is None:
        keep_paths = k <= 2
    count = 0
    collected: list[tuple[tuple[int, int], ...]] = []
    for path in iter_paths_pk(k):
        count += 1
        if count > cap:
            raise PathCapExceeded(k, cap, count)
        if keep_paths:
            collected.append(path)
    return PathSetPk(k=k, count=count, paths=tuple(collected) if keep_paths else None,
                     exhaustive=True)


def path_count_bound(k: int) -> int:
    """Counting bound for |P_k|: (start vertices) * 3^(path length).

    Starts range over the closed annulus 2^k <= |v| <= 2^{k+1}; a
    self-avoiding path never reverses, so each of the 2^k steps has at most
    3 fresh continuations once the walk is rooted (the first step's factor 4
    is absorbed because each undirected path is counted from one endpoint
    only: directed count <= |V| * 4 * 3^(L-1) and undirected is half that).
    """
    if k < 0:
        raise ValueError(f"scale must be >= 0, got {k}")
    return annulus_vertex_count(k) * 3 ** (1 << k)


def has_scale_crossing(path_vertices, k: int) -> bool:
    """Does the path contain 2^k consecutive edges all inside Lambda_k?"""
    L = 1 << k
    run = 0
    for u, v in zip(path_vertices, path_vertices[1:]):
        if annulus_contains(k, u, v):
            run += 1
            if run >= L:
                return True
        else:
            run = 0
    return False
