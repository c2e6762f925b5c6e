"""Random environments, multi-scale perturbations, and passage times.

An Environment carries one realization of IID edge weights on a GridBox,
stored as the Gaussian latent of each edge together with the transported
weight ``t_e = h(latent_e)``.  Keeping the latent is what makes perturbation
exact: the shifted weight ``g_tau(t_e)`` is computed as ``h(latent_e + tau)``
with no inverse round trip, so a zero shift reproduces the original weight
bit for bit and the whole r-profile of a trial is a monotone function of one
shared latent field (common random numbers).

The multi-scale schedule assigns edges of the scale-k annulus the shift
``tau_r(e) = r / (2^k * sqrt(log n))`` for k0 <= k <= k1 and zero elsewhere;
log means natural log.  Its squared l2 norm has the closed form
``r^2 / log(n) * sum_k |Lambda_k| / 4^k`` and stays bounded (~17.5 r^2) over
all n, which is what keeps the coupling inequality's amplification factor
a constant.

Passage times are exact Dijkstra distances restricted to a box [-R, R]^2.
The default backend solves on a compressed-sparse row copy of the box graph
(structure cached per radius, weights refilled per trial) with an optional
exactness-preserving two-stage prune: a solve on a smaller enclosing box
yields a valid upper bound which then limits the full solve.  A pure-Python
binary-heap backend with edge-slot tie-breaking is kept as a reference
implementation, and an exhaustive branch-and-bound minimizer over simple
paths serves as the independent oracle for tiny boxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from heapq import heappop, heappush

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .coupling import QuantileCoupling
from .distributions import WeightLaw
from .lattice import GridBox, annulus_size, edge_scale_from_max_norm, scales
from .rng import RngStream

__all__ = [
    "Environment",
    "PerturbationSchedule",
    "PassageResult",
    "sample_environment",
    "tau_schedule",
    "perturb_environment",
    "passage_time",
    "passage_time_profile",
    "exhaustive_passage_time",
    "path_weight",
]

_ENV_STREAM_KIND = 101


@dataclass(frozen=True)
class Environment:
    """One realization of edge weights on a box; immutable after sampling."""

    box: GridBox
    law: WeightLaw
    seed_path: tuple[int, ...]
    latents: np.ndarray
    weights: np.ndarray
    saturated_edges: int = 0

    def __post_init__(self):
        self.latents.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def coupling(self) -> QuantileCoupling:
        return QuantileCoupling(self.law)

    def weight_of_edge(self, u: tuple[int, int], v: tuple[int, int]) -> float:
        return float(self.weights[self.box.edge_slot(u, v)])


def sample_environment(
    law: WeightLaw,
    box: GridBox,
    seed: int | RngStream,
    *,
    coupling_test: bool = False,
) -> Environment:
    """IID weights via per-edge latent Gaussians; deterministic in the seed.

    Laws must be supported in (0, inf) unless coupling_test is set (signed
    weights break shortest paths, so such environments only support fixed
    path evaluation).
    """
    if not law.positive_support and not coupling_test:
        raise ValueError(
            f"law {type(law).__name__} has support {law.support}; lattice "
            "environments require support in (0, inf)"
        )
    stream = seed if isinstance(seed, RngStream) else RngStream(int(seed), _ENV_STREAM_KIND)
    coupling = QuantileCoupling(law)
    latents = stream.latent_normals(box.n_edge_slots)
    weights = coupling.h(latents)
    return Environment(
        box=box,
        law=law,
        seed_path=(stream.master_seed, *stream.path),
        latents=latents,
        weights=weights,
        saturated_edges=coupling.saturation_count(latents),
    )


@dataclass(frozen=True)
class PerturbationSchedule:
    """Per-edge shift magnitudes r / (2^k sqrt(log n)) on annuli k0..k1."""

    n: int
    r: float
    k0: int = field(init=False)
    k1: int = field(init=False)

    def __post_init__(self):
        idx = scales(self.n)
        object.__setattr__(self, "k0", idx.k0)
        object.__setattr__(self, "k1", idx.k1)

    def tau_of_edge(self, u: tuple[int, int], v: tuple[int, int]) -> float:
        m = max(abs(u[0]), abs(u[1]), abs(v[0]), abs(v[1]))
        if m <= 1:
            return 0.0
        k = (m - 1).bit_length() - 1
        if not (self.k0 <= k <= self.k1):
            return 0.0
        return self.r / (2**k * math.sqrt(math.log(self.n)))

    def tau_slots(self, box: GridBox) -> np.ndarray:
        """Shift per edge slot of the box (zero at invalid slots)."""
        return self.r * unit_tau_slots(self.n, box)

    @property
    def tau_norm_sq(self) -> float:
        """Exact closed form of |tau_r|_2^2 from annulus sizes.

        Independent of any box that contains the largest annulus, since the
        schedule vanishes outside the annuli.
        """
        total = sum(annulus_size(k) / 4.0**k for k in range(self.k0, self.k1 + 1))
        return self.r * self.r * total / math.log(self.n)

    def tau_norm_sq_direct(self, box: GridBox) -> float:
        """|tau_r|_2^2 by brute-force summation over the box's edges."""
        if box.radius < 2 ** (self.k1 + 1):
            raise ValueError(
                f"box radius {box.radius} does not contain the largest annulus "
                f"(needs >= {2 ** (self.k1 + 1)})"
            )
        tau = self.tau_slots(box)
        return float(np.dot(tau, tau))


def tau_schedule(n: int, r: float) -> PerturbationSchedule:
    """Schedule for distance scale n and perturbation parameter r in [-2, 2]."""
    if not (-2.0 <= r <= 2.0):
        raise ValueError(f"r must lie in [-2, 2], got {r}")
    return PerturbationSchedule(n=int(n), r=float(r))


_UNIT_TAU_CACHE: dict[tuple[int, int], np.ndarray] = {}


def unit_tau_slots(n: int, box: GridBox) -> np.ndarray:
    """Per-slot shift magnitudes at r = 1 (schedules are linear in r)."""
    key = (int(n), box.radius)
    cached = _UNIT_TAU_CACHE.get(key)
    if cached is not None:
        return cached
    idx = scales(n)
    arr = box.edge_arrays
    k = edge_scale_from_max_norm(arr["max_norm"])
    in_range = (k >= idx.k0) & (k <= idx.k1)
    base = np.zeros(box.n_edge_slots)
    vals = np.where(in_range, 1.0 / (np.power(2.0, k) * math.sqrt(math.log(n))), 0.0)
    base[arr["slot"]] = vals
    base.setflags(write=False)
    _UNIT_TAU_CACHE[key] = base
    return base


def perturb_environment(
    env: Environment,
    sched: PerturbationSchedule,
    coupling: QuantileCoupling | None = None,
) -> Environment:
    """Environment with weights g_{tau_r(e)}(t_e), via shifted latents."""
    coupling = coupling or env.coupling
    if type(coupling.law) is not type(env.law) or coupling.law != env.law:
        raise ValueError("coupling law does not match the environment's law")
    if env.box.radius < 2 ** (sched.k1 + 1):
        raise ValueError(
            f"box radius {env.box.radius} does not cover the schedule's "
            f"largest annulus (needs >= {2 ** (sched.k1 + 1)})"
        )
    shifted = env.latents + sched.tau_slots(env.box)
    weights = coupling.h(shifted)
    return Environment(
        box=env.box,
        law=env.law,
        seed_path=env.seed_path,
        latents=shifted,
        weights=weights,
        saturated_edges=coupling.saturation_count(shifted),
    )


@dataclass(frozen=True)
class PassageResult:
    """Shortest-path outcome inside the restriction box."""

    time: float
    path: tuple[tuple[int, int], ...]
    restriction_radius: int
    touched_boundary: bool
    tie_count: int | None = None

    @property
    def edge_count(self) -> int:
        return max(len(self.path) - 1, 0)


class _BoxSolverStructure:
    """CSR skeleton of a restriction box inside an environment box.

    Row/column indices and the map from CSR data positions to environment
    edge slots depend only on the two radii, so trials reuse them and only
    refill weights.
    """

    def __init__(self, sub_radius: int, env_radius: int):
        self.sub_radius = sub_radius
        self.env_radius = env_radius
        sub = GridBox(sub_radius)
        env = GridBox(env_radius)
        self.side = sub.side
        self.n_vertices = sub.n_vertices
        arr = env.edge_arrays
        inside = (
            (np.abs(arr["ux"]) <= sub_radius)
            & (np.abs(arr["uy"]) <= sub_radius)
            & (np.abs(arr["vx"]) <= sub_radius)
            & (np.abs(arr["vy"]) <= sub_radius)
        )
        ux, uy = arr["ux"][inside], arr["uy"][inside]
        vx, vy = arr["vx"][inside], arr["vy"][inside]
        slots = arr["slot"][inside]
        u_idx = (ux + sub_radius) * self.side + (uy + sub_radius)
        v_idx = (vx + sub_radius) * self.side + (vy + sub_radius)
        tails = np.concatenate([u_idx, v_idx])
        heads = np.concatenate([v_idx, u_idx])
        eslots = np.concatenate([slots, slots])
        order = np.lexsort((eslots, heads, tails))
        self.tails = tails[order].astype(np.int32)
        self.indices = heads[order].astype(np.int32)
        self.slot_map = eslots[order]
        counts = np.bincount(self.tails, minlength=self.n_vertices)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    def vertex_index(self, v: tuple[int, int]) -> int:
        return (v[0] + self.sub_radius) * self.side + (v[1] + self.sub_radius)

    def vertex_from_index(self, idx: int) -> tuple[int, int]:
        x, y = divmod(int(idx), self.side)
        return (x - self.sub_radius, y - self.sub_radius)

    def matrix(self, weights: np.ndarray) -> csr_matrix:
        data = weights[self.slot_map]
        return csr_matrix((data, self.indices, self.indptr),
                          shape=(self.n_vertices, self.n_vertices))


_STRUCTURE_CACHE: dict[tuple[int, int], _BoxSolverStructure] = {}


def _structure(sub_radius: int, env_radius: int) -> _BoxSolverStructure:
    key = (sub_radius, env_radius)
    out = _STRUCTURE_CACHE.get(key)
    if out is None:
        out = _BoxSolverStructure(sub_radius, env_radius)
        _STRUCTURE_CACHE[key] = out
    return out


def _extract_path(structure: _BoxSolverStructure, pred: np.ndarray,
                  src_idx: int, tgt_idx: int) -> tuple[tuple[int, int], ...]:
    chain = [tgt_idx]
    while chain[-1] != src_idx:
        p = int(pred[chain[-1]])
        if p < 0:
            raise RuntimeError("predecessor chain broken; target not settled")
        chain.append(p)
    chain.reverse()
    return tuple(structure.vertex_from_index(i) for i in chain)


def path_weight(env: Environment, path_vertices) -> float:
    """Exactly rounded sum of the environment's weights along a path."""
    return math.fsum(
        env.weights[env.box.edge_slot(u, v)]
        for u, v in zip(path_vertices, path_vertices[1:])
    )


def _count_near_ties(structure: _BoxSolverStructure, dist: np.ndarray,
                     data: np.ndarray, tol: float = 1e-12) -> int:
    """Settled vertices whose optimal distance is achieved by two or more
    incoming edges within tol (near-tie diagnostic for geodesic uniqueness)."""
    cand = dist[structure.tails] + data
    head_dist = dist[structure.indices]
    finite = np.isfinite(head_dist) & np.isfinite(cand)
    diff = np.zeros_like(cand)
    np.subtract(cand, head_dist, out=diff, where=finite)
    near = finite & (np.abs(diff) <= tol)
    per_head = np.bincount(structure.indices[near], minlength=structure.n_vertices)
    return int(np.count_nonzero(per_head >= 2))


def _stage_radius(source, target, R: int) -> int:
    needed = max(abs(source[0]), abs(source[1]), abs(target[0]), abs(target[1]))
    span = abs(source[0] - target[0]) + abs(source[1] - target[1])
    return min(R, needed + max(4, span // 4))


def _solve_sparse(env: Environment, source, target, R: int, prune: bool,
                  weights: np.ndarray | None = None, limit_hint: float | None = None):
    weights = env.weights if weights is None else weights
    structure = _structure(R, env.box.radius)
    src = structure.vertex_index(source)
    tgt = structure.vertex_index(target)
    limit = limit_hint
    if limit is None and prune:
        r1 = _stage_radius(source, target, R)
        if r1 < R:
            s1 = _structure(r1, env.box.radius)
            d1 = _csgraph_dijkstra(s1.matrix(weights), directed=True,
                                   indices=s1.vertex_index(source))
            ub = float(d1[s1.vertex_index(target)])
            if math.isfinite(ub):
                limit = ub * (1.0 + 1e-9) + 1e-12
    graph = structure.matrix(weights)
    kwargs = {} if limit is None else {"limit": limit}
    dist, pred = _csgraph_dijkstra(graph, directed=True, indices=src,
                                   return_predecessors=True, **kwargs)
    if not math.isfinite(dist[tgt]):
        # prune bound was not usable (should not happen on a connected box)
        dist, pred = _csgraph_dijkstra(graph, directed=True, indices=src,
                                       return_predecessors=True)
    return structure, dist, pred, src, tgt, graph.data


def _solve_reference(env: Environment, source, target, R: int):
    """Binary-heap Dijkstra with deterministic edge-slot tie-breaks.

    Reference backend for validation; also counts exact tentative-distance
    ties (within 1e-12) observed during relaxation.
    """
    structure = _structure(R, env.box.radius)
    data = env.weights[structure.slot_map]
    src = structure.vertex_index(source)
    tgt = structure.vertex_index(target)
    n = structure.n_vertices
    dist = np.full(n, np.inf)
    pred = np.full(n, -9999, dtype=np.int64)
    done = np.zeros(n, dtype=bool)
    indptr, indices, slot_map = structure.indptr, structure.indices, structure.slot_map
    ties = 0
    heap: list[tuple[float, int, int]] = [(0.0, -1, src)]
    dist[src] = 0.0
    while heap:
        d, _, u = heappop(heap)
        if done[u]:
            continue
        done[u] = True
        if u == tgt:
            break
        for pos in range(indptr[u], indptr[u + 1]):
            v = indices[pos]
            if done[v]:
                continue
            cand = d + data[pos]
            if cand < dist[v]:
                if math.isfinite(dist[v]) and dist[v] - cand <= 1e-12:
                    ties += 1
                dist[v] = cand
                pred[v] = u
                heappush(heap, (cand, int(slot_map[pos]), v))
            elif cand - dist[v] <= 1e-12:
                ties += 1
    return structure, dist, pred, src, tgt, ties


def passage_time(
    env: Environment,
    source: tuple[int, int],
    target: tuple[int, int],
    R: int,
    *,
    backend: str = "sparse",
    prune: bool = True,
    compute_ties: bool = False,
) -> PassageResult:
    """Exact passage time between two vertices over paths inside [-R, R]^2.

    The reported time is the exactly rounded (fsum) weight of the recovered
    geodesic.  touched_boundary flags geodesics that meet the restriction
    boundary, i.e. runs where enlarging R could still change the answer.
    """
    R = int(R)
    if R < 1 or R > env.box.radius:
        raise ValueError(f"restriction radius {R} must be in [1, {env.box.radius}]")
    for name, v in (("source", source), ("target", target)):
        if max(abs(v[0]), abs(v[1])) > R:
            raise ValueError(f"{name} {v} outside restriction box of radius {R}")
    if not env.law.positive_support:
        raise ValueError("environment law allows negative weights; passage "
                         "times need support in (0, inf)")
    source = (int(source[0]), int(source[1]))
    target = (int(target[0]), int(target[1]))
    if source == target:
        return PassageResult(0.0, (source,), R, touched_boundary=False,
                             tie_count=0 if compute_ties else None)

    if backend == "sparse":
        structure, dist, pred, src, tgt, data = _solve_sparse(env, source, target, R, prune)
        path = _extract_path(structure, pred, src, tgt)
        ties = _count_near_ties(structure, dist, data) if compute_ties else None
    elif backend == "reference":
        structure, dist, pred, src, tgt, ties_ref = _solve_reference(env, source, target, R)
        path = _extract_path(structure, pred, src, tgt)
        ties = ties_ref if compute_ties else None
    else:
        raise ValueError(f"unknown backend {backend!r}")

    time = path_weight(env, path)
    touched = any(max(abs(x), abs(y)) == R for x, y in path)
    return PassageResult(time, path, R, touched, ties)


def passage_time_profile(
    env: Environment,
    coupling: QuantileCoupling,
    n: int,
    r_values,
    source: tuple[int, int],
    target: tuple[int, int],
    R: int,
    *,
    prune: bool = True,
) -> list[PassageResult]:
    """T_r(source, target) for each r on the shared latent field.

    r_values must be sorted ascending.  All solves reuse one CSR skeleton and
    only the perturbed (annulus) slots are recomputed per r, so times are a
    pure monotone functional of a single environment: nondecreasing in r.
    """
    r_values = np.asarray(list(r_values), dtype=float)
    if r_values.size == 0:
        return []
    if np.any(np.diff(r_values) < 0):
        raise ValueError("r_values must be sorted ascending")
    if np.any(np.abs(r_values) > 2.0):
        raise ValueError("r_values must lie in [-2, 2]")
    R = int(R)
    if R < 1 or R > env.box.radius:
        raise ValueError(f"restriction radius {R} must be in [1, {env.box.radius}]")

    base = unit_tau_slots(n, env.box)
    nz = np.flatnonzero(base)
    weights = env.weights.copy()

    structure = _structure(R, env.box.radius)
    src = structure.vertex_index(source)
    tgt = structure.vertex_index(target)
    data = env.weights[structure.slot_map]
    touched_pos = np.flatnonzero(np.isin(structure.slot_map, nz))
    touched_slots = structure.slot_map[touched_pos]

    # One valid upper bound for every r: the restricted solve on a smaller
    # box at the largest r (times are nondecreasing in r).
    limit = None
    if prune:
        r1 = _stage_radius(source, target, R)
        if r1 < R:
            s1 = _structure(r1, env.box.radius)
            w_top = weights.copy()
            w_top[nz] = coupling.h(env.latents[nz] + float(r_values[-1]) * base[nz])
            d1 = _csgraph_dijkstra(s1.matrix(w_top), directed=True,
                                   indices=s1.vertex_index(source))
            ub = float(d1[s1.vertex_index(target)])
            if math.isfinite(ub):
                limit = ub * (1.0 + 1e-9) + 1e-12

    results = []
    for r in r_values:
        weights[nz] = coupling.h(env.latents[nz] + r * base[nz])
        data[touched_pos] = weights[touched_slots]
        graph = csr_matrix((data, structure.indices, structure.indptr),
                           shape=(structure.n_vertices, structure.n_vertices))
        kwargs = {} if limit is None else {"limit": limit}
        dist, pred = _csgraph_dijkstra(graph, directed=True, indices=src,
                                       return_predecessors=True, **kwargs)
        if not math.isfinite(dist[tgt]):
            dist, pred = _csgraph_dijkstra(graph, directed=True, indices=src,
                                           return_predecessors=True)
        path = _extract_path(structure, pred, src, tgt)
        time = math.fsum(weights[env.box.edge_slot(u, v)]
                         for u, v in zip(path, path[1:]))
        touched = any(max(abs(x), abs(y)) == R for x, y in path)
        results.append(PassageResult(float(time), path, R, touched, None))
    return results


def exhaustive_passage_time(
    env: Environment,
    source: tuple[int, int],
    target: tuple[int, int],
    R: int,
) -> PassageResult:
    """Minimum over *all* simple paths by depth-first branch and bound.

    Independent oracle for passage_time; prunes a branch only when its
    running weight already exceeds the incumbent by 1e-9, so it cannot miss
    the optimum for continuous weight laws.  The incumbent is seeded with
    the weight of the monotone staircase path (a genuine path, so pruning
    against it is sound) and the search descends toward the target first.
    Only viable on tiny boxes.
    """
    R = int(R)
    if R < 1 or R > env.box.radius:
        raise ValueError(f"restriction radius {R} must be in [1, {env.box.radius}]")
    source = (int(source[0]), int(source[1]))
    target = (int(target[0]), int(target[1]))
    for name, v in (("source", source), ("target", target)):
        if max(abs(v[0]), abs(v[1])) > R:
            raise ValueError(f"{name} {v} outside restriction box of radius {R}")
    if source == target:
        return PassageResult(0.0, (source,), R, False)
    box = env.box

    def staircase():
        path = [source]
        x, y = source
        while x != target[0]:
            x += 1 if target[0] > x else -1
            path.append((x, y))
        while y != target[1]:
            y += 1 if target[1] > y else -1
            path.append((x, y))
        return path

    best_path_list = staircase()
    best_time = path_weight(env, best_path_list)
    best_path: tuple[tuple[int, int], ...] = tuple(best_path_list)

    def neighbors(v):
        x, y = v
        steps = [(x + dx, y + dy) for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
                 if max(abs(x + dx), abs(y + dy)) <= R]
        steps.sort(key=lambda w: abs(w[0] - target[0]) + abs(w[1] - target[1]))
        return steps

    visited = {source}
    path = [source]

    def dfs(v, acc: float):
        nonlocal best_time, best_path
        for w in neighbors(v):
            if w in visited:
                continue
            nxt = acc + env.weights[box.edge_slot(v, w)]
            if nxt > best_time + 1e-9:
                continue
            if w == target:
                path.append(w)
                t = path_weight(env, path)
                if t < best_time:
                    best_time = t
                    best_path = tuple(path)
                path.pop()
                continue
            visited.add(w)
            path.append(w)
            dfs(w, nxt)
            path.pop()
            visited.discard(w)

    dfs(source, 0.0)
    touched = any(max(abs(x), abs(y)) == R for x, y in best_path)
    return PassageResult(best_time, best_path, R, touched)
