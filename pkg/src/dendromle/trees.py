"""Minimum spanning trees, single-linkage clustering, and fiber cones.

Single linkage maps a dissimilarity to the ultrametric of minimax path
weights, computed here through Kruskal's merge process.  Ultrametrics are
maximally tie-ridden, so recovering *every* MST needs tie-aware
enumeration: edges are grouped into weight classes and, per class, all
spanning substructures of the class subgraph on the contraction of the
lighter classes are enumerated.

A cone ``C(T, u)`` is the polytope of metrics that coincide with ``u`` on
the edges of one of its MSTs ``T``; the preimage of ``u`` under single
linkage is the union of these cones over all MSTs of ``u``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import (
    EPS_TRI,
    Dissimilarity,
    Ultrametric,
    pair_count,
    pair_index,
    pair_list,
    triangle_ok,
)

#: Default cap on the number of enumerated MSTs; enumeration is exponential
#: for balanced hierarchies at large n.
K_MAX = 10_000

#: Relative tolerance for grouping edge weights into tie classes.
EPS_TIE = 1e-9


class KMaxExceededError(RuntimeError):
    """The ultrametric has more minimum spanning trees than the cap allows."""


@dataclass(frozen=True)
class SpanningTree:
    """Tree on n labeled vertices, stored as sorted (i, j) pairs with i < j."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        norm = tuple(sorted((min(i, j), max(i, j)) for i, j in self.edges))
        object.__setattr__(self, "edges", norm)
        if len(norm) != self.n - 1:
            raise ValueError(f"a spanning tree on {self.n} vertices needs {self.n - 1} edges")
        parent = list(range(self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j in norm:
            ri, rj = find(i), find(j)
            if ri == rj:
                raise ValueError("edges contain a cycle")
            parent[rj] = ri
        # n-1 acyclic edges on n vertices are automatically spanning

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def _sorted_edges(n: int, values: np.ndarray) -> list[tuple[float, int, int, int]]:
    plist = pair_list(n)
    edges = [(float(values[idx]), i, j, idx) for idx, (i, j) in enumerate(plist)]
    edges.sort()
    return edges


def mst(d: Dissimilarity) -> SpanningTree:
    """Deterministic minimum spanning tree of the complete weighted graph.

    Ties are broken toward the lexicographically smallest edge list:
    Kruskal's greedy pass over edges sorted by (weight, i, j).
    """
    uf = _UnionFind(d.n)
    chosen = []
    for _, i, j, _ in _sorted_edges(d.n, d.values):
        if uf.union(i, j):
            chosen.append((i, j))
            if len(chosen) == d.n - 1:
                break
    return SpanningTree(d.n, tuple(chosen))


def merge_events(n: int, values: np.ndarray):
    """Kruskal merge process: the sequence of two-cluster fusions.

    Returns ``(events, heights)`` where each event pairs the two clusters
    (sorted leaf tuples, smaller leading leaf first) united by an accepted
    edge, and heights are the corresponding edge weights.  Tied weights are
    processed in lexicographic edge order, so ties yield a binary sequence
    rather than a simultaneous multi-way event.
    """
    uf = _UnionFind(n)
    members: list[tuple[int, ...]] = [(x,) for x in range(n)]
    events = []
    heights = []
    for w, i, j, _ in _sorted_edges(n, values):
        ri, rj = uf.find(i), uf.find(j)
        if ri == rj:
            continue
        a, b = members[ri], members[rj]
        if b[0] < a[0]:
            a, b = b, a
        events.append((a, b))
        heights.append(w)
        uf.parent[rj] = ri
        members[ri] = tuple(sorted(members[ri] + members[rj]))
        if len(events) == n - 1:
            break
    return events, heights


def slhc_values(n: int, values: np.ndarray) -> np.ndarray:
    """Condensed minimax path weights (single-linkage ultrametric values)."""
    uf = _UnionFind(n)
    members: list[list[int]] = [[x] for x in range(n)]
    out = np.empty_like(values)
    done = 0
    for w, i, j, _ in _sorted_edges(n, values):
        ri, rj = uf.find(i), uf.find(j)
        if ri == rj:
            continue
        for x in members[ri]:
            for y in members[rj]:
                out[pair_index(n, x, y)] = w
        uf.parent[rj] = ri
        members[ri].extend(members[rj])
        done += 1
        if done == n - 1:
            break
    return out


def slhc_max(n: int, values: np.ndarray) -> float:
    """Largest single-linkage value: the weight of the heaviest MST edge."""
    uf = _UnionFind(n)
    remaining = n - 1
    for w, i, j, _ in _sorted_edges(n, values):
        if uf.union(i, j):
            remaining -= 1
            if remaining == 0:
                return w
    raise AssertionError("complete graph is always connected")


def slhc(d: Dissimilarity) -> Ultrametric:
    """Single-linkage ultrametric of a dissimilarity.

    The value at (x, y) is the weight of the heaviest edge on the x-y path
    in any MST, equivalently the smallest r admitting an r-chain from x to
    y.  Values are copied, never recomputed, so the output is exactly
    ultrametric and the map is exactly idempotent.
    """
    return Ultrametric(d.n, slhc_values(d.n, d.values))


# ---------------------------------------------------------------------------
# all-MST enumeration


def _weight_classes(n: int, values: np.ndarray, eps: float) -> list[list[int]]:
    order = sorted(range(pair_count(n)), key=lambda idx: values[idx])
    classes: list[list[int]] = []
    last = None
    for idx in order:
        v = float(values[idx])
        if last is None or v - last > eps * max(abs(v), abs(last)):
            classes.append([])
        classes[-1].append(idx)
        last = v
    return classes


def _spanning_trees_of_multigraph(nodes: list[int], edges: list[tuple[int, int, int]]):
    """All spanning trees of a small multigraph; parallel edges are distinct.

    ``edges`` hold (a, b, tag) with a != b; returns lists of tags.
    """
    want = len(nodes) - 1
    node_pos = {v: k for k, v in enumerate(nodes)}
    trees = []
    for combo in itertools.combinations(edges, want):
        uf = _UnionFind(len(nodes))
        ok = True
        for a, b, _ in combo:
            if not uf.union(node_pos[a], node_pos[b]):
                ok = False
                break
        if ok:
            trees.append([tag for _, _, tag in combo])
    return trees


def _count_spanning_trees(nodes: list[int], edges: list[tuple[int, int, int]]) -> int:
    """Kirchhoff count for a small multigraph (exact up to 2^53)."""
    m = len(nodes)
    if m == 1:
        return 1
    node_pos = {v: k for k, v in enumerate(nodes)}
    lap = np.zeros((m, m))
    for a, b, _ in edges:
        pa, pb = node_pos[a], node_pos[b]
        lap[pa, pa] += 1.0
        lap[pb, pb] += 1.0
        lap[pa, pb] -= 1.0
        lap[pb, pa] -= 1.0
    det = np.linalg.det(lap[1:, 1:])
    return int(round(det))


def mst_set(u: Ultrametric, k_max: int = K_MAX) -> list[SpanningTree]:
    """Every minimum spanning tree of an ultrametric, canonically ordered.

    For a binary dendrogram the count is the product of |A|*|B| over merge
    events with merging clusters A and B.  Raises KMaxExceededError before
    enumerating if the count exceeds ``k_max``.
    """
    n = u.n
    plist = pair_list(n)
    uf = _UnionFind(n)
    per_class_choices: list[list[list[int]]] = []
    total = 1
    for cls in _weight_classes(n, u.values, EPS_TIE):
        cls_edges = []
        for idx in cls:
            i, j = plist[idx]
            ri, rj = uf.find(i), uf.find(j)
            if ri != rj:
                cls_edges.append((ri, rj, idx))
        if not cls_edges:
            continue
        # split the class multigraph into its connected pieces
        touched = sorted({v for a, b, _ in cls_edges for v in (a, b)})
        sub = _UnionFind(len(touched))
        pos = {v: k for k, v in enumerate(touched)}
        for a, b, _ in cls_edges:
            sub.union(pos[a], pos[b])
        comps: dict[int, tuple[list[int], list[tuple[int, int, int]]]] = {}
        for v in touched:
            comps.setdefault(sub.find(pos[v]), ([], []))[0].append(v)
        for a, b, idx in cls_edges:
            comps[sub.find(pos[a])][1].append((a, b, idx))
        comp_tree_lists = []
        for nodes, edges in comps.values():
            total *= _count_spanning_trees(nodes, edges)
            if total > k_max:
                raise KMaxExceededError(
                    f"more than {k_max} minimum spanning trees"
                )
            comp_tree_lists.append(_spanning_trees_of_multigraph(nodes, edges))
        class_choices = [
            [idx for part in combo for idx in part]
            for combo in itertools.product(*comp_tree_lists)
        ]
        per_class_choices.append(class_choices)
        for a, b, _ in cls_edges:
            uf.union(a, b)
    trees = []
    for combo in itertools.product(*per_class_choices):
        idxs = [idx for part in combo for idx in part]
        trees.append(SpanningTree(n, tuple(plist[idx] for idx in idxs)))
    trees.sort(key=lambda t: t.edges)
    return trees


# ---------------------------------------------------------------------------
# cones of the single-linkage fiber


def tree_path_sums(tree: SpanningTree, u: Ultrametric) -> np.ndarray:
    """Condensed array of u-length sums along tree paths (the upper bounds)."""
    n = tree.n
    adj = tree.adjacency()
    out = np.zeros(pair_count(n))
    for src in range(n):
        dist = [None] * n
        dist[src] = 0.0
        stack = [src]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if dist[w] is None:
                    dist[w] = dist[v] + u.get(v, w)
                    stack.append(w)
        for dst in range(src + 1, n):
            out[pair_index(n, src, dst)] = dist[dst]
    return out


def is_mst_of(tree: SpanningTree, u: Ultrametric, eps: float = EPS_TRI) -> bool:
    """True if every pair's max u-edge along the tree path is at most u_ij."""
    n = tree.n
    adj = tree.adjacency()
    for src in range(n):
        best = [None] * n
        best[src] = 0.0
        stack = [src]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if best[w] is None:
                    best[w] = max(best[v], u.get(v, w))
                    stack.append(w)
        for dst in range(src + 1, n):
            val = u.values[pair_index(n, src, dst)]
            if best[dst] - val > eps * max(best[dst], val):
                return False
    return True


@dataclass(frozen=True)
class ConeSpec:
    """One cone of a single-linkage fiber: an MST of u plus the bounds it induces."""

    tree: SpanningTree
    u: Ultrametric

    def __post_init__(self):
        if self.tree.n != self.u.n:
            raise ValueError("tree and ultrametric sizes differ")
        if not is_mst_of(self.tree, self.u):
            raise ValueError("tree is not a minimum spanning tree of u")

    @cached_property
    def path_sums(self) -> np.ndarray:
        return tree_path_sums(self.tree, self.u)

    @cached_property
    def tree_indices(self) -> np.ndarray:
        n = self.tree.n
        return np.asarray(
            sorted(pair_index(n, i, j) for i, j in self.tree.edges), dtype=np.intp
        )

    @cached_property
    def free_indices(self) -> np.ndarray:
        mask = np.ones(pair_count(self.tree.n), dtype=bool)
        mask[self.tree_indices] = False
        return np.flatnonzero(mask)


def path_bound(spec: ConeSpec, i: int, j: int) -> float:
    """Sum of u-lengths of the tree edges separating i from j."""
    if i == j:
        raise ValueError("i and j must differ")
    return float(spec.path_sums[pair_index(spec.u.n, i, j)])


def cone_membership_mask(spec: ConeSpec, thetas: np.ndarray, eps: float = EPS_TRI) -> np.ndarray:
    """Vectorized cone membership over rows of condensed metric candidates.

    A candidate belongs to the cone when it satisfies every triangle
    inequality, dominates u entrywise, is dominated by the tree path sums,
    and coincides with u on the tree edges (all within relative ``eps``).
    """
    u_vals = spec.u.values
    upper = spec.path_sums
    lo_slack = u_vals - thetas
    lo_ok = np.all(lo_slack <= eps * np.maximum(thetas, u_vals), axis=-1)
    hi_slack = thetas - upper
    hi_ok = np.all(hi_slack <= eps * np.maximum(thetas, upper), axis=-1)
    t = spec.tree_indices
    eq_gap = np.abs(thetas[..., t] - u_vals[t])
    eq_ok = np.all(eq_gap <= eps * np.maximum(thetas[..., t], u_vals[t]), axis=-1)
    return lo_ok & hi_ok & eq_ok & triangle_ok(thetas, spec.u.n, eps)


def cone_contains(spec: ConeSpec, theta: Dissimilarity) -> bool:
    """Exact-membership check for a single dissimilarity."""
    if theta.n != spec.u.n:
        raise ValueError("size mismatch")
    return bool(cone_membership_mask(spec, theta.values[np.newaxis, :])[0])
