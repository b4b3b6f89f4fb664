"""Core domain types for dendrogram estimation.

Dissimilarities, metrics and ultrametrics over ``n`` labeled points are
stored in condensed upper-triangular form (the ``n*(n-1)/2`` entries with
``i < j``, row-major).  Dendrograms are split into a combinatorial merge
hierarchy (:class:`Structure`) and the merge resolutions
(:class:`HeightVector` / plain height tuples); :func:`compose` and
:func:`decompose` convert between the dendrogram and ultrametric views.

Point indices are 0-based throughout the library; serialization to CSV and
JSON shifts to 1-based labels at the boundary.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

#: Relative tolerance for triangle / strong-triangle checks.  Exact checks
#: are brittle under floating-point sums.
EPS_TRI = 1e-9

#: Largest point count accepted by the structure enumeration (56 700
#: structures at n = 7).
N_MAX_ENUMERATE = 7


class TriangleViolation(ValueError):
    """A triple breaks the triangle inequality: d_ij > d_ik + d_kj."""

    def __init__(self, i: int, j: int, k: int, slack: float):
        self.i, self.j, self.k = i, j, k
        self.slack = slack
        super().__init__(
            f"triangle inequality violated at points ({i},{j},{k}): "
            f"d[{i},{j}] exceeds d[{i},{k}] + d[{k},{j}] by {slack:.3g}"
        )


class UltrametricViolation(ValueError):
    """A triple breaks the strong triangle inequality: d_ij > max(d_ik, d_kj)."""

    def __init__(self, i: int, j: int, k: int, slack: float):
        self.i, self.j, self.k = i, j, k
        self.slack = slack
        super().__init__(
            f"strong triangle inequality violated at points ({i},{j},{k}): "
            f"d[{i},{j}] exceeds max(d[{i},{k}], d[{k},{j}]) by {slack:.3g}"
        )


class SizeLimitError(ValueError):
    """Requested enumeration exceeds the supported point count."""


class DegenerateStructureWarning(UserWarning):
    """An ultrametric merges more than two clusters at a single resolution."""


# ---------------------------------------------------------------------------
# condensed-index helpers


def pair_count(n: int) -> int:
    return n * (n - 1) // 2


def pair_index(n: int, i: int, j: int) -> int:
    """Condensed index of the unordered pair (i, j), 0-based, i != j."""
    if i == j:
        raise ValueError("diagonal entries are not stored")
    if i > j:
        i, j = j, i
    return n * i - i * (i + 1) // 2 + (j - i - 1)


@lru_cache(maxsize=None)
def pair_list(n: int) -> tuple[tuple[int, int], ...]:
    """All pairs (i, j), i < j, in condensed order."""
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


@lru_cache(maxsize=None)
def triangle_indices(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, tuple]:
    """Index arrays for the 3 * C(n,3) ordered triangle checks.

    Returns condensed-index arrays ``(A, B, C)`` such that the inequality
    family is ``d[A] <= d[B] + d[C]``, plus the parallel tuple of (i, j, k)
    triples (k the midpoint) for error reporting.  Triples are ordered
    lexicographically so "first violation" is deterministic.
    """
    a_idx, b_idx, c_idx, triples = [], [], [], []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(n):
                if k == i or k == j:
                    continue
                a_idx.append(pair_index(n, i, j))
                b_idx.append(pair_index(n, i, k))
                c_idx.append(pair_index(n, k, j))
                triples.append((i, j, k))
    arrs = tuple(np.asarray(x, dtype=np.intp) for x in (a_idx, b_idx, c_idx))
    return arrs[0], arrs[1], arrs[2], tuple(triples)


def triangle_ok(values: np.ndarray, n: int, eps: float = EPS_TRI) -> np.ndarray:
    """Vectorized triangle check over rows of ``values`` (shape (..., P)).

    Returns a boolean array over the leading axes: True where every ordered
    triangle inequality holds within relative tolerance ``eps``.
    """
    a, b, c, _ = triangle_indices(n)
    lhs = values[..., a]
    rhs = values[..., b] + values[..., c]
    slack = lhs - rhs
    tol = eps * np.maximum(lhs, rhs)
    return np.all(slack <= tol, axis=-1)


def _first_triangle_violation(values: np.ndarray, n: int, eps: float):
    a, b, c, triples = triangle_indices(n)
    lhs = values[a]
    rhs = values[b] + values[c]
    bad = lhs - rhs > eps * np.maximum(lhs, rhs)
    if not bad.any():
        return None
    pos = int(np.argmax(bad))
    i, j, k = triples[pos]
    return i, j, k, float(lhs[pos] - rhs[pos])


def _first_ultrametric_violation(values: np.ndarray, n: int, eps: float):
    a, b, c, triples = triangle_indices(n)
    lhs = values[a]
    rhs = np.maximum(values[b], values[c])
    bad = lhs - rhs > eps * np.maximum(lhs, rhs)
    if not bad.any():
        return None
    pos = int(np.argmax(bad))
    i, j, k = triples[pos]
    return i, j, k, float(lhs[pos] - rhs[pos])


# ---------------------------------------------------------------------------
# dissimilarity hierarchy


@dataclass(frozen=True)
class Dissimilarity:
    """Symmetric positive dissimilarity over ``n`` labeled points.

    Only the upper triangle is stored (condensed form); the diagonal is
    implicitly zero.  Instances are immutable and safe to share across
    concurrent tasks.
    """

    n: int
    values: np.ndarray

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least 2 points")
        vals = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if vals.shape[0] != pair_count(self.n):
            raise ValueError(
                f"expected {pair_count(self.n)} entries for n={self.n}, "
                f"got {vals.shape[0]}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("entries must be finite")
        if np.any(vals <= 0.0):
            raise ValueError("entries must be strictly positive")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def get(self, i: int, j: int) -> float:
        """Entry for the unordered pair (i, j); 0 on the diagonal."""
        if i == j:
            return 0.0
        return float(self.values[pair_index(self.n, i, j)])

    def as_matrix(self) -> np.ndarray:
        m = np.zeros((self.n, self.n))
        for idx, (i, j) in enumerate(pair_list(self.n)):
            m[i, j] = m[j, i] = self.values[idx]
        return m

    def __eq__(self, other):
        if not isinstance(other, Dissimilarity):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.n, self.values.tobytes()))


class Metric(Dissimilarity):
    """Dissimilarity satisfying every triangle inequality (within EPS_TRI)."""

    def __post_init__(self):
        super().__post_init__()
        bad = _first_triangle_violation(self.values, self.n, EPS_TRI)
        if bad is not None:
            raise TriangleViolation(*bad)


class Ultrametric(Metric):
    """Metric satisfying the strong triangle inequality (within EPS_TRI)."""

    def __post_init__(self):
        super().__post_init__()
        bad = _first_ultrametric_violation(self.values, self.n, EPS_TRI)
        if bad is not None:
            raise UltrametricViolation(*bad)


def validate_metric(d: Dissimilarity) -> Metric:
    """Check all triangle inequalities; raise TriangleViolation on the first failure."""
    return Metric(d.n, d.values)


def validate_ultrametric(d: Dissimilarity) -> Ultrametric:
    """Check the strong triangle inequality; raise UltrametricViolation on failure."""
    return Ultrametric(d.n, d.values)


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class Partition:
    """Disjoint nonempty blocks covering {0, ..., n-1}.

    Blocks are canonically sorted: leaves ascending within a block, blocks
    ordered by smallest leaf.
    """

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        norm = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0]))
        object.__setattr__(self, "blocks", norm)
        seen: set[int] = set()
        for b in norm:
            if not b:
                raise ValueError("empty block")
            if seen.intersection(b):
                raise ValueError("blocks are not disjoint")
            seen.update(b)
        if seen != set(range(len(seen))):
            raise ValueError("blocks must cover {0, ..., n-1} exactly")

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    def block_of(self, x: int) -> tuple[int, ...]:
        for b in self.blocks:
            if x in b:
                return b
        raise KeyError(x)

    def refines(self, other: "Partition") -> bool:
        """True if every block of self is contained in a block of other."""
        lookup = {x: idx for idx, b in enumerate(other.blocks) for x in b}
        return all(len({lookup[x] for x in b}) == 1 for b in self.blocks)


def cut(u: Ultrametric, r: float) -> Partition:
    """Partition into equivalence classes of the relation u_xy <= r."""
    if r < 0:
        raise ValueError("resolution must be nonnegative")
    parent = list(range(u.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for idx, (i, j) in enumerate(pair_list(u.n)):
        if u.values[idx] <= r:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[rj] = ri
    groups: dict[int, list[int]] = {}
    for x in range(u.n):
        groups.setdefault(find(x), []).append(x)
    return Partition(tuple(tuple(g) for g in groups.values()))


# ---------------------------------------------------------------------------
# merge hierarchies


@dataclass(frozen=True, order=True)
class Structure:
    """Combinatorial merge hierarchy of a dendrogram, heights forgotten.

    ``merges`` is the ordered sequence of merge events.  Each event is a
    tuple of the clusters (sorted leaf tuples, ordered by smallest leaf)
    that fuse at that step.  Binary dendrograms have n-1 two-cluster
    events; events with more clusters only arise from degenerate
    ultrametrics that merge several clusters at one resolution.

    Canonical form makes equality, hashing and lexicographic comparison
    order-independent, so structures can key dicts and sort stably.
    """

    merges: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self):
        norm = tuple(
            tuple(sorted((tuple(sorted(c)) for c in event), key=lambda c: c[0]))
            for event in self.merges
        )
        object.__setattr__(self, "merges", norm)
        self._replay()

    def _replay(self) -> None:
        leaves: set[int] = set()
        for event in self.merges:
            for c in event:
                leaves.update(c)
        if leaves != set(range(len(leaves))) or len(leaves) < 2:
            raise ValueError("leaves must be 0..n-1 with n >= 2")
        alive = {(x,) for x in leaves}
        for event in self.merges:
            if len(event) < 2:
                raise ValueError("a merge event needs at least two clusters")
            for c in event:
                if c not in alive:
                    raise ValueError(f"cluster {c} is not present when its event fires")
            alive.difference_update(event)
            alive.add(tuple(sorted(x for c in event for x in c)))
        if alive != {tuple(sorted(leaves))}:
            raise ValueError("merge sequence does not end in a single cluster")

    @property
    def n(self) -> int:
        return len({x for event in self.merges for c in event for x in c})

    @property
    def is_binary(self) -> bool:
        return all(len(event) == 2 for event in self.merges)


@dataclass(frozen=True)
class HeightVector:
    """Nondecreasing merge resolutions in [0, 1] (the order simplex)."""

    a: np.ndarray

    def __post_init__(self):
        arr = np.array(self.a, dtype=np.float64, copy=True).reshape(-1)
        if arr.size < 1:
            raise ValueError("need at least one height")
        if arr[0] < 0.0 or arr[-1] > 1.0 or np.any(np.diff(arr) < 0.0):
            raise ValueError("heights must satisfy 0 <= a_1 <= ... <= a_{n-1} <= 1")
        arr.setflags(write=False)
        object.__setattr__(self, "a", arr)

    @property
    def n(self) -> int:
        return self.a.size + 1


@dataclass(frozen=True)
class Dendrogram:
    """A merge hierarchy together with the resolution of each event."""

    structure: Structure
    heights: tuple[float, ...]

    def __post_init__(self):
        h = self.heights.a if isinstance(self.heights, HeightVector) else self.heights
        h = tuple(float(x) for x in h)
        object.__setattr__(self, "heights", h)
        if len(h) != len(self.structure.merges):
            raise ValueError("one height per merge event required")
        if any(b < a for a, b in zip(h, h[1:])) or h[0] < 0.0:
            raise ValueError("heights must be nonnegative and nondecreasing")

    @property
    def is_degenerate(self) -> bool:
        """True if any resolution hosts more than a single two-way merge."""
        if not self.structure.is_binary:
            return True
        return len(set(self.heights)) < len(self.heights)


def compose(d: Dendrogram) -> Ultrametric:
    """Ultrametric whose value at (x, y) is the height of their first common merge."""
    n = d.structure.n
    values = np.zeros(pair_count(n))
    members: dict[tuple[int, ...], tuple[int, ...]] = {(x,): (x,) for x in range(n)}
    for event, h in zip(d.structure.merges, d.heights):
        groups = [members.pop(c) for c in event]
        for gi in range(len(groups)):
            for gj in range(gi + 1, len(groups)):
                for x in groups[gi]:
                    for y in groups[gj]:
                        values[pair_index(n, x, y)] = h
        merged = tuple(sorted(x for g in groups for x in g))
        members[merged] = merged
    return Ultrametric(n, values)


def decompose(u: Ultrametric) -> Dendrogram:
    """Split an ultrametric into its merge hierarchy and merge resolutions.

    Inverse of :func:`compose` on non-degenerate inputs (all merge heights
    distinct).  Degenerate inputs are represented faithfully (an event may
    fuse more than two clusters) and flagged with
    :class:`DegenerateStructureWarning`.
    """
    n = u.n
    order = sorted(range(pair_count(n)), key=lambda idx: u.values[idx])
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    blocks: dict[int, tuple[int, ...]] = {x: (x,) for x in range(n)}
    events: list[tuple[tuple[int, ...], ...]] = []
    heights: list[float] = []
    plist = pair_list(n)
    pos = 0
    degenerate = False
    while pos < len(order):
        h = float(u.values[order[pos]])
        level = [order[pos]]
        pos += 1
        while pos < len(order) and float(u.values[order[pos]]) == h:
            level.append(order[pos])
            pos += 1
        # group the components that fuse at this resolution
        children: dict[int, list[tuple[int, ...]]] = {}
        for idx in level:
            i, j = plist[idx]
            ri, rj = find(i), find(j)
            if ri == rj:
                continue
            kids = children.pop(ri, [blocks[ri]]) + children.pop(rj, [blocks[rj]])
            parent[rj] = ri
            children[ri] = kids
        new_events = []
        for root, kids in children.items():
            kids_sorted = tuple(sorted(kids, key=lambda c: c[0]))
            new_events.append(kids_sorted)
            blocks[root] = tuple(sorted(x for c in kids_sorted for x in c))
        new_events.sort(key=lambda ev: ev[0][0])
        if len(new_events) > 1 or any(len(ev) > 2 for ev in new_events):
            degenerate = True
        for ev in new_events:
            events.append(ev)
            heights.append(h)
    if degenerate:
        warnings.warn(
            "ultrametric merges more than two clusters at one resolution",
            DegenerateStructureWarning,
            stacklevel=2,
        )
    return Dendrogram(Structure(tuple(events)), tuple(heights))


# ---------------------------------------------------------------------------
# structure counting and enumeration


def count_structures(n: int) -> int:
    """Number of binary merge hierarchies on n labeled points: n!(n-1)!/2^(n-1)."""
    if n < 2:
        raise ValueError("need at least 2 points")
    return math.factorial(n) * math.factorial(n - 1) // 2 ** (n - 1)


def _step_options(k: int) -> int:
    return k * (k - 1) // 2


def iter_structures(n: int, n_max: int = N_MAX_ENUMERATE) -> Iterator[Structure]:
    """Yield every binary structure on n points in canonical order."""
    if n < 2:
        raise ValueError("need at least 2 points")
    if n > n_max:
        raise SizeLimitError(
            f"enumeration capped at n={n_max} ({count_structures(n)} structures at n={n})"
        )

    def rec(clusters: tuple[tuple[int, ...], ...], events):
        if len(clusters) == 1:
            yield Structure(tuple(events))
            return
        for p in range(len(clusters)):
            for q in range(p + 1, len(clusters)):
                merged = tuple(sorted(clusters[p] + clusters[q]))
                rest = tuple(
                    c for idx, c in enumerate(clusters) if idx not in (p, q)
                )
                nxt = tuple(sorted(rest + (merged,), key=lambda c: c[0]))
                yield from rec(nxt, events + [(clusters[p], clusters[q])])

    singletons = tuple((x,) for x in range(n))
    yield from rec(singletons, [])


def enumerate_structures(n: int, n_max: int = N_MAX_ENUMERATE) -> list[Structure]:
    """All binary structures on n points; position in the list is the index."""
    return list(iter_structures(n, n_max=n_max))


def structure_index(tau: Structure) -> int:
    """Rank of a binary structure within the canonical enumeration."""
    if not tau.is_binary:
        raise ValueError("only binary structures are indexed")
    n = tau.n
    clusters = [(x,) for x in range(n)]
    index = 0
    for event in tau.merges:
        k = len(clusters)
        p = clusters.index(event[0])
        q = clusters.index(event[1])
        if p > q:
            p, q = q, p
        index = index * _step_options(k) + (k * p - p * (p + 1) // 2 + (q - p - 1))
        merged = tuple(sorted(clusters[p] + clusters[q]))
        del clusters[q], clusters[p]
        clusters.append(merged)
        clusters.sort(key=lambda c: c[0])
    return index


def structure_at(n: int, index: int, n_max: int = N_MAX_ENUMERATE) -> Structure:
    """Binary structure at a given rank of the canonical enumeration."""
    if n > n_max:
        raise SizeLimitError(f"enumeration capped at n={n_max}")
    total = count_structures(n)
    if not 0 <= index < total:
        raise ValueError(f"index must be in [0, {total})")
    radices = [_step_options(k) for k in range(n, 1, -1)]
    digits = []
    for radix in reversed(radices):
        index, digit = divmod(index, radix)
        digits.append(digit)
    digits.reverse()
    clusters = [(x,) for x in range(n)]
    events = []
    for digit in digits:
        k = len(clusters)
        # invert the condensed pair index within the current k clusters
        p = 0
        while digit >= k - p - 1:
            digit -= k - p - 1
            p += 1
        q = p + 1 + digit
        events.append((clusters[p], clusters[q]))
        merged = tuple(sorted(clusters[p] + clusters[q]))
        del clusters[q], clusters[p]
        clusters.append(merged)
        clusters.sort(key=lambda c: c[0])
    return Structure(tuple(events))
