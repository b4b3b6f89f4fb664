"""Uniform sampling on the two integration domains.

Heights are drawn uniformly from the order simplex by taking prefix sums
of a flat Dirichlet draw (a volume-preserving change of variables from
the standard simplex).  Metrics are drawn uniformly from a single-linkage
fiber by rejection, cone by cone: tree-edge coordinates are pinned to the
ultrametric, free coordinates are proposed uniformly inside the cone's
interval box, and candidates breaking a triangle inequality are
discarded.  Giving every cone the same proposal count and the same
effective proposal normalizer (see ``fiber_matrix``) makes the pooled
accepted counts proportional to cone volumes, so the pooled sample is
uniform on the whole fiber.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EPS_TRI, HeightVector, Metric, Ultrametric, pair_count, triangle_ok
from .trees import K_MAX, ConeSpec, SpanningTree, mst_set

#: Number of proposal-doubling rounds after the initial attempt.
MAX_RETRIES = 3


class InsufficientSamplesError(RuntimeError):
    """Rejection sampling could not collect the requested number of metrics."""


@dataclass(frozen=True)
class SamplerBudget:
    """Per-cone proposal count and the pooled acceptance floor."""

    proposals_per_cone: int = 20_000
    min_total_accepted: int = 500

    def __post_init__(self):
        if self.proposals_per_cone < 1 or self.min_total_accepted < 1:
            raise ValueError("budget fields must be positive")


@dataclass(frozen=True)
class FiberSample:
    """A metric drawn from a fiber, tagged with the cone that produced it."""

    theta: Metric
    cone_index: int


def height_matrix(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """(count, n-1) array of uniform order-simplex draws."""
    gamma = rng.dirichlet(np.ones(n), size=count)
    a = np.cumsum(gamma[:, : n - 1], axis=1)
    return np.clip(a, 0.0, 1.0)


def sample_heights(n: int, count: int, rng: np.random.Generator) -> list[HeightVector]:
    """Uniform draws of nondecreasing height vectors on [0, 1]."""
    if n < 2 or count < 1:
        raise ValueError("need n >= 2 and count >= 1")
    return [HeightVector(row) for row in height_matrix(n, count, rng)]


def fiber_bounds(u: Ultrametric, tree: SpanningTree) -> tuple[float, float]:
    """Global lower and upper bounds on any metric in the cone of ``tree``.

    Every coordinate is at least the smallest ultrametric entry and at most
    the largest tree path sum.
    """
    spec = ConeSpec(tree, u)
    return float(u.values.min()), float(spec.path_sums.max())


def _propose(
    spec: ConeSpec,
    m: int,
    lo: float | np.ndarray,
    hi: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """m box proposals with pinned tree edges; returns the accepted rows.

    ``lo`` may be a per-coordinate vector; draws stay uniform per free
    coordinate either way.  Cheap interval checks run before the coupled
    triangle checks so rejection cost tracks the acceptance rate.
    """
    u_vals = spec.u.values
    thetas = rng.uniform(lo, hi, size=(m, pair_count(spec.u.n)))
    thetas[:, spec.tree_indices] = u_vals[spec.tree_indices]
    upper = spec.path_sums
    keep = np.all(thetas - upper <= EPS_TRI * np.maximum(thetas, upper), axis=1)
    keep &= np.all(u_vals - thetas <= EPS_TRI * np.maximum(thetas, u_vals), axis=1)
    rows = np.flatnonzero(keep)
    if rows.size == 0:
        return thetas[:0]
    survivors = thetas[rows]
    return survivors[triangle_ok(survivors, spec.u.n)]


def _propose_tight(
    spec: ConeSpec, m: int, keep_prob: float, rng: np.random.Generator
) -> np.ndarray:
    """m proposals on the cone's own interval box, thinned to a shared normalizer.

    Coordinates are drawn uniformly on [u_ij, U_ij], so only the coupled
    triangle inequalities can reject; survivors are then kept with
    probability ``keep_prob``.  With keep_prob = (own box volume) / (largest
    box volume over the fiber's cones), every cone's per-proposal keep
    probability is Vol(cone) / (largest box volume): one shared normalizer,
    which is what makes pooled counts exactly volume-proportional.
    """
    thetas = rng.uniform(spec.u.values, spec.path_sums, size=(m, pair_count(spec.u.n)))
    thetas[:, spec.tree_indices] = spec.u.values[spec.tree_indices]
    thin = rng.random(m)
    rows = np.flatnonzero(thin < keep_prob)
    if rows.size == 0:
        return thetas[:0]
    survivors = thetas[rows]
    return survivors[triangle_ok(survivors, spec.u.n)]


def sample_cone(
    spec: ConeSpec,
    budget: SamplerBudget,
    rng: np.random.Generator,
    box: tuple[float, float] | None = None,
    cone_index: int = 0,
) -> list[FiberSample]:
    """Uniform samples from one cone; may return fewer than requested (or none)."""
    lo, hi = box if box is not None else fiber_bounds(spec.u, spec.tree)
    accepted = _propose(spec, budget.proposals_per_cone, lo, hi, rng)
    n = spec.u.n
    return [FiberSample(Metric(n, row), cone_index) for row in accepted]


def fiber_matrix(
    u: Ultrametric,
    budget: SamplerBudget,
    rng: np.random.Generator,
    k_max: int = K_MAX,
) -> tuple[np.ndarray, np.ndarray]:
    """Pooled uniform fiber samples as raw arrays: (thetas, cone indices).

    Every cone receives the same proposal count and the same effective
    proposal normalizer; when the pool falls short the count is doubled,
    up to MAX_RETRIES extra rounds, accumulating across rounds.  Pool
    order is round-major, then cone index, then draw order.

    Proposals for each cone use its own interval box [u_ij, U_ij] (a naive
    shared scalar box rejects nearly everything once merge heights spread
    out), and acceptances are thinned by the ratio of the cone's box
    volume to the largest box volume, which restores one shared proposal
    normalizer across cones: pooled counts stay exactly proportional to
    cone volumes and the pooled sample is uniform on the whole fiber.
    """
    specs = [ConeSpec(t, u) for t in mst_set(u, k_max=k_max)]
    log_volumes = []
    for spec in specs:
        widths = spec.path_sums[spec.free_indices] - u.values[spec.free_indices]
        log_volumes.append(
            float(np.sum(np.log(widths))) if np.all(widths > 0.0) else -np.inf
        )
    top = max(log_volumes)
    keep_probs = [math.exp(lv - top) for lv in log_volumes]
    m = budget.proposals_per_cone
    chunks: list[np.ndarray] = []
    ids: list[np.ndarray] = []
    total = 0
    for _ in range(MAX_RETRIES + 1):
        for k, spec in enumerate(specs):
            got = _propose_tight(spec, m, keep_probs[k], rng)
            if got.shape[0]:
                chunks.append(got)
                ids.append(np.full(got.shape[0], k, dtype=np.intp))
                total += got.shape[0]
        if total >= budget.min_total_accepted:
            thetas = np.concatenate(chunks, axis=0)
            return thetas, np.concatenate(ids)
        m *= 2
    raise InsufficientSamplesError(
        f"collected {total} fiber samples, needed {budget.min_total_accepted} "
        f"(n={u.n}, {len(specs)} cones)"
    )


def sample_fiber(
    u: Ultrametric,
    budget: SamplerBudget,
    rng: np.random.Generator,
    k_max: int = K_MAX,
) -> list[FiberSample]:
    """Uniform samples from the whole single-linkage fiber of ``u``."""
    thetas, ids = fiber_matrix(u, budget, rng, k_max=k_max)
    return [FiberSample(Metric(u.n, row), int(k)) for row, k in zip(thetas, ids)]
