"""Simulation harness: ground-truth generation and the two standard studies.

The frequency study measures how often each merge hierarchy shows up in
the pruning walk for repeated measurements of one ground-truth metric,
yielding a binned frequency histogram and the rank distribution of the
true hierarchy.  The comparison study scores the maximum-likelihood
estimator against the single-linkage baseline over a grid of noise
levels, averaging success rates over several height vectors.

Measurements are embarrassingly parallel; every work item derives its own
random stream from (seed, labels), so parallel and serial runs produce
identical results.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import multiprocessing

import numpy as np

from .core import (
    Dendrogram,
    HeightVector,
    Metric,
    Structure,
    compose,
    count_structures,
    enumerate_structures,
    structure_at,
)
from .estimator import mle_estimate, slhc_estimate
from .likelihood import LikelihoodConfig
from .mh import MHConfig, default_initial_state, mh_sample
from .noise import NoiseSpec, sample_measurement
from .rng import substream
from .samplers import SamplerBudget, fiber_matrix, height_matrix, sample_heights

log = logging.getLogger(__name__)

#: Budget for drawing a single ground-truth metric from a fiber.  Every
#: pooled sample is individually uniform on the fiber (the cones share one
#: proposal normalizer), so one accepted sample suffices.
GT_BUDGET = SamplerBudget(proposals_per_cone=2000, min_total_accepted=1)


def thread_count() -> int:
    """Worker cap from DENDRO_MLE_THREADS (0 or unset means auto)."""
    raw = os.environ.get("DENDRO_MLE_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"DENDRO_MLE_THREADS must be an integer, got {raw!r}") from None
    return (os.cpu_count() or 1) if k == 0 else max(1, k)


def _pmap(fn, tasks: list) -> list:
    workers = min(thread_count(), len(tasks))
    if workers <= 1:
        return [fn(t) for t in tasks]
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(fn, tasks))


@dataclass(frozen=True)
class ExperimentSpec:
    """Scale and schedule of one simulation study."""

    n: int
    noise_std: float
    n_measurements: int
    n_heights: int
    mh_cfg: MHConfig
    lik_cfg: LikelihoodConfig
    seed: int

    def __post_init__(self):
        if self.n < 2 or self.n_measurements < 1 or self.n_heights < 1:
            raise ValueError("counts must be positive")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")

    @property
    def noise(self) -> NoiseSpec:
        return NoiseSpec(self.noise_std**2)


@dataclass(frozen=True)
class BinHistogram:
    """Structure counts per frequency bin over [0, 1] (means may be fractional)."""

    bin_edges: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.float64)
        if edges.shape != (21,) or counts.shape != (20,):
            raise ValueError("expected 21 edges and 20 counts")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class RankDistribution:
    """How often the true hierarchy attained each frequency rank.

    Keys are 1-based ranks; the key "unranked" counts measurements where
    the true hierarchy never appeared in the walk.
    """

    rank_counts: dict
    n_measurements: int

    def __post_init__(self):
        if sum(self.rank_counts.values()) != self.n_measurements:
            raise ValueError("rank counts must sum to the number of measurements")


def generate_ground_truth(
    n: int, rng: np.random.Generator, structure_index: int | None = None
) -> tuple[Structure, HeightVector, Metric]:
    """Uniform hierarchy, uniform heights, and a uniform metric from their fiber."""
    idx = int(rng.integers(count_structures(n))) if structure_index is None else structure_index
    tau = structure_at(n, idx)
    a = sample_heights(n, 1, rng)[0]
    u = compose(Dendrogram(tau, a))
    thetas, _ = fiber_matrix(u, GT_BUDGET, rng)
    theta_star = Metric(n, thetas[int(rng.integers(thetas.shape[0]))])
    return tau, a, theta_star


def _frequency_task(args) -> list[tuple[tuple, int]]:
    seed, m_idx, n, v, theta_star_values, mh_cfg = args
    rng = substream(seed, "measurement", m_idx)
    noise = NoiseSpec(v)
    theta_star = Metric(n, np.asarray(theta_star_values))
    x = sample_measurement(theta_star, noise, rng)
    tally = mh_sample(x, default_initial_state(x), mh_cfg, noise, rng)
    return [(tau.merges, c) for tau, c in sorted(tally.counts.items())]


def run_frequency_study(
    spec: ExperimentSpec, structure_index: int | None = None
) -> tuple[BinHistogram, RankDistribution]:
    """Repeated-measurement appearance-frequency study for one ground truth.

    Per measurement: run the pruning walk, convert structure counts to
    appearance frequencies (zero for hierarchies that never arose), bin
    the frequencies into 20 equal bins over [0, 1], and rank hierarchies
    by descending frequency (ties resolved by canonical order).  Returns
    the measurement-averaged histogram and the true hierarchy's rank
    distribution; hierarchies absent from the walk leave the true one
    "unranked" rather than assigning an arbitrary position.
    """
    n = spec.n
    tau, _, theta_star = generate_ground_truth(
        n, substream(spec.seed, "ground-truth"), structure_index
    )
    enum = enumerate_structures(n)
    position = {t.merges: i for i, t in enumerate(enum)}
    true_pos = position[tau.merges]
    log.info(
        "frequency study: n=%d std=%g measurements=%d", n, spec.noise_std, spec.n_measurements
    )
    tasks = [
        (spec.seed, m, n, spec.noise_std**2, theta_star.values, spec.mh_cfg)
        for m in range(spec.n_measurements)
    ]
    results = _pmap(_frequency_task, tasks)
    edges = np.linspace(0.0, 1.0, 21)
    hist_acc = np.zeros(20)
    rank_counts: dict = {}
    for items in results:
        freqs = np.zeros(len(enum))
        for merges, c in items:
            pos = position.get(merges)
            if pos is not None:
                freqs[pos] = c / spec.mh_cfg.n_theta
        counts, _ = np.histogram(freqs, bins=edges)
        assert counts.sum() == len(enum)
        hist_acc += counts
        if freqs[true_pos] > 0.0:
            order = np.argsort(-freqs, kind="stable")
            rank = int(np.flatnonzero(order == true_pos)[0]) + 1
            rank_counts[rank] = rank_counts.get(rank, 0) + 1
        else:
            rank_counts["unranked"] = rank_counts.get("unranked", 0) + 1
    hist = BinHistogram(edges, hist_acc / spec.n_measurements)
    return hist, RankDistribution(rank_counts, spec.n_measurements)


def _comparison_task(args) -> tuple[int, int, bool, bool]:
    seed, li, hi, mi, n, v, height_row, tau_merges, mh_cfg, lik_cfg = args
    rng = substream(seed, "compare", li, hi, mi)
    noise = NoiseSpec(v)
    tau = Structure(tau_merges)
    u_h = compose(Dendrogram(tau, tuple(height_row)))
    thetas, _ = fiber_matrix(u_h, GT_BUDGET, rng)
    theta_star = Metric(n, thetas[int(rng.integers(thetas.shape[0]))])
    x = sample_measurement(theta_star, noise, rng)
    report = mle_estimate(x, noise, mh_cfg, lik_cfg, rng)
    mle_ok = report.chosen.merges == tau_merges
    slhc_ok = slhc_estimate(x).merges == tau_merges
    return li, hi, mle_ok, slhc_ok


def run_comparison_study(
    spec: ExperimentSpec,
    noise_levels: list[float],
    structure_index: int | None = None,
) -> list[tuple[float, float, float]]:
    """Success rates of the MLE and single-linkage estimators per noise level.

    One fixed hierarchy; ``n_heights`` height vectors; per height and
    noise level, ``n_measurements`` ground-truth metrics each measured
    once; both estimators scored by exact hierarchy match and rates
    averaged over heights.  Returns (noise_std, mle_rate, slhc_rate) rows.
    """
    n = spec.n
    if structure_index is None:
        structure_index = int(
            substream(spec.seed, "structure").integers(count_structures(n))
        )
    tau = structure_at(n, structure_index)
    heights = height_matrix(n, spec.n_heights, substream(spec.seed, "heights"))
    log.info(
        "comparison study: n=%d levels=%s heights=%d per-height=%d",
        n, noise_levels, spec.n_heights, spec.n_measurements,
    )
    tasks = [
        (
            spec.seed, li, hi, mi, n, float(std) ** 2,
            tuple(float(h) for h in heights[hi]),
            tau.merges, spec.mh_cfg, spec.lik_cfg,
        )
        for li, std in enumerate(noise_levels)
        for hi in range(spec.n_heights)
        for mi in range(spec.n_measurements)
    ]
    results = _pmap(_comparison_task, tasks)
    rows = []
    for li, std in enumerate(noise_levels):
        mle_by_height = np.zeros(spec.n_heights)
        slhc_by_height = np.zeros(spec.n_heights)
        for rli, rhi, mle_ok, slhc_ok in results:
            if rli == li:
                mle_by_height[rhi] += mle_ok
                slhc_by_height[rhi] += slhc_ok
        mle_rate = float(np.mean(mle_by_height / spec.n_measurements))
        slhc_rate = float(np.mean(slhc_by_height / spec.n_measurements))
        rows.append((float(std), mle_rate, slhc_rate))
    return rows
