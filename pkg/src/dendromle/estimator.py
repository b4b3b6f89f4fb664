"""Top-level structure estimators.

The maximum-likelihood route prunes the hypothesis space with the
Metropolis walk, scores the surviving merge hierarchies by integrated
likelihood, and picks the argmax.  The single-linkage baseline simply
reads the hierarchy off the measurement itself.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .core import Dissimilarity, Metric, Structure, decompose
from .likelihood import LikelihoodConfig, structure_log_likelihood
from .mh import MHConfig, StructureTally, default_initial_state, mh_sample, prune, theta_membership
from .noise import NoiseSpec
from .trees import slhc, slhc_max

log = logging.getLogger(__name__)


class EstimationError(RuntimeError):
    """The pruning walk produced no scoreable (binary) hypothesis."""


@dataclass(frozen=True)
class EstimateReport:
    """Ranked survivor likelihoods plus the chosen and baseline structures.

    ``scale`` is the factor by which the input was divided to fit the
    normalized metric space (1.0 when no rescaling was needed).
    """

    ranked: tuple[tuple[Structure, float], ...]
    chosen: Structure
    baseline: Structure
    scale: float

    def __post_init__(self):
        if self.ranked and self.ranked[0][0] != self.chosen:
            raise ValueError("chosen must be the top-ranked structure")


def _rescale_to_theta(x: Dissimilarity) -> tuple[Dissimilarity, float]:
    """Divide x by the smallest factor that brings its linkage values under 1.

    Measurements that already lie in the normalized space pass through
    untouched; triangle violations are left alone (the walk never visits
    them anyway).
    """
    if theta_membership(x):
        return x, 1.0
    top = slhc_max(x.n, x.values)
    target = 1.0 - 1e-6
    if top <= target:
        return x, 1.0
    s = top / target
    return Dissimilarity(x.n, x.values / s), s


def slhc_estimate(x: Dissimilarity) -> Structure:
    """Baseline: the merge hierarchy of the single-linkage image of x."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return decompose(slhc(x)).structure


def mle_estimate(
    x: Dissimilarity,
    noise: NoiseSpec,
    mh_cfg: MHConfig,
    lik_cfg: LikelihoodConfig,
    rng: np.random.Generator,
) -> EstimateReport:
    """Approximate maximum-likelihood estimate of the merge hierarchy.

    Pipeline: rescale into the normalized metric space, run the pruning
    walk, keep the most frequent binary hierarchies, score each survivor
    by integrated log likelihood, and return them ranked.  Rescaling also
    divides the noise variance by the squared factor so the measurement
    model refers to the same data.
    """
    x_scaled, scale = _rescale_to_theta(x)
    noise_scaled = NoiseSpec(noise.v / scale**2) if scale != 1.0 else noise
    theta0 = default_initial_state(x_scaled)
    tally = mh_sample(x_scaled, theta0, mh_cfg, noise_scaled, rng)
    binary_counts = {t: c for t, c in tally.counts.items() if t.is_binary}
    if not binary_counts:
        raise EstimationError("the pruning walk produced no binary hierarchy")
    survivors = prune(
        StructureTally(binary_counts, sum(binary_counts.values())), mh_cfg.n_hypotheses
    )
    log.debug("scoring %d surviving structures", len(survivors))
    scored = []
    for tau, child in zip(survivors, rng.spawn(len(survivors))):
        value = structure_log_likelihood(x_scaled, tau, noise_scaled, lik_cfg, child)
        scored.append((tau, value))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return EstimateReport(
        ranked=tuple(scored),
        chosen=scored[0][0],
        baseline=slhc_estimate(x),
        scale=scale,
    )
