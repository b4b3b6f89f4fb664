"""Monte-Carlo evaluation of the integrated structure likelihood.

The likelihood of a merge hierarchy integrates the measurement density
over the latent metric (uniform on the single-linkage fiber) and over the
heights (uniform on the order simplex).  Both integrals are approximated
by sample means; everything stays in log space, with the means taken as
log-sum-exp reductions, because products of per-pair densities underflow
long before they stop carrying information.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import Dendrogram, Dissimilarity, Structure, Ultrametric, compose
from .noise import NoiseSpec, log_density_rows
from .samplers import InsufficientSamplesError, SamplerBudget, fiber_matrix, height_matrix
from .trees import K_MAX

log = logging.getLogger(__name__)

#: Log-domain likelihood value.
LogLikelihood = float


def _default_budget() -> SamplerBudget:
    # Smaller per-cone proposal count than the standalone sampler default:
    # the height loop calls the fiber sampler thousands of times and the
    # doubling retries already cover thin cones.
    return SamplerBudget(proposals_per_cone=1000, min_total_accepted=500)


@dataclass(frozen=True)
class LikelihoodConfig:
    """Sample counts for the two nested Monte-Carlo integrals."""

    n_omega: int = 100
    fiber_budget: SamplerBudget = field(default_factory=_default_budget)
    k_max: int = K_MAX

    def __post_init__(self):
        if self.n_omega < 1:
            raise ValueError("n_omega must be positive")


def phi(
    x: Dissimilarity,
    u: Ultrametric,
    noise: NoiseSpec,
    cfg: LikelihoodConfig,
    rng: np.random.Generator,
) -> LogLikelihood:
    """Log of the mean measurement density over uniform fiber samples.

    The pooled samples are averaged once; per-cone counts never enter,
    since pooling with a shared proposal budget already weighs each cone
    by its volume.
    """
    thetas, _ = fiber_matrix(u, cfg.fiber_budget, rng, k_max=cfg.k_max)
    logd = log_density_rows(x.values, thetas, noise.v)
    assert np.all(np.isfinite(logd)), "per-sample log densities must be finite"
    return float(logsumexp(logd) - math.log(logd.shape[0]))


def structure_log_likelihood(
    x: Dissimilarity,
    tau: Structure,
    noise: NoiseSpec,
    cfg: LikelihoodConfig,
    rng: np.random.Generator,
) -> LogLikelihood:
    """Log likelihood of a binary merge hierarchy given one measurement.

    Averages the fiber integral over heights drawn uniformly from the
    order simplex.  Height draws whose fiber yields too few samples are
    skipped and the average renormalized; more than half failing is an
    error.  Each height iteration consumes its own spawned substream, so
    the result does not depend on whether iterations run serially or in
    parallel.
    """
    if not tau.is_binary:
        raise ValueError("likelihood is defined for binary structures only")
    n = tau.n
    phis: list[float] = []
    failures = 0
    for child in rng.spawn(cfg.n_omega):
        heights = height_matrix(n, 1, child)[0]
        u_h = compose(Dendrogram(tau, tuple(float(h) for h in heights)))
        try:
            phis.append(phi(x, u_h, noise, cfg, child))
        except InsufficientSamplesError:
            failures += 1
    if 2 * failures > cfg.n_omega:
        raise InsufficientSamplesError(
            f"{failures} of {cfg.n_omega} height draws failed fiber sampling"
        )
    if failures:
        log.debug("skipped %d of %d height draws", failures, cfg.n_omega)
    return float(logsumexp(phis) - math.log(len(phis)))
