"""Metropolis random walk over normalized metrics with structure tallying.

The walk targets the unnormalized measurement density over the space of
metrics whose single-linkage values stay at or below one.  Proposals add
independent Gaussian noise per coordinate and are redrawn until they land
back in that space; the symmetric proposal makes the plain Metropolis
ratio valid, and only log-density differences are ever formed.  Recorded
states are reduced to their single-linkage merge hierarchies, whose
frequency ranking drives hypothesis pruning.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import (
    Dissimilarity,
    Metric,
    Structure,
    Ultrametric,
    decompose,
    triangle_ok,
)
from .noise import NoiseSpec, log_density_rows
from .trees import merge_events, slhc_max, slhc_values

#: Consecutive out-of-space proposals tolerated inside one transition.
STUCK_LIMIT = 10_000


class ProposalStuckError(RuntimeError):
    """The proposal chain cannot find a valid metric near the current state."""


@dataclass(frozen=True)
class MHConfig:
    """Chain schedule: burn-in, thinning, sample count, hypothesis count.

    ``proposal_sigma`` of None means "use the measurement standard
    deviation", which keeps proposal steps commensurate with the noise.
    """

    burn_in: int = 1000
    thinning: int = 3
    n_theta: int = 3000
    n_hypotheses: int = 20
    proposal_sigma: float | None = None

    def __post_init__(self):
        if min(self.burn_in, self.thinning, self.n_theta, self.n_hypotheses) < 1:
            raise ValueError("chain schedule fields must be positive")
        if self.proposal_sigma is not None and not self.proposal_sigma > 0:
            raise ValueError("proposal_sigma must be positive")

    def sigma(self, noise: NoiseSpec) -> float:
        return self.proposal_sigma if self.proposal_sigma is not None else noise.std


@dataclass(frozen=True)
class StructureTally:
    """Occurrence counts of merge hierarchies along a thinned chain."""

    counts: Mapping[Structure, int]
    total: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.total:
            raise ValueError("counts must sum to total")


def _in_theta(n: int, values: np.ndarray) -> bool:
    if np.any(values <= 0.0) or not triangle_ok(values, n):
        return False
    return slhc_max(n, values) <= 1.0


def theta_membership(theta: Dissimilarity) -> bool:
    """True if theta is a metric whose single-linkage values all stay <= 1."""
    return _in_theta(theta.n, theta.values)


def _step(
    n: int,
    values: np.ndarray,
    logp: float,
    x_values: np.ndarray,
    sigma: float,
    v: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float, bool]:
    """One Metropolis transition on raw arrays; returns (values, logp, accepted)."""
    p = values.shape[0]
    for _ in range(STUCK_LIMIT):
        proposal = values + rng.normal(0.0, sigma, size=p)
        if _in_theta(n, proposal):
            break
    else:
        raise ProposalStuckError(
            f"{STUCK_LIMIT} consecutive proposals left the metric space"
        )
    logp_new = float(log_density_rows(x_values, proposal, v))
    q = rng.random()
    if logp_new >= logp or q < math.exp(logp_new - logp):
        return proposal, logp_new, True
    return values, logp, False


def mh_transition(
    theta_old: Metric,
    x: Dissimilarity,
    cfg: MHConfig,
    noise: NoiseSpec,
    rng: np.random.Generator,
) -> Metric:
    """One transition of the walk, starting from a metric inside the space."""
    if not theta_membership(theta_old):
        raise ValueError("theta_old must lie in the normalized metric space")
    logp = float(log_density_rows(x.values, theta_old.values, noise.v))
    values, _, _ = _step(
        theta_old.n, theta_old.values, logp, x.values, cfg.sigma(noise), noise.v, rng
    )
    return Metric(theta_old.n, values)


def _structure_key(n: int, values: np.ndarray):
    """Canonical merge-event tuple of the single-linkage hierarchy of values."""
    events, heights = merge_events(n, values)
    if len(set(heights)) == len(heights):
        return tuple(events)
    # tied merge heights: fall back to the faithful multi-way decomposition
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return decompose(Ultrametric(n, slhc_values(n, values))).structure.merges


def mh_sample(
    x: Dissimilarity,
    theta0: Metric,
    cfg: MHConfig,
    noise: NoiseSpec,
    rng: np.random.Generator,
) -> StructureTally:
    """Run the full chain schedule and tally the recorded hierarchies.

    Consumes burn_in + thinning * n_theta transitions and records the
    state's merge hierarchy at every post-burn-in index divisible by the
    thinning step, for exactly n_theta recorded structures.
    """
    if not theta_membership(theta0):
        raise ValueError("theta0 must lie in the normalized metric space")
    n = x.n
    sigma = cfg.sigma(noise)
    values = theta0.values
    logp = float(log_density_rows(x.values, values, noise.v))
    counts: dict[tuple, int] = {}
    key = None
    steps = cfg.burn_in + cfg.thinning * cfg.n_theta
    for k in range(1, steps + 1):
        values, logp, accepted = _step(n, values, logp, x.values, sigma, noise.v, rng)
        if accepted:
            key = None
        if k > cfg.burn_in and (k - cfg.burn_in) % cfg.thinning == 0:
            if key is None:
                key = _structure_key(n, values)
            counts[key] = counts.get(key, 0) + 1
    tally = {Structure(k): c for k, c in counts.items()}
    return StructureTally(tally, cfg.n_theta)


def prune(tally: StructureTally, n_h: int) -> list[Structure]:
    """The n_h most frequent structures, ties broken by canonical order."""
    if n_h < 1:
        raise ValueError("n_h must be positive")
    ranked = sorted(tally.counts.items(), key=lambda item: (-item[1], item[0]))
    return [tau for tau, _ in ranked[:n_h]]


def default_initial_state(x: Dissimilarity) -> Metric:
    """Chain start: x itself when admissible, else its single-linkage image.

    The single-linkage image is an ultrametric, hence a metric; it is
    scaled down slightly if its largest entry grazes the upper bound, so
    the chain starts strictly inside the space.
    """
    if theta_membership(x):
        return Metric(x.n, x.values)
    u_values = slhc_values(x.n, x.values)
    top = float(u_values.max())
    target = 1.0 - 1e-6
    if top > target:
        u_values = u_values * (target / top)
    return Metric(x.n, u_values)
