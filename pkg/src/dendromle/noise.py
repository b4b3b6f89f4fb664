"""Lognormal measurement model linking a latent metric to observed distances.

Each measured distance is an independent lognormal draw whose mean equals
the latent entry and whose variance is a single global constant ``v``.
Alternative noise families can slot in by matching the three call
signatures below; lognormal is the one shipped implementation.  All
densities are evaluated in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dissimilarity

_LOG_2PI = math.log(2.0 * math.pi)


class DomainError(ValueError):
    """Model parameters or measurements outside the positive orthant."""


@dataclass(frozen=True)
class NoiseSpec:
    """Measurement variance (squared distance units), shared by all pairs."""

    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise DomainError("variance must be positive")

    @property
    def std(self) -> float:
        return math.sqrt(self.v)


@dataclass(frozen=True)
class LogNormalParams:
    """Log-scale location and deviation of one measured distance."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")


def _mu_sigma(theta: np.ndarray, v: float) -> tuple[np.ndarray, np.ndarray]:
    sigma_sq = np.log1p(v / np.square(theta))
    mu = np.log(theta) - 0.5 * sigma_sq
    return mu, np.sqrt(sigma_sq)


def params_for(theta_ij: float, spec: NoiseSpec) -> LogNormalParams:
    """Lognormal parameters giving mean theta_ij and variance spec.v."""
    if not theta_ij > 0:
        raise DomainError("latent distance must be positive")
    mu, sigma = _mu_sigma(np.asarray([theta_ij]), spec.v)
    return LogNormalParams(float(mu[0]), float(sigma[0]))


def log_density_rows(x_values: np.ndarray, theta_rows: np.ndarray, v: float) -> np.ndarray:
    """Joint log density of one measurement under many latent metrics.

    ``theta_rows`` has shape (..., P); the result sums the per-pair
    lognormal log densities along the last axis.
    """
    mu, sigma = _mu_sigma(theta_rows, v)
    z = (np.log(x_values) - mu) / sigma
    terms = -np.log(sigma) - np.log(x_values) - 0.5 * _LOG_2PI - 0.5 * np.square(z)
    return np.sum(terms, axis=-1)


def log_density(x: Dissimilarity, theta: Dissimilarity, spec: NoiseSpec) -> float:
    """Log p(x | theta): independent lognormal factors over the pairs."""
    if x.n != theta.n:
        raise ValueError("size mismatch")
    if np.any(x.values <= 0) or np.any(theta.values <= 0):
        raise DomainError("entries must be strictly positive")
    return float(log_density_rows(x.values, theta.values, spec.v))


def sample_measurement(
    theta: Dissimilarity, spec: NoiseSpec, rng: np.random.Generator
) -> Dissimilarity:
    """One noisy measurement of a latent metric.

    Entries are independent lognormals with mean theta_ij and variance
    spec.v; the draw is positive by construction but need not satisfy any
    triangle inequality.
    """
    mu, sigma = _mu_sigma(theta.values, spec.v)
    return Dissimilarity(theta.n, rng.lognormal(mean=mu, sigma=sigma))
