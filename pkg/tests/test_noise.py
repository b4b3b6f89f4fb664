import math

import numpy as np
import pytest
from scipy import integrate

from dendromle.core import Dissimilarity
from dendromle.noise import (
    DomainError,
    NoiseSpec,
    log_density,
    log_density_rows,
    params_for,
    sample_measurement,
)
from oracles import lognormal_logpdf


def test_params_unit_case():
    p = params_for(1.0, NoiseSpec(1.0))
    assert p.sigma == pytest.approx(math.sqrt(math.log(2.0)), abs=1e-15)
    assert p.mu == pytest.approx(-0.5 * math.log(2.0), abs=1e-15)


def test_params_reproduce_mean_and_variance():
    rng = np.random.default_rng(1)
    for _ in range(50):
        theta = float(rng.uniform(0.05, 3.0))
        v = float(rng.uniform(1e-4, 1.0))
        p = params_for(theta, NoiseSpec(v))
        mean = math.exp(p.mu + p.sigma**2 / 2.0)
        var = (math.exp(p.sigma**2) - 1.0) * math.exp(2 * p.mu + p.sigma**2)
        assert mean == pytest.approx(theta, rel=1e-12)
        assert var == pytest.approx(v, rel=1e-10)


def test_params_small_variance_limit():
    p = params_for(0.7, NoiseSpec(1e-12))
    assert p.sigma < 2e-6
    assert p.mu == pytest.approx(math.log(0.7), abs=1e-11)


def test_params_domain_error():
    with pytest.raises(DomainError):
        params_for(0.0, NoiseSpec(0.5))
    with pytest.raises(DomainError):
        params_for(-1.0, NoiseSpec(0.5))
    with pytest.raises(DomainError):
        NoiseSpec(0.0)


def test_log_density_matches_scalar_lognormal_oracle():
    rng = np.random.default_rng(2)
    spec = NoiseSpec(0.04)
    for _ in range(30):
        n = int(rng.integers(2, 6))
        theta = Dissimilarity(n, rng.uniform(0.2, 2.0, size=n * (n - 1) // 2))
        x = Dissimilarity(n, rng.uniform(0.2, 2.0, size=n * (n - 1) // 2))
        expected = 0.0
        for idx in range(len(x.values)):
            p = params_for(float(theta.values[idx]), spec)
            expected += lognormal_logpdf(float(x.values[idx]), p.mu, p.sigma)
        assert log_density(x, theta, spec) == pytest.approx(expected, rel=1e-12)


def test_single_pair_mode_of_gaussian_exponent():
    spec = NoiseSpec(0.25)
    p = params_for(1.3, spec)
    x = math.exp(p.mu)
    got = log_density(Dissimilarity(2, [x]), Dissimilarity(2, [1.3]), spec)
    assert got == pytest.approx(-math.log(p.sigma * x * math.sqrt(2 * math.pi)), rel=1e-12)


def test_density_integrates_to_one():
    spec = NoiseSpec(0.09)
    for theta in (0.4, 1.0, 2.0):
        total, err = integrate.quad(
            lambda x: math.exp(
                float(log_density_rows(np.array([x]), np.array([theta]), spec.v))
            ),
            1e-12,
            50.0,
            limit=200,
        )
        assert abs(total - 1.0) < 1e-6


def test_sample_measurement_moments():
    rng = np.random.default_rng(3)
    spec = NoiseSpec(0.04)
    theta = Dissimilarity(3, [0.5, 1.0, 1.5])
    draws = np.stack(
        [sample_measurement(theta, spec, rng).values for _ in range(100_000)]
    )
    for idx in range(3):
        se_mean = math.sqrt(spec.v / draws.shape[0])
        assert abs(draws[:, idx].mean() - theta.values[idx]) < 4 * se_mean
    assert np.all(draws > 0)


def test_sample_measurement_small_variance_limit():
    rng = np.random.default_rng(4)
    theta = Dissimilarity(3, [0.5, 1.0, 1.5])
    x = sample_measurement(theta, NoiseSpec(1e-14), rng)
    assert np.allclose(x.values, theta.values, rtol=1e-5)


def test_sample_measurement_seed_contract():
    theta = Dissimilarity(3, [0.5, 1.0, 1.5])
    spec = NoiseSpec(0.01)
    a = sample_measurement(theta, spec, np.random.default_rng(7)).values
    b = sample_measurement(theta, spec, np.random.default_rng(7)).values
    c = sample_measurement(theta, spec, np.random.default_rng(8)).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_log_density_rejects_nonpositive():
    spec = NoiseSpec(0.01)
    with pytest.raises(ValueError):
        Dissimilarity(2, [0.0])
    # size mismatch also refused
    with pytest.raises(ValueError):
        log_density(Dissimilarity(2, [1.0]), Dissimilarity(3, [1.0, 1.0, 1.0]), spec)
