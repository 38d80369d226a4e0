import math

import numpy as np
import pytest

from markdown_pricing.demand import LINEAR, DemandModel
from markdown_pricing.errors import DomainError, ModelViolationError, ParameterError
from markdown_pricing.noise import NoiseModel, derive_stream, sample_demand


def test_none_noise_is_exact():
    m = DemandModel(LINEAR, [0.8])
    assert sample_demand(m, NoiseModel("none"), 0.5, derive_stream(0)) == 0.6


def test_bernoulli_mean_zero_is_always_zero():
    noise = NoiseModel("bernoulli")
    out = noise.realize(np.zeros(10_000), noise.innovations(derive_stream(1), 10_000))
    assert np.all(out == 0.0)


def test_bernoulli_rejects_mean_outside_unit_interval():
    noise = NoiseModel("bernoulli")
    with pytest.raises(ModelViolationError):
        noise.realize(np.array([1.2]), np.array([0.5]))


def test_gaussian_clipped_mean_at_half():
    noise = NoiseModel("gaussian_clipped", 0.1)
    d = noise.realize(np.full(10**6, 0.5), noise.innovations(derive_stream(2), 10**6))
    assert 0.4987 <= d.mean() <= 0.5013


@pytest.mark.parametrize("kind", ["gaussian_clipped", "bernoulli", "none"])
def test_realized_demand_in_unit_interval(kind):
    noise = NoiseModel(kind, 0.3)
    rng = derive_stream(3)
    mean = rng.random(10_000)
    d = noise.realize(mean, noise.innovations(rng, 10_000))
    assert d.min() >= 0.0 and d.max() <= 1.0


@pytest.mark.parametrize("kind,mu", [("bernoulli", 0.3), ("bernoulli", 0.5), ("gaussian_clipped", 0.5)])
def test_empirical_mean_within_band(kind, mu):
    noise = NoiseModel(kind, 0.1)
    d = noise.realize(np.full(10**6, mu), noise.innovations(derive_stream(4), 10**6))
    assert abs(d.mean() - mu) <= 4 * noise.c_sg / 1e3


@pytest.mark.parametrize("delta", [1e-2, 1e-3])
def test_clipped_gaussian_subgaussian_tail(delta):
    noise = NoiseModel("gaussian_clipped", 0.1)
    d = noise.realize(np.full(10**6, 0.5), noise.innovations(derive_stream(5), 10**6))
    thresh = noise.c_sg * math.sqrt(2 * math.log(1 / delta))
    assert np.mean(np.abs(d - 0.5) > thresh) <= 2 * delta


def test_certified_norms():
    assert NoiseModel("bernoulli").c_sg == 1.0
    assert NoiseModel("gaussian_clipped", 0.1).c_sg == 0.1
    assert NoiseModel("none").c_sg == 0.0


def test_invalid_noise():
    with pytest.raises(ParameterError):
        NoiseModel("cauchy")
    with pytest.raises(ParameterError):
        NoiseModel("gaussian_clipped", 0.0)


def test_sample_demand_checks_domain():
    with pytest.raises(DomainError):
        sample_demand(DemandModel(LINEAR, [0.8]), NoiseModel(), 0.2, derive_stream(0))


def test_streams_are_deterministic():
    a = derive_stream(42, 0, 0).random(100)
    b = derive_stream(42, 0, 0).random(100)
    np.testing.assert_array_equal(a, b)


def test_streams_differ_by_index():
    base = derive_stream(42, 0, 0).random(100)
    assert not np.array_equal(base, derive_stream(42, 0, 1).random(100))
    assert not np.array_equal(base, derive_stream(42, 1, 0).random(100))
    assert not np.array_equal(base, derive_stream(43, 0, 0).random(100))


def test_streams_are_uncorrelated():
    a = derive_stream(7, 0, 0).standard_normal(100_000)
    b = derive_stream(7, 0, 1).standard_normal(100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02
