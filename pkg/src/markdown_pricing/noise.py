"""Demand noise models and deterministic random streams.

Noise is split into two steps so that every backend consumes randomness the
same way: ``innovations`` draws raw variates from a stream (standard normals
or uniforms) and ``realize`` maps means plus innovations to demands.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelViolationError, ParameterError

NOISE_KINDS = ("gaussian_clipped", "bernoulli", "none")
KIND_CODES = {"none": 0, "gaussian_clipped": 1, "bernoulli": 2}
DEFAULT_SIGMA = 0.1


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "gaussian_clipped"
    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(f"unknown noise kind {self.kind!r}; choose from {NOISE_KINDS}")
        if self.kind == "gaussian_clipped" and not self.sigma > 0:
            raise ParameterError("sigma must be positive")

    @property
    def code(self) -> int:
        return KIND_CODES[self.kind]

    @property
    def c_sg(self) -> float:
        """Subgaussian-norm bound of the realized demand.

        Clipping is 1-Lipschitz, so a clipped N(mu, sigma^2) keeps norm sigma.
        Any variable in [0, 1] (Bernoulli included) is covered by 1.
        """
        if self.kind == "gaussian_clipped":
            return float(min(self.sigma, 1.0))
        if self.kind == "bernoulli":
            return 1.0
        return 0.0

    def innovations(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian_clipped":
            return rng.standard_normal(size)
        if self.kind == "bernoulli":
            return rng.random(size)
        return np.zeros(size)

    def realize(self, mean, innov) -> np.ndarray:
        mean = np.asarray(mean, dtype=float)
        innov = np.asarray(innov, dtype=float)
        if self.kind == "gaussian_clipped":
            return np.minimum(np.maximum(mean + self.sigma * innov, 0.0), 1.0)
        if self.kind == "bernoulli":
            if np.any((mean < 0.0) | (mean > 1.0)):
                raise ModelViolationError("Bernoulli demand needs a mean in [0, 1]")
            return np.where(innov < mean, 1.0, 0.0)
        return np.broadcast_to(mean, innov.shape).astype(float, copy=True)


NONE = NoiseModel("none")


def derive_stream(master_seed: int, run_index: int = 0, replication_index: int = 0) -> np.random.Generator:
    """Counter-based stream keyed by ``(master_seed, run, replication)``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(run_index), int(replication_index)))
    return np.random.Generator(np.random.Philox(ss))


def sample_demand(model, noise: NoiseModel, p: float, rng: np.random.Generator) -> float:
    from .demand import eval_demand

    mean = eval_demand(model, p)
    return float(noise.realize(mean, noise.innovations(rng, 1))[0])
