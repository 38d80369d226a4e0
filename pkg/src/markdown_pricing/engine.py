"""Simulation of a policy against a demand model with exact regret accounting."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .demand import DemandModel
from .errors import InvariantViolation, ParameterError
from .noise import NoiseModel
from .policies import MLEGreedyPolicy, Policy


@dataclass
class Trajectory:
    prices: np.ndarray
    demands: np.ndarray
    per_round_regret: np.ndarray
    meta: dict = field(default_factory=dict)
    policy: Optional[Policy] = None

    @property
    def n(self) -> int:
        return self.prices.shape[0]

    @property
    def total_regret(self) -> float:
        return float(np.sum(self.per_round_regret))

    @property
    def price_increases(self) -> int:
        return count_increases(self.prices)


def count_increases(prices) -> int:
    p = np.asarray(prices, dtype=float)
    return int(np.count_nonzero(p[1:] > p[:-1]))


def regret(trajectory: Trajectory) -> tuple[float, np.ndarray]:
    """Total regret and the running prefix sums."""
    cum = np.cumsum(trajectory.per_round_regret)
    return (float(cum[-1]) if cum.size else 0.0), cum


def simulate(policy: Policy, model: DemandModel, noise: NoiseModel, n: int, rng: np.random.Generator,
             meta: Optional[dict] = None) -> Trajectory:
    """Play ``n`` rounds; the noise innovations for all rounds are drawn up front."""
    if n < 1:
        raise ParameterError("horizon must be at least 1")
    innov = noise.innovations(rng, n)
    r_star = model.r_star
    if isinstance(policy, MLEGreedyPolicy):
        prices, demands = policy.run(model, noise, innov)
        per_round = r_star - model.revenue(prices)
        increases = policy.price_increases
    else:
        prices = np.empty(n)
        demands = np.empty(n)
        per_round = np.empty(n)
        t = 0
        last = np.inf
        while t < n:
            price, length = policy.next_block(n - t)
            length = int(min(max(length, 1), n - t))
            price = float(price)
            if policy.markdown and price > last:
                raise InvariantViolation(
                    f"{policy.name} raised its price from {last!r} to {price!r} at round {t + 1}"
                )
            if not 0.0 <= price <= 1.0:
                raise InvariantViolation(f"{policy.name} emitted price {price!r} outside [0, 1]")
            mean = float(model.demand(price))
            block = noise.realize(np.full(length, mean), innov[t:t + length])
            prices[t:t + length] = price
            demands[t:t + length] = block
            per_round[t:t + length] = r_star - price * mean
            policy.observe(block)
            last = price
            t += length
        increases = count_increases(prices)
    info = {
        "policy": policy.name,
        "family": model.family.name,
        "theta": [float(v) for v in model.theta],
        "n": int(n),
        "p_star": model.optimal_price(),
        "phase_starts": list(policy.phase_starts),
        "events": policy.events,
        "flags": list(policy.flags),
        "price_increases": increases,
    }
    if meta:
        info.update(meta)
    return Trajectory(prices, demands, per_round, info, policy)


# -- replicated batches ----------------------------------------------------------

@dataclass
class ReplicationResult:
    policy: str
    n: int
    replication: int
    theta: tuple
    total_regret: float
    price_increases: int
    overshoot: bool
    flags: int
    markdown: bool


@dataclass
class CellResult:
    policy: str
    n: int
    replications: list

    @property
    def regrets(self) -> np.ndarray:
        return np.array([r.total_regret for r in self.replications])

    @property
    def increases(self) -> np.ndarray:
        return np.array([r.price_increases for r in self.replications])

    def summary(self) -> dict:
        return summarize(self)


def summarize(cell: CellResult) -> dict:
    reg = cell.regrets
    inc = cell.increases
    reps = reg.size
    q = np.quantile(reg, [0.05, 0.25, 0.5, 0.75, 0.95])
    markdown = any(r.markdown for r in cell.replications)
    return {
        "policy": cell.policy,
        "n": cell.n,
        "replications": reps,
        "mean_regret": float(np.mean(reg)),
        "stderr": float(np.std(reg, ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0,
        "q05": float(q[0]),
        "q25": float(q[1]),
        "median": float(q[2]),
        "q75": float(q[3]),
        "q95": float(q[4]),
        "monotonicity_violations": int(np.sum(inc)) if markdown else 0,
        "overshoot_frequency": float(np.mean([r.overshoot for r in cell.replications])),
        "mean_price_increases": float(np.mean(inc)),
        "fraction_with_increase": float(np.mean(inc > 0)),
    }


def build_run(spec, policy: str, n_index: int, replication: int):
    """Model, noise, policy and stream of one replication (shared by batch and simulate)."""
    from .noise import derive_stream
    from .policies import make_policy

    n = int(spec.horizons[n_index])
    rng = derive_stream(spec.seed, n_index, replication)
    fam = spec.family.family()
    if spec.family.theta is not None:
        theta = np.array(spec.family.theta, dtype=float)
    else:
        theta = fam.sample_theta(rng, frac=spec.family.sample_frac)
    model = DemandModel(fam, theta)
    noise = spec.noise.model()
    consts = spec.family.constants(model.constants.with_c_sg(noise.c_sg))
    pol = make_policy(policy, model, noise, n, constants=consts, s=spec.icm_s, m=spec.icm_m,
                      test_mode=spec.test_mode)
    return model, noise, pol, rng, n


def run_replication(spec, policy: str, n_index: int, replication: int, keep: bool = False):
    try:
        model, noise, pol, rng, n = build_run(spec, policy, n_index, replication)
        tr = simulate(pol, model, noise, n, rng, meta={"seed": spec.seed, "replication": replication})
    except Exception as exc:
        tag = f"[policy={policy} n={spec.horizons[n_index]} replication={replication}] {exc}"
        try:
            wrapped = type(exc)(tag)
        except Exception:
            raise exc
        raise wrapped from exc
    res = ReplicationResult(policy, n, replication, tuple(float(v) for v in model.theta), tr.total_regret,
                            tr.meta["price_increases"], pol.overshoot, len(pol.flags), pol.markdown)
    return (res, tr) if keep else res


def _cell_job(args):
    spec, policy, n_index, rep = args
    return run_replication(spec, policy, n_index, rep)


def run_batch(spec, workers: Optional[int] = None) -> list:
    """Run every (policy, horizon) cell of ``spec``; replications use independent streams.

    Results are ordered by policy, horizon and replication index whatever the
    degree of parallelism.
    """
    workers = spec.workers if workers is None else workers
    jobs = [(spec, pol, i, r) for pol in spec.policies for i in range(len(spec.horizons))
            for r in range(spec.replications)]
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_cell_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_cell_job(j) for j in jobs]
    cells = []
    k = 0
    for pol in spec.policies:
        for n in spec.horizons:
            cells.append(CellResult(pol, int(n), results[k:k + spec.replications]))
            k += spec.replications
    return cells
