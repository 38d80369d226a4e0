"""Invariant suite behind ``markdown-pricing verify``."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import demand, linalg, tuning
from .engine import simulate
from .errors import InvariantViolation
from .experiments import icm_clean_coverage, lower_bound_kl_check
from .noise import NoiseModel, derive_stream
from .policies import make_policy


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def random_nodes(rng, m: int, min_disp: float = 0.02) -> np.ndarray:
    while True:
        x = rng.random(m)
        if m == 1 or linalg.dispersion(x) >= min_disp:
            return x


def check_vandermonde(count: int, seed: int = 1) -> Check:
    rng = np.random.default_rng(seed)
    bad = 0
    worst = 0.0
    for _ in range(count):
        x = random_nodes(rng, int(rng.integers(2, 7)))
        res = linalg.check_gautschi_bound(x)
        bad += not res["holds"]
        inv = linalg.inverse_vandermonde(x)
        ref = np.linalg.inv(linalg.vandermonde(x))
        worst = max(worst, float(np.max(np.abs(inv - ref)) / np.max(np.abs(ref))))
    ok = bad == 0 and worst <= 1e-8
    return Check("vandermonde_bound", ok, f"{count} node sets, {bad} bound violations, max rel inv diff {worst:.2e}")


def check_round_trip(count: int, seed: int = 2) -> Check:
    rng = np.random.default_rng(seed)
    worst = {}
    for fam in demand.CATALOG.values():
        k = fam.crossing_k
        err = 0.0
        for _ in range(count):
            th = fam.lo + (fam.hi - fam.lo) * rng.random(fam.dim)
            prices = np.sort(random_nodes(rng, k + 1, 0.05))[::-1]
            prices = fam.price_domain[0] + (fam.price_domain[1] - fam.price_domain[0]) * prices
            if k > 0 and linalg.dispersion(prices) < 0.05:
                continue
            est = fam.inverse_profile(prices, fam.profile(th, prices))
            err = max(err, float(np.max(np.abs(est - th))))
        worst[fam.name] = err
    ok = all(v <= (1e-6 if demand.CATALOG[k].crossing_k else 1e-9) for k, v in worst.items())
    return Check("profile_round_trip", ok, ", ".join(f"{k}: {v:.1e}" for k, v in worst.items()))


def monotonicity_fuzz(runs: int, seed: int = 3, n_max: int = 10_000) -> Check:
    fams = [demand.LINEAR, demand.EXPONENTIAL, demand.LOGIT, demand.POLY1, demand.POLY2]
    noises = [NoiseModel("gaussian_clipped", 0.1), NoiseModel("gaussian_clipped", 0.02), NoiseModel("bernoulli"),
              NoiseModel("none")]
    increases = 0
    errors = 0
    for r in range(runs):
        rng = derive_stream(seed, 0, r)
        fam = fams[int(rng.integers(len(fams)))]
        noise = noises[int(rng.integers(len(noises)))]
        n = int(rng.integers(100, n_max + 1))
        model = demand.DemandModel(fam, fam.sample_theta(rng, frac=1.0))
        pol = make_policy("cm" if fam.crossing_k == 0 else "icm", model, noise, n)
        try:
            tr = simulate(pol, model, noise, n, rng)
        except InvariantViolation:
            errors += 1
            continue
        increases += tr.price_increases
    ok = increases == 0 and errors == 0
    return Check("monotonicity_fuzz", ok, f"{runs} runs, {increases} increases, {errors} invariant errors")


def check_lp(max_m: int = 10) -> Check:
    worst = 0.0
    for m, s, k in itertools.product(range(1, max_m + 1), (2, 3, 4), range(1, 6)):
        worst = max(worst, float(np.max(np.abs(tuning.lp_residuals(m, s, k)))))
    ok = worst <= 1e-12 and tuning.rho(1, 2, 1) == 2 / 3 and abs(tuning.rho(20, 2, 1) - 21 / 41) <= 1e-15
    return Check("lp_closed_form", ok, f"max residual {worst:.1e}")


def check_clean_coverage(reps: int, seed: int = 4) -> Check:
    res = icm_clean_coverage(demand.POLY1, 1000, reps, seed, NoiseModel("bernoulli"))
    return Check("clean_event_coverage", res["fraction"] >= 0.95, f"{reps} runs, coverage {res['fraction']:.4f}")


def check_kl(n: int = 10_000) -> Check:
    rows = [lower_bound_kl_check(n, t) for t in (100, 400, 900)]
    ok = all(r["holds"] for r in rows)
    return Check("kl_bound", ok, "; ".join(f"t={r['t']}: {r['max_kl']:.4f} <= {r['bound']:.4f}" for r in rows))


def run_all(quick: bool = False) -> list[Check]:
    if quick:
        return [check_vandermonde(200), check_round_trip(100), monotonicity_fuzz(200, n_max=3000), check_lp(),
                check_clean_coverage(200), check_kl()]
    return [check_vandermonde(1000), check_round_trip(1000), monotonicity_fuzz(2000), check_lp(),
            check_clean_coverage(2000), check_kl()]
