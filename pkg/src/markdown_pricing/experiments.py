"""Scaling studies, separation diagnostics, KL bounds and slope fitting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import rel_entr

from . import demand
from .config import ExperimentSpec, FamilySpec, NoiseSpec
from .demand import DemandModel, Family
from .engine import run_batch, simulate
from .errors import ConfigurationError, FitError, ParameterError
from .noise import NoiseModel, derive_stream
from .policies import CMPolicy, ICMPolicy, default_icm_m, icm_width, make_policy, policy_constants
from .tuning import solve_lp

TRANSFORMS = ("log_n", "log_log_n")


def fit_scaling_exponent(points, transform: str = "log_n") -> tuple[float, float, float]:
    """OLS of log(regret) on log(n) (or on log(log(n))); returns slope, intercept, r^2."""
    if transform not in TRANSFORMS:
        raise ParameterError(f"transform must be one of {TRANSFORMS}")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise FitError("need at least four (n, regret) points")
    n, reg = pts[:, 0], pts[:, 1]
    if np.any(reg <= 0) or np.any(n <= 1):
        raise FitError("regret values must be positive (and n > 1)")
    x = np.log(n) if transform == "log_n" else np.log(np.log(n))
    y = np.log(reg)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), float(r2)


def kl_bernoulli(mu0: float, mu1: float) -> float:
    """KL(Ber(mu0) || Ber(mu1)); ``inf`` when mu1 sits at 0 or 1 and differs from mu0."""
    for mu in (mu0, mu1):
        if not 0.0 <= mu <= 1.0:
            raise ParameterError("Bernoulli means must lie in [0, 1]")
    return float(rel_entr(mu0, mu1) + rel_entr(1.0 - mu0, 1.0 - mu1))


def max_kl(model0: DemandModel, model1: DemandModel, grid) -> float:
    """max over the grid of KL(F_{d0(p)} || F_{d1(p)})."""
    grid = np.asarray(grid, dtype=float)
    m0 = np.asarray(model0.demand(grid), dtype=float)
    m1 = np.asarray(model1.demand(grid), dtype=float)
    if np.any((m0 < 0) | (m0 > 1) | (m1 < 0) | (m1 > 1)):
        raise ParameterError("demands must be Bernoulli means in [0, 1] on the grid")
    return float(np.max(rel_entr(m0, m1) + rel_entr(1.0 - m0, 1.0 - m1)))


def lower_bound_kl_check(n: int, t: int, points: int = 1000) -> dict:
    """Grid-maximal KL between the base curve and the t-th lower-bound instance.

    The grid covers [0, 1/2], where both means are at least 1/2.
    """
    base = demand.base_lower_bound_model()
    inst = demand.make_lower_bound_family_k0(t, n)
    delta = demand.lower_bound_delta(t, n)
    grid = np.linspace(0.0, 0.5, points)
    kl = max_kl(base, inst, grid)
    bound = 16.0 * delta**2
    return {"n": n, "t": t, "delta": delta, "max_kl": kl, "bound": bound, "holds": bool(kl <= bound)}


@dataclass
class ScalingResult:
    grid: tuple
    mean_regret: np.ndarray
    stderr: np.ndarray
    fitted_exponent: float
    intercept: float
    r_squared: float
    transform: str
    label: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid)
        if g.size < 4 or np.any(np.diff(g) <= 0):
            raise ConfigurationError("scaling grid must be strictly increasing with at least 4 points")

    def ratios(self, denom: str) -> np.ndarray:
        n = np.asarray(self.grid, dtype=float)
        d = np.log(n) ** 2 if denom == "log2" else np.log(n)
        return np.asarray(self.mean_regret) / d

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "grid": [int(n) for n in self.grid],
            "mean_regret": [float(v) for v in self.mean_regret],
            "stderr": [float(v) for v in self.stderr],
            "fitted_exponent": self.fitted_exponent,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "transform": self.transform,
            **self.extra,
        }


def _scaling_from_cells(cells, transform, label, extra=None) -> ScalingResult:
    grid = tuple(c.n for c in cells)
    means = np.array([c.summary()["mean_regret"] for c in cells])
    ses = np.array([c.summary()["stderr"] for c in cells])
    slope, icpt, r2 = fit_scaling_exponent(np.column_stack([grid, means]), transform)
    return ScalingResult(grid, means, ses, slope, icpt, r2, transform, label, extra or {})


DEFAULT_GRID = (10**3, 10**4, 10**5, 10**6)


def cm_rate_study(grid: Sequence[int] = DEFAULT_GRID, reps: int = 200, seed: int = 0,
                  noise: Optional[NoiseSpec] = None, family: str = "linear", workers: int = 1) -> ScalingResult:
    """CM regret on a 0-crossing family, fitted against log log n (target slope 2)."""
    spec = ExperimentSpec(policies=("cm",), family=FamilySpec(family), noise=noise or NoiseSpec(),
                          horizons=tuple(grid), replications=reps, seed=seed, study="scaling", workers=workers)
    cells = run_batch(spec)
    res = _scaling_from_cells(cells, "log_log_n", "cm")
    ratios = res.ratios("log2")
    res.extra.update({"ratio_log2": [float(r) for r in ratios],
                      "ratio_spread": float(ratios.max() / ratios.min()),
                      "price_increases": int(sum(c.increases.sum() for c in cells))})
    return res


def informative_noise_level(k: int, grid: Sequence[int] = DEFAULT_GRID, s: int = 2,
                            family: Optional[Family] = None) -> float:
    """Largest sigma for which ICM's first-phase width is at most h at every horizon.

    Below this level the first confidence interval already resolves the
    exploration grid, which is the regime the rate analysis describes.
    """
    fam = family or demand.polynomial_family(k)
    c = demand.certify_constants(fam)
    best = math.inf
    for n in grid:
        t = solve_lp(int(n), k, s, default_icm_m(int(n)))
        w1 = icm_width(c.c_star, c.c2, 1.0, t.h, k, int(n), t.n_schedule[0])
        best = min(best, t.h / w1)
    return best


def icm_rate_study(k: int, s: int = 2, grid: Sequence[int] = DEFAULT_GRID, reps: int = 100, seed: int = 0,
                   noise: Optional[NoiseSpec] = None, policy: str = "icm", workers: int = 1) -> ScalingResult:
    """ICM regret on the degree-k polynomial family, fitted against log n.

    Without an explicit noise spec the study uses clipped Gaussian noise at
    ``informative_noise_level(k, grid)``.
    """
    if k not in (1, 2):
        raise ParameterError("icm_rate_study supports k in {1, 2}")
    if policy != "icm":
        raise ConfigurationError(f"icm_rate_study only accepts the icm policy, got {policy!r}")
    fam = demand.polynomial_family(k)
    if noise is None:
        noise = NoiseSpec("gaussian_clipped", informative_noise_level(k, grid, s))
    spec = ExperimentSpec(policies=("icm",), family=FamilySpec(fam.name), noise=noise, horizons=tuple(grid),
                          replications=reps, seed=seed, study="scaling", icm_s=s, workers=workers)
    cells = run_batch(spec)
    res = _scaling_from_cells(cells, "log_n", f"icm_k{k}")
    res.extra.update({
        "k": k,
        "target": k / (k + 1),
        "sigma": noise.sigma,
        "noise": noise.kind,
        "rho": [solve_lp(int(n), k, s, default_icm_m(int(n))).rho for n in grid],
        "overshoot_frequency": [c.summary()["overshoot_frequency"] for c in cells],
        "price_increases": int(sum(c.increases.sum() for c in cells)),
    })
    return res


# The separation study samples slopes near the lower-bound base curve d = 1 - p.
SEPARATION_BOX = (0.8, 0.95)


def separation_study(grid: Sequence[int] = DEFAULT_GRID, reps: int = 200, seed: int = 0,
                     noise: Optional[NoiseSpec] = None, workers: int = 1) -> dict:
    """CM against MLE-greedy on the linear family.

    Reports CM regret / (ln n)^2, MLE-greedy regret / ln n (with standard
    errors) and price-increase counts.
    """
    if len(grid) < 2 or max(grid) / min(grid) < 100:
        raise ConfigurationError("separation grid must span at least two decades")
    noise = noise or NoiseSpec()
    fam = FamilySpec("linear", param_lo=(SEPARATION_BOX[0],), param_hi=(SEPARATION_BOX[1],), sample_frac=1.0)
    spec = ExperimentSpec(policies=("cm", "mle_greedy"), family=fam, noise=noise, horizons=tuple(grid),
                          replications=reps, seed=seed, study="separation", workers=workers)
    cells = run_batch(spec)
    out = {"grid": [int(n) for n in grid], "sigma": noise.sigma, "noise": noise.kind, "replications": reps}
    for pol, denom in (("cm", 2), ("mle_greedy", 1)):
        rows = [c for c in cells if c.policy == pol]
        scale = np.array([math.log(c.n) ** denom for c in rows])
        means = np.array([c.summary()["mean_regret"] for c in rows])
        ses = np.array([c.summary()["stderr"] for c in rows])
        ratio = means / scale
        out[pol] = {
            "mean_regret": means.tolist(),
            "stderr": ses.tolist(),
            "ratio": ratio.tolist(),
            "ratio_stderr": (ses / scale).tolist(),
            "ratio_spread": float(ratio.max() / ratio.min()),
            "price_increases": [int(c.increases.sum()) for c in rows],
            "fraction_with_increase": [c.summary()["fraction_with_increase"] for c in rows],
        }
    return out


# -- diagnostics used by the invariant suite -----------------------------------------


def icm_clean_coverage(family: Family, n: int, reps: int, seed: int, noise: NoiseModel,
                       m: Optional[int] = None) -> dict:
    """Fraction of ICM runs whose intervals contain p*(theta) in every phase."""
    covered = 0
    phases = 0
    for r in range(reps):
        rng = derive_stream(seed, 0, r)
        model = DemandModel(family, family.sample_theta(rng))
        pol = make_policy("icm", model, noise, n, m=m)
        simulate(pol, model, noise, n, rng)
        p_star = model.optimal_price()
        ok = all(s.interval[0] - 1e-12 <= p_star <= s.interval[1] + 1e-12 for s in pol.history)
        covered += ok
        phases += len(pol.history)
    return {"fraction": covered / reps, "reps": reps, "mean_phases": phases / reps}


def cm_clean_phases(pol: CMPolicy, model: DemandModel) -> list[bool]:
    """Per-phase clean indicator |mean - d(P_j)| <= 2 c_sg sqrt(ln n / t_j)."""
    c_sg = pol.constants.c_sg
    return [abs(s.means[0] - float(model.demand(s.price))) <= 2.0 * c_sg * math.sqrt(math.log(pol.n) / s.n_obs)
            for s in pol.history]


def cm_nested_check(family: Family, n: int, reps: int, seed: int, noise: NoiseModel) -> dict:
    """On clean runs, count phases with I_{j+1} inside I_j and inactive truncation."""
    clean_runs = nested = pairs = untruncated = transitions = 0
    for r in range(reps):
        rng = derive_stream(seed, 1, r)
        model = DemandModel(family, family.sample_theta(rng))
        pol = make_policy("cm", model, noise, n)
        simulate(pol, model, noise, n, rng)
        if not all(cm_clean_phases(pol, model)):
            continue
        clean_runs += 1
        hist = pol.history
        for a, b in zip(hist, hist[1:]):
            pairs += 1
            nested += (b.theta_interval[0] >= a.theta_interval[0] - 1e-12
                       and b.theta_interval[1] <= a.theta_interval[1] + 1e-12)
        for s in hist:
            transitions += 1
            untruncated += s.next_price == s.interval[1]
    return {"clean_runs": clean_runs, "pairs": pairs, "nested": nested,
            "transitions": transitions, "untruncated": untruncated}


def cm_exact_width_ratios(n: int, c2: float = 1.0, c_sg: float = 1.0, phases: int = 8) -> np.ndarray:
    """w_{j+1}/w_j under the unrounded schedule t_j = 9^j ln n."""
    from .policies import cm_width

    t = [9.0**j * math.log(n) for j in range(1, phases + 1)]
    w = np.array([cm_width(c2, c_sg, n, tj) for tj in t])
    return w[1:] / w[:-1]
