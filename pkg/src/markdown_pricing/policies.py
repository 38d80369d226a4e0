"""Pricing policies behind a block-wise sequential interface.

A policy is asked for the next price and for how many consecutive rounds it
commits to that price (``next_block``); the engine then feeds back the
realized demands of that block (``observe``).  Block commitments are made
from past observations only, so this is equivalent to round-by-round play.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .demand import Constants, DemandModel, Family
from .errors import ConfigurationError, InconsistencyError, ConditioningError, ParameterError
from .tuning import IcmTuning, solve_lp

GOOD, DANGEROUS, OVERSHOOT = "GOOD", "DANGEROUS", "OVERSHOOT"
BALL_GRID = 512


@dataclass
class ConfidenceState:
    phase: int
    price: float  # P_j (highest exploration price of the phase)
    prices: tuple
    means: tuple
    n_obs: int
    theta_hat: Optional[np.ndarray]
    width: float
    interval: tuple  # [L_j, U_j] on the optimal price
    theta_interval: Optional[tuple] = None  # CM only: [theta_hat - w, theta_hat + w]
    event: Optional[str] = None
    next_price: Optional[float] = None


class Policy:
    name = "policy"
    markdown = False

    def __init__(self):
        self.history: list[ConfidenceState] = []
        self.flags: list[str] = []
        self.phase_starts: list[int] = []
        self.t = 0

    def next_block(self, remaining: int) -> tuple[float, int]:
        raise NotImplementedError

    def observe(self, demands: np.ndarray) -> None:
        self.t += len(demands)

    @property
    def events(self) -> list[str]:
        return [s.event for s in self.history if s.event is not None]

    @property
    def overshoot(self) -> bool:
        return OVERSHOOT in self.events


class FixedPricePolicy(Policy):
    name = "fixed"

    def __init__(self, price: float):
        super().__init__()
        if not 0.0 <= price <= 1.0:
            raise ParameterError("fixed price must lie in [0, 1]")
        self.price = float(price)

    def next_block(self, remaining):
        return self.price, remaining


class OraclePolicy(FixedPricePolicy):
    name = "oracle"

    def __init__(self, model: DemandModel):
        super().__init__(model.optimal_price())


class FaultyPolicy(Policy):
    """Claims to be a markdown policy but raises its price halfway (test mode only)."""

    name = "faulty"
    markdown = True

    def next_block(self, remaining):
        if self.t == 0:
            return 0.8, max(1, remaining // 2)
        return 0.9, remaining


def cm_phase_schedule(n: int) -> list[int]:
    """Phase lengths ceil(9^j ln n); leftover rounds extend the last phase."""
    if n < 100:
        raise ConfigurationError(f"CM needs a horizon of at least 100 rounds, got {n}")
    ln = math.log(n)
    sched: list[int] = []
    used = 0
    j = 1
    while True:
        t = math.ceil(9.0**j * ln)
        if used + t > n:
            break
        sched.append(t)
        used += t
        j += 1
    if not sched:
        raise ConfigurationError(f"horizon {n} is shorter than the first CM phase")
    sched[-1] += n - used
    return sched


def cm_width(c2: float, c_sg: float, n: int, t: float) -> float:
    return 4.0 * c2 * c_sg * math.sqrt(math.log(n) / t)


def ball_price_range(family: Family, theta_hat: np.ndarray, w: float) -> tuple[float, float]:
    """(min, max) of p*(theta) over |theta - theta_hat| <= w intersected with the box."""
    lo = max(family.param_lo[0], float(theta_hat[0]) - w)
    hi = min(family.param_hi[0], float(theta_hat[0]) + w)
    if lo > hi:  # only when theta_hat sits outside the box
        lo = hi = float(np.clip(theta_hat[0], family.param_lo[0], family.param_hi[0]))
    if family.pstar_monotone < 0:
        p, _ = family.optimal_prices(np.array([[hi], [lo]]))
        return float(p[0]), float(p[1])
    grid = np.linspace(lo, hi, BALL_GRID)[:, None]
    p, _ = family.optimal_prices(grid)
    return float(p.min()), float(p.max())


class CMPolicy(Policy):
    """Cautious myopic policy for single-parameter (0-crossing) families."""

    name = "cm"
    markdown = True

    def __init__(self, family: Family, n: int, constants: Constants, start_price: Optional[float] = None):
        super().__init__()
        if family.crossing_k != 0:
            raise ConfigurationError("CM requires a 0-crossing family")
        self.family = family
        self.n = int(n)
        self.constants = constants
        self.schedule = cm_phase_schedule(self.n)
        self.price = family.price_domain[1] if start_price is None else float(start_price)
        self.phase = 0

    def next_block(self, remaining):
        if self.phase < len(self.schedule):
            self.phase_starts.append(self.t)
            return self.price, self.schedule[self.phase]
        return self.price, remaining

    def observe(self, demands):
        super().observe(demands)
        if self.phase >= len(self.schedule):
            return
        t_j = len(demands)
        mean = float(np.mean(demands))
        c = self.constants
        w = cm_width(c.c2, c.c_sg, self.n, t_j)
        state = ConfidenceState(self.phase + 1, self.price, (self.price,), (mean,), t_j, None, w, (np.nan, np.nan))
        try:
            theta_hat = self.family.inverse_profile([self.price], [mean])
        except (InconsistencyError, ConditioningError) as exc:
            self.flags.append(f"phase {self.phase + 1}: {exc}; holding price")
            state.next_price = self.price
            self.history.append(state)
            self.phase += 1
            return
        p_lo, p_hi = ball_price_range(self.family, theta_hat, w)
        state.theta_hat = theta_hat
        state.theta_interval = (float(theta_hat[0]) - w, float(theta_hat[0]) + w)
        state.interval = (p_lo, p_hi)
        new_price = min(p_hi, self.price)
        if p_hi > self.price:
            self.flags.append(f"phase {self.phase + 1}: truncation active")
        state.next_price = new_price
        self.history.append(state)
        self.price = new_price
        self.phase += 1


def icm_width(c_star, c2, c_sg, h, k, n, n_j) -> float:
    return 2.0 * c_star * c2 * c_sg * h ** (-k) * math.sqrt((k + 1) * math.log(n) / n_j)


def classify_event(lower: float, upper: float, bottom: float) -> str:
    """Position of the interval [lower, upper] relative to the lowest explored price."""
    if upper < bottom:
        return GOOD
    if bottom < lower:
        return OVERSHOOT
    return DANGEROUS


class ICMPolicy(Policy):
    """Iterative cautious myopic policy for k-crossing families (k >= 1)."""

    name = "icm"
    markdown = True

    def __init__(self, family: Family, n: int, constants: Constants, tuning: IcmTuning,
                 start_price: Optional[float] = None):
        super().__init__()
        k = family.crossing_k
        if k < 1:
            raise ConfigurationError("ICM requires a family with crossing number k >= 1")
        if tuning.k != k:
            raise ConfigurationError(f"tuning was computed for k={tuning.k}, family has k={k}")
        if tuning.exploration_rounds > n:
            raise ConfigurationError(
                f"tuned exploration (k+1)*sum(n_j) = {tuning.exploration_rounds} exceeds n = {n}"
            )
        self.family = family
        self.k = k
        self.n = int(n)
        self.constants = constants
        self.tuning = tuning
        self.h = tuning.h
        self.price = family.price_domain[1] if start_price is None else float(start_price)
        self.phase = 0
        self.step = 0
        self.exploring = True
        self._means: list[float] = []
        self._counts: list[int] = []

    def _stop(self, reason: Optional[str] = None):
        self.exploring = False
        if reason:
            self.flags.append(reason)

    def exploration_prices(self) -> np.ndarray:
        return self.price - self.h * np.arange(self.k + 1)

    def next_block(self, remaining):
        if self.exploring and self.step == 0:
            if self.phase >= self.tuning.m:
                self._stop()
            elif self.price - self.k * self.h < self.family.price_domain[0] - 1e-12:
                self._stop(f"phase {self.phase + 1}: exploration prices fall below the domain; holding")
            else:
                self.phase_starts.append(self.t)
        if not self.exploring:
            return self.price, remaining
        return self.price - self.step * self.h, self.tuning.n_schedule[self.phase]

    def observe(self, demands):
        super().observe(demands)
        if not self.exploring:
            return
        self._means.append(float(np.mean(demands)))
        self._counts.append(len(demands))
        self.step += 1
        if self.step <= self.k:
            return
        self._end_phase()

    def _end_phase(self):
        prices = self.exploration_prices()
        means = np.array(self._means)
        n_j = self.tuning.n_schedule[self.phase]
        bottom = float(prices[-1])
        c = self.constants
        w = icm_width(c.c_star, c.c2, c.c_sg, self.h, self.k, self.n, n_j)
        state = ConfidenceState(self.phase + 1, self.price, tuple(prices), tuple(means), n_j, None, w,
                                (np.nan, np.nan))
        self._means, self._counts, self.step = [], [], 0
        self.phase += 1
        try:
            theta_hat = self.family.inverse_profile(prices, means)
        except (InconsistencyError, ConditioningError) as exc:
            state.next_price = bottom
            self.history.append(state)
            self.price = bottom
            self._stop(f"phase {state.phase}: {exc}; holding price")
            return
        p_hat, _ = self.family.optimal_prices(theta_hat[None, :])
        lo_d, hi_d = self.family.price_domain
        lower = max(lo_d, float(p_hat[0]) - w)
        upper = min(hi_d, float(p_hat[0]) + w)
        event = classify_event(lower, upper, bottom)
        state.theta_hat = theta_hat
        state.interval = (lower, upper)
        state.event = event
        if event == GOOD:
            self.price = upper
        else:
            self.price = bottom
        state.next_price = self.price
        self.history.append(state)
        if event == OVERSHOOT:
            self._stop()


class MLEGreedyPolicy(Policy):
    """Certainty-equivalent greedy pricing (not a markdown policy).

    After every round the slope of the linear family is re-estimated by
    least squares through the origin on ``1 - scale * D = a p + noise`` and
    the next price is ``p*(a_hat)``.  The whole horizon runs in one kernel
    call (see ``kernels``).
    """

    name = "mle_greedy"
    markdown = False

    def __init__(self, family: Family):
        super().__init__()
        if family.tag != "linear":
            raise ConfigurationError("mle_greedy is implemented for the linear family only")
        self.family = family
        self.price_increases = 0

    def run(self, model: DemandModel, noise, innov: np.ndarray):
        n = innov.shape[0]
        prices = np.empty(n)
        demands = np.empty(n)
        fam = self.family
        self.price_increases = int(kernels.mle_greedy_linear(
            float(model.theta[0]), fam.param_lo[0], fam.param_hi[0], fam.price_domain[0], fam.price_domain[1],
            float(fam.scale), noise.code, float(noise.sigma), np.ascontiguousarray(innov, dtype=float),
            prices, demands,
        ))
        self.t = n
        return prices, demands


POLICY_NAMES = ("cm", "icm", "mle_greedy", "oracle", "fixed:<p>")


def default_icm_m(n: int) -> int:
    return min(math.ceil(math.log(n)), 6)


def policy_constants(model: DemandModel, noise, constants: Optional[Constants] = None) -> Constants:
    """Model constants with c_sg taken from the noise model unless overridden."""
    if constants is not None:
        return constants
    return model.constants.with_c_sg(noise.c_sg)


def make_policy(spec: str, model: DemandModel, noise, n: int, constants: Optional[Constants] = None,
                tuning: Optional[IcmTuning] = None, s: Optional[int] = None, m: Optional[int] = None,
                test_mode: bool = False) -> Policy:
    """Build a policy from its roster name (``cm``, ``icm``, ``mle_greedy``, ``oracle``, ``fixed:<p>``)."""
    spec = spec.strip()
    if spec == "cm":
        return CMPolicy(model.family, n, policy_constants(model, noise, constants))
    if spec == "icm":
        if tuning is None:
            tuning = solve_lp(n, model.crossing_k, s or model.sensitivity_s, m or default_icm_m(n))
        return ICMPolicy(model.family, n, policy_constants(model, noise, constants), tuning)
    if spec == "mle_greedy":
        return MLEGreedyPolicy(model.family)
    if spec == "oracle":
        return OraclePolicy(model)
    if spec.startswith("fixed:"):
        try:
            p = float(spec.split(":", 1)[1])
        except ValueError:
            raise ParameterError(f"bad fixed-price spec {spec!r}") from None
        return FixedPricePolicy(p)
    if spec == "faulty" and test_mode:
        return FaultyPolicy()
    raise ParameterError(f"unknown policy {spec!r}; choose from {POLICY_NAMES}")
