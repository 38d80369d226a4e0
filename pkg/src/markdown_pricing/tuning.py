"""Closed-form ICM tuning from the regret-balancing linear program.

Writing ``h = n^-y`` and ``n_j = n^{z_j}``, the optimal exponents make every
constraint tight:

    z_1 = x
    z_{j+1} - (s/2) z_j = x - s k y      (j = 1..m-1)
    1 - (s/2) z_m      = x - s k y
    1 - s y            = x
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ParameterError

ROUND_TOL = 1e-9


def _check(m, s, k, k_min=1):
    if int(m) != m or m < 1:
        raise ParameterError("m must be a positive integer")
    if int(s) != s or s < 2:
        raise ParameterError("s must be an integer >= 2")
    if int(k) != k or k < k_min:
        raise ParameterError(f"k must be an integer >= {k_min}")


def geometric_sum(m: int, s: int) -> float:
    """1 + s/2 + ... + (s/2)^(m-1)."""
    q = s / 2.0
    return float(m) if q == 1.0 else (q**m - 1.0) / (q - 1.0)


def rho(m: int, s: int, k: int) -> float:
    """Predicted regret exponent of ICM with m phases."""
    _check(m, s, k)
    g = geometric_sum(m, s)
    return (1.0 + g * k) / ((s / 2.0) ** m + g * (k + 1))


def lp_exponents(m: int, s: int, k: int) -> tuple[float, float, np.ndarray]:
    """(x, y, z_1..z_m) solving the tight constraint system."""
    x = rho(m, s, k)
    y = (1.0 - x) / s
    z = np.empty(m)
    z[0] = x
    for j in range(1, m):
        z[j] = (s / 2.0) * z[j - 1] + x - s * k * y
    return x, y, z


def lp_residuals(m: int, s: int, k: int, x=None, y=None, z=None) -> np.ndarray:
    """Residuals of the m+2 equalities (all zero at the closed form)."""
    if x is None:
        x, y, z = lp_exponents(m, s, k)
    z = np.asarray(z, dtype=float)
    q = s / 2.0
    res = [z[0] - x]
    for j in range(1, m):
        res.append(z[j] - q * z[j - 1] - (x - s * k * y))
    res.append(1.0 - q * z[m - 1] - (x - s * k * y))
    res.append(1.0 - s * y - x)
    return np.array(res)


def telescoping_residual(m: int, s: int, k: int) -> float:
    x, y, z = lp_exponents(m, s, k)
    return (1.0 - (s / 2.0) ** m * z[0]) - geometric_sum(m, s) * (x - s * k * y)


@dataclass(frozen=True)
class IcmTuning:
    n: int
    k: int
    s: int
    m: int
    h: float
    n_schedule: tuple
    rho: float
    y: float
    z: tuple
    requested_m: int

    @property
    def exploration_rounds(self) -> int:
        return (self.k + 1) * sum(self.n_schedule)

    def theorem_form_h(self) -> float:
        """h with the exponent m/(m(k+1)+1) written for s=2 (shown for comparison)."""
        return self.n ** (-self.m / (self.m * (self.k + 1) + 1))


def _ceil_power(n: int, e: float) -> int:
    v = n**e
    r = round(v)
    if abs(v - r) <= ROUND_TOL * max(1.0, v):
        return int(r)
    return int(math.ceil(v))


def schedule_for(n: int, k: int, s: int, m: int) -> IcmTuning:
    x, y, z = lp_exponents(m, s, k)
    sched = []
    for zj in z:
        nj = max(_ceil_power(n, zj), 1)
        if sched and nj <= sched[-1]:
            nj = sched[-1] + 1
        sched.append(nj)
    return IcmTuning(n=n, k=k, s=s, m=m, h=float(n**-y), n_schedule=tuple(sched), rho=x,
                     y=y, z=tuple(float(v) for v in z), requested_m=m)


def solve_lp(n: int, k: int, s: int = 2, m: int = 1) -> IcmTuning:
    """Tune (h, n_1..n_m); shrink m until the exploration fits in n rounds."""
    _check(m, s, k)
    if n < 2:
        raise ParameterError("horizon must be at least 2")
    for mm in range(int(m), 0, -1):
        t = schedule_for(int(n), int(k), int(s), mm)
        if t.exploration_rounds <= n:
            return IcmTuning(**{**t.__dict__, "requested_m": int(m)})
    raise ConfigurationError(
        f"(k+1)*sum(n_j) = {t.exploration_rounds} exceeds n = {n} even with m = 1"
    )
