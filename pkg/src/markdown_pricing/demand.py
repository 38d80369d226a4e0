"""Parametric demand families, profile mappings and optimal-price maps.

A :class:`Family` describes a set of demand curves ``d(p; theta)`` over a
parameter box and a price domain.  A :class:`DemandModel` pins one parameter
vector inside a family.  Every family declares a multiplicative range scale:
the demand actually served (and observed through noise) is the raw curve
divided by ``scale``, which keeps it inside [0, 1] without moving the
revenue maximizer.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import lambertw

from . import linalg
from .errors import (
    ConditioningError,
    DomainError,
    InconsistencyError,
    ModelViolationError,
    ParameterError,
)

CLOSED_FORM_TAGS = ("linear", "exponential", "logit")
FAMILY_TAGS = CLOSED_FORM_TAGS + ("polynomial",)

# Root of -t = e^t (minus the omega constant).
T0 = -float(lambertw(1.0).real)

DOMAIN_TOL = 1e-12
FOC_TOL = 1e-8


@dataclass(frozen=True)
class Constants:
    """Problem constants consumed by the confidence-width formulas."""

    c2: float
    c_star: float
    c_s: float
    c_sg: float = 1.0

    def with_c_sg(self, c_sg: float) -> "Constants":
        return replace(self, c_sg=float(c_sg))


@dataclass(frozen=True)
class Family:
    tag: str
    param_lo: tuple
    param_hi: tuple
    price_domain: tuple = (0.5, 1.0)
    scale: float = 1.0
    sensitivity_s: int = 2
    name: str = ""

    def __post_init__(self):
        if self.tag not in FAMILY_TAGS:
            raise ParameterError(f"unknown family tag {self.tag!r}")
        lo = tuple(float(v) for v in np.atleast_1d(self.param_lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.param_hi))
        object.__setattr__(self, "param_lo", lo)
        object.__setattr__(self, "param_hi", hi)
        object.__setattr__(self, "price_domain", tuple(float(v) for v in self.price_domain))
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
            raise ParameterError("param_lo/param_hi must describe a box")
        if self.tag in CLOSED_FORM_TAGS and len(lo) != 1:
            raise ParameterError(f"{self.tag} family has a single parameter")
        p_lo, p_hi = self.price_domain
        if not (0.0 <= p_lo < p_hi <= 1.0):
            raise ParameterError("price domain must be a nondegenerate subinterval of [0, 1]")
        if self.scale <= 0:
            raise ParameterError("scale must be positive")
        if self.sensitivity_s < 2:
            raise ParameterError("sensitivity must be at least 2")
        if not self.name:
            object.__setattr__(self, "name", self.tag)

    # -- basic geometry -----------------------------------------------------

    @property
    def crossing_k(self) -> int:
        return 0 if self.tag in CLOSED_FORM_TAGS else len(self.param_lo) - 1

    @property
    def dim(self) -> int:
        return len(self.param_lo)

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.param_lo)

    @property
    def hi(self) -> np.ndarray:
        return np.array(self.param_hi)

    @property
    def diameter(self) -> float:
        return float(np.max(self.hi - self.lo))

    def contains(self, theta, tol: float = 1e-12) -> bool:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        return bool(np.all(th >= self.lo - tol) and np.all(th <= self.hi + tol))

    def project(self, theta) -> np.ndarray:
        return np.clip(np.atleast_1d(np.asarray(theta, dtype=float)), self.lo, self.hi)

    def sample_theta(self, rng, size=None, frac: float = 0.8) -> np.ndarray:
        """Uniform draw from the middle ``frac`` of the box (per coordinate)."""
        mid = 0.5 * (self.lo + self.hi)
        half = 0.5 * frac * (self.hi - self.lo)
        shape = (self.dim,) if size is None else (size, self.dim)
        return mid - half + 2.0 * half * rng.random(shape)

    def model(self, theta, constants: Optional[Constants] = None) -> "DemandModel":
        return DemandModel(self, theta, constants)

    # -- vectorized evaluation ---------------------------------------------

    def _as_thetas(self, theta) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        if th.ndim == 0:
            th = th.reshape(1)
        return th

    def raw_demand(self, theta, p):
        """Unscaled demand; ``theta`` may be (dim,) or (N, dim)."""
        th = self._as_thetas(theta)
        p = np.asarray(p, dtype=float)
        if self.tag == "polynomial":
            coeffs = np.moveaxis(th, -1, 0)
            out = np.zeros(np.broadcast_shapes(coeffs.shape[1:], p.shape))
            for c in coeffs[::-1]:
                out = out * p + c
            return out
        a = th[..., 0]
        if self.tag == "linear":
            return 1.0 - a * p
        if self.tag == "exponential":
            return np.exp(1.0 - a * p)
        return 1.0 / (1.0 + np.exp(a * p - 1.0))

    def evaluate(self, theta, p):
        """Scaled demand, the mean of the observed demand."""
        return self.raw_demand(theta, p) / self.scale

    def revenue(self, theta, p):
        return np.asarray(p, dtype=float) * self.evaluate(theta, p)

    def profile(self, theta, prices) -> np.ndarray:
        """Profile vector ``(d(p_0), ..., d(p_k))``."""
        return np.asarray(self.evaluate(theta, np.asarray(prices, dtype=float)), dtype=float)

    # -- optimal price ------------------------------------------------------

    def optimal_prices(self, thetas) -> tuple[np.ndarray, np.ndarray]:
        """Argmax of revenue over the price domain for a batch of parameters.

        Returns ``(p_star, boundary)``, where ``boundary`` marks parameters
        whose maximizer sits on a domain endpoint without a vanishing
        derivative.
        """
        th = np.atleast_2d(np.asarray(thetas, dtype=float))
        if th.shape[-1] != self.dim:
            th = th.reshape(-1, self.dim)
        p_lo, p_hi = self.price_domain
        if self.tag in CLOSED_FORM_TAGS:
            a = th[:, 0]
            with np.errstate(divide="ignore"):
                if self.tag == "linear":
                    raw = 1.0 / (2.0 * a)
                elif self.tag == "exponential":
                    raw = 1.0 / a
                else:
                    raw = (1.0 - T0) / a
            raw = np.where(a > 0, raw, np.inf)
            p = np.clip(raw, p_lo, p_hi)
            return p, (raw < p_lo) | (raw > p_hi)
        return _poly_optimal_prices(th, p_lo, p_hi)

    @property
    def pstar_monotone(self) -> int:
        """-1 when p* decreases in the (scalar) parameter, 0 when unknown."""
        return -1 if self.tag in CLOSED_FORM_TAGS else 0

    # -- profile inversion --------------------------------------------------

    def inverse_profile(self, prices, values, project: bool = True) -> np.ndarray:
        prices = np.atleast_1d(np.asarray(prices, dtype=float))
        values = np.atleast_1d(np.asarray(values, dtype=float))
        k = self.crossing_k
        if prices.size != k + 1 or values.size != k + 1:
            raise ParameterError(f"{self.name} needs exactly {k + 1} prices and values")
        y = values * self.scale
        if self.tag == "polynomial":
            theta = linalg.solve_vandermonde(prices, y)
        else:
            p = prices[0]
            if p <= 0:
                raise ConditioningError("profile price must be positive for a single-parameter family")
            with np.errstate(divide="ignore", invalid="ignore"):
                if self.tag == "linear":
                    a = (1.0 - y[0]) / p
                elif self.tag == "exponential":
                    a = (1.0 - np.log(y[0])) / p if y[0] > 0 else np.nan
                else:
                    a = (1.0 + np.log((1.0 - y[0]) / y[0])) / p if 0 < y[0] < 1 else np.nan
            theta = np.array([a], dtype=float)
        if not np.all(np.isfinite(theta)):
            raise InconsistencyError(f"values {values} are outside the range of the profile mapping")
        excess = np.max(np.maximum(self.lo - theta, theta - self.hi))
        if excess > 10.0 * max(self.diameter, 1e-12):
            raise InconsistencyError(
                f"solved parameter {theta} lies {excess:.3g} outside the parameter box"
            )
        return self.project(theta) if project else theta


def _poly_real_critical_points(th: np.ndarray) -> np.ndarray:
    """Real roots of r'(p) = sum (j+1) theta_j p^j as an (N, k) array padded with NaN."""
    n, d = th.shape
    deg = d - 1
    out = np.full((n, max(deg, 1)), np.nan)
    if deg == 0:
        return out
    dr = th * np.arange(1, d + 1)
    lead = dr[:, -1]
    ok = np.abs(lead) > 1e-14
    if deg == 1:
        out[ok, 0] = -dr[ok, 0] / lead[ok]
    elif np.any(ok):
        monic = dr[ok, :-1] / lead[ok, None]
        comp = np.zeros((monic.shape[0], deg, deg))
        comp[:, 1:, :-1] = np.eye(deg - 1)
        comp[:, :, -1] = -monic
        roots = np.linalg.eigvals(comp)
        real = np.abs(roots.imag) <= 1e-9 * (1 + np.abs(roots.real))
        out[ok] = np.where(real, roots.real, np.nan)
    for idx in np.flatnonzero(~ok):
        coeffs = np.trim_zeros(dr[idx, ::-1], "f")
        if coeffs.size > 1:
            roots = np.roots(coeffs)
            roots = roots.real[np.abs(roots.imag) <= 1e-9]
            out[idx, : roots.size] = roots
    return out


def _polyval_rows(th: np.ndarray, p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    for j in range(th.shape[1] - 1, -1, -1):
        out = out * p + th[:, j : j + 1]
    return out


def _poly_optimal_prices(th: np.ndarray, p_lo: float, p_hi: float):
    n, d = th.shape
    crit = _poly_real_critical_points(th)
    crit = np.where((crit >= p_lo) & (crit <= p_hi), crit, np.nan)
    cand = np.concatenate([np.full((n, 1), p_lo), np.full((n, 1), p_hi), crit], axis=1)
    safe = np.where(np.isnan(cand), p_lo, cand)
    vals = np.where(np.isnan(cand), -np.inf, safe * _polyval_rows(th, safe))
    j = np.argmax(vals, axis=1)
    best = safe[np.arange(n), j]
    dr = th * np.arange(1, d + 1)
    slope = _polyval_rows(dr, best[:, None])[:, 0]
    scale = np.maximum(1.0, np.abs(th).sum(axis=1))
    boundary = (j < 2) & (np.abs(slope) > FOC_TOL * scale)
    return best, boundary


def numeric_optimal_price(revenue, lo: float, hi: float, grid: int = 2048, tol: float = 1e-10) -> float:
    """Grid scan followed by golden-section refinement of a scalar revenue curve."""
    xs = np.linspace(lo, hi, grid)
    vals = np.array([revenue(x) for x in xs])
    i = int(np.argmax(vals))
    if i == 0 or i == grid - 1:
        return float(xs[i])
    res = minimize_scalar(
        lambda x: -revenue(min(max(x, lo), hi)),
        bracket=(xs[i - 1], xs[i], xs[i + 1]),
        method="golden",
        tol=tol,
    )
    return float(min(max(res.x, lo), hi))


# -- constant certification ------------------------------------------------

CERT_SAMPLES = 100_000
CERT_INFLATION = 1.5


def _certify_c2(fam: Family, rng) -> float:
    k = fam.crossing_k
    p_lo, p_hi = fam.price_domain
    if k == 0:
        nh = CERT_SAMPLES // 2
        th1 = fam.lo + (fam.hi - fam.lo) * rng.random((CERT_SAMPLES, 1))
        # half the pairs are global, half are local perturbations
        th2 = fam.lo + (fam.hi - fam.lo) * rng.random((CERT_SAMPLES, 1))
        eps = 1e-6 * max(fam.diameter, 1e-9)
        th2[nh:] = np.clip(th1[nh:] + eps * (2 * rng.random((CERT_SAMPLES - nh, 1)) - 1), fam.lo, fam.hi)
        p = p_lo + (p_hi - p_lo) * rng.random(CERT_SAMPLES)
        dy = np.abs(fam.evaluate(th1, p) - fam.evaluate(th2, p))
        dth = np.abs(th1[:, 0] - th2[:, 0])
        ok = dy > 1e-14
        return float(np.max(dth[ok] / dy[ok]))
    # polynomial: the ratio |V^-1 dy|_1 / |dy|_1 peaks at the l1-induced norm of V^-1
    best = 0.0
    n_sets = CERT_SAMPLES // 50
    width = p_hi - p_lo
    for _ in range(n_sets):
        if rng.random() < 0.5:
            h = width / k * rng.random() * 0.999 + 1e-3 * width / k
            top = p_hi - rng.random() * (width - k * h)
            nodes = top - h * np.arange(k + 1)
        else:
            nodes = np.sort(p_lo + width * rng.random(k + 1))
            if linalg.dispersion(nodes) < 1e-3:
                continue
        h = linalg.dispersion(nodes)
        val = linalg.l1_operator_norm(linalg.inverse_vandermonde(nodes)) * h**k
        best = max(best, val)
    return best * fam.scale


def _certify_c_star(fam: Family, rng) -> float:
    n = CERT_SAMPLES if fam.crossing_k <= 1 else CERT_SAMPLES // 5
    nh = n // 2
    th1 = fam.lo + (fam.hi - fam.lo) * rng.random((n, fam.dim))
    th2 = fam.lo + (fam.hi - fam.lo) * rng.random((n, fam.dim))
    eps = 1e-5 * max(fam.diameter, 1e-9)
    th2[nh:] = np.clip(th1[nh:] + eps * (2 * rng.random((n - nh, fam.dim)) - 1), fam.lo, fam.hi)
    p1, _ = fam.optimal_prices(th1)
    p2, _ = fam.optimal_prices(th2)
    dth = np.sum(np.abs(th1 - th2), axis=1)
    ok = dth > 1e-14
    return float(np.max(np.abs(p1 - p2)[ok] / dth[ok]))


def _certify_c_s(fam: Family, rng) -> float:
    """sup |r''| / 2, so that r* - r(p) <= c_s (p - p*)^2."""
    th = fam.lo + (fam.hi - fam.lo) * rng.random((2000, fam.dim))
    p = np.linspace(*fam.price_domain, 201)
    eps = 1e-4
    pp = p[None, :]
    r2 = (fam.revenue(th[:, None, :], pp + eps) - 2 * fam.revenue(th[:, None, :], pp)
          + fam.revenue(th[:, None, :], pp - eps)) / eps**2
    return float(np.max(np.abs(r2))) / 2.0


@lru_cache(maxsize=64)
def certify_constants(fam: Family, seed: int = 20240101) -> Constants:
    """Randomized estimate of (c2, c*, c_s), each inflated by 1.5."""
    rng = np.random.default_rng(seed)
    c2 = _certify_c2(fam, rng)
    c_star = _certify_c_star(fam, rng)
    c_s = _certify_c_s(fam, rng)
    return Constants(c2=CERT_INFLATION * c2, c_star=CERT_INFLATION * c_star, c_s=CERT_INFLATION * c_s)


# -- models -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DemandModel:
    family: Family
    theta: np.ndarray
    constants_override: Optional[Constants] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.theta, dtype=float)).copy()
        if th.size != self.family.dim:
            raise ParameterError(f"{self.family.name} expects {self.family.dim} parameters, got {th.size}")
        if not self.family.contains(th):
            raise ParameterError(f"theta={th} lies outside the parameter box")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    @property
    def crossing_k(self) -> int:
        return self.family.crossing_k

    @property
    def sensitivity_s(self) -> int:
        return self.family.sensitivity_s

    @property
    def price_domain(self) -> tuple:
        return self.family.price_domain

    @property
    def param_box(self) -> tuple:
        return self.family.param_lo, self.family.param_hi

    @property
    def constants(self) -> Constants:
        if self.constants_override is not None:
            return self.constants_override
        return certify_constants(self.family)

    def demand(self, p):
        return self.family.evaluate(self.theta, p)

    def revenue(self, p):
        return np.asarray(p, dtype=float) * self.demand(p)

    def _optimum(self):
        if "opt" not in self._cache:
            p, b = self.family.optimal_prices(self.theta[None, :])
            self._cache["opt"] = (float(p[0]), bool(b[0]))
        return self._cache["opt"]

    @property
    def boundary_optimal(self) -> bool:
        return self._optimum()[1]

    def optimal_price(self, require_interior: bool = False) -> float:
        p, boundary = self._optimum()
        if require_interior and boundary:
            raise ModelViolationError(f"{self.family.name} theta={self.theta} is optimal on the domain boundary")
        return p

    @property
    def r_star(self) -> float:
        return float(self.revenue(self.optimal_price()))

    def regret_at(self, p):
        return self.r_star - self.revenue(p)

    def profile(self, prices) -> np.ndarray:
        return self.family.profile(self.theta, prices)


def eval_demand(model: DemandModel, p) -> float:
    lo, hi = model.price_domain
    if not (lo - DOMAIN_TOL <= p <= hi + DOMAIN_TOL):
        raise DomainError(f"price {p} outside the domain [{lo}, {hi}]")
    return float(model.demand(p))


def optimal_price(model: DemandModel, require_interior: bool = False) -> float:
    return model.optimal_price(require_interior=require_interior)


def inverse_profile(family: Family, prices: Sequence[float], values: Sequence[float]) -> np.ndarray:
    return family.inverse_profile(prices, values)


# -- catalog --------------------------------------------------------------------

LINEAR = Family("linear", (0.5,), (1.0,), (0.5, 1.0), name="linear")
EXPONENTIAL = Family("exponential", (0.5,), (0.75,), (0.5, 1.0), scale=math.exp(0.75), name="exponential")
LOGIT = Family("logit", (0.5,), (1.0,), (0.5, 1.0), name="logit")
POLY1 = Family("polynomial", (0.9, -0.9), (1.0, -0.7), (0.0, 1.0), name="poly1")
POLY2 = Family("polynomial", (0.95, -1.0, 0.15), (1.0, -0.9, 0.25), (0.0, 1.0), name="poly2")

CATALOG = {f.name: f for f in (LINEAR, EXPONENTIAL, LOGIT, POLY1, POLY2)}


def get_family(name: str) -> Family:
    try:
        return CATALOG[name]
    except KeyError:
        raise ParameterError(f"unknown family {name!r}; choose from {sorted(CATALOG)}") from None


def polynomial_family(k: int) -> Family:
    if k == 1:
        return POLY1
    if k == 2:
        return POLY2
    raise ParameterError("built-in polynomial families exist for k in {1, 2}")


# -- lower-bound fixtures -------------------------------------------------------


def lower_bound_delta(t: int, n: int) -> float:
    return math.sqrt(math.log(n) / t)


def make_lower_bound_family_k0(t: int, n: int, check: bool = True) -> DemandModel:
    """Linear instance ``d_t(p) = 1 - (1 - 2 delta_t) p`` on [0, 1].

    Accepted rounds satisfy ``ln n <= t < n`` with ``delta_t < 1/2`` so the
    slope stays positive; ``t=0`` with ``check=False`` gives the base curve.
    """
    if n < 3:
        raise ParameterError("horizon must be at least 3")
    if check and not (math.log(n) <= t < n and lower_bound_delta(t, n) < 0.5):
        raise ParameterError(f"t={t} outside the regime ln n <= t < n, delta_t < 1/2 for n={n}")
    delta = 0.0 if t == 0 else lower_bound_delta(t, n)
    a = 1.0 - 2.0 * delta
    fam = Family("linear", (min(a, 1.0),), (1.0,), (0.0, 1.0), name="lower_bound_k0")
    return DemandModel(fam, [a])


def base_lower_bound_model() -> DemandModel:
    fam = Family("linear", (0.5,), (1.0,), (0.0, 1.0), name="lower_bound_k0")
    return DemandModel(fam, [1.0])


def polynomial_pair_ratio(k: int) -> float:
    """Ratio r/b of the leading coefficients of the pair."""
    return 2.0 if k <= 2 else 2.0**k


def make_polynomial_pair(k: int) -> tuple[DemandModel, DemandModel]:
    """Degree-k pair ``(D_r, D_b)`` on the price domain [1/2, 1].

    For k=1 the pair is ``6 - 5x`` and ``2 - x``.  For k >= 2 the pair is
    ``1 + u + q u^k`` with ``u = 1 - x`` and ``q = 1`` (blue) or
    ``q = polynomial_pair_ratio(k)`` (red).  Both are divided by a common
    scale so demands stay in [0, 1].
    """
    if k < 1:
        raise ParameterError("pair degree must be at least 1")
    if k == 1:
        th_r = np.array([6.0, -5.0])
        th_b = np.array([2.0, -1.0])
    else:
        def expand(q):
            # 1 + (1 - x) + q (1 - x)^k in increasing powers of x
            c = np.zeros(k + 1)
            c[0] += 2.0
            c[1] += -1.0
            for j in range(k + 1):
                c[j] += q * math.comb(k, j) * (-1.0) ** j
            return c

        th_b = expand(1.0)
        th_r = expand(polynomial_pair_ratio(k))
    domain = (0.5, 1.0)
    scale = float(max(np.polynomial.polynomial.polyval(0.5, th_r), np.polynomial.polynomial.polyval(0.5, th_b)))
    lo = np.minimum(th_r, th_b)
    hi = np.maximum(th_r, th_b)
    fam = Family("polynomial", tuple(lo), tuple(hi), domain, scale=scale, name=f"pair{k}")
    return DemandModel(fam, th_r), DemandModel(fam, th_b)


# -- identifiability falsification ---------------------------------------------


@dataclass(frozen=True)
class SineFamily:
    """1-Lipschitz fixture ``sin(theta k pi x) / (theta k pi)`` with theta in {1, 2}."""

    k: int
    thetas: tuple = (1.0, 2.0)
    price_domain: tuple = (0.0, 1.0)

    def evaluate(self, theta, p):
        th = np.asarray(theta, dtype=float)[..., 0]
        w = th * self.k * math.pi
        return np.sin(w * np.asarray(p)) / w

    def candidate_thetas(self, resolution: int) -> np.ndarray:
        return np.array(self.thetas, dtype=float)[:, None]

    def candidate_prices(self, resolution: int, k: int):
        yield tuple(np.arange(k + 1) / k)


@dataclass
class Counterexample:
    theta: np.ndarray
    theta_prime: np.ndarray
    prices: tuple
    profile: np.ndarray
    profile_prime: np.ndarray


def _family_candidates(family, resolution: int) -> np.ndarray:
    if hasattr(family, "candidate_thetas"):
        return family.candidate_thetas(resolution)
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(family.param_lo, family.param_hi)]
    return np.array(list(itertools.product(*axes)))


def _price_tuples(family, resolution: int, k: int):
    if hasattr(family, "candidate_prices"):
        yield from family.candidate_prices(resolution, k)
        return
    grid = np.linspace(*family.price_domain, resolution)
    for combo in itertools.combinations(grid[::-1], k + 1):
        yield combo


def falsify_identifiability(family, k: int, resolution: int = 11, tol: float = 1e-10):
    """Search for two distinct parameters sharing a (k+1)-price profile.

    Returns a :class:`Counterexample` or ``None``.  ``None`` only means no
    witness exists on this grid.
    """
    thetas = _family_candidates(family, resolution)
    for prices in _price_tuples(family, resolution, k):
        prof = np.stack([np.asarray(family.evaluate(thetas, p), dtype=float) for p in prices], axis=1)
        # sweep along the first profile entry; every pair within tol there is compared in full
        order = np.argsort(prof[:, 0], kind="stable")
        first = prof[order, 0]
        for i in range(order.size):
            j = i + 1
            while j < order.size and first[j] - first[i] <= tol:
                a, b = order[i], order[j]
                if (np.max(np.abs(prof[a] - prof[b])) <= tol
                        and np.max(np.abs(thetas[a] - thetas[b])) > tol):
                    return Counterexample(thetas[a], thetas[b], tuple(float(p) for p in prices),
                                          prof[a], prof[b])
                j += 1
    return None
