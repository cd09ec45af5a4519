"""Transition densities of skew Brownian motion with one or two semipermeable barriers"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Iterator, Optional, Tuple, Union

import numpy as np
from scipy import special

from ..utils.cache import MomentTableCache
from ..utils.errors import DivergentBoundError, DomainError, UnsupportedRegimeError
from .special_functions import binom, factorial, g_script_table

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Number of correction terms in the near-equal skewness expansion
NEAR_EQUAL_TERMS = 24

# Consecutive sub-tolerance k-terms that stop the drifted series
DRIFT_STOP_RUN = 3


@dataclass(frozen=True)
class SkewParams:
    """Barriers z1 < z2, skewness coefficients at each barrier, and the drift."""

    z1: float = 0.0
    z2: float = 1.0
    beta1: float = 0.0
    beta2: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        for name in ('z1', 'z2', 'beta1', 'beta2', 'mu'):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        if not self.z1 < self.z2:
            raise DomainError(f"Barriers must satisfy z1 < z2, got z1={self.z1}, z2={self.z2}")
        for name in ('beta1', 'beta2'):
            if abs(getattr(self, name)) > 1:
                raise DomainError(f"{name} must lie in [-1, 1], got {getattr(self, name)}")
        if abs(self.beta1 * self.beta2) >= 1:
            raise DivergentBoundError(
                f"|beta1*beta2| must be < 1, got beta1={self.beta1}, beta2={self.beta2}")

    @property
    def z(self) -> float:
        """Distance between the barriers."""
        return self.z2 - self.z1

    @property
    def product(self) -> float:
        return self.beta1 * self.beta2

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class TruncationPolicy:
    """Controls where the series are cut.

    n_max caps the series index, tol is the target absolute error on the
    ratio v = p / p0, and merge_gap is the skewness gap |A1 - A2| below
    which the drifted series switches to the near-equal expansion.
    """

    n_max: int = 10
    tol: float = 1e-10
    merge_gap: float = 0.05

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise DomainError(f"n_max must be a non-negative integer, got {self.n_max!r}")
        if not self.tol > 0:
            raise DomainError(f"tol must be positive, got {self.tol!r}")
        if not self.merge_gap >= 0:
            raise DomainError(f"merge_gap must be non-negative, got {self.merge_gap!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class DensityValue:
    """A density evaluation with its truncation diagnostics.

    value and error_bound are floats for scalar input and arrays otherwise.
    rigorous_bound is False when error_bound is an empirical tail estimate.
    """

    value: ArrayLike
    error_bound: ArrayLike
    terms_used: int
    exact_formula: bool
    rigorous_bound: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            'value': np.asarray(self.value).tolist(),
            'error_bound': np.asarray(self.error_bound).tolist(),
            'terms_used': self.terms_used,
            'exact_formula': self.exact_formula,
            'rigorous_bound': self.rigorous_bound,
        }


class WeightFunction:
    """Speed-measure weight k(x) and h(x) = k(x) exp(2 mu x).

    k is piecewise constant with right-continuous steps at z1 and z2.
    """

    def __init__(self, params: SkewParams):
        self.params = params
        b1, b2 = params.beta1, params.beta2
        self.levels = (0.25 * (1 - b1) * (1 - b2),
                       0.25 * (1 + b1) * (1 - b2),
                       0.25 * (1 + b1) * (1 + b2))

    def k(self, x: ArrayLike) -> ArrayLike:
        arr = np.asarray(x, dtype=float)
        low, mid, high = self.levels
        out = np.where(arr < self.params.z1, low, np.where(arr < self.params.z2, mid, high))
        return _like(out, x)

    def h(self, x: ArrayLike) -> ArrayLike:
        arr = np.asarray(x, dtype=float)
        out = np.asarray(self.k(arr)) * np.exp(2.0 * self.params.mu * arr)
        return _like(out, x)


def weight_k(x: ArrayLike, params: SkewParams) -> ArrayLike:
    return WeightFunction(params).k(x)


def weight_h(x: ArrayLike, params: SkewParams) -> ArrayLike:
    return WeightFunction(params).h(x)


def _like(result: np.ndarray, *templates: ArrayLike) -> ArrayLike:
    if all(np.ndim(tpl) == 0 for tpl in templates):
        return float(np.asarray(result).item())
    return result


def _check_time(t: float) -> float:
    if not (isinstance(t, (int, float, np.floating, np.integer)) and math.isfinite(t) and t > 0):
        raise DomainError(f"t must be a positive finite number, got {t!r}")
    return float(t)


def _points(x: ArrayLike, y: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(ya))):
        raise DomainError("x and y must be finite")
    return np.broadcast_arrays(xa, ya)


def envelope_bound(params: SkewParams) -> float:
    """Uniform bound (1+|b1|)(1+|b2|)/(1-|b1 b2|) on the ratio v = p / p0."""
    b1, b2 = abs(params.beta1), abs(params.beta2)
    return (1 + b1) * (1 + b2) / (1 - b1 * b2)


def delta(params: SkewParams, n: int) -> float:
    """Geometric rest bound |b1 b2|^(n+1) of the normalized series."""
    return abs(params.product) ** (n + 1)


def rest_bound(params: SkewParams, n: int) -> float:
    """Bound on |v - v_n| after the terms k = 0..n."""
    return envelope_bound(params) * delta(params, n)


def truncation_level(params: SkewParams, policy: TruncationPolicy) -> int:
    """Smallest N with rest_bound(N) <= tol, capped at policy.n_max."""
    b = abs(params.product)
    if b == 0:
        return 0
    vbar = envelope_bound(params)
    n = max(0, math.ceil(math.log(policy.tol / vbar) / math.log(b)) - 1)
    while n > 0 and vbar * b ** n <= policy.tol:
        n -= 1
    while vbar * b ** (n + 1) > policy.tol and n < policy.n_max:
        n += 1
    return min(n, policy.n_max)


def gaussian_density(t: float, x: ArrayLike, y: ArrayLike, mu: float = 0.0) -> ArrayLike:
    """Free transition density of Brownian motion with drift mu."""
    t = _check_time(t)
    xa, ya = _points(x, y)
    d = ya - xa - mu * t
    return _like(np.exp(-d * d / (2 * t)) / math.sqrt(2 * math.pi * t), x, y)


def coeffs_driftless(y: ArrayLike, params: SkewParams) -> Tuple[ArrayLike, ...]:
    """Coefficients c1..c4 of the Gaussian series; indicators are right-continuous."""
    ya = np.asarray(y, dtype=float)
    b1, b2 = params.beta1, params.beta2
    s1 = np.where(ya >= params.z1, 1.0, -1.0)
    s2 = np.where(ya >= params.z2, 1.0, -1.0)
    inside = (ya >= params.z1) & (ya < params.z2)
    c1 = np.ones_like(ya)
    c2 = s1 * b1
    c3 = s2 * b2
    c4 = np.where(inside, -1.0, 1.0) * b1 * b2
    return tuple(_like(c, y) for c in (c1, c2, c3, c4))


def path_lengths(x: ArrayLike, y: ArrayLike, params: SkewParams) -> Tuple[ArrayLike, ...]:
    """Extra path lengths a1..a4 picked up by reflections at the barriers."""
    xa, ya = _points(x, y)
    z1, z2 = params.z1, params.z2
    direct = np.abs(ya - xa)
    a1 = np.zeros_like(xa)
    a2 = np.abs(ya - z1) + np.abs(xa - z1) - direct
    a3 = np.abs(ya - z2) + np.abs(xa - z2) - direct
    a4 = (2 * np.maximum(z2 - np.maximum(np.maximum(xa, ya), z1), 0.0)
          + 2 * np.maximum(np.minimum(np.minimum(xa, ya), z2) - z1, 0.0))
    # Round-off can leave -1e-16 where the exact value is 0
    return tuple(_like(np.maximum(a, 0.0), x, y) for a in (a1, a2, a3, a4))


def coeffs_drift(y: ArrayLike, params: SkewParams) -> np.ndarray:
    """Coefficient table c[j, h] (j = 0..3 for c1..c4, h = 0..2) of the drifted series.

    The polynomial c_j(mu, y; w) = w^2 c[j,0] + w mu c[j,1] + mu^2 c[j,2].

    Returns:
        Array of shape (4, 3) + shape(y)
    """
    ya = np.asarray(y, dtype=float)
    b1, b2 = params.beta1, params.beta2
    c10, c20, c30, c40 = (np.asarray(c, dtype=float) * np.ones_like(ya)
                          for c in coeffs_driftless(ya, params))

    table = np.empty((4, 3) + ya.shape)
    table[0] = [c10, (b1 + b2) * c10, b1 * b2 * c10]
    table[1] = [c20, -b1 - c40, b1 * c30]
    table[2] = [c30, -b2 + c40, -b2 * c20]
    table[3] = [c40, np.zeros_like(ya), -c40]
    return table


def _driftless_terms(t: float, x: np.ndarray, y: np.ndarray,
                     params: SkewParams) -> Iterator[np.ndarray]:
    """Successive k-terms (-b1 b2)^k sum_j c_j exp(-(b^2 + 2 L b) / 2t) of the ratio v."""
    c = coeffs_driftless(y, params)
    a = path_lengths(x, y, params)
    dist = np.abs(x - y)
    ratio = -params.product
    k = 0
    while True:
        term = np.zeros_like(x)
        for cj, aj in zip(c, a):
            b = aj + 2 * params.z * k
            term = term + cj * np.exp(-(b * b + 2 * dist * b) / (2 * t))
        yield ratio ** k * term
        k += 1


def ratio_v_driftless(t: float, x: ArrayLike, y: ArrayLike, params: SkewParams,
                      N: int) -> ArrayLike:
    """Partial sum v_N of the density ratio, terms k = 0..N."""
    t = _check_time(t)
    if int(N) != N or N < 0:
        raise DomainError(f"N must be a non-negative integer, got {N!r}")
    xa, ya = _points(x, y)
    terms = _driftless_terms(t, xa, ya, params)
    v = np.zeros_like(xa)
    for _ in range(int(N) + 1):
        v = v + next(terms)
    return _like(v, x, y)


def driftless_ratio_terms(t: float, x: float, y: float,
                          params: SkewParams) -> Iterator[float]:
    """Scalar k-terms of the ratio v; the sampler's lazy gate consumes these one by one."""
    c = coeffs_driftless(y, params)
    a = path_lengths(x, y, params)
    dist = abs(x - y)
    ratio = -params.product
    z2 = 2 * params.z
    k = 0
    while True:
        term = 0.0
        for cj, aj in zip(c, a):
            b = aj + z2 * k
            term += cj * math.exp(-(b * b + 2 * dist * b) / (2 * t))
        yield ratio ** k * term
        k += 1


def density_driftless(t: float, x: ArrayLike, y: ArrayLike, params: SkewParams,
                      policy: Optional[TruncationPolicy] = None) -> DensityValue:
    """Two-barrier density without drift, with the rigorous geometric rest bound.

    Args:
        t: Time horizon, t > 0
        x: Start point(s)
        y: End point(s)
        params: Model parameters, mu must be 0
        policy: Truncation policy

    Returns:
        DensityValue with error_bound = p0 * vbar * |b1 b2|^(N+1)
    """
    t = _check_time(t)
    policy = policy or TruncationPolicy()
    if params.mu != 0:
        raise DomainError("density_driftless needs mu = 0; use transition_density for drift")

    xa, ya = _points(x, y)
    n = truncation_level(params, policy)
    v = np.asarray(ratio_v_driftless(t, xa, ya, params, n))
    p0 = np.asarray(gaussian_density(t, xa, ya))
    bound = p0 * rest_bound(params, n) if params.product != 0 else np.zeros_like(p0)
    logger.debug("driftless series truncated at N=%d (t=%g)", n, t)

    return DensityValue(value=_like(p0 * v, x, y), error_bound=_like(bound, x, y),
                        terms_used=n + 1, exact_formula=params.product == 0)


def density_one_barrier_drift(t: float, x: ArrayLike, y: ArrayLike, z1: float,
                              beta: float, mu: float) -> DensityValue:
    """Closed-form density with a single barrier z1 and constant drift.

    The product exp(-omega0^2/2t) * exp(u^2/2) * Phi^c(u) is evaluated fused;
    for u < 0 it is rewritten as exp(beta mu omega0 + (beta mu)^2 t / 2) Phi^c(u).
    """
    t = _check_time(t)
    if not (math.isfinite(beta) and abs(beta) <= 1):
        raise DomainError(f"beta must lie in [-1, 1], got {beta!r}")
    if not (math.isfinite(mu) and math.isfinite(z1)):
        raise DomainError("z1 and mu must be finite")

    xa, ya = _points(x, y)
    st = math.sqrt(t)
    dist = np.abs(xa - ya)
    omega0 = np.abs(xa - z1) + np.abs(ya - z1)
    side = np.where(ya >= z1, 1.0, -1.0)
    bm = beta * mu

    def phi(d):
        return np.exp(-d * d / (2 * t)) / math.sqrt(2 * math.pi * t)

    u = omega0 / st + bm * st
    upper = np.exp(-omega0 ** 2 / (2 * t)) * 0.5 * special.erfcx(np.maximum(u, 0.0) / math.sqrt(2.0))
    exponent = np.where(u < 0, bm * omega0 + 0.5 * bm * bm * t, 0.0)
    lower = np.exp(exponent) * special.ndtr(-np.minimum(u, 0.0))
    fused = np.where(u >= 0, upper, lower)

    bracket = phi(dist) + beta * side * phi(omega0) - (1 + beta * side) * bm * fused
    value = np.exp(mu * (ya - xa) - 0.5 * mu * mu * t) * bracket

    return DensityValue(value=_like(value, x, y), error_bound=_like(np.zeros_like(value), x, y),
                        terms_used=1, exact_formula=True)


def _drift_branch(params: SkewParams, gap: float, policy: TruncationPolicy) -> str:
    if params.beta1 == params.beta2:
        return 'equal'
    if abs(gap) < policy.merge_gap:
        return 'near'
    return 'distinct'


def _distinct_weights(k: int, M: float, beta_gap: float) -> np.ndarray:
    """W[h, m, n] = (-1)^m (2k-n)! / ((k-n)!(k-m)! n! m!) M^(n+1-2m-h) / (b1-b2)^(2k+1-n)."""
    weights = np.zeros((3, k + 1, k + 1))
    for m in range(k + 1):
        for n in range(k + 1):
            comb = factorial(2 * k - n) / (
                factorial(k - n) * factorial(k - m) * factorial(n) * factorial(m))
            base = (-1) ** m * comb / beta_gap ** (2 * k + 1 - n)
            for h in range(3):
                weights[h, m, n] = base * M ** (n + 1 - 2 * m - h)
    return weights


def _merged_weights(k: int, M: float, gap: float, extra: int) -> np.ndarray:
    """W[h, m, i] = (-1)^(k+1) C(k,m) (-1)^m M^(2(k-m)+2-h) gap^i (k+i)! / (i! k! (2k+i+1)!)."""
    weights = np.zeros((3, k + 1, extra + 1))
    for i in range(extra + 1):
        corr = gap ** i * factorial(k + i) / (
            factorial(i) * factorial(k) * factorial(2 * k + i + 1))
        for m in range(k + 1):
            base = (-1) ** (k + 1 + m) * binom(k, m) * corr
            for h in range(3):
                weights[h, m, i] = base * M ** (2 * (k - m) + 2 - h)
    return weights


def _drift_term(k: int, omega: np.ndarray, coef: np.ndarray, M: float,
                a1: float, a2: float, branch: str, beta_gap: float,
                cache: MomentTableCache) -> np.ndarray:
    """k-th term for one path length, scaled by exp(omega^2/2).

    coef is the (3, ...) column c[j, :] for this path length.
    """
    # c[j, 2-h] pairs with the M^(..-h) weights
    cj = coef[::-1]

    def table(a, n_max):
        key = cache.make_key(omega, a, k, n_max, True)
        return cache.get_or_compute(key, lambda: g_script_table(k, n_max, omega, a, scaled=True))

    if branch == 'distinct':
        weights = _distinct_weights(k, M, beta_gap)
        g1, g2 = table(a1, k), table(a2, k)
        parity = np.array([(-1) ** n for n in range(k + 1)], dtype=float)
        diff = g2 - parity.reshape((1, 1, k + 1) + (1,) * omega.ndim) * g1
        out = np.zeros_like(omega)
        for h in range(3):
            out = out + cj[h] * np.tensordot(weights[h], diff[h], axes=([0, 1], [0, 1]))
        return out

    extra = 0 if branch == 'equal' else NEAR_EQUAL_TERMS
    weights = _merged_weights(k, M, a1 - a2, extra)
    g = table(a2, 2 * k + 1 + extra)[:, :, 2 * k + 1:]
    out = np.zeros_like(omega)
    for h in range(3):
        out = out + cj[h] * np.tensordot(weights[h], g[h], axes=([0, 1], [0, 1]))
    return out


def _check_drift_regime(params: SkewParams) -> None:
    if not (params.beta1 * params.mu > 0 and params.beta2 * params.mu > 0):
        raise UnsupportedRegimeError(
            "Drifted two-barrier series needs beta1*mu > 0 and beta2*mu > 0; "
            "other sign regimes are not covered by the series representation")


def _drift_ratio_terms(t: float, xa: np.ndarray, ya: np.ndarray, params: SkewParams,
                       policy: TruncationPolicy,
                       cache: MomentTableCache) -> Iterator[np.ndarray]:
    """Successive k-terms of the ratio v = p / p0_mu of the drifted series."""
    st = math.sqrt(t)
    M = params.mu * st
    a1, a2 = params.beta1 * M, params.beta2 * M
    branch = _drift_branch(params, a1 - a2, policy)
    logger.debug("drifted series: branch=%s, A1=%g, A2=%g", branch, a1, a2)

    dist = np.abs(xa - ya)
    lengths = path_lengths(xa, ya, params)
    coef = coeffs_drift(ya, params)
    ratio = -params.product

    k = 0
    while True:
        term = np.zeros_like(xa)
        for j in range(4):
            omega = (np.asarray(lengths[j]) + 2 * params.z * k + dist) / st
            damping = np.exp(0.5 * (dist * dist / t - omega * omega))
            term = term + damping * _drift_term(k, omega, coef[j], M, a1, a2, branch,
                                                params.beta1 - params.beta2, cache)
        yield ratio ** k * term
        k += 1


def drift_series_term(k: int, t: float, x: ArrayLike, y: ArrayLike, params: SkewParams,
                      policy: Optional[TruncationPolicy] = None) -> ArrayLike:
    """The k-th term of the drifted series, in density units."""
    t = _check_time(t)
    _check_drift_regime(params)
    if int(k) != k or k < 0:
        raise DomainError(f"k must be a non-negative integer, got {k!r}")
    xa, ya = _points(x, y)
    terms = _drift_ratio_terms(t, xa, ya, params, policy or TruncationPolicy(),
                               MomentTableCache())
    for _ in range(int(k)):
        next(terms)
    p0 = np.asarray(gaussian_density(t, xa, ya, params.mu))
    return _like(p0 * next(terms), x, y)


def density_two_barrier_drift(t: float, x: ArrayLike, y: ArrayLike, params: SkewParams,
                              policy: Optional[TruncationPolicy] = None,
                              cache: Optional[MomentTableCache] = None) -> DensityValue:
    """Two-barrier density with drift, for beta1*mu > 0 and beta2*mu > 0.

    The k-series stops at policy.n_max or after three successive k-terms
    below tol; error_bound is then an empirical tail estimate.

    Args:
        t: Time horizon, t > 0
        x: Start point(s)
        y: End point(s)
        params: Model parameters
        policy: Truncation policy
        cache: Optional table cache, private to this evaluation

    Returns:
        DensityValue flagged exact_formula=False, rigorous_bound=False
    """
    t = _check_time(t)
    policy = policy or TruncationPolicy()
    _check_drift_regime(params)

    xa, ya = _points(x, y)
    cache = cache or MomentTableCache()
    terms = _drift_ratio_terms(t, xa, ya, params, policy, cache)

    v = np.zeros_like(xa)
    history = []
    quiet = 0
    k = 0
    for k in range(policy.n_max + 1):
        term = next(terms)
        v = v + term
        history.append(np.abs(term))
        quiet = quiet + 1 if np.max(np.abs(term)) < policy.tol else 0
        if quiet >= DRIFT_STOP_RUN:
            break

    logger.debug("drifted series used %d k-terms, cache %s", k + 1, cache.get_stats())
    p0 = np.asarray(gaussian_density(t, xa, ya, params.mu))
    tail = np.sum(history[-DRIFT_STOP_RUN:], axis=0)

    return DensityValue(value=_like(p0 * v, x, y), error_bound=_like(p0 * tail, x, y),
                        terms_used=k + 1, exact_formula=False, rigorous_bound=False)


def transition_density(t: float, x: ArrayLike, y: ArrayLike, params: SkewParams,
                       policy: Optional[TruncationPolicy] = None) -> DensityValue:
    """Pick the evaluator that matches the parameters.

    mu = 0 uses the driftless series; a single non-zero skewness with drift
    uses the one-barrier closed form at that barrier; anything else the
    drifted two-barrier series.
    """
    if params.mu == 0:
        return density_driftless(t, x, y, params, policy)
    if params.beta2 == 0:
        return density_one_barrier_drift(t, x, y, params.z1, params.beta1, params.mu)
    if params.beta1 == 0:
        return density_one_barrier_drift(t, x, y, params.z2, params.beta2, params.mu)
    return density_two_barrier_drift(t, x, y, params, policy)


def make_series_evaluator(params: SkewParams,
                          policy: Optional[TruncationPolicy] = None
                          ) -> Callable[[float, ArrayLike, ArrayLike], np.ndarray]:
    """Wrap transition_density as an (t, x, y) -> values callable for the checkers."""
    def evaluate(t: float, x: ArrayLike, y: ArrayLike) -> np.ndarray:
        return np.asarray(transition_density(t, x, y, params, policy).value)
    return evaluate
