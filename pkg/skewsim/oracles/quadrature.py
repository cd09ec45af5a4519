"""Fourier-inversion quadrature oracles for the transition densities"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import stats

from ..kernels.density import (ArrayLike, SkewParams, _check_time, _like, _points,
                               coeffs_driftless, coeffs_drift, envelope_bound,
                               path_lengths)
from ..sampling.streams import RandomStream
from ..utils.errors import DomainError, QuadratureError, UnsupportedRegimeError

logger = logging.getLogger(__name__)

# Points handled per vectorized quadrature pass
CHUNK_SIZE = 256

KS_MIN_SAMPLES = 100


@dataclass(frozen=True)
class QuadratureSpec:
    """Settings of the w-integral.

    w_cutoff: integration half-width, None picks default_cutoff
    nodes: Gauss-Legendre nodes per panel (or midpoint nodes per panel)
    tolerance: target absolute error, checked by doubling the panel count
    max_doublings: doublings tried before giving up
    rule: 'gauss' for Gauss-Legendre panels, 'midpoint' for the midpoint rule
    """

    w_cutoff: Optional[float] = None
    nodes: int = 32
    tolerance: float = 1e-11
    max_doublings: int = 8
    rule: str = 'gauss'

    def __post_init__(self):
        if self.w_cutoff is not None and not self.w_cutoff > 0:
            raise DomainError(f"w_cutoff must be positive, got {self.w_cutoff!r}")
        if int(self.nodes) != self.nodes or self.nodes < 1:
            raise DomainError(f"nodes must be a positive integer, got {self.nodes!r}")
        if not self.tolerance > 0:
            raise DomainError(f"tolerance must be positive, got {self.tolerance!r}")
        if int(self.max_doublings) != self.max_doublings or self.max_doublings < 0:
            raise DomainError("max_doublings must be a non-negative integer")
        if self.rule not in ('gauss', 'midpoint'):
            raise DomainError(f"rule must be 'gauss' or 'midpoint', got {self.rule!r}")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def default_cutoff(t: float, params: SkewParams, tolerance: float) -> float:
    """Smallest W with exp(-W^2 t/2) vbar / (1 - |b1 b2|) below tolerance * 1e-3."""
    t = _check_time(t)
    scale = envelope_bound(params) / (1 - abs(params.product))
    scale *= (1 + abs(params.mu)) ** 2
    return math.sqrt(2.0 / t * math.log(scale / (tolerance * 1e-3)))


def _nodes(upper: float, panels: int, spec: QuadratureSpec):
    """Nodes and weights on (0, upper]; no node sits at w = 0."""
    if spec.rule == 'midpoint':
        count = panels * spec.nodes
        step = upper / count
        return (np.arange(count) + 0.5) * step, np.full(count, step)

    ref, wts = leggauss(spec.nodes)
    edges = np.linspace(0.0, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    points = (mid[:, None] + half[:, None] * ref[None, :]).ravel()
    weights = (half[:, None] * wts[None, :]).ravel()
    return points, weights


def _integrate(integrand: Callable[[np.ndarray], np.ndarray], upper: float,
               panels: int, spec: QuadratureSpec, label: str) -> np.ndarray:
    """Integrate over (0, upper] with panel doubling until two passes agree.

    integrand maps nodes of shape (K,) to values of shape (K, P).
    """
    def apply(count):
        w, weights = _nodes(upper, count, spec)
        return weights @ integrand(w)

    previous = apply(panels)
    achieved = math.inf
    for doubling in range(1, spec.max_doublings + 1):
        panels *= 2
        current = apply(panels)
        achieved = float(np.max(np.abs(current - previous)))
        if achieved <= spec.tolerance:
            logger.debug("%s converged after %d doublings (%d panels, diff %.2e)",
                         label, doubling, panels, achieved)
            return current
        previous = current

    raise QuadratureError(
        f"{label}: node doubling did not reach tolerance {spec.tolerance:g} "
        f"(last difference {achieved:.3e})", achieved=achieved)


def _panel_count(upper: float, frequency: float) -> int:
    """One panel per oscillation period of the integrand."""
    return max(2, math.ceil(upper * frequency / (2 * math.pi)) + 1)


def _chunked(evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray],
             xa: np.ndarray, ya: np.ndarray) -> np.ndarray:
    flat_x, flat_y = xa.ravel(), ya.ravel()
    out = np.empty(flat_x.shape)
    for start in range(0, flat_x.size, CHUNK_SIZE):
        piece = slice(start, start + CHUNK_SIZE)
        out[piece] = evaluate(flat_x[piece], flat_y[piece])
    return out.reshape(xa.shape)


def fourier_density_driftless(t: float, x: ArrayLike, y: ArrayLike, params: SkewParams,
                              spec: Optional[QuadratureSpec] = None) -> ArrayLike:
    """Driftless density as a w-integral of its Fourier transform.

    Integrates the real cosine form
    (1/pi) e^{-w^2 t/2} sum_j c_j [cos(w b_j) + b1b2 cos(w(b_j - 2z))]
    / (1 + 2 b1b2 cos(2wz) + (b1b2)^2) with b_j = a_j + |x - y|.
    """
    t = _check_time(t)
    spec = spec or QuadratureSpec()
    if params.mu != 0:
        raise DomainError("fourier_density_driftless needs mu = 0")
    xa, ya = _points(x, y)
    upper = spec.w_cutoff or default_cutoff(t, params, spec.tolerance)
    prod, z = params.product, params.z

    def evaluate(xs, ys):
        coef = [np.broadcast_to(c, ys.shape) for c in coeffs_driftless(ys, params)]
        dist = np.abs(xs - ys)
        shifts = [np.asarray(a) + dist for a in path_lengths(xs, ys, params)]
        frequency = float(max(np.max(b) for b in shifts)) + 2 * z

        def integrand(w):
            w = w[:, None]
            denom = 1 + 2 * prod * np.cos(2 * w * z) + prod * prod
            total = np.zeros((w.shape[0], ys.size))
            for cj, bj in zip(coef, shifts):
                total += cj * (np.cos(w * bj) + prod * np.cos(w * (bj - 2 * z)))
            return np.exp(-0.5 * t * w * w) * total / denom

        return _integrate(integrand, upper, _panel_count(upper, frequency), spec,
                          'driftless oracle') / math.pi

    return _like(_chunked(evaluate, xa, ya), x, y)


def _check_drift_oracle(params: SkewParams) -> None:
    if not (params.beta1 * params.mu > 0 and params.beta2 * params.mu > 0):
        raise UnsupportedRegimeError(
            "Drifted quadrature oracle needs beta1*mu > 0 and beta2*mu > 0")


def _drift_numerators(w: np.ndarray, coef: np.ndarray, shifts: Sequence[np.ndarray],
                      mu: float) -> Sequence[np.ndarray]:
    """c_j(iw) e^{-iw b_j} for each path, shape (K, P)."""
    out = []
    for j, bj in enumerate(shifts):
        cw = -w * w * coef[j, 0] + 1j * w * mu * coef[j, 1] + mu * mu * coef[j, 2]
        out.append(cw * np.exp(-1j * w * bj))
    return out


def drift_integrand_limit(t: float, x: float, y: float, params: SkewParams) -> float:
    """Value at w = 0 of the drifted integrand, where numerator and denominator vanish.

    Both are O(w) at 0, so the limit is N'(0) / D'(0) with
    D'(0) = -i mu (b1 + b2) - 2i z b1 b2 mu^2 and
    N'(0) = sum_j [i mu c_j1 - i mu^2 c_j2 (a_j + |x - y|)].
    """
    _check_drift_oracle(params)
    mu, b1, b2 = params.mu, params.beta1, params.beta2
    coef = coeffs_drift(float(y), params)
    dist = abs(x - y)
    shifts = [float(a) + dist for a in path_lengths(x, y, params)]
    numer = sum(1j * mu * coef[j, 1] - 1j * mu * mu * coef[j, 2] * shifts[j]
                for j in range(4))
    denom = -1j * mu * (b1 + b2) - 2j * params.z * b1 * b2 * mu * mu
    return float(np.real(numer / denom))


def drift_integrand(w: ArrayLike, t: float, x: float, y: float,
                    params: SkewParams) -> ArrayLike:
    """Real part of the drifted w-integrand at nodes w > 0 (prefactor excluded)."""
    _check_drift_oracle(params)
    wa = np.atleast_1d(np.asarray(w, dtype=float))[:, None]
    mu, b1, b2 = params.mu, params.beta1, params.beta2
    ys = np.atleast_1d(float(y))
    coef = coeffs_drift(ys, params)
    dist = abs(x - y)
    shifts = [np.atleast_1d(a) + dist for a in path_lengths(x, ys, params)]
    numer = sum(_drift_numerators(wa, coef, shifts, mu))
    denom = (params.product * np.exp(-2j * wa * params.z) * (wa * wa + mu * mu)
             + (wa - 1j * b1 * mu) * (wa - 1j * b2 * mu))
    out = np.real(np.exp(-0.5 * t * wa * wa) * numer / denom)[:, 0]
    return _like(out, w)


def fourier_density_drift(t: float, x: ArrayLike, y: ArrayLike, params: SkewParams,
                          spec: Optional[QuadratureSpec] = None) -> ArrayLike:
    """Drifted two-barrier density as a w-integral.

    p = -e^{mu(y-x) - mu^2 t/2} (1/pi) int_0^W Re[e^{-w^2 t/2} e^{-iwL}
    sum_j c_j(iw) e^{-iw a_j} / D(w)] dw with
    D(w) = b1b2 e^{-2iwz}(w^2 + mu^2) + (w - i b1 mu)(w - i b2 mu).
    The removable singularity at w = 0 is never sampled.
    """
    t = _check_time(t)
    spec = spec or QuadratureSpec()
    _check_drift_oracle(params)
    xa, ya = _points(x, y)
    upper = spec.w_cutoff or default_cutoff(t, params, spec.tolerance)
    mu, b1, b2, z = params.mu, params.beta1, params.beta2, params.z

    def evaluate(xs, ys):
        coef = coeffs_drift(ys, params)
        dist = np.abs(xs - ys)
        shifts = [np.asarray(a) + dist for a in path_lengths(xs, ys, params)]
        frequency = float(max(np.max(b) for b in shifts)) + 2 * z

        def integrand(w):
            w = w[:, None]
            numer = sum(_drift_numerators(w, coef, shifts, mu))
            denom = (params.product * np.exp(-2j * w * z) * (w * w + mu * mu)
                     + (w - 1j * b1 * mu) * (w - 1j * b2 * mu))
            return np.real(np.exp(-0.5 * t * w * w) * numer / denom)

        prefactor = np.exp(mu * (ys - xs) - 0.5 * mu * mu * t)
        integral = _integrate(integrand, upper, _panel_count(upper, frequency), spec,
                              'drifted oracle')
        return -prefactor * integral / math.pi

    return _like(_chunked(evaluate, xa, ya), x, y)


def series_term_oracle(k: int, t: float, x: ArrayLike, y: ArrayLike, params: SkewParams,
                       spec: Optional[QuadratureSpec] = None) -> ArrayLike:
    """The k-th term of the drifted series, by quadrature of its own w-integral.

    Expanding 1/D(w) in powers of b1b2 e^{-2iwz}(w^2 + mu^2) / P(w) with
    P(w) = (w - i b1 mu)(w - i b2 mu) gives the k-th term
    -e^{mu(y-x) - mu^2 t/2} (1/pi) int_0^W Re[e^{-w^2 t/2} e^{-iwL}
    sum_j c_j(iw) e^{-iw(a_j + 2zk)} (-b1b2)^k (w^2 + mu^2)^k / P(w)^(k+1)] dw.
    """
    t = _check_time(t)
    spec = spec or QuadratureSpec()
    _check_drift_oracle(params)
    if int(k) != k or k < 0:
        raise DomainError(f"k must be a non-negative integer, got {k!r}")
    k = int(k)
    xa, ya = _points(x, y)
    upper = spec.w_cutoff or default_cutoff(t, params, spec.tolerance)
    mu, b1, b2, z = params.mu, params.beta1, params.beta2, params.z
    ratio = -params.product

    def evaluate(xs, ys):
        coef = coeffs_drift(ys, params)
        dist = np.abs(xs - ys)
        shifts = [np.asarray(a) + dist + 2 * z * k for a in path_lengths(xs, ys, params)]
        frequency = float(max(np.max(b) for b in shifts))

        def integrand(w):
            w = w[:, None]
            numer = sum(_drift_numerators(w, coef, shifts, mu))
            poles = (w - 1j * b1 * mu) * (w - 1j * b2 * mu)
            factor = ratio ** k * (w * w + mu * mu) ** k / poles ** (k + 1)
            return np.real(np.exp(-0.5 * t * w * w) * numer * factor)

        prefactor = np.exp(mu * (ys - xs) - 0.5 * mu * mu * t)
        integral = _integrate(integrand, upper, _panel_count(upper, frequency), spec,
                              f'series term {k} oracle')
        return -prefactor * integral / math.pi

    return _like(_chunked(evaluate, xa, ya), x, y)


def oracle_density(t: float, x: ArrayLike, y: ArrayLike, params: SkewParams,
                   spec: Optional[QuadratureSpec] = None) -> ArrayLike:
    """Quadrature density for any supported parameter set."""
    if params.mu == 0:
        return fourier_density_driftless(t, x, y, params, spec)
    return fourier_density_drift(t, x, y, params, spec)


def _y_nodes(t: float, x: float, params: SkewParams, grid: np.ndarray, order: int):
    """Gauss-Legendre nodes on pieces of length <= sqrt(t)/4, split at z1, z2 and the grid."""
    st = math.sqrt(t)
    lower = min(x - 12 * st - abs(params.mu) * t, float(grid[0]))
    breaks = np.unique(np.concatenate([[lower], grid, [params.z1, params.z2]]))
    breaks = breaks[(breaks >= lower) & (breaks <= grid[-1])]
    if breaks.size < 2:
        empty = np.empty(0)
        return breaks, empty, empty, np.empty(0, dtype=int)

    ref, wts = leggauss(order)
    nodes, weights, owner = [], [], []
    for i, (a, b) in enumerate(zip(breaks[:-1], breaks[1:])):
        pieces = max(1, math.ceil((b - a) / (0.25 * st)))
        edges = np.linspace(a, b, pieces + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes.append((mid[:, None] + half[:, None] * ref).ravel())
        weights.append((half[:, None] * wts).ravel())
        owner.append(np.full(pieces * order, i))
    return breaks, np.concatenate(nodes), np.concatenate(weights), np.concatenate(owner)


def density_cdf(t: float, x: float, params: SkewParams, y_grid: Sequence[float],
                evaluator: Callable[[float, np.ndarray, np.ndarray], np.ndarray],
                order: int = 20) -> np.ndarray:
    """Integrate a density evaluator into P(X_t <= y | X_0 = x) on an ascending grid.

    The density is integrated from x - 12 sqrt(t) - |mu| t with Gauss-Legendre
    pieces split at z1 and z2, so the barrier jumps never fall inside a piece.
    """
    t = _check_time(t)
    grid = np.asarray(y_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or not np.all(np.isfinite(grid)):
        raise DomainError("y_grid must be a non-empty 1-D array of finite values")
    if np.any(np.diff(grid) < 0):
        raise DomainError("y_grid must be ascending")

    breaks, nodes, weights, owner = _y_nodes(t, x, params, grid, order)
    if nodes.size == 0:
        return np.zeros_like(grid)
    values = np.asarray(evaluator(t, np.full_like(nodes, x), nodes))
    pieces = np.bincount(owner, weights=weights * values, minlength=breaks.size - 1)
    cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
    return np.maximum.accumulate(np.interp(grid, breaks, cumulative))


def cdf_oracle(t: float, x: float, params: SkewParams, y_grid: Sequence[float],
               spec: Optional[QuadratureSpec] = None, order: int = 20) -> np.ndarray:
    """P(X_t <= y | X_0 = x) at every y of an ascending grid, from the quadrature density."""
    def evaluator(s, xs, ys):
        return oracle_density(s, xs, ys, params, spec)
    return density_cdf(t, x, params, y_grid, evaluator, order)


@dataclass
class TabulatedCdf:
    """A CDF tabulated on a grid, evaluated and inverted by linear interpolation."""

    grid: np.ndarray
    values: np.ndarray

    def __call__(self, y: ArrayLike) -> ArrayLike:
        return np.interp(y, self.grid, self.values, left=0.0, right=1.0)

    def inverse(self, u: ArrayLike) -> ArrayLike:
        return np.interp(u, self.values, self.grid)


def make_cdf(t: float, x: float, params: SkewParams, points: int = 4001,
             width: float = 10.0, spec: Optional[QuadratureSpec] = None) -> TabulatedCdf:
    """Tabulate the oracle CDF on x +/- width sqrt(t), with z1 and z2 on the grid."""
    st = math.sqrt(t)
    lower = x - width * st - abs(params.mu) * t
    upper = x + width * st + abs(params.mu) * t
    grid = np.linspace(lower, upper, points)
    barriers = [z for z in (params.z1, params.z2) if lower < z < upper]
    grid = np.unique(np.concatenate([grid, barriers]))
    return TabulatedCdf(grid=grid, values=cdf_oracle(t, x, params, grid, spec))


def inverse_cdf_sample(n: int, cdf: TabulatedCdf, rng: RandomStream) -> np.ndarray:
    """n draws by inverse transform on a tabulated CDF."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return cdf.inverse(rng.generator.random(int(n)))


def ks_statistic(samples: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance between the samples and a CDF."""
    data = np.asarray(samples, dtype=float)
    if data.size < KS_MIN_SAMPLES:
        raise DomainError(f"ks_statistic needs at least {KS_MIN_SAMPLES} samples, got {data.size}")
    return float(stats.kstest(data, cdf).statistic)
