"""Analytic and statistical checks shared by every density evaluator"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from ..kernels.density import (SkewParams, TruncationPolicy, WeightFunction,
                               density_one_barrier_drift, drift_series_term,
                               gaussian_density, transition_density)
from .quadrature import (QuadratureSpec, density_cdf, ks_statistic, oracle_density,
                         series_term_oracle)
from .walk import WalkChiSquare

logger = logging.getLogger(__name__)

Evaluator = Callable[[float, np.ndarray, np.ndarray], np.ndarray]

# Offset used to read one-sided limits at a barrier
BARRIER_EPS = 1e-9

# Step of the one-sided difference quotients
FLUX_STEP = 1e-5

# Asymptotic 1% critical value of sqrt(n) * KS
KS_CRITICAL_1PCT = 1.628


@dataclass
class CheckReport:
    """Outcome of one check: the largest violation seen against its tolerance."""

    name: str
    passed: bool
    max_violation: float
    tolerance: float
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'passed': bool(self.passed),
            'max_violation': float(self.max_violation),
            'tolerance': float(self.tolerance),
            'details': self.details,
        }


def _report(name: str, violation: float, tolerance: float, **details) -> CheckReport:
    report = CheckReport(name=name, passed=bool(violation <= tolerance),
                         max_violation=float(violation), tolerance=float(tolerance),
                         details=details)
    log = logger.info if report.passed else logger.warning
    log("%s: %s (violation %.3e, tolerance %.1e)", name,
        "pass" if report.passed else "FAIL", violation, tolerance)
    return report


def _relative_gap(a: np.ndarray, b: np.ndarray, floor: float) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def _scalar(evaluator: Evaluator, t: float, x: float, y: float) -> float:
    return float(np.asarray(evaluator(t, np.array([x]), np.array([y])))[0])


def check_transmission(t: float, x: float, params: SkewParams, evaluator: Evaluator,
                       tolerance: float = 1e-6, flux_tolerance: float = 1e-5) -> CheckReport:
    """Jump and flux conditions at both barriers.

    (1 + b_j) p(z_j-) = (1 - b_j) p(z_j+) and
    p'(z_j+)/2 - mu p(z_j+) = p'(z_j-)/2 - mu p(z_j-), with one-sided
    second-order difference quotients. Jump residuals are relative, floored
    at 1e-8 p(t, x, x); flux residuals are measured against the larger of
    the flux terms and p(z_j+/-) / sqrt(t).
    """
    floor = 1e-8 * abs(_scalar(evaluator, t, x, x))
    h, eps, mu = FLUX_STEP, BARRIER_EPS, params.mu
    jumps, fluxes, ratios = {}, {}, {}

    for label, z, beta in (('z1', params.z1, params.beta1), ('z2', params.z2, params.beta2)):
        right = np.array([z + eps, z + eps + h, z + eps + 2 * h])
        left = np.array([z - eps, z - eps - h, z - eps - 2 * h])
        pr = np.asarray(evaluator(t, np.full(3, x), right))
        pl = np.asarray(evaluator(t, np.full(3, x), left))

        lhs, rhs = (1 + beta) * pl[0], (1 - beta) * pr[0]
        jumps[label] = float(_relative_gap(lhs, rhs, floor))
        ratios[label] = float(pr[0] / pl[0]) if pl[0] != 0 else math.inf

        dr = (-3 * pr[0] + 4 * pr[1] - pr[2]) / (2 * h)
        dl = (3 * pl[0] - 4 * pl[1] + pl[2]) / (2 * h)
        flux_r, flux_l = 0.5 * dr - mu * pr[0], 0.5 * dl - mu * pl[0]
        scale = max(abs(0.5 * dr), abs(0.5 * dl), abs(mu * pr[0]), abs(mu * pl[0]),
                    (abs(pr[0]) + abs(pl[0])) / math.sqrt(t), floor)
        fluxes[label] = float(abs(flux_r - flux_l) / scale)

    jump = max(jumps.values())
    flux = max(fluxes.values())
    report = _report('transmission', jump, tolerance, jump_residual=jumps,
                     flux_residual=fluxes, flux_tolerance=flux_tolerance,
                     density_ratio=ratios)
    if flux > flux_tolerance:
        report.passed = False
        logger.warning("transmission: flux residual %.3e above %.1e", flux, flux_tolerance)
    return report


def _u_nodes(t_left: float, t_right: float, x: float, ys: np.ndarray, params: SkewParams,
             order: int = 20) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes in u covering both kernels, split at the barriers."""
    spread = 12 * math.sqrt(max(t_left, t_right)) + abs(params.mu) * (t_left + t_right)
    lower = min(x, float(ys.min())) - spread
    upper = max(x, float(ys.max())) + spread
    piece = 0.25 * math.sqrt(min(t_left, t_right))
    breaks = np.unique([lower, upper] + [z for z in (params.z1, params.z2) if lower < z < upper])

    ref, wts = leggauss(order)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        count = max(1, math.ceil((b - a) / piece))
        edges = np.linspace(a, b, count + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        nodes.append((mid[:, None] + half[:, None] * ref).ravel())
        weights.append((half[:, None] * wts).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def check_chapman(t: float, s: float, x: float, y: Sequence[float], params: SkewParams,
                  evaluator: Evaluator, tolerance: float = 1e-5) -> CheckReport:
    """p(t + s, x, y) against the integral of p(t, x, u) p(s, u, y) du.

    The residual is relative, floored at 1e-8 times the largest p(t + s, x, y).
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    u, weights = _u_nodes(t, s, x, ys, params)
    first = np.asarray(evaluator(t, np.full_like(u, x), u))
    second = np.asarray(evaluator(s, u[:, None], ys[None, :]))
    composed = (weights * first) @ second
    direct = np.asarray(evaluator(t + s, np.full_like(ys, x), ys))
    gap = _relative_gap(composed, direct, max(1e-8 * float(np.max(np.abs(direct))), 1e-300))
    return _report('chapman', float(gap.max()), tolerance,
                   t=t, s=s, x=x, points=int(ys.size))


def check_detailed_balance(t: float, params: SkewParams, evaluator: Evaluator,
                           pairs: Iterable[Tuple[float, float]],
                           tolerance: float = 1e-8) -> CheckReport:
    """Symmetry h(x) p(t, x, y) = h(y) p(t, y, x) of the speed-weighted kernel.

    The residual is relative, floored at 1e-6 times the largest weighted value.
    """
    pts = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    xs, ys = pts[:, 0], pts[:, 1]
    weight = WeightFunction(params)
    forward = np.asarray(weight.h(xs)) * np.asarray(evaluator(t, xs, ys))
    backward = np.asarray(weight.h(ys)) * np.asarray(evaluator(t, ys, xs))
    scale = max(float(np.max(np.abs(forward))), float(np.max(np.abs(backward))))
    gap = _relative_gap(forward, backward, max(1e-6 * scale, 1e-300))
    return _report('detailed_balance', float(gap.max()), tolerance, pairs=int(xs.size))


def check_normalization(t: float, x: float, params: SkewParams, evaluator: Evaluator,
                        tolerance: float = 1e-6) -> CheckReport:
    """Total mass of p(t, x, .) over x +/- 10 sqrt(t) + |mu| t."""
    upper = x + 10 * math.sqrt(t) + abs(params.mu) * t
    mass = float(density_cdf(t, x, params, [upper], evaluator)[0])
    return _report('normalization', abs(mass - 1.0), tolerance, mass=mass, t=t, x=x)


def check_oracle_equivalence(t: float, xs: Sequence[float], ys: Sequence[float],
                             params: SkewParams, policy: Optional[TruncationPolicy] = None,
                             spec: Optional[QuadratureSpec] = None,
                             tolerance: Optional[float] = None) -> CheckReport:
    """Series density against the quadrature oracle at the given points.

    Without drift the residual must stay within error_bound + spec.tolerance;
    with drift the absolute residual must stay within 1e-6.
    """
    spec = spec or QuadratureSpec()
    xa = np.asarray(xs, dtype=float)
    ya = np.asarray(ys, dtype=float)
    series = transition_density(t, xa, ya, params, policy)
    oracle = np.asarray(oracle_density(t, xa, ya, params, spec))
    diff = np.abs(np.asarray(series.value) - oracle)

    if series.rigorous_bound:
        tolerance = spec.tolerance if tolerance is None else tolerance
        excess = np.maximum(diff - np.asarray(series.error_bound), 0.0)
    else:
        tolerance = 1e-6 if tolerance is None else tolerance
        excess = diff
    return _report('oracle_equivalence', float(excess.max()), tolerance,
                   max_abs_diff=float(diff.max()), points=int(diff.size),
                   terms_used=series.terms_used, params=params.to_dict())


def check_series_terms(t: float, x: Sequence[float], y: Sequence[float], params: SkewParams,
                       ks: Sequence[int] = (0, 1, 2), policy: Optional[TruncationPolicy] = None,
                       spec: Optional[QuadratureSpec] = None,
                       tolerance: float = 1e-8) -> CheckReport:
    """Closed-form k-terms of the drifted series against quadrature of their w-integrals."""
    residuals = {}
    for k in ks:
        closed = np.asarray(drift_series_term(k, t, x, y, params, policy))
        numeric = np.asarray(series_term_oracle(k, t, x, y, params, spec))
        residuals[str(k)] = float(np.max(np.abs(closed - numeric)))
    return _report('series_terms', max(residuals.values()), tolerance, residuals=residuals)


def check_ks(samples: Sequence[float], cdf: Callable[[np.ndarray], np.ndarray],
             critical: float = KS_CRITICAL_1PCT) -> CheckReport:
    """KS distance against critical / sqrt(n)."""
    n = len(samples)
    statistic = ks_statistic(samples, cdf)
    return _report('ks', statistic, critical / math.sqrt(n), n=n)


def check_walk(result: WalkChiSquare, alpha: float = 0.01) -> CheckReport:
    """Passes when the walk chi-square p-value exceeds alpha."""
    report = _report('walk', 1.0 - result.pvalue, 1.0 - alpha, **result.to_dict())
    report.passed = bool(result.pvalue > alpha)
    return report


def check_one_barrier_crosswalk(t: float, x: float, ys: Sequence[float], beta: float,
                                z1: float = 0.0, z2: float = 1.0,
                                tolerance: float = 1e-12) -> CheckReport:
    """With beta2 = 0 and no drift, the two-barrier series equals the one-barrier form."""
    params = SkewParams(z1=z1, z2=z2, beta1=beta, beta2=0.0)
    ya = np.asarray(ys, dtype=float)
    series = np.asarray(transition_density(t, x, ya, params).value)
    closed = np.asarray(density_one_barrier_drift(t, x, ya, z1, beta, 0.0).value)
    gap = _relative_gap(series, closed, 1e-300)
    return _report('one_barrier_crosswalk', float(gap.max()), tolerance, beta=beta)


def check_reflection(t: float, x: float, ys: Sequence[float], z1: float = 0.0,
                     tolerance: float = 1e-12) -> CheckReport:
    """beta1 = 1 reflects: p(t,x,y) = p0(t,x,y) + p0(t,x,2 z1 - y) for x, y above z1."""
    params = SkewParams(z1=z1, z2=z1 + 1.0, beta1=1.0, beta2=0.0)
    ya = np.asarray(ys, dtype=float)
    value = np.asarray(transition_density(t, x, ya, params).value)
    image = np.asarray(gaussian_density(t, x, ya)) + np.asarray(gaussian_density(t, x, 2 * z1 - ya))
    gap = _relative_gap(value, image, 1e-300)
    return _report('reflection', float(gap.max()), tolerance)


def check_far_barrier(t: float, x: float, ys: Sequence[float], beta1: float, beta2: float,
                      distances: Sequence[float] = (5.0, 10.0, 20.0),
                      tolerance: float = 1e-12) -> CheckReport:
    """Pushing z2 away, the driftless density approaches the one-barrier form monotonically.

    max_violation is the largest increase of the sup-distance between
    successive distances.
    """
    ya = np.asarray(ys, dtype=float)
    target = np.asarray(density_one_barrier_drift(t, x, ya, 0.0, beta1, 0.0).value)
    errors = []
    for dist in distances:
        params = SkewParams(z1=0.0, z2=dist, beta1=beta1, beta2=beta2)
        value = np.asarray(transition_density(t, x, ya, params).value)
        errors.append(float(np.max(np.abs(value - target))))
    rise = max(max(b - a, 0.0) for a, b in zip(errors, errors[1:]))
    report = _report('far_barrier', rise, tolerance, errors=errors,
                     distances=list(distances))
    if not errors[-1] < errors[0]:
        report.passed = False
    return report
