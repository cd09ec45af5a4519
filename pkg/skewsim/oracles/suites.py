"""Named validation suites run by the CLI"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..kernels.density import SkewParams, TruncationPolicy, make_series_evaluator
from ..sampling.sampler import sample_many
from ..sampling.streams import RandomStream
from ..utils.errors import DomainError
from .checks import (CheckReport, check_chapman, check_detailed_balance, check_far_barrier,
                     check_ks, check_normalization, check_one_barrier_crosswalk,
                     check_oracle_equivalence, check_reflection, check_series_terms,
                     check_transmission, check_walk)
from .quadrature import QuadratureSpec, make_cdf
from .walk import walk_chi_square

logger = logging.getLogger(__name__)


@dataclass
class SuiteContext:
    """Everything a suite needs: the model, the evaluation point and the budgets."""

    params: SkewParams
    policy: TruncationPolicy = field(default_factory=TruncationPolicy)
    spec: QuadratureSpec = field(default_factory=QuadratureSpec)
    t: float = 1.0
    x: float = 0.5
    n: int = 50000
    seed: int = 0
    stream: int = 0
    walkers: int = 100000
    dx: float = 0.01
    points: int = 100

    def rng(self, offset: int = 0) -> RandomStream:
        return RandomStream(seed=self.seed, stream_id=self.stream + offset)


@dataclass
class SuiteReport:
    name: str
    reports: List[CheckReport]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'suite': self.name,
            'passed': self.passed,
            'checks': [r.to_dict() for r in self.reports],
        }


def _y_grid(ctx: SuiteContext, count: int = 7) -> np.ndarray:
    """Points on both sides of the barriers and around the start point."""
    p = ctx.params
    return np.unique(np.concatenate([
        np.linspace(p.z1 - 1.0, p.z2 + 1.0, count),
        [p.z1 - 0.25, p.z1 + 0.25, p.z2 - 0.25, p.z2 + 0.25, ctx.x],
    ]))


def _normalization(ctx: SuiteContext) -> List[CheckReport]:
    evaluator = make_series_evaluator(ctx.params, ctx.policy)
    p = ctx.params
    starts = (p.z1 - 0.5, ctx.x, p.z2 + 0.5)
    return [check_normalization(ctx.t, x, p, evaluator) for x in starts]


def _transmission(ctx: SuiteContext) -> List[CheckReport]:
    evaluator = make_series_evaluator(ctx.params, ctx.policy)
    return [check_transmission(ctx.t, ctx.x, ctx.params, evaluator)]


def _chapman(ctx: SuiteContext, pairs: int = 10) -> List[CheckReport]:
    """Both splits (t/2, t/2) and (0.3t, 0.7t) at random (x, y) around the barriers."""
    evaluator = make_series_evaluator(ctx.params, ctx.policy)
    p = ctx.params
    gen = ctx.rng().generator
    xs = gen.uniform(p.z1 - 1.0, p.z2 + 1.0, pairs)
    ys = gen.uniform(p.z1 - 1.0, p.z2 + 1.0, pairs)
    reports = []
    for left in (0.5, 0.3):
        t, s = left * ctx.t, (1 - left) * ctx.t
        checks = [check_chapman(t, s, x, [y], p, evaluator) for x, y in zip(xs, ys)]
        worst = max(checks, key=lambda r: r.max_violation)
        worst.details.update(pairs=pairs)
        reports.append(worst)
    return reports


def _balance(ctx: SuiteContext) -> List[CheckReport]:
    evaluator = make_series_evaluator(ctx.params, ctx.policy)
    ys = _y_grid(ctx)
    pairs = [(a, b) for a in ys for b in ys if a != b]
    return [check_detailed_balance(ctx.t, ctx.params, evaluator, pairs)]


def _ks(ctx: SuiteContext) -> List[CheckReport]:
    if ctx.params.mu != 0:
        raise DomainError("The ks suite samples exactly and needs mu = 0")
    batch = sample_many(ctx.n, ctx.t, ctx.x, ctx.params, ctx.policy, ctx.rng())
    cdf = make_cdf(ctx.t, ctx.x, ctx.params, spec=ctx.spec)
    report = check_ks(batch.samples, cdf)
    report.details.update(batch.stats().to_dict())
    return [report]


def _reduction(ctx: SuiteContext) -> List[CheckReport]:
    p = ctx.params
    beta = p.beta1 if p.beta1 != 0 else 0.5
    ys = _y_grid(ctx)
    return [
        check_one_barrier_crosswalk(ctx.t, ctx.x, ys, beta, p.z1, p.z2),
        check_reflection(ctx.t, abs(ctx.x - p.z1) + p.z1, ys[ys > p.z1], p.z1),
        check_far_barrier(ctx.t, 0.5, 0.5 + 3 * np.sqrt(ctx.t) * np.linspace(-1.0, 1.0, 25),
                          beta, p.beta2 or -0.5),
    ]


def _oracle_equivalence(ctx: SuiteContext) -> List[CheckReport]:
    p = ctx.params
    gen = ctx.rng().generator
    xs = gen.uniform(p.z1 - 1.0, p.z2 + 1.0, ctx.points)
    ys = gen.uniform(p.z1 - 1.0, p.z2 + 1.0, ctx.points)
    reports = [check_oracle_equivalence(ctx.t, xs, ys, p, ctx.policy, ctx.spec)]
    if p.mu != 0 and p.beta1 != 0 and p.beta2 != 0:
        reports.append(check_series_terms(ctx.t, xs[:10], ys[:10], p, (0, 1, 2),
                                          ctx.policy, ctx.spec))
    return reports


def _walk(ctx: SuiteContext) -> List[CheckReport]:
    result = walk_chi_square(ctx.t, ctx.x, ctx.params, ctx.walkers, ctx.dx, ctx.rng())
    return [check_walk(result)]


SUITES: Dict[str, Callable[[SuiteContext], List[CheckReport]]] = {
    'normalization': _normalization,
    'transmission': _transmission,
    'chapman': _chapman,
    'balance': _balance,
    'ks': _ks,
    'reduction': _reduction,
    'oracle-equivalence': _oracle_equivalence,
    'walk': _walk,
}


def run_suite(name: str, ctx: SuiteContext,
              progress: Optional[Callable[[str], None]] = None) -> SuiteReport:
    """Run one named suite.

    Args:
        name: One of SUITES
        ctx: Model and budgets
        progress: Optional callback receiving the suite name when it starts

    Returns:
        SuiteReport collecting the individual checks
    """
    if name not in SUITES:
        raise DomainError(f"Unknown suite {name!r}; choose from {', '.join(SUITES)}")
    if progress is not None:
        progress(name)
    report = SuiteReport(name=name, reports=SUITES[name](ctx))
    logger.info("suite %s: %s", name, "pass" if report.passed else "FAIL")
    return report
