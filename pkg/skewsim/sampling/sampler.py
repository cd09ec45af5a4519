"""Exact sampling of the driftless two-barrier process by generalized rejection"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..kernels.density import (SkewParams, TruncationPolicy, delta, driftless_ratio_terms,
                               envelope_bound)
from ..utils.errors import DomainError
from .streams import RandomStream

logger = logging.getLogger(__name__)


@dataclass
class AcceptanceRecord:
    """Audit entry for one proposal.

    decision_index is the last series index n (terms 0..n) the gate looked
    at; exact is False when it reached n_max without a decision.
    """

    proposal: float
    uniform: float
    decision_index: int
    accepted: bool
    exact: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class AcceptanceStats:
    """Gate statistics.

    mean_decision_index averages over every proposal; n_rej averages over the
    accepted ones only and is None when nothing was accepted.
    """

    mean_decision_index: float
    exact_fraction: float
    acceptance_rate: float
    n_records: int
    n_rej: Optional[float] = None
    cap_hits: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SampleBatch:
    """Samples plus the records of every proposal made to produce them."""

    samples: np.ndarray
    records: List[AcceptanceRecord] = field(default_factory=list)

    def stats(self) -> AcceptanceStats:
        return acceptance_stats(self.records)


@dataclass
class PathSample:
    """Positions of one trajectory on a time grid."""

    times: List[float]
    positions: List[float]
    records: List[AcceptanceRecord] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'times': list(self.times),
            'positions': list(self.positions),
            'stats': acceptance_stats(self.records).to_dict() if self.records else None,
        }


def _next_index(n: int, gap: float, bound: float, n_max: int) -> int:
    """First integer exceeding log(gap) / log(bound), at least n + 1 and at most n_max."""
    if gap <= 0 or bound <= 0:
        return n_max
    if bound >= 1:
        return min(n + 1, n_max)
    jump = math.floor(math.log(gap) / math.log(bound)) + 1
    return min(max(jump, n + 1), n_max)


def lazy_bernoulli(u: float, f: Callable[[int], float], delta: Callable[[int], float],
                   n_max: int, start: int = 0) -> Tuple[bool, int, bool]:
    """Decide u < lim f_n using only finitely many approximations.

    Requires |f_n - lim f| <= delta(n) with delta decreasing to 0. Once
    |u - f_n| > delta(n), the comparison u < f_n cannot change any more.

    Args:
        u: Uniform draw in [0, 1]
        f: Approximations n -> f_n
        delta: Error bounds n -> delta_n
        n_max: Largest index that may be evaluated
        start: First index tried

    Returns:
        (decision, index at which it was taken, whether it is exact)
    """
    if not 0 <= u <= 1:
        raise DomainError(f"u must lie in [0, 1], got {u!r}")
    if n_max < start:
        raise DomainError(f"n_max={n_max} is below the first index {start}")

    n = start
    while True:
        fn = f(n)
        gap = abs(u - fn)
        bound = delta(n)
        if gap > bound:
            return u < fn, n, True
        if n >= n_max:
            return u < fn, n, False
        n = _next_index(n, gap, bound, n_max)


def _check_sampler_params(t: float, params: SkewParams) -> None:
    if not (math.isfinite(t) and t > 0):
        raise DomainError(f"t must be positive, got {t!r}")
    if params.mu != 0:
        raise DomainError("Exact sampling is only available without drift (mu = 0)")


def sample_transition(t: float, x: float, params: SkewParams,
                      policy: Optional[TruncationPolicy], rng: RandomStream,
                      journal: Optional[List[AcceptanceRecord]] = None
                      ) -> Tuple[float, AcceptanceRecord]:
    """Draw one exact sample of X_t given X_0 = x.

    Proposals come from N(x, t). The acceptance probability v(y)/vbar is
    approached by partial sums f_n = v_n/vbar over the terms 0..n, whose
    error is at most |b1 b2|^(n+1); the gate stops at n_max.

    Args:
        t: Time step, t > 0
        x: Start point
        params: Driftless model parameters
        policy: Truncation policy (n_max caps the gate)
        rng: Random stream
        journal: If given, every proposal record is appended to it

    Returns:
        (sample, record of the accepted proposal)
    """
    _check_sampler_params(t, params)
    policy = policy or TruncationPolicy()
    vbar = envelope_bound(params)
    st = math.sqrt(t)

    def bound(n: int) -> float:
        return delta(params, n)

    while True:
        y = x + st * rng.normal()
        u = rng.uniform()

        terms = driftless_ratio_terms(t, x, y, params)
        sums: List[float] = []

        def f(n: int) -> float:
            while len(sums) <= n:
                sums.append((sums[-1] if sums else 0.0) + next(terms))
            return sums[n] / vbar

        accepted, index, exact = lazy_bernoulli(u, f, bound, policy.n_max)
        record = AcceptanceRecord(proposal=y, uniform=u, decision_index=index,
                                  accepted=accepted, exact=exact)
        if not exact:
            logger.debug("gate hit the cap at y=%.6g (u=%.6g)", y, u)
        if journal is not None:
            journal.append(record)
        if accepted:
            return y, record


def sample_many(n: int, t: float, x: float, params: SkewParams,
                policy: Optional[TruncationPolicy], rng: RandomStream,
                progress: Optional[Callable[[int], None]] = None) -> SampleBatch:
    """Draw n independent exact samples of X_t given X_0 = x."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    journal: List[AcceptanceRecord] = []
    samples = np.empty(int(n))
    for i in range(int(n)):
        samples[i], _ = sample_transition(t, x, params, policy, rng, journal)
        if progress is not None:
            progress(1)

    batch = SampleBatch(samples=samples, records=journal)
    stats = batch.stats()
    if stats.cap_hits:
        logger.warning("%d of %d gate decisions hit the cap n_max",
                       stats.cap_hits, stats.n_records)
    return batch


def sample_sharded(n: int, shards: int, t: float, x: float, params: SkewParams,
                   policy: Optional[TruncationPolicy], seed: int, stream: int = 0,
                   progress: Optional[Callable[[int], None]] = None) -> SampleBatch:
    """Split n samples over shards streams (ids stream, stream+1, ...), merged in shard order."""
    if int(shards) != shards or shards < 1:
        raise DomainError(f"shards must be a positive integer, got {shards!r}")
    sizes = [n // shards + (1 if i < n % shards else 0) for i in range(shards)]
    parts = [sample_many(size, t, x, params, policy,
                         RandomStream(seed=seed, stream_id=stream + i), progress)
             for i, size in enumerate(sizes) if size > 0]
    return SampleBatch(samples=np.concatenate([p.samples for p in parts]),
                       records=[r for p in parts for r in p.records])


def sample_path(times: Sequence[float], x0: float, params: SkewParams,
                policy: Optional[TruncationPolicy], rng: RandomStream) -> PathSample:
    """Exact trajectory on a time grid, chaining transitions over the increments."""
    times = [float(s) for s in times]
    if not times or times[0] < 0:
        raise DomainError("times must be non-empty and start at a non-negative time")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise DomainError("times must be strictly increasing")
    if not math.isfinite(x0):
        raise DomainError(f"x0 must be finite, got {x0!r}")

    positions = [float(x0)]
    journal: List[AcceptanceRecord] = []
    for a, b in zip(times, times[1:]):
        y, _ = sample_transition(b - a, positions[-1], params, policy, rng, journal)
        positions.append(y)
    return PathSample(times=times, positions=positions, records=journal)


def acceptance_stats(records: Sequence[AcceptanceRecord]) -> AcceptanceStats:
    """Mean decision index, exact fraction and acceptance rate over all proposals."""
    if not records:
        raise DomainError("acceptance_stats needs at least one record")
    count = len(records)
    accepted = [r.decision_index for r in records if r.accepted]
    cap_hits = sum(1 for r in records if not r.exact)
    return AcceptanceStats(
        mean_decision_index=sum(r.decision_index for r in records) / count,
        exact_fraction=(count - cap_hits) / count,
        acceptance_rate=len(accepted) / count,
        n_records=count,
        n_rej=sum(accepted) / len(accepted) if accepted else None,
        cap_hits=cap_hits,
    )
