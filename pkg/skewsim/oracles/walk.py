"""Skew random walk on a lattice, as a Monte Carlo check of the densities"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional

import numpy as np
from scipy import stats

from ..kernels.density import SkewParams, transition_density
from ..sampling.streams import RandomStream
from ..utils.errors import ConfigurationError, DomainError
from .quadrature import density_cdf

logger = logging.getLogger(__name__)

# Walkers advanced together in one vectorized block
BLOCK_SIZE = 1 << 16

MIN_EXPECTED = 5.0


@dataclass
class WalkHistogram:
    """Endpoint counts of a skew random walk, per lattice node."""

    nodes: np.ndarray
    counts: np.ndarray
    dx: float
    steps: int
    walkers: int

    @property
    def t(self) -> float:
        return self.steps * self.dx * self.dx

    def positions(self) -> np.ndarray:
        """Every walker's endpoint, expanded from the counts."""
        return np.repeat(self.nodes, self.counts)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'nodes': self.nodes.tolist(),
            'counts': self.counts.tolist(),
            'dx': self.dx,
            'steps': self.steps,
            'walkers': self.walkers,
            't': self.t,
        }


@dataclass
class WalkChiSquare:
    statistic: float
    pvalue: float
    bins: int
    dx: float
    steps: int
    t: float
    x0: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)


def _lattice_index(value: float, origin: float, dx: float, name: str) -> int:
    ratio = (value - origin) / dx
    index = round(ratio)
    if abs(ratio - index) > 1e-9 * max(1.0, abs(ratio)):
        raise ConfigurationError(f"{name}={value} is not a lattice node for dx={dx}")
    return int(index)


def align_lattice(params: SkewParams, dx: float) -> float:
    """Largest spacing <= about dx for which z2 - z1 is an even number of steps."""
    if not (math.isfinite(dx) and dx > 0):
        raise DomainError(f"dx must be positive, got {dx!r}")
    cells = max(2, 2 * round(params.z / (2 * dx)))
    return params.z / cells


def skew_walk_simulate(steps: int, walkers: int, lattice_dx: float, params: SkewParams,
                       rng: RandomStream, x0: Optional[float] = None) -> WalkHistogram:
    """Run independent skew random walks and histogram their endpoints.

    Off the barriers a walker steps up with probability (1 + mu dx)/2; on the
    barrier node z_j it steps up with probability (1 + beta_j)/2. Blocks of
    walkers are run in order, so the counts depend only on the stream.

    Args:
        steps: Number of steps; the time horizon is steps * dx^2
        walkers: Number of independent walkers
        lattice_dx: Lattice spacing; z1, z2 and x0 must be nodes
        params: Model parameters
        rng: Random stream
        x0: Start point, z1 by default

    Returns:
        WalkHistogram of endpoint positions
    """
    for name, value in (('steps', steps), ('walkers', walkers)):
        if int(value) != value or value < 1:
            raise DomainError(f"{name} must be a positive integer, got {value!r}")
    if not (math.isfinite(lattice_dx) and lattice_dx > 0):
        raise DomainError(f"lattice_dx must be positive, got {lattice_dx!r}")
    if abs(params.mu) * lattice_dx >= 1:
        raise ConfigurationError(f"|mu|*dx must be < 1, got {abs(params.mu) * lattice_dx:g}")

    dx = float(lattice_dx)
    upper = _lattice_index(params.z2, params.z1, dx, 'z2')
    start = _lattice_index(params.z1 if x0 is None else x0, params.z1, dx, 'x0')
    up_free = 0.5 * (1 + params.mu * dx)
    up_low = 0.5 * (1 + params.beta1)
    up_high = 0.5 * (1 + params.beta2)

    gen = rng.generator
    offset = start - int(steps)
    counts = np.zeros(2 * int(steps) + 1, dtype=np.int64)
    remaining = int(walkers)
    while remaining > 0:
        size = min(BLOCK_SIZE, remaining)
        pos = np.full(size, start, dtype=np.int64)
        for _ in range(int(steps)):
            p_up = np.where(pos == 0, up_low, np.where(pos == upper, up_high, up_free))
            pos += np.where(gen.random(size) < p_up, 1, -1)
        counts += np.bincount(pos - offset, minlength=counts.size)
        remaining -= size

    occupied = np.nonzero(counts)[0]
    lo, hi = occupied[0], occupied[-1] + 1
    nodes = params.z1 + (np.arange(lo, hi) + offset) * dx
    logger.debug("walk: %d walkers, %d steps, dx=%g", walkers, steps, dx)
    return WalkHistogram(nodes=nodes, counts=counts[lo:hi], dx=dx, steps=int(steps),
                         walkers=int(walkers))


def _merge_small_bins(observed: np.ndarray, expected: np.ndarray):
    """Fold bins with expected count below MIN_EXPECTED into their neighbour."""
    obs, exp = list(observed), list(expected)
    i = 0
    while i < len(exp) and len(exp) > 2:
        if exp[i] < MIN_EXPECTED:
            j = i + 1 if i + 1 < len(exp) else i - 1
            obs[j] += obs[i]
            exp[j] += exp[i]
            del obs[i], exp[i]
            i = max(0, i - 1)
        else:
            i += 1
    return np.array(obs, dtype=float), np.array(exp, dtype=float)


def walk_chi_square(t: float, x: float, params: SkewParams, walkers: int, dx: float,
                    rng: RandomStream, bins: int = 20,
                    evaluator: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None
                    ) -> WalkChiSquare:
    """Chi-square test of skew-walk endpoints against a density.

    The lattice is aligned so that z2 - z1 is an even number of cells, x is
    snapped to a node and the step count is chosen with the parity that
    leaves both barriers unoccupied at the final step. Bin edges lie on
    unoccupied nodes and include z1 and z2.

    Args:
        t: Requested time horizon
        x: Start point (snapped to the lattice)
        params: Model parameters
        walkers: Number of walkers
        dx: Requested lattice spacing
        rng: Random stream
        bins: Approximate number of bins
        evaluator: Density (t, x, y) -> values; transition_density by default

    Returns:
        WalkChiSquare with the test statistic and p-value
    """
    if evaluator is None:
        def evaluator(s, xs, ys):
            return np.asarray(transition_density(s, xs, ys, params).value)

    dx = align_lattice(params, dx)
    start = round((x - params.z1) / dx)
    x0 = params.z1 + start * dx
    steps = max(1, round(t / (dx * dx)))
    if (start + steps) % 2 == 0:
        steps += 1
    t_eff = steps * dx * dx

    hist = skew_walk_simulate(steps, walkers, dx, params, rng, x0)

    # Unoccupied nodes share the parity of the barrier indices
    spread = 3 * math.sqrt(t_eff) + abs(params.mu) * t_eff
    lo = math.floor((x0 + params.mu * t_eff - spread - params.z1) / (2 * dx))
    hi = math.ceil((x0 + params.mu * t_eff + spread - params.z1) / (2 * dx))
    picks = np.unique(np.round(np.linspace(lo, hi, bins + 1)).astype(int))
    barrier_cells = np.array([0, round(params.z / (2 * dx))])
    edge_index = np.unique(np.concatenate([picks, barrier_cells[(barrier_cells > lo) & (barrier_cells < hi)]]))
    edges = params.z1 + 2 * dx * edge_index

    observed = np.bincount(np.searchsorted(edges, hist.nodes), weights=hist.counts,
                           minlength=edges.size + 1)
    cdf = density_cdf(t_eff, x0, params, edges, evaluator)
    probs = np.diff(np.concatenate([[0.0], cdf, [1.0]]))
    expected = np.clip(probs, 0.0, None)
    expected = expected / expected.sum() * observed.sum()

    obs, exp = _merge_small_bins(observed, expected)
    result = stats.chisquare(obs, exp)
    logger.info("walk chi-square: %d bins, statistic=%.3f, p=%.4f", obs.size,
                result.statistic, result.pvalue)
    return WalkChiSquare(statistic=float(result.statistic), pvalue=float(result.pvalue),
                         bins=int(obs.size), dx=dx, steps=int(steps), t=t_eff, x0=x0)
