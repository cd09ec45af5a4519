"""Seedable counter-based random streams"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from ..utils.errors import DomainError

_UINT64 = 2 ** 64


@dataclass
class RandomStream:
    """A reproducible stream of uniform and Gaussian variates.

    (seed, stream_id, counter) determines every later variate: the Philox
    key is (seed, stream_id) and counter is the block position at which the
    stream starts. Distinct stream ids give independent streams.
    """

    seed: int = 0
    stream_id: int = 0
    counter: int = 0
    _generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ('seed', 'stream_id', 'counter'):
            value = getattr(self, name)
            if int(value) != value or not 0 <= value < _UINT64:
                raise DomainError(f"{name} must be a 64-bit unsigned integer, got {value!r}")
        bit_generator = np.random.Philox(
            key=np.array([self.seed, self.stream_id], dtype=np.uint64),
            counter=np.array([self.counter, 0, 0, 0], dtype=np.uint64))
        self._generator = np.random.Generator(bit_generator)

    @property
    def generator(self) -> np.random.Generator:
        """The underlying numpy Generator, for vectorized draws."""
        return self._generator

    def uniform(self) -> float:
        return float(self._generator.random())

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        return float(self._generator.normal(mean, std))

    def spawn(self, stream_id: int) -> 'RandomStream':
        """A fresh stream with the same seed and another id."""
        return RandomStream(seed=self.seed, stream_id=stream_id, counter=0)

    def position(self) -> int:
        """Current Philox block counter (low word)."""
        state = self._generator.bit_generator.state
        return int(state['state']['counter'][0])

    def to_dict(self) -> Dict[str, int]:
        return {'seed': self.seed, 'stream_id': self.stream_id, 'counter': self.counter}
