"""Tests for the counter-based random streams"""

import numpy as np
import pytest

from skewsim.sampling.streams import RandomStream
from skewsim.utils.errors import DomainError


def test_same_key_same_variates():
    a, b = RandomStream(seed=42, stream_id=3), RandomStream(seed=42, stream_id=3)
    assert [a.uniform() for _ in range(5)] == [b.uniform() for _ in range(5)]
    assert a.normal() == b.normal()


def test_stream_ids_are_distinct():
    a, b = RandomStream(seed=42, stream_id=0), RandomStream(seed=42, stream_id=1)
    assert not np.array_equal(a.generator.random(16), b.generator.random(16))


def test_counter_selects_the_start():
    a, b = RandomStream(seed=1, counter=7), RandomStream(seed=1, counter=7)
    assert a.uniform() == b.uniform()
    assert RandomStream(seed=1).uniform() != RandomStream(seed=1, counter=7).uniform()


def test_spawn_keeps_seed():
    child = RandomStream(seed=8, stream_id=0).spawn(5)
    assert child.to_dict() == {'seed': 8, 'stream_id': 5, 'counter': 0}


def test_position_advances():
    stream = RandomStream(seed=2)
    before = stream.position()
    stream.generator.random(40)
    assert stream.position() > before


@pytest.mark.parametrize('kwargs', [{'seed': -1}, {'stream_id': 2 ** 64}, {'counter': 0.5}])
def test_rejects_bad_key(kwargs):
    with pytest.raises(DomainError):
        RandomStream(**kwargs)
