import itertools
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from kernelizer.tensor_core import as_tensor, factorize  # noqa: E402


@pytest.fixture
def sparse_vector():
    return as_tensor([0, 1, 5, 7, 5, 0, 1])


@pytest.fixture
def small_matrix():
    return as_tensor([[2, 5, 2], [3, 0, 9], [0, 7, 0], [9, 2, 3]])


@pytest.fixture
def binary_words():
    """All length-3 words over {7, 9}, in binary order."""
    return as_tensor([list(w) for w in itertools.product([7, 9], repeat=3)])


@pytest.fixture
def dot_vector():
    return as_tensor([2, 3, 4, 2])


@pytest.fixture
def pattern_matrix():
    return as_tensor([[0, 2, 3], [3, 2, 0], [2, 3, 0], [2, 0, 3]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_tensor(rng, shape, values=range(-9, 10)):
    return as_tensor(rng.choice(np.array(list(values)), size=shape))


def random_factorization(rng, shape, values=range(-9, 10)):
    t = random_tensor(rng, shape, values)
    return t, factorize(t)


def random_shape(rng, max_rank=4, max_dim=6, min_rank=1):
    rank = int(rng.integers(min_rank, max_rank + 1))
    return tuple(int(n) for n in rng.integers(1, max_dim + 1, size=rank))


def engine_oracle(values, stream, delta, sigma):
    """
    Expected engine snapshots: push j serves channel j % sigma at channel step
    j // sigma + 1, lagging the sliding-window product by delta steps.
    """
    from kernelizer.naive import naive_sliding

    values = np.asarray(values)
    per_channel = [naive_sliding(values, list(stream[c::sigma]))[0] for c in range(sigma)]
    zero = np.zeros(values.shape[:-1], dtype=np.result_type(values.dtype, np.asarray(stream).dtype))
    expected = []
    for j in range(len(stream)):
        step = j // sigma + 1 - delta
        expected.append(per_channel[j % sigma][step - 1] if step >= 1 else zero)
    return expected
