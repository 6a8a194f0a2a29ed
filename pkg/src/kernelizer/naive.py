"""
Naive (schoolbook) reference products.

These are the oracles the factored products are checked against, and their
dense operation counts are the denominators of op_ratios: every product is a
multiplication, and every output costs (terms - 1) additions.
"""

from typing import List, Sequence, Tuple

import numpy as np

from kernelizer.errors import ShapeMismatchError, UnsupportedAxisError
from kernelizer.factored_multiply import OpCount


def _check(values: np.ndarray, v: np.ndarray, axis: int) -> None:
    if not 1 <= axis <= values.ndim:
        raise UnsupportedAxisError(f"axis {axis} outside [1, {values.ndim}]")
    if v.ndim != 1 or v.size != values.shape[axis - 1]:
        raise ShapeMismatchError(
            f"vector of shape {v.shape} cannot contract axis {axis} of shape {values.shape}")


def naive_tensor_vec(t, v, axis: int) -> Tuple[np.ndarray, OpCount]:
    values, v = np.asarray(t), np.asarray(v)
    _check(values, v, axis)
    result = np.tensordot(values, v, axes=([axis - 1], [0]))
    n = v.size
    outputs = values.size // n
    return result, OpCount(adds=outputs * (n - 1), muls=values.size)


def naive_recursive_tensor_vec(t, v, axis: int) -> Tuple[np.ndarray, OpCount]:
    """out[k] = naive_tensor_vec(t, roll(v, -k), axis), k in [0, N-1]."""
    v = np.asarray(v)
    total = OpCount()
    slices = []
    for k in range(v.size):
        result, cost = naive_tensor_vec(t, np.roll(v, -k), axis)
        slices.append(result)
        total = total + cost
    return np.stack(slices, axis=0), total


def naive_dot(t, v) -> Tuple[np.generic, OpCount]:
    result, cost = naive_tensor_vec(t, v, axis=1)
    return result[()], cost


def naive_recursive_dot(t, v) -> Tuple[np.ndarray, OpCount]:
    return naive_recursive_tensor_vec(t, v, axis=1)


def naive_matvec(t, v) -> Tuple[np.ndarray, OpCount]:
    return naive_tensor_vec(t, v, axis=2)


def naive_recursive_matvec(t, v) -> Tuple[np.ndarray, OpCount]:
    stacked, cost = naive_recursive_tensor_vec(t, v, axis=2)
    return stacked.T, cost


def naive_sliding(t, stream: Sequence) -> Tuple[List[np.ndarray], OpCount]:
    """
    Contract t's last axis with every trailing window of the stream.

    Step k sees the last N samples up to and including sample k, oldest first,
    zero-padded on the left during warm-up.
    """
    values = np.asarray(t)
    n = values.shape[-1]
    samples = np.asarray(list(stream))
    padded = np.concatenate([np.zeros(n - 1, dtype=samples.dtype if samples.size else values.dtype),
                             samples])
    results = []
    total = OpCount()
    for k in range(samples.size):
        result, cost = naive_tensor_vec(values, padded[k:k + n], axis=values.ndim)
        results.append(result)
        total = total + cost
    return results, total


def naive_tensor_tensor(t, w, shared_axes: int) -> Tuple[np.ndarray, OpCount]:
    """Contract the leading `shared_axes` axes of t and w by brute force."""
    t, w = np.asarray(t), np.asarray(w)
    s = int(shared_axes)
    if t.shape[:s] != w.shape[:s]:
        raise ShapeMismatchError(f"shared axes disagree: {t.shape[:s]} vs {w.shape[:s]}")
    axes = list(range(s))
    result = np.tensordot(t, w, axes=(axes, axes))
    shared = int(np.prod(t.shape[:s], dtype=np.int64))
    outputs = int(np.prod(t.shape[s:], dtype=np.int64)) * int(np.prod(w.shape[s:], dtype=np.int64))
    return result, OpCount(adds=outputs * max(shared - 1, 0), muls=outputs * shared)
