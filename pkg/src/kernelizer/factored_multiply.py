"""
Factored products: direct, recursive (all circular shifts) and iterative
(sliding window) multiplication of a factored tensor by a vector, plus the
factored tensor-tensor contraction.

Every variant first forms the product table P = kernel (x) v, which holds every
multiplication any output could need, then assembles outputs by selecting
table entries through the compact commutator. Only the table costs
multiplications; assembling costs additions.

Operation counts follow the rule that a multiplication where either factor is
exactly 0 or 1 is not counted.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from kernelizer.errors import ShapeMismatchError, UnsupportedAxisError
from kernelizer.tensor_core import Factorization

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OpCount:
    """Tally of scalar additions and counted multiplications."""
    adds: int = 0
    muls: int = 0

    def __add__(self, other: "OpCount") -> "OpCount":
        return OpCount(self.adds + other.adds, self.muls + other.muls)


def countable(values: np.ndarray) -> int:
    """Number of entries that cost a multiplication (neither 0 nor 1)."""
    values = np.asarray(values)
    return int(np.count_nonzero((values != 0) & (values != 1)))


def accumulation_adds(ymap_last: np.ndarray) -> int:
    """Additions needed to sum the selected terms of every last-axis fiber."""
    if ymap_last.ndim == 0:
        return 0
    terms = np.count_nonzero(ymap_last, axis=-1)
    return int(np.maximum(terms - 1, 0).sum())


def op_ratios(count: OpCount, naive: OpCount) -> Tuple[Optional[Fraction], Optional[Fraction]]:
    """
    Reduction coefficients (C+, C*) of a factored run against the naive run.

    A ratio whose naive count is 0 is undefined and returned as None.
    """
    c_add = Fraction(count.adds, naive.adds) if naive.adds else None
    c_mul = Fraction(count.muls, naive.muls) if naive.muls else None
    return c_add, c_mul


# ============================================================================
# PRODUCT TABLE AND SHIFTS
# ============================================================================

@dataclass(frozen=True, eq=False)
class ProductTable:
    """P[l][n] = kernel[l] * v[n], shape (L, N)."""
    table: np.ndarray

    @classmethod
    def build(cls, kernel: np.ndarray, v: np.ndarray) -> Tuple["ProductTable", OpCount]:
        table = np.multiply.outer(np.asarray(kernel), np.asarray(v))
        return cls(table), OpCount(muls=countable(kernel) * countable(v))

    @property
    def length(self) -> int:
        return int(self.table.shape[1])

    def gather(self, ymap_last: np.ndarray) -> np.ndarray:
        return gather(self.table, ymap_last)


def gather(table: np.ndarray, ymap_last: np.ndarray) -> np.ndarray:
    """
    Sum table[ymap[..., n] - 1, n] over n, skipping zero indices.

    ymap_last has the contracted axis last; its extent equals the table width.
    """
    n = table.shape[1]
    padded = np.concatenate([np.zeros((1, n), dtype=table.dtype), table], axis=0)
    return padded[ymap_last, np.arange(n)].sum(axis=-1)


@dataclass(frozen=True, eq=False)
class ShiftState:
    """
    A product table seen through a circular rotation.

    Logical column n of state k is base column (n + k) mod N, so state k is the
    table of v shifted up by k positions. Nothing is copied until view().
    """
    base: ProductTable
    offset: int = 0

    def __post_init__(self):
        if not 0 <= self.offset < max(self.base.length, 1):
            raise ValueError(f"rotation offset {self.offset} outside [0, {self.base.length - 1}]")

    def column(self, n: int) -> np.ndarray:
        return self.base.table[:, (n + self.offset) % self.base.length]

    def view(self) -> np.ndarray:
        return np.roll(self.base.table, -self.offset, axis=1)

    def gather(self, ymap_last: np.ndarray) -> np.ndarray:
        return gather(self.view(), ymap_last)


def displacement_matrix(n: int, power: int = 1) -> np.ndarray:
    """Explicit N x N matrix shifting a vector up by `power` positions (debug only)."""
    shift = np.roll(np.eye(n, dtype=np.int64), 1, axis=1)
    return np.linalg.matrix_power(shift, power % n if n else 0)


def selecting_vector(m_total: int, m: int) -> np.ndarray:
    """One-hot vector picking sub-tensor m (1-based) out of m_total (debug only)."""
    if not 1 <= m <= m_total:
        raise ShapeMismatchError(f"selector index {m} outside [1, {m_total}]")
    e = np.zeros(m_total, dtype=np.int64)
    e[m - 1] = 1
    return e


# ============================================================================
# DIRECT AND RECURSIVE PRODUCTS
# ============================================================================

def _contracted(f: Factorization, v, axis: int) -> Tuple[np.ndarray, np.ndarray]:
    if not 1 <= axis <= f.rank:
        raise UnsupportedAxisError(f"axis {axis} outside [1, {f.rank}]")
    v = np.asarray(v)
    if v.ndim != 1:
        raise ShapeMismatchError(f"vector operand must be 1-D, got shape {v.shape}")
    if v.size != f.shape[axis - 1]:
        raise ShapeMismatchError(
            f"vector length {v.size} does not match extent {f.shape[axis - 1]} of axis {axis}")
    return np.moveaxis(f.ymap, axis - 1, -1), v


def tensor_vec(f: Factorization, v, axis: int) -> Tuple[np.ndarray, OpCount]:
    """
    Contract a factored tensor with a vector along `axis` (1-based).

    Args:
        f: Factorization of T with shape (N_1, ..., N_M)
        v: Vector of length N_axis
        axis: Axis to contract, 1..M

    Returns:
        (result with the axis removed, OpCount)
    """
    ymap_last, v = _contracted(f, v, axis)
    table, cost = ProductTable.build(f.kernel, v)
    result = table.gather(ymap_last)
    return result, cost + OpCount(adds=accumulation_adds(ymap_last))


def recursive_tensor_vec(f: Factorization, v, axis: int) -> Tuple[np.ndarray, OpCount]:
    """
    tensor_vec against every circular shift of v.

    Output has a leading axis of extent N_axis: out[k] is the contraction with v
    shifted up by k. The product table is built once and rotated logically.
    """
    ymap_last, v = _contracted(f, v, axis)
    table, cost = ProductTable.build(f.kernel, v)
    n = v.size
    slices = [ShiftState(table, k).gather(ymap_last) for k in range(n)]
    adds = accumulation_adds(ymap_last) * n
    return np.stack(slices, axis=0), cost + OpCount(adds=adds)


def _require_rank(f: Factorization, rank: int, what: str) -> None:
    if f.rank != rank:
        raise ShapeMismatchError(f"{what} needs a rank-{rank} factorization, got rank {f.rank}")


def dot_factored(f: Factorization, v) -> Tuple[np.generic, OpCount]:
    """Scalar product T^t v of a factored vector T."""
    _require_rank(f, 1, "dot_factored")
    result, cost = tensor_vec(f, v, axis=1)
    return result[()], cost


def recursive_dot(f: Factorization, v) -> Tuple[np.ndarray, OpCount]:
    """r[k] = T^t (v shifted up by k) for k in [0, N-1]."""
    _require_rank(f, 1, "recursive_dot")
    return recursive_tensor_vec(f, v, axis=1)


def matvec_factored(f: Factorization, v) -> Tuple[np.ndarray, OpCount]:
    """r = T v for a factored M x N matrix."""
    _require_rank(f, 2, "matvec_factored")
    return tensor_vec(f, v, axis=2)


def recursive_matvec(f: Factorization, v) -> Tuple[np.ndarray, OpCount]:
    """M x N matrix whose column k is T (v shifted up by k)."""
    _require_rank(f, 2, "recursive_matvec")
    stacked, cost = recursive_tensor_vec(f, v, axis=2)
    return stacked.T, cost


# ============================================================================
# ITERATIVE (SLIDING WINDOW) PRODUCTS
# ============================================================================

@dataclass(eq=False)
class ProductWindow:
    """
    Caller-owned L x N window of the iterative variants.

    Column N holds kernel * (newest sample); older samples sit to the left.
    Starts all zeros.
    """
    table: np.ndarray

    @classmethod
    def cold(cls, f: Factorization) -> "ProductWindow":
        return cls(np.zeros((f.kernel_size, f.shape[-1]), dtype=f.kernel.dtype))

    def push(self, kernel: np.ndarray, value) -> OpCount:
        """Shift the window left by one column and write kernel * value on the right."""
        column = np.asarray(kernel) * value
        dtype = np.result_type(self.table.dtype, column.dtype)
        if dtype != self.table.dtype:
            self.table = self.table.astype(dtype)
        self.table[:, :-1] = self.table[:, 1:]
        self.table[:, -1] = column
        return OpCount(muls=countable(kernel) * countable(np.asarray([value])))


def iterative_tensor_vec_step(window: ProductWindow, f: Factorization, v_new,
                              axis: Optional[int] = None) -> Tuple[np.ndarray, ProductWindow, OpCount]:
    """
    One sliding-window step along the last axis.

    Costs at most L multiplications (the new table column). The result at step k
    is the contraction of T with the last N_M samples, oldest first, zero-padded
    at cold start.
    """
    axis = f.rank if axis is None else axis
    if axis != f.rank:
        raise UnsupportedAxisError(
            f"iterative products slide along the last axis ({f.rank}); permute axis {axis} first")
    expected = (f.kernel_size, f.shape[-1])
    if window.table.shape != expected:
        raise ShapeMismatchError(f"window shape {window.table.shape} != {expected}")
    cost = window.push(f.kernel, v_new)
    result = gather(window.table, f.ymap)
    return result, window, cost + OpCount(adds=accumulation_adds(f.ymap))


def iterative_dot_step(window: ProductWindow, f: Factorization, v_new):
    """Sliding scalar product; see iterative_tensor_vec_step."""
    _require_rank(f, 1, "iterative_dot_step")
    result, window, cost = iterative_tensor_vec_step(window, f, v_new)
    return result[()], window, cost


def iterative_matvec_step(window: ProductWindow, f: Factorization, v_new):
    _require_rank(f, 2, "iterative_matvec_step")
    return iterative_tensor_vec_step(window, f, v_new)


# ============================================================================
# TENSOR-TENSOR
# ============================================================================

def tensor_tensor(ft: Factorization, fw: Factorization,
                  shared_axes: int) -> Tuple[np.ndarray, OpCount]:
    """
    Contract two factored tensors over their leading `shared_axes` axes.

    Scalar multiplications happen only in the kernel product table
    U[lt, lw] = kt[lt] * kw[lw]; the commutators contribute integer coincidence
    counts that weight those products.

    Args:
        ft: Factorization of T
        fw: Factorization of W
        shared_axes: Number of leading axes contracted (extents must agree)

    Returns:
        (tensor of shape T.shape[s:] + W.shape[s:], OpCount)
    """
    s = int(shared_axes)
    if not 0 <= s <= min(ft.rank, fw.rank):
        raise ShapeMismatchError(f"cannot share {s} axes between ranks {ft.rank} and {fw.rank}")
    if ft.shape[:s] != fw.shape[:s]:
        raise ShapeMismatchError(
            f"shared axes disagree: {ft.shape[:s]} vs {fw.shape[:s]}; permute so shared axes lead")

    kernel_products = np.multiply.outer(ft.kernel, fw.kernel)
    cost = OpCount(muls=countable(ft.kernel) * countable(fw.kernel))

    shared = int(np.prod(ft.shape[:s], dtype=np.int64))
    yt = ft.ymap.reshape(shared, -1)
    yw = fw.ymap.reshape(shared, -1)
    zt = np.eye(ft.kernel_size + 1, dtype=np.int64)[yt][..., 1:]
    zw = np.eye(fw.kernel_size + 1, dtype=np.int64)[yw][..., 1:]
    coincidences = np.einsum("sal,sbm->ablm", zt, zw)

    result = np.einsum("ablm,lm->ab", coincidences, kernel_products)
    terms = coincidences.sum(axis=(2, 3))
    cost = cost + OpCount(adds=int(np.maximum(terms - 1, 0).sum()))
    return result.reshape(ft.shape[s:] + fw.shape[s:]), cost
