"""
Tensor core: dense tensors, precision rounding and kernel/commutator factorization.

A dense tensor T is split into
    - a kernel U: the distinct nonzero values of T, and
    - a compact commutator Y (the "ymap"): an integer tensor of T's shape where
      0 marks a zero element and k in [1, L] marks an element equal to U[k].

Every product in factored_multiply multiplies kernel values only, so the cost
of a transform depends on L instead of on the size of T.

Kernel order is first occurrence under the row-major loop nest (last index
fastest), which makes factorizations deterministic.
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, List, Sequence, Tuple, Union

import numpy as np

from kernelizer.errors import (
    CorruptFactorizationError,
    InvalidPrecisionError,
    NotApplicableError,
    ShapeMismatchError,
)

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]
Number = Union[int, float, complex]


def check_shape(shape: Sequence[int]) -> Shape:
    """Validate a tensor shape: rank >= 1 and every extent >= 1."""
    dims = tuple(int(n) for n in shape)
    if not dims:
        raise ShapeMismatchError("rank-0 tensors are not supported")
    if any(n < 1 for n in dims):
        raise ShapeMismatchError(f"every extent must be >= 1, got {dims}")
    return dims


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Shape plus row-major scalar storage, immutable once built."""
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, copy=True)
        if arr.dtype == bool:
            arr = arr.astype(np.int64)
        if arr.dtype == object or not np.issubdtype(arr.dtype, np.number):
            raise ShapeMismatchError("tensor data must be a regular numeric array")
        check_shape(arr.shape)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __eq__(self, other):
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.values, other.values))

    __hash__ = None

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __repr__(self):
        return f"DenseTensor(shape={self.shape}, dtype={self.values.dtype})"

    @property
    def shape(self) -> Shape:
        return tuple(self.values.shape)

    @property
    def rank(self) -> int:
        return self.values.ndim

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def data(self) -> np.ndarray:
        """Row-major flat view of the elements."""
        return self.values.ravel()

    @property
    def is_exact(self) -> bool:
        """True when elements are integers (exact comparison needs no rounding)."""
        return np.issubdtype(self.values.dtype, np.integer)

    @property
    def is_complex(self) -> bool:
        return np.issubdtype(self.values.dtype, np.complexfloating)


def as_tensor(data: Any) -> DenseTensor:
    """Build a DenseTensor from nested lists, an ndarray or another tensor."""
    if isinstance(data, DenseTensor):
        return data
    return DenseTensor(np.asarray(data))


# ============================================================================
# JSON ENVELOPE
# ============================================================================

def decode_scalar(x: Any) -> Number:
    """JSON scalar -> Python number; complex values travel as [re, im] pairs."""
    if isinstance(x, (list, tuple)):
        if len(x) != 2:
            raise ValueError(f"complex scalar must be an [re, im] pair, got {x!r}")
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValueError(f"not a scalar: {x!r}")
    return x


def encode_scalar(x: Any) -> Any:
    """Python/numpy number -> JSON-ready value."""
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.integer, int)):
        return int(x)
    return float(x)


def decode_array(items: Sequence[Any]) -> np.ndarray:
    """Flat list of JSON scalars -> 1-D array with the narrowest exact dtype."""
    scalars = [decode_scalar(x) for x in items]
    if any(isinstance(x, complex) for x in scalars):
        return np.array(scalars, dtype=np.complex128)
    if any(isinstance(x, float) for x in scalars):
        return np.array(scalars, dtype=np.float64)
    return np.array(scalars, dtype=np.int64)


def tensor_from_json(obj: dict) -> DenseTensor:
    """Parse {"shape": [...], "data": [...]} (row-major)."""
    try:
        shape = check_shape(obj["shape"])
        data = decode_array(obj["data"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"tensor JSON needs 'shape' and 'data': {exc}") from exc
    if data.size != math.prod(shape):
        raise ShapeMismatchError(f"data length {data.size} does not match shape {shape}")
    return DenseTensor(data.reshape(shape))


def tensor_to_json(t: DenseTensor) -> dict:
    return {"shape": list(t.shape), "data": [encode_scalar(x) for x in t.data]}


# ============================================================================
# ROUNDING
# ============================================================================

def _round_real(x: np.ndarray, eps: float) -> np.ndarray:
    y = x / eps
    return np.sign(y) * np.floor(np.abs(y) + 0.5) * eps


def round_to_precision(t: DenseTensor, eps: float) -> DenseTensor:
    """
    Replace every element by eps * round(element / eps), rounding half away from zero.

    Integer tensors rounded with an integer eps stay integer (and exact).
    Complex elements are rounded componentwise.

    Args:
        t: Tensor to round
        eps: Positive precision

    Returns:
        The rounded tensor
    """
    if not eps > 0:
        raise InvalidPrecisionError(f"precision must be positive, got {eps}")
    values = t.values

    if t.is_exact and float(eps).is_integer():
        step = int(eps)
        if step == 1:
            return t
        magnitude = (2 * np.abs(values) + step) // (2 * step)
        return DenseTensor(np.sign(values) * magnitude * step)

    if t.is_complex:
        rounded = _round_real(values.real, eps) + 1j * _round_real(values.imag, eps)
        return DenseTensor(rounded.astype(np.complex128))
    return DenseTensor(_round_real(values.astype(np.float64), eps))


# ============================================================================
# FACTORIZATION
# ============================================================================

@dataclass(frozen=True, eq=False)
class Factorization:
    """
    Kernel vector plus compact commutator.

    kernel[k-1] is the value referenced by ymap entries equal to k;
    ymap entries equal to 0 mark zero elements of the source tensor.
    """
    kernel: np.ndarray
    ymap: np.ndarray

    def __post_init__(self):
        kernel = np.array(self.kernel, copy=True).reshape(-1)
        ymap = np.array(self.ymap, copy=True)
        if not np.issubdtype(ymap.dtype, np.integer):
            if ymap.size and not np.all(np.mod(ymap, 1) == 0):
                raise CorruptFactorizationError("ymap must hold integer indices")
            ymap = ymap.astype(np.int64)
        check_shape(ymap.shape)
        if kernel.size == 0 and kernel.dtype == np.float64:
            # np.array([]) defaults to float64; an empty kernel carries no values
            kernel = kernel.astype(np.int64)
        kernel.setflags(write=False)
        ymap.setflags(write=False)
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "ymap", ymap)

    def __eq__(self, other):
        if not isinstance(other, Factorization):
            return NotImplemented
        return (np.array_equal(self.kernel, other.kernel)
                and self.ymap.shape == other.ymap.shape
                and bool(np.array_equal(self.ymap, other.ymap)))

    __hash__ = None

    def __repr__(self):
        return f"Factorization(L={self.kernel_size}, shape={self.shape})"

    @property
    def kernel_size(self) -> int:
        return int(self.kernel.size)

    @property
    def shape(self) -> Shape:
        return tuple(self.ymap.shape)

    @property
    def rank(self) -> int:
        return self.ymap.ndim

    @property
    def nonzeros(self) -> int:
        return int(np.count_nonzero(self.ymap))

    def validate(self) -> None:
        """
        Check the factorization invariants.

        Raises:
            CorruptFactorizationError: index outside [0, L], repeated or zero
                kernel entries, or a kernel entry that is never referenced
        """
        L = self.kernel_size
        if self.ymap.size and (self.ymap.min() < 0 or self.ymap.max() > L):
            raise CorruptFactorizationError(
                f"ymap indices must lie in [0, {L}], found range "
                f"[{self.ymap.min()}, {self.ymap.max()}]")
        if L and np.any(self.kernel == 0):
            raise CorruptFactorizationError("kernel entries must be nonzero")
        if len(set(self.kernel.tolist())) != L:
            raise CorruptFactorizationError("kernel entries must be pairwise distinct")
        used = np.unique(self.ymap[self.ymap > 0])
        if used.size != L:
            raise CorruptFactorizationError("every kernel entry must be referenced by ymap")


def factorize(t: DenseTensor) -> Factorization:
    """
    Factor a tensor into kernel and compact commutator.

    The kernel collects the distinct nonzero values in first-occurrence order of
    the row-major scan. Exact equality is used, so float tensors should be
    rounded with round_to_precision first.

    Args:
        t: Tensor to factor (all-zero tensors are allowed)

    Returns:
        Factorization with reconstruct(result) == t
    """
    flat = t.data
    positions = np.flatnonzero(flat != 0)
    ymap = np.zeros(flat.size, dtype=np.int64)

    if positions.size == 0:
        kernel = np.zeros(0, dtype=t.values.dtype)
    else:
        uniq, first, inverse = np.unique(flat[positions], return_index=True, return_inverse=True)
        # unique() sorts by value; re-rank by first appearance
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        kernel = uniq[order]
        ymap[positions] = rank[inverse.reshape(-1)] + 1

    result = Factorization(kernel=kernel, ymap=ymap.reshape(t.shape))
    logger.debug("factorized tensor %s: L=%d, nonzeros=%d", t.shape, result.kernel_size, positions.size)
    return result


def expand_commutator(f: Factorization) -> DenseTensor:
    """
    Materialize the 0/1 commutator Z of shape (*T.shape, L).

    Diagnostic only: production paths use the compact ymap.
    """
    L = f.kernel_size
    selector = np.eye(L + 1, dtype=np.int64)[:, 1:]
    if L == 0:
        # keep a trailing axis of extent 1 so the result is still a valid tensor
        return DenseTensor(np.zeros(f.shape + (1,), dtype=np.int64))
    return DenseTensor(selector[f.ymap])


def reconstruct(f: Factorization) -> DenseTensor:
    """Rebuild the source tensor: element = 0 if ymap == 0 else kernel[ymap]."""
    L = f.kernel_size
    if f.ymap.size and (f.ymap.min() < 0 or f.ymap.max() > L):
        raise CorruptFactorizationError(
            f"ymap references index outside [0, {L}]")
    padded = np.concatenate([np.zeros(1, dtype=f.kernel.dtype), f.kernel])
    return DenseTensor(padded[f.ymap])


def contract_commutator(z: DenseTensor, kernel: np.ndarray) -> DenseTensor:
    """Contract an expanded commutator with the kernel along its last axis."""
    if kernel.size == 0:
        return DenseTensor(np.zeros(z.shape[:-1], dtype=np.int64))
    if z.shape[-1] != kernel.size:
        raise ShapeMismatchError(f"commutator depth {z.shape[-1]} != kernel length {kernel.size}")
    return DenseTensor(np.tensordot(z.values, kernel, axes=([-1], [0])))


def permute(f: Factorization, order: Sequence[int]) -> Factorization:
    """
    Reorder the axes of a factorization (0-based axis order, like numpy.transpose).

    The kernel is unchanged; only the commutator moves.
    """
    order = tuple(int(a) for a in order)
    if sorted(order) != list(range(f.rank)):
        raise ShapeMismatchError(f"{order} is not a permutation of the {f.rank} axes")
    return Factorization(kernel=f.kernel, ymap=np.transpose(f.ymap, order))


# ============================================================================
# SIZE BOUNDS (diagnostics)
# ============================================================================

def uniqueness_bound(shape: Sequence[int], kernel_size: int) -> bool:
    """
    Whether all last-axis sub-tensors can be pairwise distinct:
    prod(N_1 .. N_{M-1}) <= K ** N_M.
    """
    dims = check_shape(shape)
    if len(dims) < 2:
        raise NotApplicableError("uniqueness bound needs rank >= 2")
    if kernel_size < 1:
        raise NotApplicableError("uniqueness bound needs a kernel size >= 1")
    return math.prod(dims[:-1]) <= kernel_size ** dims[-1]


def _grid_points(values: np.ndarray, eps: float) -> Tuple[int, bool]:
    lo, hi = float(values.min()), float(values.max())
    return int(round((hi - lo) / eps)) + 1, lo <= 0.0 <= hi


def kernel_size_bound(t: DenseTensor, eps: float = 1) -> int:
    """
    Upper bound on L for an eps-rounded tensor.

    Counts the eps-grid values between min and max, minus the zero grid point
    when it is inside the range. Complex tensors multiply the real and
    imaginary grid counts.
    """
    if not eps > 0:
        raise InvalidPrecisionError(f"precision must be positive, got {eps}")
    values = t.values
    if t.is_complex:
        n_re, zero_re = _grid_points(values.real, eps)
        n_im, zero_im = _grid_points(values.imag, eps)
        return n_re * n_im - int(zero_re and zero_im)
    count, has_zero = _grid_points(values, eps)
    return count - int(has_zero)


# ============================================================================
# SERIALIZATION OF FACTORIZATIONS
# ============================================================================

def factorization_to_json(f: Factorization) -> dict:
    return {
        "kernel": [encode_scalar(x) for x in f.kernel],
        "ymap": {"shape": list(f.shape), "data": [int(x) for x in f.ymap.ravel()]},
    }


def factorization_from_json(obj: dict) -> Factorization:
    try:
        kernel = decode_array(obj["kernel"])
        ymap = tensor_from_json(obj["ymap"])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"factorization JSON needs 'kernel' and 'ymap': {exc}") from exc
    if not ymap.is_exact:
        raise CorruptFactorizationError("ymap must hold integer indices")
    f = Factorization(kernel=kernel, ymap=ymap.values)
    f.validate()
    return f


def describe(f: Factorization) -> List[str]:
    """Short human-readable summary lines."""
    return [
        f"shape: {f.shape}",
        f"kernel size L: {f.kernel_size}",
        f"nonzeros: {f.nonzeros} of {int(np.prod(f.shape))}",
        f"kernel: {[encode_scalar(x) for x in f.kernel]}",
    ]


if __name__ == "__main__":
    print("=" * 70)
    print("TENSOR FACTORIZATION (kernel + commutator)")
    print("=" * 70)

    vector = as_tensor([0, 1, 5, 7, 5, 0, 1])
    f = factorize(vector)
    print("\n📊 Vector example")
    for line in describe(f):
        print(f"  {line}")
    print(f"  ymap: {f.ymap.tolist()}")
    print(f"✓ Reconstructs: {reconstruct(f) == vector}")

    matrix = as_tensor([[2, 5, 2], [3, 0, 9], [0, 7, 0], [9, 2, 3]])
    f = factorize(matrix)
    print("\n📊 Matrix example")
    for line in describe(f):
        print(f"  {line}")
    print(f"  ymap: {f.ymap.tolist()}")
    print(f"✓ Reconstructs: {reconstruct(f) == matrix}")
    print(f"✓ Uniqueness bound holds: {uniqueness_bound(f.shape, f.kernel_size)}")
