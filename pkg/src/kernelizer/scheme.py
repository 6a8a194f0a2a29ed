"""
Scheme synthesis: turn a factored tensor into a shared-adder schedule.

Pipeline (synthesize):
    round -> factorize -> build_pattern_set -> append zero column
          -> adjust_delays -> adjust_channels -> compute_delays_indices

build_pattern_set greedily mines the most frequent pair (p2, p3, gap) along the
last-axis fibers of the compact commutator and replaces every occurrence by a
new combination id, until each fiber holds at most one nonzero entry. The
resulting combinations are 2-input additions that the streaming engine (and a
hardware netlist) evaluates once per sample, shared between all outputs.

Timing model: lane x carries a lag lambda_x (kernel taps: 0). A combination
reads operand 1 delayed by d1 and operand 2 delayed by d2; both are at least the
adder latency delta, and they are chosen so that the combination equals
"operand 1 placed gap positions earlier, plus operand 2", lagged by its own
lambda. Output cells read their lane with a delay that absorbs both the lane lag
and the fiber position, so every output runs exactly Delta samples (per channel)
behind the sliding-window product.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from kernelizer.errors import (
    InternalInvariantError,
    InvalidPrecisionError,
    MalformedSchemeError,
    PreconditionError,
)
from kernelizer.tensor_core import (
    Factorization,
    as_tensor,
    decode_array,
    encode_scalar,
    factorize,
    round_to_precision,
)

logger = logging.getLogger(__name__)


# ============================================================================
# DATA STRUCTURES
# ============================================================================

@dataclass(frozen=True)
class SynthesisConfig:
    """Rounding precision, adder latency (clock counts) and channel count."""
    precision: float = 1
    op_delay: int = 0
    channels: int = 1

    def __post_init__(self):
        if not self.precision > 0:
            raise InvalidPrecisionError(f"precision must be positive, got {self.precision}")
        if int(self.op_delay) != self.op_delay or self.op_delay < 0:
            raise PreconditionError(f"operational delay must be a nonnegative integer, got {self.op_delay}")
        if int(self.channels) != self.channels or self.channels < 1:
            raise PreconditionError(f"channel count must be an integer >= 1, got {self.channels}")


@dataclass(frozen=True)
class Combination:
    """
    A shared 2-input addition: lane `id` = lane `in1` (gap positions earlier) + lane `in2`.

    `count` is the number of occurrences replaced when it was extracted.
    """
    id: int
    in1: int
    in2: int
    gap: int
    count: int = 1


@dataclass(frozen=True, eq=False)
class CombinationMatrix:
    """Rows (id, in1, in2, d1, d2), topologically ordered by id."""
    rows: np.ndarray = field(default_factory=lambda: np.zeros((0, 5), dtype=np.int64))

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.int64).reshape(-1, 5)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def __eq__(self, other):
        if not isinstance(other, CombinationMatrix):
            return NotImplemented
        return bool(np.array_equal(self.rows, other.rows))

    __hash__ = None

    def __len__(self) -> int:
        return int(self.rows.shape[0])

    def __iter__(self) -> Iterator[Tuple[int, int, int, int, int]]:
        for row in self.rows:
            yield tuple(int(x) for x in row)

    @property
    def ids(self) -> np.ndarray:
        return self.rows[:, 0]

    @property
    def delays(self) -> np.ndarray:
        return self.rows[:, 3:5]

    def with_delays(self, delays: np.ndarray) -> "CombinationMatrix":
        rows = self.rows.copy()
        rows[:, 3:5] = delays
        return CombinationMatrix(rows)


@dataclass(frozen=True, eq=False)
class Scheme:
    """
    Everything the streaming engine and the netlist builder need.

    r_index and d_delay have the tensor's shape minus its last axis (0-d for
    vectors). d_delay is already scaled by the channel count.
    """
    kernel: np.ndarray
    q: CombinationMatrix
    r_index: np.ndarray
    d_delay: np.ndarray
    delta: int
    sigma: int
    n_last: int
    op_delay: int = 0

    def __post_init__(self):
        for name in ("kernel", "r_index", "d_delay"):
            arr = np.array(getattr(self, name), copy=True)
            if name != "kernel":
                arr = arr.astype(np.int64)
            else:
                arr = arr.reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __eq__(self, other):
        if not isinstance(other, Scheme):
            return NotImplemented
        return (np.array_equal(self.kernel, other.kernel) and self.q == other.q
                and self.r_index.shape == other.r_index.shape
                and np.array_equal(self.r_index, other.r_index)
                and np.array_equal(self.d_delay, other.d_delay)
                and (self.delta, self.sigma, self.n_last, self.op_delay)
                == (other.delta, other.sigma, other.n_last, other.op_delay))

    __hash__ = None

    @property
    def kernel_size(self) -> int:
        return int(self.kernel.size)

    @property
    def combinations(self) -> int:
        return len(self.q)

    @property
    def last_id(self) -> int:
        return self.kernel_size + self.combinations

    @property
    def output_shape(self) -> Tuple[int, ...]:
        return tuple(self.r_index.shape)

    @property
    def columns(self) -> int:
        """Ring-buffer width sigma * (N_M + Delta)."""
        return self.sigma * (self.n_last + self.delta)

    @property
    def warmup(self) -> int:
        """Pushes before the first output step is read."""
        return self.delta * self.sigma


# ============================================================================
# PATTERN EXTRACTION
# ============================================================================

def _fibers(y: np.ndarray) -> np.ndarray:
    return y.reshape(-1, y.shape[-1])


def _occurrences(fiber: np.ndarray, p2: int, p3: int, gap: int) -> List[int]:
    """Left positions of non-overlapping (p2, p3, gap) matches, scanned left to right."""
    used = set()
    hits = []
    for n in range(fiber.size - gap):
        if fiber[n] == p2 and fiber[n + gap] == p3 and n not in used and n + gap not in used:
            hits.append(n)
            used.update((n, n + gap))
    return hits


def _count_pairs(fibers: np.ndarray) -> Dict[Tuple[int, int, int], int]:
    counts: Dict[Tuple[int, int, int], int] = {}
    used: Dict[Tuple[int, int, int], set] = {}
    n_last = fibers.shape[1]
    for f, fiber in enumerate(fibers):
        nz = np.flatnonzero(fiber)
        if nz.size < 2:
            continue
        for gap in range(1, n_last):
            for n in nz:
                m = n + gap
                if m >= n_last or fiber[m] == 0:
                    continue
                key = (int(fiber[n]), int(fiber[m]), gap)
                seen = used.setdefault(key, set())
                if (f, n) in seen or (f, m) in seen:
                    continue
                seen.update(((f, n), (f, m)))
                counts[key] = counts.get(key, 0) + 1
    return counts


def fibers_collapsed(y: np.ndarray) -> bool:
    """True when every last-axis fiber has at most one nonzero entry."""
    return bool(np.all(np.count_nonzero(y, axis=-1) <= 1))


def build_pattern_set(y: np.ndarray) -> Tuple[np.ndarray, List[Combination]]:
    """
    Greedy pairwise pattern extraction over the last-axis fibers of a ymap.

    Each round picks the (p2, p3, gap) triple with the most non-overlapping
    occurrences (ties: smallest p2, then p3, then gap), zeroes the left element
    of every occurrence and writes the new id at the right element.

    Args:
        y: Compact commutator (ymap)

    Returns:
        (reduced ymap with collapsed fibers, combinations in id order)
    """
    reduced = np.array(y, dtype=np.int64, copy=True)
    fibers = _fibers(reduced)
    next_id = int(reduced.max()) + 1 if reduced.size else 1
    combinations: List[Combination] = []

    while not fibers_collapsed(reduced):
        counts = _count_pairs(fibers)
        if not counts:
            raise InternalInvariantError("a fiber with several nonzeros yielded no pair")
        best = max(counts.items(), key=lambda kv: (kv[1], tuple(-x for x in kv[0])))
        (p2, p3, gap), count = best

        for fiber in fibers:
            for n in _occurrences(fiber, p2, p3, gap):
                fiber[n] = 0
                fiber[n + gap] = next_id

        combinations.append(Combination(next_id, p2, p3, gap, count))
        logger.debug("combination %d = (%d, %d, gap %d) x%d", next_id, p2, p3, gap, count)
        next_id += 1

    return reduced, combinations


# ============================================================================
# DELAYS AND CHANNELS
# ============================================================================

def append_zero_column(combinations: List[Combination]) -> CombinationMatrix:
    """Rows (id, in1, in2, gap, 0): operand 1 is read gap samples back, operand 2 now."""
    rows = [(c.id, c.in1, c.in2, c.gap, 0) for c in combinations]
    return CombinationMatrix(np.array(rows, dtype=np.int64).reshape(-1, 5))


def lane_lags(q: CombinationMatrix) -> Dict[int, int]:
    """
    Lag of every combination lane of a delay-adjusted matrix.

    Kernel lanes (ids absent from q) have lag 0; a combination lags its second
    operand by d2.
    """
    lags: Dict[int, int] = {}
    for cid, _in1, in2, _d1, d2 in q:
        lags[cid] = lags.get(in2, 0) + d2
    return lags


def adjust_delays(q: CombinationMatrix, op_delay: int) -> Tuple[CombinationMatrix, int]:
    """
    Balance operand delays for adders with latency `op_delay`.

    Input rows carry (gap, 0). Each combination gets the smallest lag that keeps
    both operand delays >= op_delay while preserving their relative alignment:
        lag = op_delay + max(lag_in1 - gap, lag_in2)
        d1  = lag + gap - lag_in1
        d2  = lag - lag_in2

    Delta is the largest lane lag, not the running maximum of the delay
    columns, so op_delay = 0 gives Delta = 0.

    Returns:
        (adjusted matrix, Delta = largest lane lag)
    """
    if op_delay < 0:
        raise PreconditionError(f"operational delay must be >= 0, got {op_delay}")
    lags: Dict[int, int] = {}
    delays = np.zeros((len(q), 2), dtype=np.int64)
    for row, (cid, in1, in2, gap, _zero) in enumerate(q):
        lag1, lag2 = lags.get(in1, 0), lags.get(in2, 0)
        lag = op_delay + max(lag1 - gap, lag2)
        delays[row] = (lag + gap - lag1, lag - lag2)
        lags[cid] = lag

    if np.any(delays < op_delay):
        raise InternalInvariantError("operand delay below the adder latency after balancing")
    delta = max(lags.values(), default=0)
    logger.debug("delay balancing: op_delay=%d, Delta=%d", op_delay, delta)
    return q.with_delays(delays), delta


def adjust_channels(q: CombinationMatrix, channels: int) -> CombinationMatrix:
    """Scale every delay by the channel count (interleaved streams)."""
    if channels < 1:
        raise PreconditionError(f"channel count must be >= 1, got {channels}")
    return q.with_delays(q.delays * channels)


def compute_delays_indices(reduced_y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read off each fiber's surviving entry.

    Returns:
        (positions, r_index): 1-based position of the nonzero in each fiber and
        the id stored there; both 0 for an all-zero fiber
    """
    reduced_y = np.asarray(reduced_y)
    nonzeros = np.count_nonzero(reduced_y, axis=-1)
    if np.any(nonzeros > 1):
        raise PreconditionError("every last-axis fiber must hold at most one nonzero entry")
    r_index = reduced_y.sum(axis=-1).astype(np.int64)
    positions = np.where(nonzeros > 0, np.argmax(reduced_y != 0, axis=-1) + 1, 0).astype(np.int64)
    return positions, r_index


def readout_delays(positions: np.ndarray, r_index: np.ndarray, lags: Dict[int, int],
                   n_last: int, delta: int, channels: int) -> np.ndarray:
    """Engine readout delay sigma * (Delta + N_M - position - lag) per output cell."""
    lag = np.vectorize(lambda r: lags.get(int(r), 0), otypes=[np.int64])(r_index)
    delays = channels * (delta + n_last - positions - lag)
    return np.where(r_index > 0, delays, 0).astype(np.int64)


def synthesize(t, cfg: Optional[SynthesisConfig] = None) -> Scheme:
    """
    Full synthesis pipeline.

    Args:
        t: Tensor (any rank >= 1); the last axis is the streaming axis
        cfg: Precision, adder latency and channel count

    Returns:
        Scheme ready for engine_init / build_netlist
    """
    cfg = cfg or SynthesisConfig()
    t = as_tensor(t)
    f = factorize(round_to_precision(t, cfg.precision))
    reduced, combinations = build_pattern_set(f.ymap)

    q, delta = adjust_delays(append_zero_column(combinations), cfg.op_delay)
    lags = lane_lags(q)
    q = adjust_channels(q, cfg.channels)
    positions, r_index = compute_delays_indices(reduced)
    d_delay = readout_delays(positions, r_index, lags, f.shape[-1], delta, cfg.channels)

    scheme = Scheme(kernel=f.kernel, q=q, r_index=r_index, d_delay=d_delay,
                    delta=delta, sigma=cfg.channels, n_last=f.shape[-1], op_delay=cfg.op_delay)
    validate_scheme(scheme)
    logger.info("synthesized scheme: L=%d, combinations=%d, Delta=%d, sigma=%d",
                scheme.kernel_size, scheme.combinations, delta, cfg.channels)
    return scheme


def unshared_adds(f: Factorization) -> int:
    """Additions per step of the factored form without shared combinations."""
    terms = np.count_nonzero(f.ymap, axis=-1)
    return int(np.maximum(terms - 1, 0).sum())


# ============================================================================
# VALIDATION AND SERIALIZATION
# ============================================================================

def validate_scheme(scheme: Scheme) -> None:
    """
    Raises:
        MalformedSchemeError: ids out of order, operands that do not exist yet,
            delays outside the ring buffer, inconsistent output tensors
    """
    L = scheme.kernel_size
    if scheme.sigma < 1 or scheme.n_last < 1 or scheme.delta < 0 or scheme.op_delay < 0:
        raise MalformedSchemeError(
            f"bad scheme parameters: sigma={scheme.sigma}, n_last={scheme.n_last}, "
            f"delta={scheme.delta}, op_delay={scheme.op_delay}")
    cols = scheme.columns
    expected = np.arange(L + 1, L + 1 + scheme.combinations)
    if not np.array_equal(scheme.q.ids, expected):
        raise MalformedSchemeError(f"combination ids must run {L + 1}..{scheme.last_id} in order")
    for cid, in1, in2, d1, d2 in scheme.q:
        if not (1 <= in1 < cid and 1 <= in2 < cid):
            raise MalformedSchemeError(f"combination {cid} references operand ({in1}, {in2}) not yet produced")
        if not (0 <= d1 < cols and 0 <= d2 < cols):
            raise MalformedSchemeError(f"combination {cid} delays ({d1}, {d2}) outside [0, {cols - 1}]")
    if scheme.r_index.shape != scheme.d_delay.shape:
        raise MalformedSchemeError("r_index and d_delay shapes differ")
    if scheme.r_index.size and (scheme.r_index.min() < 0 or scheme.r_index.max() > scheme.last_id):
        raise MalformedSchemeError(f"r_index references ids outside [0, {scheme.last_id}]")
    if scheme.d_delay.size and (scheme.d_delay.min() < 0 or scheme.d_delay.max() >= cols):
        raise MalformedSchemeError(f"readout delays outside [0, {cols - 1}]")


def _grid_to_json(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": [int(x) for x in arr.ravel()]}


def _grid_from_json(obj: dict) -> np.ndarray:
    shape = tuple(int(n) for n in obj["shape"])
    data = np.array(obj["data"], dtype=np.int64)
    if data.size != int(np.prod(shape, dtype=np.int64)):
        raise MalformedSchemeError(f"grid data length {data.size} does not match shape {shape}")
    return data.reshape(shape)


def scheme_to_json(scheme: Scheme) -> dict:
    return {
        "kernel": [encode_scalar(x) for x in scheme.kernel],
        "q": [list(row) for row in scheme.q],
        "r_index": _grid_to_json(scheme.r_index),
        "d_delay": _grid_to_json(scheme.d_delay),
        "delta": scheme.delta,
        "sigma": scheme.sigma,
        "n_last": scheme.n_last,
        "op_delay": scheme.op_delay,
    }


def scheme_from_json(obj) -> Scheme:
    """Parse a scheme from a dict or JSON text and validate it."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        scheme = Scheme(
            kernel=decode_array(obj["kernel"]) if obj["kernel"] else np.zeros(0, dtype=np.int64),
            q=CombinationMatrix(np.array(obj["q"], dtype=np.int64).reshape(-1, 5)),
            r_index=_grid_from_json(obj["r_index"]),
            d_delay=_grid_from_json(obj["d_delay"]),
            delta=int(obj["delta"]),
            sigma=int(obj["sigma"]),
            n_last=int(obj["n_last"]),
            op_delay=int(obj.get("op_delay", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, MalformedSchemeError):
            raise
        raise MalformedSchemeError(f"cannot parse scheme: {exc}") from exc
    validate_scheme(scheme)
    return scheme


if __name__ == "__main__":
    print("=" * 70)
    print("SCHEME SYNTHESIS")
    print("=" * 70)

    for label, data in [("vector [2, 3, 4, 2]", [2, 3, 4, 2]),
                        ("matrix 4x3", [[0, 2, 3], [3, 2, 0], [2, 3, 0], [2, 0, 3]])]:
        scheme = synthesize(data, SynthesisConfig(precision=1, op_delay=1, channels=1))
        print(f"\n📊 {label}")
        print(f"  L = {scheme.kernel_size}, combinations = {scheme.combinations}, Delta = {scheme.delta}")
        for row in scheme.q:
            print(f"  q: {row}")
        print(f"  r_index: {scheme.r_index.tolist()}")
        print(f"  d_delay: {scheme.d_delay.tolist()}")
