"""
Streaming engine: executes a Scheme sample by sample over a ring buffer.

The buffer has one lane per id (row 0 is a permanent zero lane so an output
with r_index 0 reads 0) and sigma * (N_M + Delta) circular columns. Each push
writes kernel * sample into the kernel lanes at the new cursor column, then
evaluates the combinations in id order, each summing two earlier lanes at
their delayed columns, and finally reads every output cell from its lane at
its readout delay.

With sigma channels the samples are interleaved (ch1, ch2, ..., ch_sigma, ch1, ...)
and every delay is a multiple of sigma, so channels never mix.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

import numpy as np

from kernelizer.errors import MalformedSchemeError
from kernelizer.factored_multiply import OpCount
from kernelizer.scheme import Scheme, validate_scheme

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class RingBuffer:
    lanes: np.ndarray
    cursor: int

    @property
    def columns(self) -> int:
        return int(self.lanes.shape[1])

    def advance(self) -> int:
        self.cursor = (self.cursor + 1) % self.columns
        return self.cursor

    def back(self, delay):
        """Column index `delay` pushes before the cursor (delay may be an array)."""
        return (self.cursor - delay) % self.columns

    def ensure_dtype(self, *values) -> None:
        dtype = np.result_type(self.lanes.dtype, *values)
        if dtype != self.lanes.dtype:
            self.lanes = self.lanes.astype(dtype)


@dataclass(eq=False)
class EngineState:
    scheme: Scheme
    buffer: RingBuffer
    samples_seen: int = 0
    muls: int = 0


def engine_init(scheme: Scheme) -> EngineState:
    """
    Allocate a zeroed ring buffer for `scheme`.

    The cursor starts on the last column so the first push lands on column 0.
    """
    validate_scheme(scheme)
    cols = scheme.columns
    if cols < 1:
        raise MalformedSchemeError("ring buffer would have zero columns")
    lanes = np.zeros((scheme.last_id + 1, cols), dtype=scheme.kernel.dtype)
    logger.debug("engine buffer %d lanes x %d columns", lanes.shape[0], cols)
    return EngineState(scheme=scheme, buffer=RingBuffer(lanes, cols - 1))


def engine_push(state: EngineState, sample) -> np.ndarray:
    """
    Push one sample and return the snapshot of every output cell.

    Exactly L multiplications (kernel * sample) and one addition per combination.
    """
    scheme, buf = state.scheme, state.buffer
    L = scheme.kernel_size
    buf.ensure_dtype(scheme.kernel.dtype, np.asarray(sample).dtype)

    c = buf.advance()
    lanes = buf.lanes
    lanes[1:L + 1, c] = scheme.kernel * sample
    for cid, in1, in2, d1, d2 in scheme.q:
        lanes[cid, c] = lanes[in1, buf.back(d1)] + lanes[in2, buf.back(d2)]

    state.samples_seen += 1
    state.muls += L
    return np.array(lanes[scheme.r_index, buf.back(scheme.d_delay)])


def engine_run(scheme: Scheme, stream: Iterable, sigma: Optional[int] = None) -> Tuple[List[np.ndarray], OpCount]:
    """
    Run a whole (channel-interleaved) stream through a fresh engine.

    Args:
        scheme: Synthesized scheme
        stream: Samples, interleaved by channel when sigma > 1
        sigma: Expected channel count; must match the scheme when given

    Returns:
        (one output snapshot per sample, OpCount)
    """
    if sigma is not None and sigma != scheme.sigma:
        raise MalformedSchemeError(f"stream has {sigma} channels, scheme expects {scheme.sigma}")
    state = engine_init(scheme)
    outputs = [engine_push(state, x) for x in stream]
    cost = OpCount(adds=scheme.combinations * state.samples_seen, muls=state.muls)
    return outputs, cost


def deinterleave(outputs: List[np.ndarray], sigma: int) -> List[List[np.ndarray]]:
    """Split per-push snapshots into sigma per-channel sequences."""
    return [outputs[c::sigma] for c in range(sigma)]


def interleave(streams: List[List]) -> List:
    """Merge equal-length per-channel streams into one (ch1, ch2, ..., ch1, ...)."""
    if len({len(s) for s in streams}) > 1:
        raise MalformedSchemeError("channel streams must have equal length")
    return [x for column in zip(*streams) for x in column]
