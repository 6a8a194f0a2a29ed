"""
Command-line front end.

    python -m kernelizer factorize  tensor.json [--precision EPS]
    python -m kernelizer multiply   tensor.json vector.json --mode direct|recursive [--axis M]
    python -m kernelizer multiply   tensor.json stream.csv --mode iterative
    python -m kernelizer synthesize tensor.json [--precision EPS] [--delay D] [--channels S]
    python -m kernelizer run        scheme.json stream.csv
    python -m kernelizer emit-dot   [--scheme] scheme.json [--json]
    python -m kernelizer demo       --synthetic n_s=1,A_l=2,A_m=1,A_s=4,seed=3
    python -m kernelizer demo       --bank bank.json --stream samples.csv

Results go to stdout (or -o FILE) as JSON; statistics go to stderr.
Streams are CSV (one value, or "re,im", per line), a JSON list, or "-" for stdin.
"""

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from io import StringIO
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from kernelizer.engine import engine_init, engine_push
from kernelizer.errors import (
    InternalInvariantError,
    KernelizerError,
    MalformedSchemeError,
    MalformedStreamError,
    MissingPrecisionError,
    ShapeMismatchError,
    UnsupportedAxisError,
)
from kernelizer.factored_multiply import (
    ProductWindow,
    iterative_tensor_vec_step,
    op_ratios,
    recursive_matvec,
    recursive_tensor_vec,
    tensor_vec,
)
from kernelizer.matched_filter import (
    FilterBankConfig,
    MatchedFilterReceiver,
    build_synthetic_bank,
    prepare_bank,
    transmit,
)
from kernelizer.naive import naive_recursive_matvec, naive_recursive_tensor_vec, naive_sliding, naive_tensor_vec
from kernelizer.netlist import build_netlist, emit_dot, emit_json
from kernelizer.scheme import SynthesisConfig, scheme_from_json, scheme_to_json, synthesize
from kernelizer.tensor_core import (
    DenseTensor,
    decode_array,
    describe,
    encode_scalar,
    factorization_to_json,
    factorize,
    kernel_size_bound,
    reconstruct,
    round_to_precision,
    tensor_from_json,
    uniqueness_bound,
)

logger = logging.getLogger(__name__)

LOG_ENV = "KERNELIZER_LOG"

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_BAD_INPUT = 2
EXIT_NEEDS_PRECISION = 3
EXIT_SHAPE = 4
EXIT_SCHEME = 5

# first match wins, so subclasses come before their bases
EXIT_CODES = [
    (MissingPrecisionError, EXIT_NEEDS_PRECISION),
    (ShapeMismatchError, EXIT_SHAPE),
    (UnsupportedAxisError, EXIT_SHAPE),
    (MalformedSchemeError, EXIT_SCHEME),
    (MalformedStreamError, EXIT_SCHEME),
    (InternalInvariantError, EXIT_INTERNAL),
    (KernelizerError, EXIT_BAD_INPUT),
    (ValueError, EXIT_BAD_INPUT),
    (OSError, EXIT_BAD_INPUT),
]


@dataclass(frozen=True)
class CliConfig:
    command: str
    inputs: tuple
    output: Optional[str] = None
    precision: Optional[float] = None
    delay: int = 0
    channels: int = 1
    axis: Optional[int] = None
    mode: str = "direct"
    seed: int = 42
    verbosity: int = 0

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliConfig":
        inputs = tuple(p for p in (getattr(args, "tensor", None), getattr(args, "operand", None),
                                   getattr(args, "scheme", None) or getattr(args, "scheme_file", None),
                                   getattr(args, "stream", None)) if p)
        return cls(command=args.command, inputs=inputs, output=args.output,
                   precision=getattr(args, "precision", None), delay=getattr(args, "delay", 0),
                   channels=getattr(args, "channels", 1), axis=getattr(args, "axis", None),
                   mode=getattr(args, "mode", "direct"), seed=getattr(args, "seed", 42),
                   verbosity=args.verbose)


def configure_logging(verbosity: int = 0) -> None:
    """KERNELIZER_LOG sets the level (default WARNING); -v / -vv override it."""
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    if verbosity >= 2:
        level = "DEBUG"
    elif verbosity == 1:
        level = "INFO"
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr, force=True)


# ============================================================================
# I/O HELPERS
# ============================================================================

def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def load_json(path: str) -> Any:
    return json.loads(_read_text(path))


def load_tensor(path: str, precision: Optional[float]) -> DenseTensor:
    """Load a tensor; float data must come with a precision and is rounded to it."""
    t = tensor_from_json(load_json(path))
    if precision is not None:
        return round_to_precision(t, precision)
    if not t.is_exact:
        raise MissingPrecisionError(f"{path} holds non-integer data; pass --precision")
    return t


def load_vector(path: str) -> np.ndarray:
    obj = load_json(path)
    if isinstance(obj, dict):
        values = tensor_from_json(obj).values
        if values.ndim != 1:
            raise ShapeMismatchError(f"{path} must hold a vector, got shape {values.shape}")
        return values
    return decode_array(obj)


def load_stream(path: str) -> np.ndarray:
    """
    Samples from a JSON list or a CSV file with one value (or "re,im") per line.

    Raises:
        MalformedStreamError: unparsable content
    """
    text = _read_text(path)
    if not text.strip():
        return np.zeros(0, dtype=np.int64)
    if path.endswith(".json") or text.lstrip().startswith("["):
        try:
            return decode_array(json.loads(text))
        except ValueError as exc:
            raise MalformedStreamError(f"cannot parse stream {path}: {exc}") from exc

    try:
        frame = pd.read_csv(StringIO(text), header=None, comment="#", skip_blank_lines=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise MalformedStreamError(f"cannot parse stream {path}: {exc}") from exc
    if frame.empty:
        return np.zeros(0, dtype=np.int64)
    if frame.shape[1] > 2 or not all(pd.api.types.is_numeric_dtype(t) for t in frame.dtypes):
        raise MalformedStreamError(f"{path}: expected one value or an re,im pair per line")
    if frame.isna().any().any():
        raise MalformedStreamError(f"{path}: missing values")
    if frame.shape[1] == 2:
        return frame[0].to_numpy(dtype=float) + 1j * frame[1].to_numpy(dtype=float)
    return frame[0].to_numpy()


def array_to_json(arr) -> Any:
    arr = np.asarray(arr)
    if arr.ndim == 0:
        return encode_scalar(arr.item())
    return {"shape": list(arr.shape), "data": [encode_scalar(x) for x in arr.ravel()]}


def _format_ratio(ratio) -> str:
    return "undefined" if ratio is None else f"{ratio} ({float(ratio):.4f})"


class _Output:
    """Writes to -o FILE or stdout."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self.lines: List[str] = []

    def write(self, text: str) -> None:
        self.lines.append(text)

    def write_json(self, obj: Any, indent: Optional[int] = None) -> None:
        self.write(json.dumps(obj, indent=indent))

    def flush(self) -> None:
        text = "\n".join(self.lines) + ("\n" if self.lines else "")
        if self.path and self.path != "-":
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _stat(line: str) -> None:
    print(line, file=sys.stderr)


# ============================================================================
# COMMANDS
# ============================================================================

def cmd_factorize(cfg: CliConfig, out: _Output) -> int:
    t = load_tensor(cfg.inputs[0], cfg.precision)
    f = factorize(t)
    out.write_json(factorization_to_json(f), indent=2)

    for line in describe(f):
        _stat(line)
    _stat(f"kernel size bound: {kernel_size_bound(t, cfg.precision or 1)}")
    if f.rank >= 2 and f.kernel_size >= 1:
        _stat(f"uniqueness bound holds: {uniqueness_bound(f.shape, f.kernel_size)}")
    else:
        _stat("uniqueness bound holds: n/a")
    return EXIT_OK


def cmd_multiply(cfg: CliConfig, out: _Output) -> int:
    t = load_tensor(cfg.inputs[0], cfg.precision)
    f = factorize(t)
    axis = cfg.axis or f.rank

    if cfg.mode == "iterative":
        stream = load_stream(cfg.inputs[1])
        window = ProductWindow.cold(f)
        cost = None
        for sample in stream:
            result, window, step = iterative_tensor_vec_step(window, f, sample, axis)
            cost = step if cost is None else cost + step
            out.write_json(array_to_json(result))
        _, naive = naive_sliding(t.values, stream)
        if cost is None:
            _stat("empty stream")
            return EXIT_OK
    else:
        v = load_vector(cfg.inputs[1])
        if cfg.mode == "direct":
            result, cost = tensor_vec(f, v, axis)
            _, naive = naive_tensor_vec(t.values, v, axis)
        elif f.rank == 2 and axis == 2:
            result, cost = recursive_matvec(f, v)
            _, naive = naive_recursive_matvec(t.values, v)
        else:
            result, cost = recursive_tensor_vec(f, v, axis)
            _, naive = naive_recursive_tensor_vec(t.values, v, axis)
        out.write_json(array_to_json(result))

    c_add, c_mul = op_ratios(cost, naive)
    _stat(f"mode: {cfg.mode}, kernel size L: {f.kernel_size}")
    _stat(f"factored: {cost.muls} muls, {cost.adds} adds; naive: {naive.muls} muls, {naive.adds} adds")
    _stat(f"C+ = {_format_ratio(c_add)}")
    _stat(f"C* = {_format_ratio(c_mul)}")
    return EXIT_OK


def cmd_synthesize(cfg: CliConfig, out: _Output) -> int:
    t = load_tensor(cfg.inputs[0], cfg.precision)
    scheme = synthesize(t, SynthesisConfig(precision=cfg.precision or 1, op_delay=cfg.delay,
                                           channels=cfg.channels))
    out.write_json(scheme_to_json(scheme), indent=2)
    _stat(f"L = {scheme.kernel_size}, combinations = {scheme.combinations}, Delta = {scheme.delta}, "
          f"sigma = {scheme.sigma}, warm-up = {scheme.warmup} samples")
    return EXIT_OK


def cmd_run(cfg: CliConfig, out: _Output) -> int:
    scheme = scheme_from_json(load_json(cfg.inputs[0]))
    stream = load_stream(cfg.inputs[1])
    state = engine_init(scheme)
    for sample in stream:
        out.write_json(array_to_json(engine_push(state, sample)))
    _stat(f"{state.samples_seen} samples, {state.muls} multiplications, "
          f"{scheme.combinations * state.samples_seen} additions")
    return EXIT_OK


def cmd_emit_dot(cfg: CliConfig, out: _Output, as_json: bool = False) -> int:
    netlist = build_netlist(scheme_from_json(load_json(cfg.inputs[0])))
    out.write(emit_json(netlist) if as_json else emit_dot(netlist).rstrip("\n"))
    return EXIT_OK


def parse_synthetic(text: str) -> Dict[str, str]:
    """'n_s=1,A_l=2,...' -> {'n_s': '1', 'A_l': '2', ...}"""
    pairs = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"synthetic bank option {item!r} is not key=value")
        pairs[key.strip()] = value.strip()
    return pairs


def cmd_demo(cfg: CliConfig, out: _Output, args: argparse.Namespace) -> int:
    if args.synthetic is not None:
        opts = parse_synthetic(args.synthetic)
        known = {"n_s", "A_l", "A_m", "A_s", "seed", "eps", "pivot"}
        unknown = set(opts) - known
        if unknown:
            raise ValueError(f"unknown synthetic bank options: {sorted(unknown)}")
        bank_cfg = FilterBankConfig(
            bits_per_symbol=int(opts.get("n_s", 1)), sequence_length=int(opts.get("A_l", 1)),
            variants=int(opts.get("A_m", 1)), samples_per_symbol=int(opts.get("A_s", 4)),
            precision=float(opts.get("eps", cfg.precision or 1e-3)))
        seed = int(opts.get("seed", cfg.seed))
        bank = prepare_bank(build_synthetic_bank(bank_cfg, seed), bank_cfg.precision,
                            int(opts.get("pivot", 1)))
        rng = np.random.default_rng(seed + 1)
        sent = [int(m) for m in rng.integers(1, bank_cfg.rows + 1, size=args.symbols)]
        stream = transmit(reconstruct(bank).values, sent)
        bits = bank_cfg.bits_per_symbol
    else:
        if args.bank is None or args.stream is None:
            raise ValueError("demo needs --synthetic or both --bank and --stream")
        raw = tensor_from_json(load_json(args.bank))
        if not raw.is_exact and cfg.precision is None:
            raise MissingPrecisionError(f"{args.bank} holds non-integer data; pass --precision")
        bank = prepare_bank(raw.values, cfg.precision or 1, args.pivot)
        stream = load_stream(args.stream)
        sent = None
        bits = args.bits

    receiver = MatchedFilterReceiver(bank, bits, stride=args.stride)
    reports = receiver.run(stream)
    for i, (received, report) in enumerate(reports):
        line = {"sample": received, **report.to_json()}
        if sent is not None and i < len(sent):
            line["sent_row"] = sent[i]
        out.write_json(line)

    _stat(f"bank {bank.shape}, kernel size L = {bank.kernel_size}, {len(reports)} decisions, "
          f"{receiver.muls} multiplications")
    if sent is not None:
        correct = sum(1 for (_, r), m in zip(reports, sent) if r.argmax_row == m)
        _stat(f"rows recovered: {correct}/{len(sent)}")
    return EXIT_OK


# ============================================================================
# ENTRY POINT
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kernelizer",
                                     description="Kernel/commutator tensor factorization toolkit")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for INFO, -vv for DEBUG (overrides KERNELIZER_LOG)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, precision=True):
        p.add_argument("-o", "--output", default=None, help="output file (default stdout)")
        if precision:
            p.add_argument("--precision", type=float, default=None, help="rounding precision epsilon")

    p = sub.add_parser("factorize", help="factor a tensor into kernel + commutator")
    p.add_argument("tensor")
    common(p)

    p = sub.add_parser("multiply", help="factored tensor-vector product")
    p.add_argument("tensor")
    p.add_argument("operand", help="vector JSON (direct/recursive) or sample stream (iterative)")
    p.add_argument("--mode", choices=["direct", "recursive", "iterative"], default="direct")
    p.add_argument("--axis", type=int, default=None, help="1-based axis (default: last)")
    common(p)

    p = sub.add_parser("synthesize", help="build a shared-adder scheme")
    p.add_argument("tensor")
    p.add_argument("--delay", type=int, default=0, help="adder latency in clock counts")
    p.add_argument("--channels", type=int, default=1, help="interleaved channel count")
    common(p)

    p = sub.add_parser("run", help="stream samples through a scheme")
    p.add_argument("scheme")
    p.add_argument("stream")
    common(p, precision=False)

    p = sub.add_parser("emit-dot", help="netlist of a scheme as DOT (or JSON)")
    p.add_argument("scheme", nargs="?", default=None)
    p.add_argument("--scheme", dest="scheme_file", default=None, help="scheme JSON (same as the positional form)")
    p.add_argument("--json", action="store_true", help="emit the JSON netlist instead")
    common(p, precision=False)

    p = sub.add_parser("demo", help="matched-filter demodulation")
    p.add_argument("--synthetic", default=None, help="n_s=..,A_l=..,A_m=..,A_s=..,seed=..[,eps=..,pivot=..]")
    p.add_argument("--bank", default=None, help="complex bank JSON")
    p.add_argument("--stream", default=None, help="received samples")
    p.add_argument("--bits", type=int, default=1, help="bits per symbol for --bank")
    p.add_argument("--pivot", type=int, default=1, help="1-based normalization column (0 disables)")
    p.add_argument("--stride", type=int, default=None, help="samples between decisions (default N)")
    p.add_argument("--symbols", type=int, default=8, help="symbols transmitted in --synthetic mode")
    p.add_argument("--seed", type=int, default=42)
    common(p)
    return parser


def exit_code_for(exc: BaseException) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_INTERNAL


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "emit-dot" and not (args.scheme or args.scheme_file):
        parser.error("emit-dot needs a scheme file")
    configure_logging(args.verbose)
    cfg = CliConfig.from_args(args)
    out = _Output(cfg.output)

    try:
        if cfg.command == "factorize":
            code = cmd_factorize(cfg, out)
        elif cfg.command == "multiply":
            code = cmd_multiply(cfg, out)
        elif cfg.command == "synthesize":
            code = cmd_synthesize(cfg, out)
        elif cfg.command == "run":
            code = cmd_run(cfg, out)
        elif cfg.command == "emit-dot":
            code = cmd_emit_dot(cfg, out, as_json=args.json)
        else:
            code = cmd_demo(cfg, out, args)
    except json.JSONDecodeError as exc:
        print(f"error: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (KernelizerError, ValueError, OSError) as exc:
        code = exit_code_for(exc)
        logger.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return code

    out.flush()
    return code


if __name__ == "__main__":
    sys.exit(main())
