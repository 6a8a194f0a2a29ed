"""Kernel/commutator tensor factorization, factored products and streaming schemes."""

from kernelizer.tensor_core import DenseTensor, Factorization, as_tensor, factorize, reconstruct, round_to_precision
from kernelizer.factored_multiply import (
    OpCount,
    dot_factored,
    matvec_factored,
    op_ratios,
    recursive_tensor_vec,
    tensor_tensor,
    tensor_vec,
)
from kernelizer.scheme import Scheme, SynthesisConfig, synthesize
from kernelizer.engine import engine_init, engine_push, engine_run
from kernelizer.netlist import build_netlist, emit_dot, emit_json

__all__ = [
    "DenseTensor", "Factorization", "as_tensor", "factorize", "reconstruct", "round_to_precision",
    "OpCount", "dot_factored", "matvec_factored", "op_ratios", "recursive_tensor_vec", "tensor_tensor",
    "tensor_vec",
    "Scheme", "SynthesisConfig", "synthesize",
    "engine_init", "engine_push", "engine_run",
    "build_netlist", "emit_dot", "emit_json",
]
