import re

import networkx as nx
import numpy as np
import pytest

from conftest import random_shape, random_tensor
from kernelizer.engine import engine_run
from kernelizer.errors import MalformedSchemeError
from kernelizer.netlist import (
    ADDER,
    DELAY,
    INPUT_NODE,
    MULTIPLIER,
    build_netlist,
    emit_dot,
    emit_json,
    netlist_from_json,
    netlist_to_json,
    output_name,
    simulate_netlist,
    to_networkx,
)
from kernelizer.scheme import CombinationMatrix, Scheme, SynthesisConfig, synthesize

EDGE = re.compile(r"^\s*(\S+) -> (\S+)(?: \[.*\])?$")


def dot_statements(source):
    lines = [line.strip() for line in source.splitlines()]
    edges = [EDGE.match(line).groups() for line in lines if "->" in line]
    nodes = [line.split(" ", 1)[0] for line in lines if "[" in line and "->" not in line]
    return nodes, edges


def assert_simulation_matches_engine(scheme, stream):
    expected, _ = engine_run(scheme, stream)
    simulated = simulate_netlist(build_netlist(scheme), stream)
    for k, (snapshot, values) in enumerate(zip(expected, simulated)):
        for index in np.ndindex(*scheme.output_shape):
            assert np.isclose(values[output_name(index)], snapshot[index]), f"push {k}, cell {index}"


class TestNames:
    def test_output_names(self):
        assert output_name(()) == "OUT"
        assert output_name((0,)) == "OUT_1"
        assert output_name((2, 0)) == "OUT_3_1"


class TestBuild:
    def test_single_tap(self):
        n = build_netlist(synthesize([5]))
        assert n.nodes == [INPUT_NODE, "N1_0", "OUT"]
        assert n.count(MULTIPLIER) == 1
        assert n.count(ADDER) == 0
        assert n.count(DELAY) == 0
        assert ("N1_0", "OUT") in n.edges

    def test_dot_vector_counts(self, dot_vector):
        n = build_netlist(synthesize(dot_vector))
        assert n.count(MULTIPLIER) == 3
        assert n.count(ADDER) == 3
        assert n.count(DELAY) == 5
        assert n.outputs == ["OUT"]

    def test_multiplier_values(self, dot_vector):
        n = build_netlist(synthesize(dot_vector))
        values = [c.value for c in n.components if c.kind == MULTIPLIER]
        assert values == [2, 3, 4]

    def test_adder_latency(self, dot_vector):
        n = build_netlist(synthesize(dot_vector, SynthesisConfig(op_delay=2, channels=3)))
        assert {c.latency for c in n.components if c.kind == ADDER} == {6}

    def test_shared_adder(self):
        n = build_netlist(synthesize([[2, 2], [2, 2]]))
        assert n.count(ADDER) == 1
        assert ("N2_0", "OUT_1") in n.edges
        assert ("N2_0", "OUT_2") in n.edges

    def test_delay_chains_shared(self):
        n = build_netlist(synthesize([[1, 0, 0, 1], [1, 0, 1, 0]]))
        names = [c.name for c in n.components if c.kind == DELAY]
        assert sorted(names) == ["Z1_1", "Z1_2", "Z1_3", "Z2_1"]

    def test_zero_output_has_no_driver(self):
        n = build_netlist(synthesize([[0, 0], [3, 1]]))
        assert not any(dst == "OUT_1" for _, dst in n.edges)
        assert simulate_netlist(n, [1, 2])[-1]["OUT_1"] == 0

    def test_acyclic(self, pattern_matrix):
        n = build_netlist(synthesize(pattern_matrix, SynthesisConfig(op_delay=1)))
        assert nx.is_directed_acyclic_graph(to_networkx(n))
        assert nx.is_directed_acyclic_graph(to_networkx(n, cut_registers=True))

    def test_malformed_scheme(self):
        bad = Scheme(kernel=[2], q=CombinationMatrix([[2, 1, 3, 0, 0]]), r_index=2, d_delay=0,
                     delta=0, sigma=1, n_last=2)
        with pytest.raises(MalformedSchemeError):
            build_netlist(bad)


class TestEmit:
    def test_single_tap_dot(self):
        source = emit_dot(build_netlist(synthesize([5])))
        nodes, edges = dot_statements(source)
        assert source.lstrip().startswith("digraph scheme {")
        assert source.rstrip().endswith("}")
        assert nodes == [INPUT_NODE, "M1", "OUT"]
        assert edges == [(INPUT_NODE, "M1"), ("M1", "OUT")]

    def test_dot_collapses_internal_nodes(self, dot_vector):
        source = emit_dot(build_netlist(synthesize(dot_vector)))
        nodes, edges = dot_statements(source)
        assert not any(name.startswith("N") and name != INPUT_NODE for name in nodes)
        assert ("Z1_3", "A4") in edges
        assert ("A6", "OUT") in edges
        assert source.count("{") == source.count("}")

    def test_adder_ports_labelled(self, dot_vector):
        source = emit_dot(build_netlist(synthesize(dot_vector)))
        assert "label=in1" in source
        assert "label=in2" in source

    def test_json_round_trip(self, pattern_matrix):
        n = build_netlist(synthesize(pattern_matrix, SynthesisConfig(op_delay=1, channels=2)))
        assert netlist_from_json(emit_json(n)) == n
        assert netlist_from_json(netlist_to_json(n)) == n

    def test_complex_json(self):
        n = build_netlist(synthesize([1j, 1j]))
        back = netlist_from_json(emit_json(n))
        assert back.components[0].value == 1j

    def test_malformed_json(self):
        with pytest.raises(MalformedSchemeError):
            netlist_from_json({"nodes": ["N0"]})


class TestSimulation:
    def test_dot_vector(self, dot_vector):
        results = simulate_netlist(build_netlist(synthesize(dot_vector)), [5, 6, 7, 8])
        assert [r["OUT"] for r in results] == [10, 32, 53, 72]

    def test_matrix(self, pattern_matrix):
        results = simulate_netlist(build_netlist(synthesize(pattern_matrix)), [2, 3, 4])
        assert [results[-1][f"OUT_{i}"] for i in range(1, 5)] == [18, 12, 13, 16]

    @pytest.mark.parametrize("op_delay", [0, 1, 2])
    @pytest.mark.parametrize("channels", [1, 2])
    def test_matches_engine(self, rng, op_delay, channels):
        for _ in range(8):
            t = random_tensor(rng, random_shape(rng, max_rank=3, max_dim=4), values=range(-2, 3))
            s = synthesize(t, SynthesisConfig(op_delay=op_delay, channels=channels))
            stream = rng.integers(-4, 5, size=(t.shape[-1] + s.delta + 2) * channels)
            assert_simulation_matches_engine(s, stream)
