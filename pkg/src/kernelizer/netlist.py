"""
Netlist construction, emission and clocked simulation for a Scheme.

Building blocks:
    N0            input node
    M<l>          multiplier by kernel tap l, N0 -> N<l>_0
    A<c>          two-input adder producing combination c into N<c>_0, latency op_delay * sigma
    Z<x>_<j>      unit delay (register), N<x>_<j-1> -> N<x>_<j>
    OUT_<i>_<j>.. output node of result cell (i, j, ...) (1-based), wired from N<r>_<d>

Node N<x>_<j> carries lane x delayed by j clock cycles. Delay chains are shared:
a chain is only extended when the node it needs does not exist yet.

Edges are (source, destination) pairs of node names and component ports
("M1.in", "M1.out", "A5.in1", "A5.in2", "Z4_2.in", ...). An output whose cell
reads lane 0 has no driver and always reads 0.
"""

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import graphviz
import networkx as nx
import numpy as np

from kernelizer.errors import InternalInvariantError, MalformedSchemeError
from kernelizer.scheme import Scheme, validate_scheme
from kernelizer.tensor_core import decode_scalar, encode_scalar

logger = logging.getLogger(__name__)

INPUT_NODE = "N0"
MULTIPLIER, ADDER, DELAY = "multiplier", "adder", "delay"


@dataclass(frozen=True)
class Component:
    name: str
    kind: str
    value: Any = None
    latency: int = 0


@dataclass
class Netlist:
    nodes: List[str] = field(default_factory=list)
    components: List[Component] = field(default_factory=list)
    edges: List[Tuple[str, str]] = field(default_factory=list)

    def count(self, kind: str) -> int:
        return sum(1 for c in self.components if c.kind == kind)

    @property
    def outputs(self) -> List[str]:
        return [n for n in self.nodes if n.startswith("OUT")]


def node_name(lane: int, depth: int) -> str:
    return f"N{lane}_{depth}"


def output_name(index: Sequence[int]) -> str:
    """Output node for a 0-based result cell index (named 1-based); 'OUT' for a scalar result."""
    return "_".join(["OUT"] + [str(i + 1) for i in index])


# ============================================================================
# CONSTRUCTION
# ============================================================================

class _Builder:
    def __init__(self):
        self.netlist = Netlist(nodes=[INPUT_NODE])
        self._known = {INPUT_NODE}

    def add_node(self, name: str) -> None:
        if name in self._known:
            raise InternalInvariantError(f"node {name} created twice")
        self._known.add(name)
        self.netlist.nodes.append(name)

    def add_component(self, comp: Component, inputs: Sequence[Tuple[str, str]], output: Optional[str]) -> None:
        self.netlist.components.append(comp)
        for port, node in inputs:
            self.netlist.edges.append((node, f"{comp.name}.{port}"))
        if output is not None:
            self.netlist.edges.append((f"{comp.name}.out", output))

    def tap(self, lane: int, depth: int) -> str:
        """Node carrying `lane` delayed by `depth`, extending its delay chain as needed."""
        if node_name(lane, 0) not in self._known:
            raise MalformedSchemeError(f"lane {lane} has no producing component")
        for j in range(1, depth + 1):
            name = node_name(lane, j)
            if name in self._known:
                continue
            self.add_node(name)
            self.add_component(Component(f"Z{lane}_{j}", DELAY),
                               [("in", node_name(lane, j - 1))], name)
        return node_name(lane, depth)


def build_netlist(scheme: Scheme) -> Netlist:
    """
    Translate a Scheme into multipliers, adders, unit delays and output nodes.

    Adders carry latency op_delay * sigma, so operand tau is tapped at depth
    d_tau - op_delay * sigma of its source chain.
    """
    validate_scheme(scheme)
    b = _Builder()
    latency = scheme.op_delay * scheme.sigma

    for lane, value in enumerate(scheme.kernel, start=1):
        b.add_node(node_name(lane, 0))
        b.add_component(Component(f"M{lane}", MULTIPLIER, value=value.item()),
                        [("in", INPUT_NODE)], node_name(lane, 0))

    for cid, in1, in2, d1, d2 in scheme.q:
        inputs = [("in1", b.tap(in1, d1 - latency)), ("in2", b.tap(in2, d2 - latency))]
        b.add_node(node_name(cid, 0))
        b.add_component(Component(f"A{cid}", ADDER, latency=latency), inputs, node_name(cid, 0))

    for index in np.ndindex(*scheme.output_shape):
        out = output_name(index)
        b.add_node(out)
        lane = int(scheme.r_index[index])
        if lane:
            b.netlist.edges.append((b.tap(lane, int(scheme.d_delay[index])), out))

    netlist = b.netlist
    if not nx.is_directed_acyclic_graph(to_networkx(netlist, cut_registers=True)):
        raise InternalInvariantError("netlist has a combinational cycle")
    logger.info("netlist: %d multipliers, %d adders, %d unit delays, %d outputs",
                netlist.count(MULTIPLIER), netlist.count(ADDER), netlist.count(DELAY), len(netlist.outputs))
    return netlist


# ============================================================================
# GRAPH VIEWS
# ============================================================================

def _owner(endpoint: str) -> str:
    return endpoint.split(".", 1)[0]


def to_networkx(netlist: Netlist, cut_registers: bool = False) -> nx.DiGraph:
    """
    One graph vertex per node and per component; port edges become plain edges.

    With cut_registers the edges entering unit delays are dropped, which leaves
    the combinational part of the circuit.
    """
    g = nx.DiGraph()
    for name in netlist.nodes:
        g.add_node(name, kind="node")
    for comp in netlist.components:
        g.add_node(comp.name, kind=comp.kind)
    delays = {c.name for c in netlist.components if c.kind == DELAY}
    for src, dst in netlist.edges:
        u, v = _owner(src), _owner(dst)
        if cut_registers and v in delays:
            continue
        g.add_edge(u, v, port=dst.split(".", 1)[1] if "." in dst else None)
    return g


def _wiring(netlist: Netlist) -> Tuple[Dict[str, Dict[str, str]], Dict[str, str]]:
    """(component -> {port: input node}, node -> driving endpoint)."""
    ports: Dict[str, Dict[str, str]] = {c.name: {} for c in netlist.components}
    drivers: Dict[str, str] = {}
    for src, dst in netlist.edges:
        if "." in dst:
            comp, port = dst.split(".", 1)
            if comp not in ports:
                raise MalformedSchemeError(f"edge into unknown component {comp}")
            ports[comp][port] = src
        else:
            if dst in drivers:
                raise MalformedSchemeError(f"node {dst} has two drivers")
            drivers[dst] = src
    return ports, drivers


# ============================================================================
# EMISSION
# ============================================================================

def _label(comp: Component) -> Tuple[str, str]:
    if comp.kind == MULTIPLIER:
        return f"x {encode_scalar(comp.value)}", "circle"
    if comp.kind == ADDER:
        suffix = f" (+{comp.latency})" if comp.latency else ""
        return f"+ {comp.name}{suffix}", "circle"
    return "z^-1", "box"


def emit_dot(netlist: Netlist) -> str:
    """
    DOT text of the netlist.

    Only components and terminals (input and outputs) are drawn; every internal
    node is collapsed into an edge from its driver to each consumer.
    """
    ports, drivers = _wiring(netlist)
    g = graphviz.Digraph("scheme")
    if netlist.components or netlist.outputs:
        g.node(INPUT_NODE, label="in", shape="invtriangle")
    for comp in netlist.components:
        label, shape = _label(comp)
        g.node(comp.name, label=label, shape=shape)
    for out in netlist.outputs:
        g.node(out, label=out, shape="triangle")

    def source(node: str) -> Optional[str]:
        if node == INPUT_NODE:
            return INPUT_NODE
        driver = drivers.get(node)
        if driver is None:
            return None
        return _owner(driver) if "." in driver else source(driver)

    for comp in netlist.components:
        for port, node in sorted(ports[comp.name].items()):
            src = source(node)
            if src is not None:
                g.edge(src, comp.name, label=port if comp.kind == ADDER else None)
    for out in netlist.outputs:
        src = source(out)
        if src is not None:
            g.edge(src, out)
    return g.source


def netlist_to_json(netlist: Netlist) -> dict:
    components = []
    for comp in netlist.components:
        entry = {"name": comp.name, "kind": comp.kind}
        if comp.kind == MULTIPLIER:
            entry["value"] = encode_scalar(comp.value)
        if comp.kind == ADDER:
            entry["latency"] = comp.latency
        components.append(entry)
    return {
        "nodes": list(netlist.nodes),
        "components": components,
        "edges": [[src, dst] for src, dst in netlist.edges],
    }


def emit_json(netlist: Netlist) -> str:
    return json.dumps(netlist_to_json(netlist), indent=2)


def netlist_from_json(obj) -> Netlist:
    """Inverse of emit_json / netlist_to_json."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        components = [
            Component(name=c["name"], kind=c["kind"],
                      value=decode_scalar(c["value"]) if "value" in c else None,
                      latency=int(c.get("latency", 0)))
            for c in obj["components"]
        ]
        return Netlist(nodes=list(obj["nodes"]), components=components,
                       edges=[(str(src), str(dst)) for src, dst in obj["edges"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedSchemeError(f"cannot parse netlist: {exc}") from exc


# ============================================================================
# CLOCKED SIMULATION
# ============================================================================

def simulate_netlist(netlist: Netlist, stream) -> List[Dict[str, Any]]:
    """
    Clock the netlist once per input sample.

    Unit delays are registers (output = value latched on the previous cycle),
    adders are pipelines of their latency, multipliers are combinational.

    Returns:
        One {output node: value} dict per sample
    """
    ports, drivers = _wiring(netlist)
    comps = {c.name: c for c in netlist.components}
    order = list(nx.lexicographical_topological_sort(to_networkx(netlist, cut_registers=True)))

    registers = {name: 0 for name, c in comps.items() if c.kind == DELAY}
    pipes = {name: deque([0] * c.latency) for name, c in comps.items()
             if c.kind == ADDER and c.latency}
    results = []

    for sample in stream:
        values: Dict[str, Any] = {}
        produced: Dict[str, Any] = {}
        for vertex in order:
            comp = comps.get(vertex)
            if comp is None:
                if vertex == INPUT_NODE:
                    values[vertex] = sample
                    continue
                driver = drivers.get(vertex)
                if driver is None:
                    values[vertex] = 0
                elif "." in driver:
                    values[vertex] = produced[_owner(driver)]
                else:
                    values[vertex] = values[driver]
                continue

            inputs = ports[vertex]
            if comp.kind == MULTIPLIER:
                produced[vertex] = comp.value * values[inputs["in"]]
            elif comp.kind == DELAY:
                produced[vertex] = registers[vertex]
            else:
                total = values[inputs["in1"]] + values[inputs["in2"]]
                if comp.latency:
                    produced[vertex] = pipes[vertex].popleft()
                    pipes[vertex].append(total)
                else:
                    produced[vertex] = total

        for name in registers:
            registers[name] = values[ports[name]["in"]]
        results.append({out: values[out] for out in netlist.outputs})
    return results
