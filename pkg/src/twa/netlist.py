"""Gate-level netlist model, JSON front-end and graph utilities."""

import heapq
import json
from dataclasses import dataclass
from functools import cached_property

import networkx as nx

from .cells import CellKind
from .errors import (CombinationalLoop, DuplicateDriver, SchemaError,
                     UndrivenNet, UnknownNet)


@dataclass(frozen=True)
class GateInstance:
    id: str
    kind: CellKind
    input_nets: tuple
    output_net: str


@dataclass(frozen=True)
class FlipFlop:
    id: str
    d_net: str
    q_net: str
    init_value: int = 0


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    subject: str
    detail: str = ""

    def __str__(self):
        return f"{self.kind}({self.subject})"


@dataclass(frozen=True)
class Netlist:
    """Immutable circuit graph.

    Construction does not validate; use :func:`parse_netlist` or
    :func:`validate_netlist` for that.
    """
    name: str
    primary_inputs: tuple
    primary_outputs: tuple
    gates: tuple
    flipflops: tuple = ()

    @cached_property
    def gate_by_id(self):
        return {g.id: g for g in self.gates}

    @cached_property
    def ff_by_id(self):
        return {f.id: f for f in self.flipflops}

    @cached_property
    def driver(self):
        """Net name -> ('pi', net) | ('gate', gate id) | ('ff', ff id).

        When a net has several drivers the last one wins; validation
        reports the conflict.
        """
        d = {}
        for p in self.primary_inputs:
            d[p] = ("pi", p)
        for f in self.flipflops:
            d[f.q_net] = ("ff", f.id)
        for g in self.gates:
            d[g.output_net] = ("gate", g.id)
        return d

    @cached_property
    def fanout(self):
        """Net name -> list of (gate id, pin index) it feeds."""
        fo = {}
        for g in self.gates:
            for pin, net in enumerate(g.input_nets):
                fo.setdefault(net, []).append((g.id, pin))
        return fo

    @cached_property
    def ff_by_d(self):
        out = {}
        for f in self.flipflops:
            out.setdefault(f.d_net, []).append(f.id)
        return out

    @cached_property
    def nets(self):
        """Every net name mentioned anywhere, sorted."""
        names = set(self.primary_inputs) | set(self.primary_outputs)
        for g in self.gates:
            names.update(g.input_nets)
            names.add(g.output_net)
        for f in self.flipflops:
            names.add(f.d_net)
            names.add(f.q_net)
        return tuple(sorted(names))

    @property
    def scan_inputs(self):
        """Pseudo-primary inputs of the full-scan view: PIs, then FF q nets."""
        return tuple(self.primary_inputs) + tuple(f.q_net for f in self.flipflops)

    @property
    def scan_outputs(self):
        """Observable nets of the full-scan view: POs, then FF d nets."""
        seen = []
        for net in tuple(self.primary_outputs) + tuple(f.d_net for f in self.flipflops):
            if net not in seen:
                seen.append(net)
        return tuple(seen)

    def is_source(self, net):
        kind = self.driver.get(net, (None,))[0]
        return kind in ("pi", "ff")


# -- JSON ---------------------------------------------------------------------

def _require(obj, key, typ, where):
    if key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    val = obj[key]
    if not isinstance(val, typ):
        raise SchemaError(f"{where}: field {key!r} has wrong type")
    return val


def _str_list(val, where):
    if not all(isinstance(v, str) for v in val):
        raise SchemaError(f"{where}: expected a list of strings")
    return tuple(val)


def netlist_from_dict(doc):
    if not isinstance(doc, dict):
        raise SchemaError("netlist document must be a JSON object")
    name = _require(doc, "name", str, "netlist")
    inputs = _str_list(_require(doc, "inputs", list, "netlist"), "inputs")
    outputs = _str_list(_require(doc, "outputs", list, "netlist"), "outputs")
    gates = []
    for i, g in enumerate(_require(doc, "gates", list, "netlist")):
        where = f"gates[{i}]"
        if not isinstance(g, dict):
            raise SchemaError(f"{where}: expected an object")
        gid = _require(g, "id", str, where)
        kind_name = _require(g, "kind", str, where)
        try:
            kind = CellKind(kind_name)
        except ValueError:
            raise SchemaError(f"{where}: unknown cell kind {kind_name!r}") from None
        ins = _str_list(_require(g, "in", list, where), where)
        if len(ins) != kind.arity:
            raise SchemaError(f"{where}: {kind.value} takes {kind.arity} inputs, got {len(ins)}")
        gates.append(GateInstance(gid, kind, ins, _require(g, "out", str, where)))
    ffs = []
    for i, f in enumerate(doc.get("ffs", [])):
        where = f"ffs[{i}]"
        if not isinstance(f, dict):
            raise SchemaError(f"{where}: expected an object")
        init = f.get("init", 0)
        if init not in (0, 1) or isinstance(init, bool):
            raise SchemaError(f"{where}: init must be 0 or 1")
        ffs.append(FlipFlop(_require(f, "id", str, where), _require(f, "d", str, where),
                            _require(f, "q", str, where), init))
    return Netlist(name, inputs, outputs, tuple(gates), tuple(ffs))


def parse_netlist(text):
    """Parse a netlist JSON document and check driver invariants.

    Combinational loops are not rejected here; :func:`validate_netlist`
    and :func:`topological_order` report them.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e}") from None
    n = netlist_from_dict(doc)
    for diag in validate_netlist(n, check_loops=False):
        if diag.kind == "DuplicateDriver":
            raise DuplicateDriver(diag.subject)
        if diag.kind == "UndrivenNet":
            raise UndrivenNet(diag.subject)
        raise SchemaError(str(diag))
    return n


def netlist_to_dict(n):
    return {
        "name": n.name,
        "inputs": list(n.primary_inputs),
        "outputs": list(n.primary_outputs),
        "gates": [{"id": g.id, "kind": g.kind.value, "in": list(g.input_nets), "out": g.output_net}
                  for g in n.gates],
        "ffs": [{"id": f.id, "d": f.d_net, "q": f.q_net, "init": f.init_value} for f in n.flipflops],
    }


def serialize_netlist(n):
    return json.dumps(netlist_to_dict(n), indent=1)


def load_netlist(path):
    with open(path, encoding="utf-8") as fh:
        return parse_netlist(fh.read())


# -- validation and graph utilities ---------------------------------------------

def _comb_graph(n):
    """Gate-to-gate dependency graph through combinational nets only."""
    g = nx.DiGraph()
    g.add_nodes_from(x.id for x in n.gates)
    drv = n.driver
    for gate in n.gates:
        for net in gate.input_nets:
            src = drv.get(net)
            if src and src[0] == "gate":
                g.add_edge(src[1], gate.id)
    return g


def validate_netlist(n, check_loops=True):
    """Return a list of :class:`Diagnostic`; empty iff the netlist is well formed."""
    diags = []
    counts = {}
    for p in n.primary_inputs:
        counts[p] = counts.get(p, 0) + 1
    for f in n.flipflops:
        counts[f.q_net] = counts.get(f.q_net, 0) + 1
    for g in n.gates:
        counts[g.output_net] = counts.get(g.output_net, 0) + 1
    for net in sorted(counts):
        if counts[net] > 1:
            diags.append(Diagnostic("DuplicateDriver", net, f"{counts[net]} drivers"))

    ids = {}
    for x in list(n.gates) + list(n.flipflops):
        ids[x.id] = ids.get(x.id, 0) + 1
    for i in sorted(ids):
        if ids[i] > 1:
            diags.append(Diagnostic("DuplicateId", i))

    for g in n.gates:
        if len(g.input_nets) != g.kind.arity:
            diags.append(Diagnostic("ArityMismatch", g.id,
                                    f"{g.kind.value} takes {g.kind.arity} inputs"))

    used = set(n.primary_outputs)
    for g in n.gates:
        used.update(g.input_nets)
    for f in n.flipflops:
        used.add(f.d_net)
    for net in sorted(used - set(counts)):
        diags.append(Diagnostic("UndrivenNet", net))

    if check_loops:
        for net in _loop_nets(n):
            diags.append(Diagnostic("CombinationalLoop", net))
    return diags


def _loop_nets(n):
    """One representative net (the smallest name) per combinational cycle."""
    graph = _comb_graph(n)
    out = []
    for scc in nx.strongly_connected_components(graph):
        if len(scc) == 1:
            (gid,) = scc
            if not graph.has_edge(gid, gid):
                continue
        out.append(min(n.gate_by_id[gid].output_net for gid in scc))
    return sorted(out)


def topological_order(n):
    """Gate ids such that every gate follows the gates driving it.

    Ties are broken by lexicographic gate id, which makes the order unique.
    """
    graph = _comb_graph(n)
    indeg = {gid: graph.in_degree(gid) for gid in graph}
    heap = [gid for gid, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        gid = heapq.heappop(heap)
        order.append(gid)
        for nxt in graph.successors(gid):
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(heap, nxt)
    if len(order) != len(indeg):
        loops = _loop_nets(n)
        raise CombinationalLoop(loops[0] if loops else "?")
    return order


def fanin_cone(n, net):
    """Gates and source nets that can affect ``net`` within one clock cycle."""
    if net not in n.driver and net not in set(n.nets):
        raise UnknownNet(net)
    cone = set()
    stack = [net]
    seen = set()
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        src = n.driver.get(x)
        if src is None:
            raise UnknownNet(x)
        if src[0] == "gate":
            g = n.gate_by_id[src[1]]
            cone.add(g.id)
            stack.extend(g.input_nets)
        else:
            cone.add(x)
    return cone
