"""Cycle-based two-valued simulation, duty cycles and toggle activity.

Input vectors are sequences of bits in declared primary-input order. The
string form ``"0110"`` lists input 0 first; as an integer, bit ``i`` of the
value is input ``i``.
"""

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .cells import eval_word
from .errors import InvalidFraction, TraceTooShort, WidthMismatch
from .netlist import topological_order


class Compiled:
    """Index-based view of a netlist, ordered for single-pass evaluation."""

    def __init__(self, n):
        self.netlist = n
        names = list(n.primary_inputs) + [f.q_net for f in n.flipflops]
        order = topological_order(n)
        names += [n.gate_by_id[g].output_net for g in order]
        extra = [x for x in n.nets if x not in set(names)]
        self.net_names = names + extra
        self.index = {x: i for i, x in enumerate(self.net_names)}
        self.gate_order = order
        self.gate_pos = {g: i for i, g in enumerate(order)}
        self.ops = []
        for gid in order:
            g = n.gate_by_id[gid]
            self.ops.append((g.kind, tuple(self.index[x] for x in g.input_nets), self.index[g.output_net]))
        self.pi = [self.index[p] for p in n.primary_inputs]
        self.ff_q = [self.index[f.q_net] for f in n.flipflops]
        self.ff_d = [self.index[f.d_net] for f in n.flipflops]
        self.ff_init = [f.init_value for f in n.flipflops]
        self.po = [self.index[p] for p in n.primary_outputs]
        self.scan_in = self.pi + self.ff_q
        self.scan_out = [self.index[x] for x in n.scan_outputs]
        self.source_set = frozenset(self.scan_in)

    def evaluate(self, values, mask=1, fault=None):
        """Fill gate outputs in ``values`` (a list indexed by net) in place.

        ``fault`` is ``None``, ``("pin", gate position, pin, value)`` or
        ``("net", net index, value)``; stuck values are replicated over
        every lane.
        """
        ops = self.ops
        if fault is None:
            for kind, ins, out in ops:
                values[out] = eval_word(kind, [values[i] for i in ins], mask)
            return values
        stuck = mask if fault[-1] else 0
        if fault[0] == "net":
            net = fault[1]
            if net in self.source_set:
                values[net] = stuck
            for kind, ins, out in ops:
                values[out] = eval_word(kind, [values[i] for i in ins], mask)
                if out == net:
                    values[out] = stuck
            return values
        _, pos, pin, _ = fault
        for k, (kind, ins, out) in enumerate(ops):
            args = [values[i] for i in ins]
            if k == pos:
                args[pin] = stuck
            values[out] = eval_word(kind, args, mask)
        return values


@lru_cache(maxsize=64)
def compile_netlist(n):
    return Compiled(n)


def parse_vector(v, width=None):
    """Normalize a vector given as bit string, int or bit sequence to a tuple."""
    if isinstance(v, str):
        bits = tuple(int(ch) for ch in v.replace("_", ""))
    elif isinstance(v, (int, np.integer)):
        if width is None:
            raise WidthMismatch("integer vectors need an explicit width")
        bits = tuple((int(v) >> i) & 1 for i in range(width))
    else:
        bits = tuple(int(b) for b in v)
    if width is not None and len(bits) != width:
        raise WidthMismatch(f"vector has {len(bits)} bits, expected {width}")
    return bits


def vector_to_str(bits):
    return "".join("X" if b is None else str(b) for b in bits)


def vector_to_int(bits):
    return sum(b << i for i, b in enumerate(bits) if b)


def load_stimulus(path):
    """Read ``{"vectors": [...], "repeat": N}``; returns (vectors, repeat)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return [parse_vector(v) for v in doc["vectors"]], int(doc.get("repeat", 1))


def dump_stimulus(vectors, repeat=1):
    return json.dumps({"vectors": [vector_to_str(v) for v in vectors], "repeat": repeat}, indent=1)


@dataclass
class SimTrace:
    """Net values per simulated cycle.

    ``values[c, i]`` is the settled value of net ``net_names[i]`` during
    cycle ``c``; FF q nets hold the state of that cycle.
    """
    netlist: object
    net_names: list
    values: np.ndarray
    stimulus: list = field(default_factory=list)

    @property
    def cycles(self):
        return self.values.shape[0]

    @property
    def index(self):
        return compile_netlist(self.netlist).index

    def series(self, net):
        return self.values[:, self.index[net]]

    def outputs(self):
        """Primary-output bits per cycle, shape (cycles, n_outputs)."""
        c = compile_netlist(self.netlist)
        return self.values[:, c.po]

    def ff_states(self):
        c = compile_netlist(self.netlist)
        return self.values[:, c.ff_q]


def simulate_words(c, pi_words, mask=1, state=None):
    """Bit-parallel sequential simulation.

    ``pi_words[k]`` lists one word per primary input for cycle ``k``.
    Returns a list of per-cycle value lists (one word per net).
    """
    nn = len(c.net_names)
    if state is None:
        state = [mask if v else 0 for v in c.ff_init]
    out = []
    for words in pi_words:
        values = [0] * nn
        for idx, w in zip(c.pi, words):
            values[idx] = w
        for idx, w in zip(c.ff_q, state):
            values[idx] = w
        c.evaluate(values, mask)
        out.append(values)
        state = [values[d] for d in c.ff_d]
    return out


def simulate_cycles(n, stimulus, repeat=1):
    """Apply ``stimulus`` ``repeat`` times in a row from the FF init state."""
    if repeat < 1:
        raise ValueError("repeat must be at least 1")
    width = len(n.primary_inputs)
    vecs = [parse_vector(v, width) for v in stimulus]
    vecs = vecs * repeat
    c = compile_netlist(n)
    rows = simulate_words(c, vecs)
    values = np.array(rows, dtype=np.uint8).reshape(len(rows), len(c.net_names))
    return SimTrace(n, c.net_names, values, vecs)


@dataclass
class DutyProfile:
    """Fraction of cycles each gate input pin spends at logic 0."""
    beta: dict
    cycles: int
    idle_fraction: float = 0.0
    mode: str = "none"

    def get(self, gate_id, pin, default=None):
        return self.beta.get((gate_id, pin), default)

    def path_betas(self, path):
        return [self.beta.get(gp) for gp in path.gates]

    def to_dict(self):
        return {"cycles": self.cycles, "idle_fraction": self.idle_fraction, "mode": self.mode,
                "beta": {f"{g}:{p}": b for (g, p), b in sorted(self.beta.items())}}

    @classmethod
    def from_dict(cls, d):
        beta = {}
        for key, b in d["beta"].items():
            g, _, p = key.rpartition(":")
            beta[(g, int(p))] = float(b)
        return cls(beta, int(d["cycles"]), float(d.get("idle_fraction", 0.0)), d.get("mode", "none"))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def compute_duty_profile(trace):
    """Per-pin duty cycle: (#cycles the pin is 0) / cycles.

    A 0 at a gate input turns on the PMOS it drives, so this is the
    NBTI stress fraction of that pin.
    """
    if trace.cycles == 0:
        raise TraceTooShort("empty trace")
    n = trace.netlist
    idx = trace.index
    zeros = trace.cycles - trace.values.sum(axis=0, dtype=np.int64)
    beta = {}
    for g in n.gates:
        for pin, net in enumerate(g.input_nets):
            beta[(g.id, pin)] = float(zeros[idx[net]]) / trace.cycles
    return DutyProfile(beta, trace.cycles)


def adjust_for_idle(profile, idle_fraction, mode="multiplicative"):
    """Scale duty cycles down for cycles in which the unit sits idle."""
    if not 0 <= idle_fraction < 1:
        raise InvalidFraction(f"idle fraction {idle_fraction} not in [0, 1)")
    if mode == "multiplicative":
        beta = {k: b * (1 - idle_fraction) for k, b in profile.beta.items()}
    elif mode == "subtractive":
        beta = {k: max(0.0, b - idle_fraction) for k, b in profile.beta.items()}
    else:
        raise ValueError(f"unknown idle mode {mode!r}")
    return DutyProfile(beta, profile.cycles, idle_fraction, mode)


@dataclass
class ActivityReport:
    mean_toggles_per_cycle: float
    toggles: dict
    cycles: int

    def to_dict(self):
        return {"cycles": self.cycles, "mean_toggles_per_cycle": self.mean_toggles_per_cycle,
                "toggles": dict(sorted(self.toggles.items()))}


def activity_proxy(trace):
    """Toggle counts per net; their total per cycle is the power proxy."""
    if trace.cycles < 2:
        raise TraceTooShort("activity needs at least two cycles")
    v = trace.values.astype(np.int8)
    flips = np.abs(np.diff(v, axis=0)).sum(axis=0)
    toggles = {name: int(flips[i]) for i, name in enumerate(trace.net_names)}
    return ActivityReport(float(flips.sum()) / trace.cycles, toggles, trace.cycles)
