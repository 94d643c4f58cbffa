"""Timed cycle simulation with stale-latch capture, and golden-vs-faulty diffs.

Every cycle starts from the settled values of the previous cycle. For each
net the simulator tracks the time of its last possible transition:

* a primary input that changed arrives at 0, a FF output that changed at
  clock-to-Q, anything unchanged is stable (``-inf``);
* an AND/OR-type gate whose settled inputs include a controlling value
  settles once the earliest controlling input has arrived; otherwise it
  waits for its latest input;
* XOR, INV, BUF wait for their latest input; a MUX with a stable select
  follows only the selected data input.

Transport delay is added on top. The bound never exceeds the vectorless
STA arrival and grows monotonically with every gate delay.

A FF whose d-pin arrival falls after ``period - setup`` keeps its old value
for the next cycle (stale latch).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cells import CellKind
from .errors import LengthMismatch, MissingDelay
from .logicsim import compile_netlist, parse_vector
from .timing import DelayLibrary, default_library

NEG_INF = -math.inf

_AND_OR = frozenset({CellKind.AND2, CellKind.AND3, CellKind.NAND2, CellKind.NAND3,
                     CellKind.OR2, CellKind.OR3, CellKind.NOR2, CellKind.NOR3})


@dataclass
class TimedSimResult:
    """``states[c]`` and ``outputs[c]`` are FF and PO values during cycle ``c``.

    ``violations[c]`` lists FFs that hold a stale value in cycle ``c``
    because their capture at the end of cycle ``c-1`` missed the deadline.
    ``d_arrivals[c][j]`` is the last-transition time at FF ``j``'s d-pin in
    cycle ``c`` (``-inf`` when stable).
    """
    netlist: object
    states: np.ndarray
    outputs: np.ndarray
    violations: list
    d_arrivals: list
    deadline: float
    cap_events: list = field(default_factory=list)
    final_state: tuple = ()

    @property
    def cycles(self):
        return self.states.shape[0]

    @property
    def violation_count(self):
        return sum(len(v) for v in self.violations)

    def to_dict(self):
        def t(x):
            return None if x == NEG_INF else x
        return {"cycles": self.cycles, "deadline": self.deadline,
                "ff_ids": [f.id for f in self.netlist.flipflops],
                "states": ["".join(map(str, r)) for r in self.states.tolist()],
                "outputs": ["".join(map(str, r)) for r in self.outputs.tolist()],
                "violations": [{"cycle": c, "ffs": v} for c, v in enumerate(self.violations) if v],
                "d_arrivals": [[t(x) for x in row] for row in self.d_arrivals],
                "cap_events": self.cap_events}


def _gate_delays(n, delays, lib):
    if isinstance(delays, DelayLibrary):
        return [delays.delay(g) for g in n.gates], delays
    out = []
    for g in n.gates:
        if g.id not in delays.delays:
            raise MissingDelay(f"no aged delay for gate {g.id}")
        out.append(delays.delays[g.id])
    return out, lib or default_library()


def _arrival(kind, vals, arr):
    if all(a == NEG_INF for a in arr):
        return NEG_INF
    if kind in _AND_OR:
        ctrl = kind.controlling
        hits = [a for v, a in zip(vals, arr) if v == ctrl]
        if hits:
            return min(hits)
        return max(arr)
    if kind is CellKind.MUX2 and arr[0] == NEG_INF:
        return arr[2] if vals[0] else arr[1]
    return max(arr)


def timed_simulate(n, delays, clk, stimulus, lib=None):
    """Simulate ``stimulus`` with per-gate delays and stale-latch captures.

    ``delays`` is an :class:`AgedDelays` (FF timing then comes from ``lib``,
    default library if omitted) or a :class:`DelayLibrary`.
    """
    c = compile_netlist(n)
    per_gate, lib = _gate_delays(n, delays, lib)
    by_id = {g.id: d for g, d in zip(n.gates, per_gate)}
    op_delay = [by_id[gid] for gid in c.gate_order]
    width = len(n.primary_inputs)
    vecs = [parse_vector(v, width) for v in stimulus]
    deadline = clk.period - lib.ff_setup
    nn = len(c.net_names)
    nff = len(c.ff_q)

    state = list(c.ff_init)
    prev_vals = None
    prev_state = None
    states, outputs, violations, d_arrivals, caps = [], [], [], [], []
    pending = []
    for cyc, vec in enumerate(vecs):
        vals = [0] * nn
        arr = [NEG_INF] * nn
        for idx, b in zip(c.pi, vec):
            vals[idx] = b
            if prev_vals is None or prev_vals[idx] != b:
                arr[idx] = 0.0
        for j, idx in enumerate(c.ff_q):
            vals[idx] = state[j]
            if prev_state is not None and prev_state[j] != state[j]:
                arr[idx] = float(lib.ff_clk_to_q)
        c.evaluate(vals)
        for k, (kind, ins, out) in enumerate(c.ops):
            a = _arrival(kind, [vals[i] for i in ins], [arr[i] for i in ins])
            arr[out] = a + op_delay[k] if a != NEG_INF else NEG_INF
        states.append(tuple(state))
        outputs.append(tuple(vals[i] for i in c.po))
        violations.append(pending)
        row = []
        nxt = []
        pending = []
        for j, d in enumerate(c.ff_d):
            a = arr[d]
            late = a - deadline
            if late > clk.period:
                caps.append({"cycle": cyc, "ff": n.flipflops[j].id, "arrival": a})
                a = deadline + clk.period
            row.append(a)
            if a > deadline:
                nxt.append(state[j])
                pending.append(n.flipflops[j].id)
            else:
                nxt.append(vals[d])
        d_arrivals.append(row)
        prev_vals, prev_state = vals, state
        state = nxt
    states_arr = np.array(states, dtype=np.uint8).reshape(len(vecs), nff)
    outputs_arr = np.array(outputs, dtype=np.uint8).reshape(len(vecs), len(c.po))
    return TimedSimResult(n, states_arr, outputs_arr, violations, d_arrivals, deadline, caps, tuple(state))


def _hex(bits):
    value = sum(int(b) << i for i, b in enumerate(bits))
    digits = max(1, (len(bits) + 3) // 4)
    return f"{value:0{digits}X}"


@dataclass
class CorruptionDiff:
    golden: np.ndarray
    faulty: np.ndarray
    match: np.ndarray
    first_divergence: int = None
    corrupted_bits: int = 0
    output_names: tuple = ()

    def to_dict(self):
        rows = []
        for c in range(self.golden.shape[0]):
            rows.append({"cycle": c, "golden": _hex(self.golden[c]), "faulty": _hex(self.faulty[c]),
                         "mismatched": [self.output_names[i] for i in np.flatnonzero(~self.match[c])]})
        return {"outputs": list(self.output_names), "first_divergence": self.first_divergence,
                "corrupted_bits": self.corrupted_bits, "cycles": rows}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1)


def diff_golden(golden, faulty):
    """Bitwise comparison of primary outputs, cycle by cycle."""
    g = golden.outputs() if hasattr(golden, "outputs") and callable(golden.outputs) else np.asarray(golden)
    f = faulty.outputs if isinstance(faulty, TimedSimResult) else np.asarray(faulty)
    if g.shape != f.shape:
        raise LengthMismatch(f"golden {g.shape} vs faulty {f.shape}")
    match = g == f
    bad = np.flatnonzero(~match.all(axis=1)) if match.size else np.array([], dtype=int)
    names = tuple(golden.netlist.primary_outputs) if hasattr(golden, "netlist") else ()
    return CorruptionDiff(g.astype(np.uint8), f.astype(np.uint8), match,
                          int(bad[0]) if len(bad) else None, int((~match).sum()), names)
