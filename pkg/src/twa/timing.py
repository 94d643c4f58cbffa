"""Vectorless static timing analysis and near-critical path enumeration.

Delays are integer picoseconds in the nominal library, which keeps path
ordering exact. Aged libraries may carry float delays; every routine here
accepts either.
"""

import heapq
import json
import math
from dataclasses import dataclass, field

from .cells import CellKind
from .errors import MissingDelay, NoMatchingPath
from .netlist import topological_order


@dataclass
class DelayLibrary:
    cells: dict
    overrides: dict = field(default_factory=dict)
    ff_setup: float = 0
    ff_clk_to_q: float = 0

    def __post_init__(self):
        self.cells = {CellKind(k): v for k, v in self.cells.items()}
        for v in list(self.cells.values()) + list(self.overrides.values()) + [self.ff_setup, self.ff_clk_to_q]:
            if v < 0:
                raise ValueError("delays must be non-negative")

    def delay(self, gate):
        if gate.id in self.overrides:
            return self.overrides[gate.id]
        try:
            return self.cells[gate.kind]
        except KeyError:
            raise MissingDelay(f"{gate.kind.value} (gate {gate.id})") from None

    def with_overrides(self, overrides):
        return DelayLibrary(dict(self.cells), dict(overrides), self.ff_setup, self.ff_clk_to_q)

    def to_dict(self):
        return {"cells": {k.value: v for k, v in self.cells.items()},
                "overrides": dict(self.overrides),
                "ff_setup": self.ff_setup, "ff_clk_to_q": self.ff_clk_to_q}

    @classmethod
    def from_dict(cls, d):
        return cls(d["cells"], dict(d.get("overrides", {})), d.get("ff_setup", 0), d.get("ff_clk_to_q", 0))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


DEFAULT_CELL_DELAYS = {
    "INV": 10, "BUF": 12, "AND2": 18, "AND3": 22, "OR2": 18, "OR3": 22,
    "NAND2": 20, "NAND3": 24, "NOR2": 20, "NOR3": 26,
    "XOR2": 28, "XNOR2": 28, "MUX2": 26,
}


def default_library():
    return DelayLibrary(dict(DEFAULT_CELL_DELAYS), {}, ff_setup=15, ff_clk_to_q=25)


@dataclass(frozen=True)
class ClockSpec:
    period: float
    guardband_fraction: float = 0.10

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("clock period must be positive")
        if not 0 <= self.guardband_fraction < 1:
            raise ValueError("guardband fraction must lie in [0, 1)")


@dataclass(frozen=True)
class TimingPath:
    """A launch-to-capture chain of gates.

    ``gates`` holds ``(gate id, input pin)`` pairs in signal order; ``nets``
    is the launch net followed by each gate's output net. ``nominal_delay``
    is the sum of gate delays only; the launch offset (clock-to-Q for FF
    launches, 0 for primary inputs) is kept separately.
    """
    launch: str
    capture: str
    gates: tuple
    nets: tuple
    nominal_delay: float
    slack: float
    launch_offset: float = 0
    launch_kind: str = "ff"
    capture_kind: str = "ff"

    @property
    def arrival(self):
        return self.launch_offset + self.nominal_delay

    @property
    def gate_ids(self):
        return tuple(g for g, _ in self.gates)

    def sort_key(self):
        """Longest first; ties broken by capture, then gates read from the capture side."""
        return (-self.arrival, self.capture, tuple(self.gates[::-1]))

    def to_dict(self):
        return {"launch": self.launch, "capture": self.capture,
                "gates": [[g, p] for g, p in self.gates], "nets": list(self.nets),
                "nominal_delay": self.nominal_delay, "slack": self.slack,
                "launch_offset": self.launch_offset,
                "launch_kind": self.launch_kind, "capture_kind": self.capture_kind}

    @classmethod
    def from_dict(cls, d):
        return cls(d["launch"], d["capture"], tuple((g, int(p)) for g, p in d["gates"]),
                   tuple(d["nets"]), d["nominal_delay"], d["slack"], d.get("launch_offset", 0),
                   d.get("launch_kind", "ff"), d.get("capture_kind", "ff"))


@dataclass
class StaResult:
    netlist: object
    library: DelayLibrary
    clock: ClockSpec
    arrival: dict
    critical_delay: float
    critical_path: TimingPath = None

    def endpoints(self):
        """(capture name, capture kind, net) for every timing endpoint."""
        n = self.netlist
        eps = [(f.id, "ff", f.d_net) for f in n.flipflops]
        eps += [(po, "po", po) for po in n.primary_outputs]
        return eps

    def to_dict(self, paths=()):
        return {"netlist": self.netlist.name, "period_ps": self.clock.period,
                "guardband_fraction": self.clock.guardband_fraction,
                "critical_delay": self.critical_delay,
                "critical_path": self.critical_path.to_dict() if self.critical_path else None,
                "arrival": {k: self.arrival[k] for k in sorted(self.arrival)},
                "paths": [p.to_dict() for p in paths]}


def _launch_of(n, net, lib):
    kind, name = n.driver[net]
    if kind == "ff":
        return name, "ff", lib.ff_clk_to_q
    return name, "pi", 0


def run_sta(n, lib, clk):
    """Worst-case arrival time at every net, sensitization ignored."""
    arrival = {}
    for p in n.primary_inputs:
        arrival[p] = 0
    for f in n.flipflops:
        arrival[f.q_net] = lib.ff_clk_to_q
    for gid in topological_order(n):
        g = n.gate_by_id[gid]
        d = lib.delay(g)
        arrival[g.output_net] = max(arrival[x] for x in g.input_nets) + d
    sta = StaResult(n, lib, clk, arrival, 0)
    eps = sta.endpoints()
    if eps:
        sta.critical_delay = max(arrival[net] for _, _, net in eps)
        top = enumerate_near_critical_paths(sta, 0.0, 1)
        sta.critical_path = top[0] if top else None
    return sta


def _slack(clk, lib, capture_kind, arrival):
    setup = lib.ff_setup if capture_kind == "ff" else 0
    return clk.period - arrival - setup


def enumerate_near_critical_paths(sta, margin_fraction, limit):
    """All launch-to-capture paths within ``margin_fraction`` of the critical delay.

    Best-first backward expansion from the endpoints. The bound of a partial
    path (arrival at its head plus the delay already accumulated behind it)
    is exact, so complete paths pop in :meth:`TimingPath.sort_key` order and
    no partial path is ever a dead end. At most ``limit`` paths are returned.
    """
    if not 0 <= margin_fraction < 1:
        raise ValueError("margin_fraction must lie in [0, 1)")
    if limit <= 0:
        return []
    n, lib, arr = sta.netlist, sta.library, sta.arrival
    threshold = (1 - margin_fraction) * sta.critical_delay
    tol = 1e-9 * max(1.0, abs(sta.critical_delay))
    # heap key (-bound, capture, gates from the capture side) never exceeds
    # the sort key of any completion, so completions pop in sort-key order
    heap = []
    for cap, cap_kind, net in sta.endpoints():
        if arr[net] >= threshold - tol:
            heap.append((-arr[net], cap, (), net, (net,), 0, cap_kind))
    heapq.heapify(heap)
    done = []
    while heap and len(done) < limit:
        neg_bound, cap, back, net, nets, suffix, cap_kind = heapq.heappop(heap)
        kind, name = n.driver[net]
        if kind in ("pi", "ff"):
            launch, lkind, offset = _launch_of(n, net, lib)
            done.append(TimingPath(launch, cap, back[::-1], nets, suffix,
                                   _slack(sta.clock, lib, cap_kind, offset + suffix),
                                   offset, lkind, cap_kind))
            continue
        g = n.gate_by_id[name]
        d = lib.delay(g)
        for pin, inp in enumerate(g.input_nets):
            bound = arr[inp] + d + suffix
            if bound >= threshold - tol:
                heapq.heappush(heap, (-bound, cap, back + ((g.id, pin),), inp,
                                      (inp,) + nets, suffix + d, cap_kind))
    return done


def path_delay(n, lib, path):
    """Recompute a path's gate-delay sum from the library."""
    return sum(lib.delay(n.gate_by_id[g]) for g, _ in path.gates)


def select_target_path(paths, strategy="longest"):
    """Pick one path deterministically.

    ``strategy`` is ``"longest"``, ``"through_net:<net>"``, ``"index:<k>"``
    or the equivalent tuple ``("through_net", net)`` / ``("index", k)``.
    """
    if isinstance(strategy, str):
        kind, _, arg = strategy.partition(":")
    else:
        kind, arg = strategy
    ordered = sorted(paths, key=TimingPath.sort_key)
    if not ordered:
        raise NoMatchingPath("no paths to choose from")
    if kind == "longest":
        return ordered[0]
    if kind == "through_net":
        for p in ordered:
            if arg in p.nets:
                return p
        raise NoMatchingPath(f"no path through net {arg!r}")
    if kind == "index":
        k = int(arg)
        if 0 <= k < len(ordered):
            return ordered[k]
        raise NoMatchingPath(f"path index {k} out of range ({len(ordered)} paths)")
    raise NoMatchingPath(f"unknown selection strategy {strategy!r}")


def closure_period(sta, guardband_fraction=0.10):
    """Smallest integer period that meets timing with the guardband added
    on top of the critical path's gate delay."""
    lib, p = sta.library, sta.critical_path
    if p is None:
        return max(1, math.ceil(lib.ff_setup + lib.ff_clk_to_q))
    return math.ceil(p.launch_offset + p.nominal_delay * (1 + guardband_fraction) + lib.ff_setup)
