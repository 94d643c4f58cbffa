"""Stuck-at-1 test generation aimed at the gates of a timing path.

Testing a pin for stuck-at-1 forces it to 0, which is exactly the state that
stresses the PMOS behind it. Tests are generated on the full-scan view of the
netlist: FF q nets act as extra inputs and FF d nets as extra outputs.

Vectors on the scan view ("cubes") may leave bits unassigned (``None``).
"""

import random
from dataclasses import dataclass, field

from .cells import CellKind, X, eval3
from .constraints import ACCEPT_ALL
from .logicsim import compile_netlist

DETECTED = "detected"
UNDETECTABLE = "undetectable"
ABORTED = "aborted"

_XOR = (CellKind.XOR2, CellKind.XNOR2)


@dataclass(frozen=True, order=True)
class StuckFault:
    """Stuck-at fault on a gate input pin, or on a whole net when ``gate`` is None."""
    gate: str = None
    pin: int = None
    net: str = None
    value: int = 1

    @property
    def key(self):
        site = f"{self.gate}:{self.pin}" if self.gate is not None else self.net
        return f"{site}/SA{self.value}"

    def __str__(self):
        return self.key

    @classmethod
    def parse(cls, key):
        site, _, sa = key.rpartition("/SA")
        if not site:
            site, sa = key, "1"
        g, sep, p = site.rpartition(":")
        if sep and p.isdigit():
            return cls(gate=g, pin=int(p), value=int(sa))
        return cls(net=site, value=int(sa))


def enumerate_path_faults(n, path):
    """One stuck-at-1 fault per input pin of every gate on ``path``."""
    faults = []
    for gid, _ in path.gates:
        g = n.gate_by_id[gid]
        faults.extend(StuckFault(gid, pin) for pin in range(len(g.input_nets)))
    return faults


def _compiled_fault(c, fault):
    if fault.gate is not None:
        return ("pin", c.gate_pos[fault.gate], fault.pin, fault.value)
    return ("net", c.index[fault.net], fault.value)


@dataclass
class AtpgResult:
    status: str
    vector: tuple = None
    backtracks: int = 0


class _Podem:
    def __init__(self, n, fault):
        c = compile_netlist(n)
        self.c = c
        self.ops = c.ops
        self.stuck = fault.value
        if fault.gate is not None:
            self.pos = c.gate_pos[fault.gate]
            self.pin = fault.pin
            self.site = c.ops[self.pos][1][fault.pin]
            self.site_net = None
        else:
            self.pos = self.pin = None
            self.site = self.site_net = c.index[fault.net]
        nn = len(c.net_names)
        self.good = [X] * nn
        self.bad = [X] * nn
        self.assign = {}
        self.driver_pos = {out: k for k, (_, _, out) in enumerate(c.ops)}
        self.fanout = [[] for _ in range(nn)]
        for k, (_, ins, _) in enumerate(c.ops):
            for i in set(ins):
                self.fanout[i].append(k)
        self.observable = frozenset(c.scan_out)

    def imply(self):
        good, bad, c = self.good, self.bad, self.c
        for idx in c.scan_in:
            v = self.assign.get(idx, X)
            good[idx] = bad[idx] = v
        if self.site_net is not None and self.site_net in c.source_set and good[self.site_net] != X:
            bad[self.site_net] = self.stuck
        for k, (kind, ins, out) in enumerate(self.ops):
            gi = [good[i] for i in ins]
            fi = [bad[i] for i in ins]
            if k == self.pos:
                fi[self.pin] = self.stuck
            g = eval3(kind, gi)
            f = eval3(kind, fi)
            if out == self.site_net:
                f = self.stuck
            if g == X or f == X:
                g = f = X
            good[out] = g
            bad[out] = f

    def _effect_at_input(self, k, ins):
        good, bad = self.good, self.bad
        for j, i in enumerate(ins):
            if good[i] == X:
                continue
            if good[i] != bad[i]:
                return j
            if k == self.pos and j == self.pin and good[i] != self.stuck:
                return j
        return None

    def _x_path(self, k, memo):
        """True if gate k's output reaches an observable net through X nets."""
        stack = [k]
        while stack:
            q = stack.pop()
            if q in memo:
                continue
            memo.add(q)
            out = self.ops[q][2]
            if out in self.observable:
                return True
            for nxt in self.fanout[out]:
                if self.good[self.ops[nxt][2]] == X:
                    stack.append(nxt)
        return False

    def check(self):
        """Returns (DETECTED, None), ("objective", (net, value)) or (None, None) on conflict."""
        good, bad = self.good, self.bad
        s = good[self.site]
        if s == self.stuck:
            return None, None
        for o in self.observable:
            if good[o] != X and good[o] != bad[o]:
                return DETECTED, None
        if s == X:
            return "objective", (self.site, 1 - self.stuck)
        memo = set()
        for k, (kind, ins, out) in enumerate(self.ops):
            if good[out] != X:
                continue
            j = self._effect_at_input(k, ins)
            if j is None or not self._x_path(k, memo):
                continue
            obj = self._frontier_objective(kind, ins, j)
            if obj is not None:
                return "objective", obj
        return None, None

    def _frontier_objective(self, kind, ins, effect_pin):
        good = self.good
        xs = [j for j, i in enumerate(ins) if good[i] == X]
        if not xs:
            return None
        if kind is CellKind.MUX2:
            s, a, b = ins
            if effect_pin == 1 and good[s] == X:
                return s, 0
            if effect_pin == 2 and good[s] == X:
                return s, 1
            other = {1: b, 2: a}.get(effect_pin)
            if effect_pin == 0:
                for i, o in ((a, b), (b, a)):
                    if good[i] == X:
                        return i, (1 - good[o]) if good[o] != X else 0
            if other is not None and good[other] == X:
                return other, 0
            return ins[xs[0]], 0
        if kind in _XOR:
            return ins[xs[0]], 0
        return ins[xs[0]], 1 - kind.controlling

    def backtrace(self, net, val):
        good, c = self.good, self.c
        while net not in c.source_set:
            kind, ins, _ = self.ops[self.driver_pos[net]]
            xs = [j for j, i in enumerate(ins) if good[i] == X]
            if kind is CellKind.MUX2:
                s, a, b = ins
                if good[s] == 0:
                    net = a
                elif good[s] == 1:
                    net = b
                elif good[a] == val:
                    net, val = s, 0
                elif good[b] == val:
                    net, val = s, 1
                elif good[a] == X:
                    net = a
                else:
                    net = b
                continue
            j = xs[0]
            want = val ^ 1 if kind.inverting else val
            if kind in _XOR:
                for jj, i in enumerate(ins):
                    if jj != j and good[i] != X:
                        want ^= good[i]
            net, val = ins[j], want
        return net, val

    def vector(self):
        return tuple(self.assign.get(idx) for idx in self.c.scan_in)

    def run(self, budget):
        stack = []
        backtracks = 0
        self.imply()
        while True:
            status, obj = self.check()
            if status == DETECTED:
                return AtpgResult(DETECTED, self.vector(), backtracks)
            if status == "objective":
                src, v = self.backtrace(*obj)
                stack.append([src, v, False])
                self.assign[src] = v
                self.imply()
                continue
            while stack and stack[-1][2]:
                src = stack.pop()[0]
                del self.assign[src]
            if not stack:
                return AtpgResult(UNDETECTABLE, None, backtracks)
            backtracks += 1
            if backtracks > budget:
                return AtpgResult(ABORTED, None, backtracks)
            top = stack[-1]
            top[1] ^= 1
            top[2] = True
            self.assign[top[0]] = top[1]
            self.imply()


def generate_test(n, fault, budget=10_000):
    """PODEM search for a scan-view cube that detects ``fault``.

    The returned cube lists one entry per scan input (PIs, then FF q nets);
    ``None`` marks don't-care bits. Every fill of the cube detects the fault.
    """
    return _Podem(n, fault).run(budget)


def _fill(cube, value=0):
    return tuple(value if b is None else b for b in cube)


def fault_simulate(n, vectors, faults):
    """Serial fault simulation of scan-view vectors; returns detected faults in input order.

    ``vectors`` may be a :class:`TestPattern`; unassigned bits are filled with 0.
    """
    if isinstance(vectors, TestPattern):
        vectors = vectors.vectors
    vectors = [_fill(v) for v in vectors]
    if not vectors or not faults:
        return []
    c = compile_netlist(n)
    mask = (1 << len(vectors)) - 1
    base = [0] * len(c.net_names)
    for j, idx in enumerate(c.scan_in):
        base[idx] = sum(v[j] << lane for lane, v in enumerate(vectors))
    good = c.evaluate(list(base), mask)
    ref = [good[o] for o in c.scan_out]
    detected = []
    for f in faults:
        bad = c.evaluate(list(base), mask, _compiled_fault(c, f))
        if any(bad[o] != r for o, r in zip(c.scan_out, ref)):
            detected.append(f)
    return detected


# -- scan view <-> input stimulus -----------------------------------------------

def scan_to_stimulus(n, cube):
    """Project a scan-view cube onto primary-input bits.

    A FF whose d pin is a primary input is an input register, so its q bit
    becomes that input's bit (it wins over the input's own bit). Other FF
    state cannot be set from the inputs and is dropped.
    """
    npi = len(n.primary_inputs)
    out = list(cube[:npi])
    pos = {p: i for i, p in enumerate(n.primary_inputs)}
    for j, f in enumerate(n.flipflops):
        b = cube[npi + j]
        if b is not None and f.d_net in pos:
            out[pos[f.d_net]] = b
    return tuple(out)


def stimulus_to_scan(n, stim, cube=None, fill=0):
    """Scan-view vector seen by the logic when ``stim`` is applied repeatedly.

    FF state that no input controls is taken from ``cube`` when given.
    """
    npi = len(n.primary_inputs)
    pos = {p: i for i, p in enumerate(n.primary_inputs)}
    out = list(stim)
    for j, f in enumerate(n.flipflops):
        if f.d_net in pos:
            out.append(stim[pos[f.d_net]])
        else:
            out.append(fill if cube is None or cube[npi + j] is None else cube[npi + j])
    return tuple(out)


# -- patterns -------------------------------------------------------------------

@dataclass
class TestPattern:
    __test__ = False  # not a pytest class

    id: int
    vectors: tuple
    covered_faults: tuple = ()
    path_fault_score: int = 0
    stimulus: tuple = ()
    removed_invalid: int = 0
    on_path_score: int = 0
    side_score: int = 0

    def to_dict(self):
        from .logicsim import vector_to_str
        return {"id": self.id, "vectors": [vector_to_str(v) for v in self.vectors],
                "stimulus": [vector_to_str(v) for v in self.stimulus],
                "covered_faults": [f.key for f in self.covered_faults],
                "path_fault_score": self.path_fault_score, "on_path_score": self.on_path_score,
                "side_score": self.side_score, "removed_invalid": self.removed_invalid}

    @classmethod
    def from_dict(cls, d):
        def vec(s):
            return tuple(None if ch == "X" else int(ch) for ch in s)
        return cls(d["id"], tuple(vec(v) for v in d["vectors"]),
                   tuple(StuckFault.parse(k) for k in d.get("covered_faults", [])),
                   d.get("path_fault_score", 0), tuple(vec(v) for v in d.get("stimulus", [])),
                   d.get("removed_invalid", 0), d.get("on_path_score", 0), d.get("side_score", 0))


@dataclass
class CoverageReport:
    detectable: list = field(default_factory=list)
    detected: list = field(default_factory=list)
    undetectable: list = field(default_factory=list)
    aborted: list = field(default_factory=list)

    def to_dict(self):
        return {k: [f.key for f in getattr(self, k)]
                for k in ("detectable", "detected", "undetectable", "aborted")}


def generate_patterns(n, faults, pattern_length=10, budget=10_000, passes=1, seed=0):
    """Build a test set with fault dropping and cut it into fixed-length patterns.

    Pass 0 visits faults in the given order; later passes use seeded
    shuffles, so fault dropping yields different test sets.
    """
    rng = random.Random(seed)
    results = {}
    patterns = []
    for pass_no in range(passes):
        order = list(faults)
        if pass_no:
            rng.shuffle(order)
        remaining = set(order)
        cubes = []
        for f in order:
            if f not in remaining:
                continue
            if f not in results:
                results[f] = generate_test(n, f, budget)
            r = results[f]
            remaining.discard(f)
            if r.status != DETECTED:
                continue
            cubes.append(r.vector)
            for d in fault_simulate(n, [r.vector], sorted(remaining)):
                remaining.discard(d)
        for start in range(0, len(cubes), pattern_length):
            chunk = tuple(cubes[start:start + pattern_length])
            covered = tuple(fault_simulate(n, chunk, faults))
            patterns.append(TestPattern(len(patterns), chunk, covered, len(covered)))
    cov = CoverageReport(
        detectable=[f for f in faults if results.get(f) and results[f].status == DETECTED],
        undetectable=[f for f in faults if results.get(f) and results[f].status == UNDETECTABLE],
        aborted=[f for f in faults if results.get(f) and results[f].status == ABORTED],
    )
    # faults dropped before their own generation are detectable too
    seen = set(cov.detectable) | set(cov.undetectable) | set(cov.aborted)
    union = set()
    for p in patterns:
        union.update(p.covered_faults)
    cov.detectable += [f for f in faults if f not in seen and f in union]
    cov.detected = [f for f in faults if f in union]
    return patterns, cov


def _merge(a, b):
    out = []
    for x, y in zip(a, b):
        if x is None:
            out.append(y)
        elif y is None or x == y:
            out.append(x)
        else:
            return None
    return tuple(out)


def merge_compatible(vectors):
    """Greedy static compaction: fold each cube into the first compatible one."""
    merged = []
    for v in vectors:
        for i, m in enumerate(merged):
            r = _merge(m, v)
            if r is not None:
                merged[i] = r
                break
        else:
            merged.append(tuple(v))
    return merged


def rank_patterns(patterns):
    return sorted(patterns, key=lambda p: (-p.path_fault_score, p.id))


def compact_and_score(n, patterns, path, constraint=None, fill=0, faults=None):
    """Merge, filter by validity, fill and re-score patterns; best first.

    Vectors whose projected input bits cannot satisfy ``constraint`` are
    removed. Remaining don't-cares are filled with ``fill`` (0 by default,
    which adds PMOS stress). Scores count path faults detected by the filled
    pattern under :func:`fault_simulate`.
    """
    constraint = constraint or ACCEPT_ALL
    if faults is None:
        faults = enumerate_path_faults(n, path)
    on_path = set(path.gates)
    out = []
    for p in patterns:
        kept, stims = [], []
        removed = 0
        for cube in merge_compatible(p.vectors):
            stim = constraint.complete(scan_to_stimulus(n, cube))
            if stim is None:
                removed += 1
                continue
            stim = _fill(stim, fill)
            kept.append(_fill(stimulus_to_scan(n, stim, cube, fill), fill))
            stims.append(stim)
        covered = tuple(fault_simulate(n, kept, faults))
        on = sum(1 for f in covered if (f.gate, f.pin) in on_path)
        out.append(TestPattern(p.id, tuple(kept), covered, len(covered), tuple(stims), removed,
                               on, len(covered) - on))
    return rank_patterns(out)
