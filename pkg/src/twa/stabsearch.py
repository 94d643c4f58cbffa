"""Search for input traces that hold chosen nets stable while keeping path pins at 0.

A trace is ``warmup`` free cycles followed by a window of ``hold_cycles``
cycles. During the window every target net must keep one value and the
score counts objective pins that read 0 in every window cycle.

Two strategies are offered. ``exhaustive`` walks the explicit state graph
(all input vectors of every reachable FF state) and can prove that no trace
exists. ``mutational`` is a seeded stochastic search for wide inputs.
"""

import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .constraints import ACCEPT_ALL, ValidityPredicate
from .errors import Timeout, UnknownNet, Unreachable
from .logicsim import compile_netlist, parse_vector, simulate_cycles, simulate_words, vector_to_str

MAX_EXHAUSTIVE_WIDTH = 20
MAX_STATES = 1 << 16


@dataclass
class StabilityQuery:
    target_nets: tuple
    hold_cycles: int = 10
    constraint: ValidityPredicate = ACCEPT_ALL
    objective_pins: tuple = ()
    warmup: int = None

    def __post_init__(self):
        self.target_nets = tuple(self.target_nets)
        self.objective_pins = tuple((g, int(p)) for g, p in self.objective_pins)
        if not self.target_nets:
            raise ValueError("stability query needs at least one target net")
        if self.hold_cycles < 2:
            raise ValueError("hold_cycles must be at least 2")

    @classmethod
    def from_dict(cls, d):
        pins = []
        for p in d.get("objective_pins", []):
            if isinstance(p, str):
                g, _, pin = p.rpartition(":")
                p = (g, int(pin))
            pins.append(tuple(p))
        return cls(tuple(d["targets"]), int(d.get("hold_cycles", 10)),
                   ValidityPredicate.from_dict(d.get("constraints")), tuple(pins), d.get("warmup"))

    def to_dict(self):
        return {"targets": list(self.target_nets), "hold_cycles": self.hold_cycles,
                "objective_pins": [f"{g}:{p}" for g, p in self.objective_pins],
                "constraints": self.constraint.to_dict(), "warmup": self.warmup}


@dataclass
class StimulusTrace:
    vectors: list
    pmos_on_score: int = 0
    verified: bool = False
    report: dict = field(default_factory=dict)

    @property
    def trivial(self):
        """All window vectors identical (set by the search; falls back to the whole trace)."""
        w = self.report.get("window_start", 0)
        return len(set(map(tuple, self.vectors[w:]))) <= 1

    def to_dict(self):
        return {"vectors": [vector_to_str(v) for v in self.vectors],
                "pmos_on_score": self.pmos_on_score, "verified": self.verified}

    @classmethod
    def from_dict(cls, d):
        return cls([parse_vector(v) for v in d["vectors"]], d.get("pmos_on_score", 0), d.get("verified", False))


def sequential_depth(n):
    """Longest chain of FFs (input side first), with feedback loops counted once."""
    import networkx as nx
    from .netlist import fanin_cone
    g = nx.DiGraph()
    by_q = {f.q_net: f.id for f in n.flipflops}
    for f in n.flipflops:
        g.add_node(f.id)
        for s in fanin_cone(n, f.d_net):
            if s in by_q:
                g.add_edge(by_q[s], f.id)
    if not g:
        return 0
    cond = nx.condensation(g)
    return nx.dag_longest_path_length(cond) + 1


def recommend_targets(n, path, k=5):
    """Nets that feed the most gates of ``path``: the usual choice of stable targets."""
    on = {gid for gid, _ in path.gates}
    counts = Counter()
    for gid in on:
        for net in n.gate_by_id[gid].input_nets:
            counts[net] += 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [net for net, _ in ranked[:k]]


def _warmup(n, q):
    return sequential_depth(n) if q.warmup is None else int(q.warmup)


def _objective_nets(n, q):
    nets = []
    for g, p in q.objective_pins:
        gate = n.gate_by_id.get(g)
        if gate is None or not 0 <= p < len(gate.input_nets):
            raise UnknownNet(f"objective pin {g}:{p}")
        nets.append(gate.input_nets[p])
    return nets


def _check_query(n, q):
    known = set(n.nets)
    for net in q.target_nets:
        if net not in known:
            raise UnknownNet(net)
    _objective_nets(n, q)


def _window(trace, q):
    start = len(trace.vectors) - q.hold_cycles
    if start < 0:
        raise ValueError(f"trace has {len(trace.vectors)} cycles, window needs {q.hold_cycles}")
    return start


def score_trace(n, trace, q):
    """Objective pins reading 0 in every cycle of the window."""
    start = _window(trace, q)
    sim = simulate_cycles(n, trace.vectors)
    score = 0
    for net in _objective_nets(n, q):
        if not sim.series(net)[start:].any():
            score += 1
    return score


def verify_trace(n, trace, q):
    """Re-simulate ``trace``; returns (ok, report) and sets ``trace.verified``.

    The report lists, per target net, whether it stayed constant and the
    first window cycle where it changed, plus cycles that break the
    constraint.
    """
    start = _window(trace, q)
    width = len(n.primary_inputs)
    bad = [c for c, v in enumerate(trace.vectors)
           if len(v) != width or not q.constraint(tuple(v))]
    report = {"window_start": start, "constraint_violations": bad, "nets": {}}
    ok = not bad
    if ok:
        sim = simulate_cycles(n, trace.vectors)
        for net in q.target_nets:
            s = sim.series(net)[start:]
            changes = np.flatnonzero(s != s[0])
            first = int(changes[0]) + start if len(changes) else None
            report["nets"][net] = {"stable": first is None, "first_change": first}
            ok = ok and first is None
    trace.verified = ok
    trace.report = report
    return ok, report


def _rank(traces):
    return sorted(traces, key=lambda t: (-t.pmos_on_score, t.trivial,
                                         "".join(vector_to_str(v) for v in t.vectors)))


def search_stable_traces(n, q, strategy="exhaustive", want=20, seed=None, iterations=100_000):
    """Find up to ``want`` verified traces, best score first.

    ``strategy`` is "exhaustive" or "mutational"; it may also be a dict
    ``{"kind": ..., "seed": ..., "iterations": ...}``. Raises Unreachable
    when the exhaustive search proves no trace exists and Timeout when the
    mutational budget runs out without a hit.
    """
    if isinstance(strategy, dict):
        seed = strategy.get("seed", seed)
        iterations = int(strategy.get("iterations", iterations))
        strategy = strategy.get("kind", "exhaustive")
    _check_query(n, q)
    if strategy == "exhaustive":
        found = _exhaustive(n, q, want)
    elif strategy == "mutational":
        if seed is None:
            raise ValueError("mutational search needs a seed")
        found = _mutational(n, q, want, seed, iterations)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    out = []
    for t in found:
        ok, _ = verify_trace(n, t, q)
        if ok:  # always true for sound searches; kept as a guard
            t.pmos_on_score = score_trace(n, t, q)
            out.append(t)
    return _rank(out)[:want]


# -- exhaustive -----------------------------------------------------------------

def _bits_to_word(bits):
    return int.from_bytes(np.packbits(bits.astype(np.uint8), bitorder="little").tobytes(), "little")


def _word_to_bits(word, lanes):
    raw = word.to_bytes((lanes + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:lanes].astype(bool)


def _valid_lanes(constraint, width):
    lanes = np.arange(1 << width, dtype=np.int64)
    ok = np.ones(lanes.shape, dtype=bool)
    for f in constraint.fields:
        if f.allowed is None:
            continue
        if f.hi >= width:
            return np.zeros(lanes.shape, dtype=bool)
        vals = (lanes >> f.lo) & ((1 << f.width) - 1)
        ok &= np.isin(vals, sorted(f.allowed))
    return ok


class _StateGraph:
    """All input vectors applied to one FF state at a time, in parallel lanes."""

    def __init__(self, n, q):
        self.c = c = compile_netlist(n)
        self.width = w = len(n.primary_inputs)
        self.lanes = 1 << w
        self.mask = (1 << self.lanes) - 1
        idx = np.arange(self.lanes, dtype=np.int64)
        self.pi_words = [_bits_to_word((idx >> i) & 1) for i in range(w)]
        self.valid = _valid_lanes(q.constraint, w)
        self.targets = [c.index[x] for x in q.target_nets]
        self.obj = [c.index[x] for x in _objective_nets(n, q)]
        self.cache = {}

    def expand(self, state):
        """(signature code, next state code, objective-zero matrix) per lane."""
        hit = self.cache.get(state)
        if hit is not None:
            return hit
        c, lanes = self.c, self.lanes
        st = [self.mask if (state >> j) & 1 else 0 for j in range(len(c.ff_q))]
        values = simulate_words(c, [self.pi_words], self.mask, st)[0]
        sig = np.zeros(lanes, dtype=np.int64)
        for k, t in enumerate(self.targets):
            sig |= _word_to_bits(values[t], lanes).astype(np.int64) << k
        nxt = np.zeros(lanes, dtype=np.int64)
        for j, d in enumerate(c.ff_d):
            nxt |= _word_to_bits(values[d], lanes).astype(np.int64) << j
        zeros = np.zeros((lanes, len(self.obj)), dtype=bool)
        for k, o in enumerate(self.obj):
            zeros[:, k] = ~_word_to_bits(values[o], lanes)
        hit = (sig, nxt, zeros)
        self.cache[state] = hit
        return hit


def _vec_bits(v, width):
    return tuple((v >> i) & 1 for i in range(width))


def _exhaustive(n, q, want):
    width = len(n.primary_inputs)
    if width > MAX_EXHAUSTIVE_WIDTH:
        raise ValueError(f"exhaustive search limited to {MAX_EXHAUSTIVE_WIDTH} inputs, got {width}")
    if len(n.flipflops) > 62:
        raise ValueError("exhaustive search limited to 62 flip-flops")
    sg = _StateGraph(n, q)
    if not sg.valid.any():
        raise Unreachable("no input vector satisfies the constraint")
    init = sum(v << j for j, v in enumerate(sg.c.ff_init))
    warm = _warmup(n, q)
    N = q.hold_cycles

    # layered warmup with parent pointers
    layers = [{init: None}]
    for _ in range(warm):
        nxt_layer = {}
        for s in sorted(layers[-1]):
            _, nxt, _ = sg.expand(s)
            for lane in np.flatnonzero(sg.valid):
                t = int(nxt[lane])
                if t not in nxt_layer:
                    nxt_layer[t] = (s, int(lane))
        layers.append(nxt_layer)

    # every state reachable from the warmup frontier
    reach = set(layers[-1])
    todo = sorted(reach)
    while todo:
        s = todo.pop()
        _, nxt, _ = sg.expand(s)
        for t in np.unique(nxt[sg.valid]):
            t = int(t)
            if t not in reach:
                reach.add(t)
                todo.append(t)
                if len(reach) > MAX_STATES:
                    raise ValueError("state space too large for exhaustive search")
    states = sorted(reach)

    sigs = sorted({int(x) for s in states for x in np.unique(sg.expand(s)[0][sg.valid])})
    start_states = sorted(layers[-1])
    feasible = {}
    for sig in sigs:
        good = [None]
        g1 = {s for s in states if (sg.valid & (sg.expand(s)[0] == sig)).any()}
        good.append(g1)
        for m in range(2, N + 1):
            prev = np.array(sorted(good[-1]), dtype=np.int64)
            gm = set()
            for s in g1:
                sig_a, nxt, _ = sg.expand(s)
                ok = sg.valid & (sig_a == sig) & np.isin(nxt, prev)
                if ok.any():
                    gm.add(s)
            good.append(gm)
            if not gm:
                break
        if len(good) == N + 1 and any(s in good[N] for s in start_states):
            feasible[sig] = good
    if not feasible:
        raise Unreachable(f"no constrained trace holds {list(q.target_nets)} stable for {N} cycles")

    def prefix(s):
        vecs = []
        for layer in range(warm, 0, -1):
            p, lane = layers[layer][s]
            vecs.append(_vec_bits(lane, width))
            s = p
        return vecs[::-1]

    traces = []
    seen = set()
    per_sig = max(2, -(-2 * want // len(feasible)))
    for sig, good in feasible.items():
        starts = [s for s in start_states if s in good[N]]
        for r in range(per_sig):
            s0 = starts[r % len(starts)]
            vecs = _walk(sg, sig, good, s0, N, mode="const" if r == 0 else "vary", r=r)
            full = prefix(s0) + vecs
            key = tuple(full)
            if key not in seen:
                seen.add(key)
                traces.append(StimulusTrace([tuple(v) for v in full], report={"window_start": warm}))
    return traces


def _walk(sg, sig, good, s, N, mode, r):
    """Greedy window walk that keeps as many objective pins at 0 as it can."""
    alive = np.ones(len(sg.obj), dtype=bool)
    prev_lane = None
    out = []
    for m in range(N, 0, -1):
        sig_a, nxt, zeros = sg.expand(s)
        ok = sg.valid & (sig_a == sig)
        if m > 1:
            ok &= np.isin(nxt, np.array(sorted(good[m - 1]), dtype=np.int64))
        cand = np.flatnonzero(ok)
        gain = (zeros[cand] & alive).sum(axis=1) if len(sg.obj) else np.zeros(len(cand), dtype=int)
        best = cand[gain == gain.max()]
        if mode == "const" and prev_lane is not None and prev_lane in best:
            lane = prev_lane
        else:
            pool = [x for x in best if x != prev_lane] or list(best)
            lane = int(pool[(r * 7 + m) % len(pool)]) if mode == "vary" else int(pool[0])
        if len(sg.obj):
            alive &= zeros[lane]
        out.append(_vec_bits(int(lane), sg.width))
        prev_lane = int(lane)
        s = int(nxt[lane])
    return out


# -- mutational -----------------------------------------------------------------

def _repair(vec, constraint, rng):
    """Redraw constrained fields that hold a disallowed value."""
    for f in constraint.fields:
        if f.allowed is None:
            continue
        val = sum(int(vec[f.lo + k]) << k for k in range(f.width))
        if val not in f.allowed:
            choices = sorted(f.allowed)
            v = choices[int(rng.integers(len(choices)))]
            for k in range(f.width):
                vec[f.lo + k] = (v >> k) & 1
    return vec


def _evaluate(c, pop, start, targets, obj):
    """Instability and score of every candidate, simulated as parallel lanes."""
    lanes, cycles, width = pop.shape
    mask = (1 << lanes) - 1
    words = [[_bits_to_word(pop[:, t, i]) for i in range(width)] for t in range(cycles)]
    rows = simulate_words(c, words, mask)[start:]
    unstable = np.zeros(lanes, dtype=np.int64)
    for t in targets:
        series = np.array([_word_to_bits(r[t], lanes) for r in rows])
        unstable += (series[1:] != series[:-1]).sum(axis=0)
    score = np.zeros(lanes, dtype=np.int64)
    for o in obj:
        series = np.array([_word_to_bits(r[o], lanes) for r in rows])
        score += ~series.any(axis=0)
    return unstable, score


def _mutational(n, q, want, seed, iterations, population=128):
    rng = np.random.default_rng(seed)
    c = compile_netlist(n)
    width = len(n.primary_inputs)
    warm = _warmup(n, q)
    cycles = warm + q.hold_cycles
    targets = [c.index[x] for x in q.target_nets]
    obj = [c.index[x] for x in _objective_nets(n, q)]

    def random_trace(constant):
        if constant:
            v = q.constraint.sample(rng, width)
            return np.array([v] * cycles, dtype=np.uint8)
        return np.array([q.constraint.sample(rng, width) for _ in range(cycles)], dtype=np.uint8)

    pop = np.array([random_trace(k % 2 == 0) for k in range(population)], dtype=np.uint8)
    hits = {}
    used = 0
    stall = 0
    best_seen = -1
    while used < iterations:
        unstable, score = _evaluate(c, pop, warm, targets, obj)
        used += len(pop)
        varying = np.array([len({bytes(r) for r in cand[warm:]}) > 1 for cand in pop])
        for k in np.flatnonzero(unstable == 0):
            key = pop[k].tobytes()
            if key not in hits:
                hits[key] = (int(score[k]), bool(varying[k]), pop[k].copy())
        fitness = np.where(unstable == 0, 10_000 + 10 * score + varying, -100 * unstable + score)
        top = float(fitness.max())
        if top > best_seen:
            best_seen, stall = top, 0
        else:
            stall += 1
        if len(hits) >= want and stall >= 30:
            break
        order = np.argsort(-fitness, kind="stable")
        elite = pop[order[: max(2, population // 4)]]
        children = [elite[k].copy() for k in range(min(len(elite), population // 8))]
        while len(children) < population:
            child = elite[int(rng.integers(len(elite)))].copy()
            t = warm + int(rng.integers(q.hold_cycles))
            op = int(rng.integers(5))
            if op == 0:
                i = int(rng.integers(width))
                child[t, i] ^= 1
            elif op == 1:
                src = t - 1 if t > 0 else t + 1
                child[t] = child[src]
            elif op == 2:
                child[t] = q.constraint.sample(rng, width)
            elif op == 3:
                i = int(rng.integers(width))
                child[warm:, i] ^= 1
            else:
                i = int(rng.integers(width))
                child[t:, i] = child[t, i] ^ 1
            if warm and rng.random() < 0.2:
                child[int(rng.integers(warm))] = q.constraint.sample(rng, width)
            for row in child:
                _repair(row, q.constraint, rng)
            children.append(child)
        pop = np.array(children, dtype=np.uint8)
    if not hits:
        raise Timeout(f"no stable trace after {used} candidates")
    ranked = sorted(hits.values(), key=lambda h: (-h[0], not h[1], h[2].tobytes()))
    return [StimulusTrace([tuple(int(b) for b in row) for row in h[2]], report={"window_start": warm})
            for h in ranked[: max(want, 1)]]


def dump_traces(traces):
    return json.dumps({"traces": [t.to_dict() for t in traces]}, indent=1)
