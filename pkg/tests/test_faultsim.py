import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twa import circuits
from twa.aging import AgedDelays, AgingParams
from twa.errors import LengthMismatch, MissingDelay
from twa.faultsim import diff_golden, timed_simulate
from twa.logicsim import simulate_cycles
from twa.timing import ClockSpec, DelayLibrary, closure_period, default_library, run_sta

SLOW = DelayLibrary({"INV": 275, "NAND2": 275, "NOR2": 275}, ff_setup=0, ff_clk_to_q=0)
FAST = DelayLibrary({"INV": 10, "NAND2": 20, "NOR2": 20}, ff_setup=0, ff_clk_to_q=0)


def _chain4_stimulus():
    # inputs (d, b, c); b=1, c=0 make FF_B.d follow FF_A.q
    return [(0, 1, 0), (1, 1, 0)] + [(1, 1, 0)] * 4


def test_chain4_stale_latch():
    n = circuits.chain4()
    res = timed_simulate(n, SLOW, ClockSpec(1000), _chain4_stimulus())
    gold = simulate_cycles(n, _chain4_stimulus())
    b = [f.id for f in n.flipflops].index("FF_B")
    # FF_A.q rises in cycle 2, FF_B.d follows 1100 ps later and misses the 1000 ps edge
    assert gold.ff_states()[:, b].tolist() == [0, 0, 0, 1, 1, 1]
    assert res.states[:, b].tolist() == [0, 0, 0, 0, 1, 1]
    assert res.violations[3] == ["FF_B"]
    assert res.violation_count == 1
    assert res.d_arrivals[2][b] == 1100


def test_unchanged_data_is_no_violation():
    n = circuits.chain4()
    res = timed_simulate(n, SLOW, ClockSpec(1000), [(0, 1, 0)] * 6)
    # cycle 0 counts as a transition of every input; afterwards nothing moves
    assert all(not v for v in res.violations[2:])
    assert all(a == -math.inf for row in res.d_arrivals[2:] for a in row)


def test_chain4_reduces_to_functional():
    n = circuits.chain4()
    rng = np.random.default_rng(0)
    for _ in range(1000):
        stim = [tuple(int(x) for x in rng.integers(0, 2, 3)) for _ in range(12)]
        res = timed_simulate(n, FAST, ClockSpec(1000), stim)
        gold = simulate_cycles(n, stim)
        assert res.violation_count == 0
        assert (res.states == gold.ff_states()).all()
        assert (res.outputs == gold.outputs()).all()


def test_mac_reduces_at_closure_period():
    n = circuits.mac_demo()
    lib = default_library()
    period = closure_period(run_sta(n, lib, ClockSpec(1)), 0.10)
    rng = np.random.default_rng(1)
    stim = circuits.uniform_workload(len(n.primary_inputs), 300, rng, circuits.mac_field_map())
    res = timed_simulate(n, lib, ClockSpec(period), stim)
    gold = simulate_cycles(n, stim)
    assert res.violation_count == 0
    assert (res.outputs == gold.outputs()).all()


def test_missing_aged_delay():
    n = circuits.chain4()
    aged = AgedDelays({"inv1": 10}, 0.0, AgingParams())
    with pytest.raises(MissingDelay):
        timed_simulate(n, aged, ClockSpec(100), [(0, 0, 0)])


def test_bounded_by_sta():
    n = circuits.mac_demo(width=4)
    lib = default_library()
    sta = run_sta(n, lib, ClockSpec(10_000))
    rng = np.random.default_rng(2)
    stim = [tuple(int(x) for x in rng.integers(0, 2, len(n.primary_inputs))) for _ in range(200)]
    res = timed_simulate(n, lib, ClockSpec(10_000), stim)
    for row in res.d_arrivals:
        for f, a in zip(n.flipflops, row):
            assert a <= sta.arrival[f.d_net]


def test_lateness_cap_recorded():
    n = circuits.chain4()
    huge = DelayLibrary({"INV": 5000, "NAND2": 5000, "NOR2": 5000}, ff_setup=0, ff_clk_to_q=0)
    res = timed_simulate(n, huge, ClockSpec(1000), _chain4_stimulus())
    assert res.cap_events
    assert res.violation_count >= 1


_MAC3_GATES = [g.id for g in circuits.mac_demo(width=3).gates]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.tuples(st.integers(0, len(_MAC3_GATES) - 1), st.integers(1, 400)),
                                         min_size=1, max_size=10))
def test_violations_monotone_in_delay(seed, bumps):
    # registered inputs and outputs: capture FFs never feed back, so stale values cannot mask later lateness
    n = circuits.mac_demo(width=3)
    lib = default_library()
    base = {g.id: lib.delay(g) for g in n.gates}
    rng = np.random.default_rng(seed)
    stim = [tuple(int(x) for x in rng.integers(0, 2, len(n.primary_inputs))) for _ in range(60)]
    clk = ClockSpec(440)
    before = timed_simulate(n, AgedDelays(base, 0, AgingParams()), clk, stim, lib)
    slower = dict(base)
    for k, extra in bumps:
        slower[_MAC3_GATES[k]] += extra
    after = timed_simulate(n, AgedDelays(slower, 0, AgingParams()), clk, stim, lib)
    assert after.violation_count >= before.violation_count
    for a, b in zip(before.violations, after.violations):
        assert set(a) <= set(b)


def test_diff_identical_and_single_bit():
    n = circuits.chain4()
    stim = _chain4_stimulus()
    gold = simulate_cycles(n, stim)
    same = timed_simulate(n, FAST, ClockSpec(1000), stim)
    d = diff_golden(gold, same)
    assert d.corrupted_bits == 0
    assert d.first_divergence is None
    late = timed_simulate(n, SLOW, ClockSpec(1000), stim)
    d = diff_golden(gold, late)
    assert d.corrupted_bits == 1
    assert d.first_divergence == 3
    doc = json.loads(d.to_json())
    assert doc["cycles"][3]["mismatched"] == ["FF_B.q"]
    assert doc["cycles"][3]["golden"] == "1"
    assert doc["cycles"][3]["faulty"] == "0"


def test_diff_length_mismatch():
    n = circuits.chain4()
    gold = simulate_cycles(n, _chain4_stimulus())
    short = timed_simulate(n, FAST, ClockSpec(1000), _chain4_stimulus()[:3])
    with pytest.raises(LengthMismatch):
        diff_golden(gold, short)
