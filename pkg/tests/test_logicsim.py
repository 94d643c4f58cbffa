import json
import random

import numpy as np
import pytest

from twa import circuits
from twa.errors import InvalidFraction, TraceTooShort, WidthMismatch
from twa.logicsim import (DutyProfile, activity_proxy, adjust_for_idle, compute_duty_profile,
                          dump_stimulus, load_stimulus, parse_vector, simulate_cycles, vector_to_str)


def test_inverter_trace():
    tr = simulate_cycles(circuits.inverter(), ["0", "1"])
    assert tr.series("y").tolist() == [1, 0]


def test_and2_truth_table():
    tr = simulate_cycles(circuits.and2(), [(0, 0), (0, 1), (1, 0), (1, 1)])
    assert tr.outputs()[:, 0].tolist() == [0, 0, 0, 1]


def test_chain4_constant_inputs_reach_fixed_point():
    tr = simulate_cycles(circuits.chain4(), [(1, 0, 1)], repeat=6)
    assert (tr.values[2:] == tr.values[1]).all()


def test_vector_formats_agree():
    assert parse_vector("011") == (0, 1, 1)
    assert parse_vector(6, 3) == (0, 1, 1)
    assert parse_vector([0, 1, 1]) == (0, 1, 1)
    assert vector_to_str((0, 1, 1)) == "011"
    with pytest.raises(WidthMismatch):
        simulate_cycles(circuits.and2(), ["101"])


def test_duty_examples():
    prof = compute_duty_profile(simulate_cycles(circuits.inverter(), ["0", "0", "1", "0"]))
    assert prof.get("g0", 0) == 0.75
    assert compute_duty_profile(simulate_cycles(circuits.inverter(), ["1"] * 5)).get("g0", 0) == 0.0
    assert compute_duty_profile(simulate_cycles(circuits.inverter(), ["0"] * 5)).get("g0", 0) == 1.0


def test_idle_adjustment():
    prof = DutyProfile({("g", 0): 0.8}, 10)
    assert adjust_for_idle(prof, 0.14).get("g", 0) == pytest.approx(0.688, abs=1e-12)
    assert adjust_for_idle(prof, 0.14, "subtractive").get("g", 0) == pytest.approx(0.66, abs=1e-12)
    assert adjust_for_idle(prof, 0.0).beta == prof.beta
    assert adjust_for_idle(DutyProfile({("g", 0): 0.1}, 10), 0.14, "subtractive").get("g", 0) == 0.0
    with pytest.raises(InvalidFraction):
        adjust_for_idle(prof, 1.0)
    with pytest.raises(InvalidFraction):
        adjust_for_idle(prof, -0.1)


def test_toggle_counts():
    tr = simulate_cycles(circuits.inverter(), ["0", "1", "0", "1"])
    act = activity_proxy(tr)
    assert act.toggles["a"] == 3
    assert act.toggles["y"] == 3
    assert act.mean_toggles_per_cycle == pytest.approx(1.5)
    flat = activity_proxy(simulate_cycles(circuits.inverter(), ["1"] * 4))
    assert flat.toggles["a"] == 0
    with pytest.raises(TraceTooShort):
        activity_proxy(simulate_cycles(circuits.inverter(), ["1"]))


def test_empty_trace_rejected():
    with pytest.raises(TraceTooShort):
        compute_duty_profile(simulate_cycles(circuits.inverter(), []))


def test_reference_model_mac():
    n = circuits.mac_demo(registered=False)
    fm = circuits.mac_field_map(8)
    rng = random.Random(3)
    ops = []
    for _ in range(50):
        op, a, b, c = rng.choice([1, 2]), rng.randrange(256), rng.randrange(256), rng.randrange(1 << 16)
        ops.append((op, a, b, c, circuits.pack_fields(fm, {"op": op, "a": a, "b": b, "c": c})))
    tr = simulate_cycles(n, [v for *_, v in ops])
    for row, (op, a, b, c, _) in zip(tr.outputs(), ops):
        got = sum(int(bit) << k for k, bit in enumerate(row))
        assert got == circuits.mac_reference(op, a, b, c, 8)


def test_sequential_state_advances():
    n = circuits.toggle_enable()
    tr = simulate_cycles(n, ["1"] * 4)
    assert tr.series("q").tolist() == [0, 1, 0, 1]


def test_profile_and_stimulus_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    tr = simulate_cycles(circuits.c17(), [tuple(int(b) for b in rng.integers(0, 2, 5)) for _ in range(8)])
    prof = compute_duty_profile(tr)
    p = tmp_path / "p.json"
    p.write_text(json.dumps(prof.to_dict()))
    assert DutyProfile.load(p) == prof
    s = tmp_path / "s.json"
    s.write_text(dump_stimulus(tr.stimulus, repeat=2))
    vecs, rep = load_stimulus(s)
    assert rep == 2
    assert vecs == list(tr.stimulus)
