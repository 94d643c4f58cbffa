import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from twa import circuits
from twa.aging import (SECONDS_PER_YEAR, AgedDelays, AgingParams, AlphaPowerParams, acceleration_factor,
                       age_delays, alpha_power_delay, calibrate_fitting_constant, delta_delay,
                       path_aged_delays, stress_sum, time_for_shift, time_to_failure)
from twa.errors import DomainError, MissingBeta
from twa.logicsim import DutyProfile
from twa.timing import ClockSpec, DelayLibrary, enumerate_near_critical_paths, run_sta
from twa.netlist import GateInstance, Netlist
from twa.cells import CellKind


def chain(k, nominal=None):
    """A k-gate synthetic path (no netlist behind it)."""
    from twa.timing import TimingPath
    gates = tuple((f"g{i}", 0) for i in range(k))
    nets = ("src",) + tuple(f"n{i}" for i in range(k))
    return TimingPath("src", "dst", gates, nets, nominal if nominal is not None else 10 * k, 0)


def profile(path, betas):
    return DutyProfile({gp: b for gp, b in zip(path.gates, betas)}, 100)


UNIT = AgingParams().with_kappa(1.0)


def test_alpha_power_examples():
    assert alpha_power_delay(AlphaPowerParams(1.0, 0.3)) == pytest.approx(1.5899, abs=1e-4)
    ratio = alpha_power_delay(AlphaPowerParams(1.0, 0.4)) / alpha_power_delay(AlphaPowerParams(1.0, 0.3))
    assert ratio == pytest.approx(1.2219, abs=1e-4)
    assert alpha_power_delay(AlphaPowerParams(1.0, 0.3, mu=2.0, alpha=0.0)) == 0.5
    assert alpha_power_delay(AlphaPowerParams(1.0, 0.6, mu=2.0, alpha=0.0)) == 0.5
    with pytest.raises(DomainError):
        alpha_power_delay(AlphaPowerParams(0.3, 0.3))


def test_params_validation():
    with pytest.raises(DomainError):
        AgingParams(A=0)
    with pytest.raises(DomainError):
        AgingParams(n=1.0)
    assert UNIT.kappa == pytest.approx(1.0, rel=1e-12)


def test_delta_delay_spot_values():
    p1 = chain(1)
    assert delta_delay(profile(p1, [0.5]), p1, UNIT, 1.0)[1] == pytest.approx(1.0, rel=1e-12)
    p2 = chain(2)
    assert delta_delay(profile(p2, [0.5, 0.5]), p2, UNIT, 64.0)[1] == pytest.approx(4.0, rel=1e-12)
    assert delta_delay(profile(p2, [0.5, 0.5]), p2, UNIT, 0.0)[1] == 0.0
    assert delta_delay(profile(p2, [0.0, 0.0]), p2, UNIT, 99.0)[1] == 0.0
    with pytest.raises(MissingBeta):
        delta_delay(DutyProfile({}, 1), p2, UNIT, 1.0)
    with pytest.raises(DomainError):
        delta_delay(profile(p2, [0.5, 0.5]), p2, UNIT, -1.0)


def test_beta_one_is_clamped():
    p = chain(1)
    _, d = delta_delay(profile(p, [1.0]), p, UNIT, 1.0)
    assert math.isfinite(d)
    assert d == pytest.approx(((1 - 1e-3) / 1e-3) ** (1 / 6), rel=1e-12)


def test_acceleration_examples():
    p1 = chain(1)
    af = acceleration_factor(profile(p1, [2 / 3]), p1, profile(p1, [0.5]), p1)
    assert af.aging_acceleration == pytest.approx(2.0, rel=1e-12)
    assert af.lifetime_ratio == pytest.approx(0.5, rel=1e-12)
    p25 = chain(25)
    af = acceleration_factor(profile(p25, [0.9] * 25), p25, profile(p25, [0.5] * 25), p25)
    assert af.aging_acceleration == pytest.approx(9.0, rel=1e-9)
    assert af.lifetime_ratio == pytest.approx(1 / 9, rel=1e-9)
    same = profile(p25, [0.3] * 25)
    assert acceleration_factor(same, p25, same, p25).aging_acceleration == 1.0


def test_zero_stress_is_infinite_lifetime():
    p = chain(3)
    af = acceleration_factor(profile(p, [0, 0, 0]), p, profile(p, [0.5] * 3), p)
    assert af.lifetime_ratio == math.inf
    assert af.aging_acceleration == 0.0
    assert time_to_failure(profile(p, [0, 0, 0]), p, UNIT) == math.inf


def test_calibration_example():
    p = chain(25, nominal=60)
    params = AgingParams()
    A = calibrate_fitting_constant(p, params)
    five = 5 * SECONDS_PER_YEAR
    expected = 6 * math.exp(params.n * params.Ea_eV / (params.k * params.T_K)) / (25 * five ** params.n)
    assert A == pytest.approx(expected, rel=1e-12)
    cal = AgingParams(A=A)
    assert delta_delay(profile(p, [0.5] * 25), p, cal, five)[1] == pytest.approx(6.0, rel=1e-12)
    with pytest.raises(DomainError):
        calibrate_fitting_constant(p, params, beta_cal=0.0)


def test_time_to_failure_examples():
    p = chain(1)
    assert time_to_failure(profile(p, [0.5]), p, UNIT, threshold=1.2) == pytest.approx(2.985984, rel=1e-12)
    assert time_to_failure(profile(p, [0.5]), p, UNIT, threshold=0.0) == 0.0
    p25 = chain(25)
    cal = AgingParams(A=calibrate_fitting_constant(p25, AgingParams()))
    # per-gate beta giving acceleration 5 against the uniform 0.5 calibration
    t = time_to_failure(profile(p25, [5 / 6] * 25), p25, cal)
    assert t / SECONDS_PER_YEAR == pytest.approx(1.0, rel=1e-6)


def test_time_for_shift_inverts_delta():
    p = chain(4)
    prof = profile(p, [0.2, 0.5, 0.7, 0.9])
    t = time_for_shift(prof, p, UNIT, 3.0)
    assert delta_delay(prof, p, UNIT, t)[1] == pytest.approx(3.0, rel=1e-12)


def test_age_delays_chain4():
    n = circuits.chain4()
    lib = DelayLibrary({"INV": 10, "NAND2": 20, "NOR2": 20})
    path = enumerate_near_critical_paths(run_sta(n, lib, ClockSpec(1000)), 0.0, 1)[0]
    beta = {gp: 0.5 for gp in path.gates}
    beta.update({("nand1", 1): 0.0, ("nor1", 1): 0.0})
    aged = age_delays(n, lib, DutyProfile(beta, 10), UNIT, 1.0)
    assert aged.delays == pytest.approx({"inv1": 11, "nand1": 21, "nor1": 21, "inv2": 11}, rel=1e-12)
    again = run_sta(n, aged.library(lib), ClockSpec(1000))
    assert again.critical_delay == pytest.approx(64, rel=1e-12)
    zero = age_delays(n, lib, DutyProfile({k: 0.0 for k in beta}, 10), UNIT, 1e9)
    assert zero.delays == {"inv1": 10, "nand1": 20, "nor1": 20, "inv2": 10}
    only = path_aged_delays(n, lib, DutyProfile(beta, 10), path, UNIT, 1.0)
    assert only.delays == pytest.approx(aged.delays, rel=1e-12)
    assert AgedDelays.from_dict(only.to_dict()) == only


def test_age_delays_worst_pin():
    n = Netlist("one", ("a", "b"), ("y",), (GateInstance("g", CellKind.NAND2, ("a", "b"), "y"),), ())
    lib = DelayLibrary({"NAND2": 10})
    aged = age_delays(n, lib, DutyProfile({("g", 0): 0.2, ("g", 1): 0.8}, 10), UNIT, 1.0)
    assert aged.delays["g"] == pytest.approx(10 + 4 ** (1 / 6), rel=1e-12)


# -- randomized properties ----------------------------------------------------------

betas = st.floats(0.0, 0.999, allow_nan=False)


@settings(max_examples=300, deadline=None)
@given(st.lists(betas, min_size=1, max_size=30), st.floats(1.0, 1e9), st.floats(1.0, 1e9),
       st.floats(0.05, 0.5))
def test_delta_monotone_in_time(bs, t1, t2, n_exp):
    p = chain(len(bs))
    params = AgingParams(n=n_exp)
    lo, hi = sorted((t1, t2))
    assert delta_delay(profile(p, bs), p, params, lo)[1] <= delta_delay(profile(p, bs), p, params, hi)[1]


@settings(max_examples=300, deadline=None)
@given(st.lists(betas, min_size=1, max_size=30), st.integers(0, 1000), st.floats(0.0, 0.5))
def test_delta_monotone_in_beta(bs, pick, bump):
    p = chain(len(bs))
    i = pick % len(bs)
    raised = list(bs)
    raised[i] = min(0.999, bs[i] + bump)
    assert delta_delay(profile(p, bs), p, UNIT, 1e6)[1] <= delta_delay(profile(p, raised), p, UNIT, 1e6)[1]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=30),
       st.lists(st.floats(0.01, 0.99), min_size=1, max_size=30))
def test_acceleration_reciprocity(a, b):
    pa, pb = chain(len(a)), chain(len(b))
    x = acceleration_factor(profile(pa, a), pa, profile(pb, b), pb).aging_acceleration
    y = acceleration_factor(profile(pb, b), pb, profile(pa, a), pa).aging_acceleration
    assert x * y == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(betas, min_size=1, max_size=30), st.randoms(use_true_random=False))
def test_stress_sum_permutation_invariant(bs, rnd):
    p = chain(len(bs))
    shuffled = list(bs)
    rnd.shuffle(shuffled)
    assert stress_sum(profile(p, shuffled), p) == pytest.approx(stress_sum(profile(p, bs), p), rel=1e-12)


def test_lifetime_inversion_random():
    rng = random.Random(11)
    for _ in range(1000):
        k = rng.randint(1, 30)
        p = chain(k, nominal=rng.uniform(50, 2000))
        prof = profile(p, [rng.uniform(0.01, 0.99) for _ in range(k)])
        params = AgingParams(A=10 ** rng.uniform(-3, 3), Ea_eV=rng.uniform(0.05, 0.2),
                             T_K=rng.uniform(250, 400), n=rng.uniform(0.1, 0.3),
                             guardband_fraction=rng.uniform(0.01, 0.3))
        t = time_to_failure(prof, p, params)
        thr = params.guardband_fraction * p.nominal_delay
        assert delta_delay(prof, p, params, t)[1] == pytest.approx(thr, rel=1e-9)
