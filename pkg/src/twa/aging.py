"""NBTI delay-shift model, acceleration factor and lifetime solving.

Per-gate delay shift after stress time ``t`` at duty cycle ``beta``::

    dd(beta, t) = A * exp(-n * Ea / (k * T)) * t**n * (beta / (1 - beta))**n

The prefactor ``A * exp(-n * Ea / (k * T))`` is called ``kappa`` below. It
cancels in every ratio between two workloads, so acceleration factors do not
depend on ``A``, ``Ea`` or ``T``.
"""

import json
import math
from dataclasses import asdict, dataclass, replace

from .errors import DomainError, MissingBeta

BOLTZMANN_EV = 8.617333262e-5
SECONDS_PER_YEAR = 365.25 * 24 * 3600


@dataclass(frozen=True)
class AlphaPowerParams:
    v_dd: float
    v_th: float
    mu: float = 1.0
    alpha: float = 1.3


def alpha_power_delay(p):
    """Relative gate delay V_dd / (mu * (V_dd - V_th)**alpha)."""
    if p.mu <= 0:
        raise DomainError("mobility must be positive")
    if p.v_dd <= p.v_th:
        raise DomainError(f"V_dd={p.v_dd} must exceed V_th={p.v_th}")
    return p.v_dd / (p.mu * (p.v_dd - p.v_th) ** p.alpha)


@dataclass(frozen=True)
class AgingParams:
    A: float = 1.0
    Ea_eV: float = 0.5
    T_K: float = 358.15
    n: float = 1 / 6
    beta_clamp_epsilon: float = 1e-3
    guardband_fraction: float = 0.10
    k: float = BOLTZMANN_EV

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError("A must be positive")
        if not self.T_K > 0:
            raise DomainError("temperature must be positive")
        if not 0 < self.n < 1:
            raise DomainError("time exponent must lie in (0, 1)")
        if not 0 < self.beta_clamp_epsilon < 0.1:
            raise DomainError("beta clamp epsilon must lie in (0, 0.1)")

    @property
    def kappa(self):
        return self.A * math.exp(-self.n * self.Ea_eV / (self.k * self.T_K))

    def with_kappa(self, kappa):
        """Same params with ``A`` chosen so that the prefactor equals ``kappa``."""
        return replace(self, A=kappa * math.exp(self.n * self.Ea_eV / (self.k * self.T_K)))

    def to_dict(self):
        d = asdict(self)
        del d["k"]
        return d

    @classmethod
    def from_dict(cls, d):
        keys = {"A", "Ea_eV", "T_K", "n", "beta_clamp_epsilon", "guardband_fraction"}
        return cls(**{k: v for k, v in d.items() if k in keys and v is not None})

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def stress_term(beta, n, eps=1e-3):
    """(beta / (1 - beta))**n with beta clamped to [0, 1 - eps]."""
    b = min(max(beta, 0.0), 1.0 - eps)
    if b == 0.0:
        return 0.0
    return (b / (1.0 - b)) ** n


def _path_betas(profile, path):
    betas = []
    for gid, pin in path.gates:
        b = profile.get(gid, pin)
        if b is None:
            raise MissingBeta(f"{gid}:{pin}")
        betas.append(b)
    return betas


def stress_sum(profile, path, n=1 / 6, eps=1e-3):
    """Sum of stress terms over the on-path pin of every path gate."""
    return math.fsum(stress_term(b, n, eps) for b in _path_betas(profile, path))


def delta_delay(profile, path, params, t):
    """Per-gate and total delay shift (ps) of ``path`` after ``t`` seconds."""
    if t < 0:
        raise DomainError("stress time must be non-negative")
    scale = params.kappa * t ** params.n
    per_gate = {}
    for (gid, pin), b in zip(path.gates, _path_betas(profile, path)):
        per_gate[gid] = per_gate.get(gid, 0.0) + scale * stress_term(b, params.n, params.beta_clamp_epsilon)
    return per_gate, math.fsum(per_gate.values())


@dataclass(frozen=True)
class AccelerationFactor:
    lifetime_ratio: float
    aging_acceleration: float
    dut_stress: float
    ref_stress: float

    def to_dict(self):
        return asdict(self)


def acceleration_from_sums(dut_stress, ref_stress, n=1 / 6):
    """Lifetime ratio (dut / ref) and its reciprocal from two stress sums.

    A stress-free DUT never fails: lifetime ratio +inf, acceleration 0.
    """
    if dut_stress == 0:
        return AccelerationFactor(math.inf, 0.0, dut_stress, ref_stress)
    if ref_stress == 0:
        return AccelerationFactor(0.0, math.inf, dut_stress, ref_stress)
    ratio = (ref_stress / dut_stress) ** (1 / n)
    accel = (dut_stress / ref_stress) ** (1 / n)
    return AccelerationFactor(ratio, accel, dut_stress, ref_stress)


def acceleration_factor(dut_profile, dut_path, ref_profile, ref_path, n=1 / 6, eps=1e-3):
    dut = stress_sum(dut_profile, dut_path, n, eps)
    ref = stress_sum(ref_profile, ref_path, n, eps)
    return acceleration_from_sums(dut, ref, n)


def failure_threshold(path, guardband_fraction):
    return guardband_fraction * path.nominal_delay


def calibrate_fitting_constant(path, params, beta_cal=0.5, lifetime_cal_seconds=5 * SECONDS_PER_YEAR,
                               threshold=None):
    """``A`` that makes a uniform ``beta_cal`` path fail exactly at ``lifetime_cal_seconds``.

    ``params.A`` is ignored. The threshold defaults to the guardband
    fraction of the path's nominal delay.
    """
    if not 0 < beta_cal < 1:
        raise DomainError(f"calibration duty cycle {beta_cal} must lie in (0, 1)")
    if not lifetime_cal_seconds > 0:
        raise DomainError("calibration lifetime must be positive")
    if threshold is None:
        threshold = failure_threshold(path, params.guardband_fraction)
    total = len(path.gates) * stress_term(beta_cal, params.n, params.beta_clamp_epsilon)
    if total == 0:
        raise DomainError("calibration path carries no stress")
    kappa = threshold / (total * lifetime_cal_seconds ** params.n)
    return kappa * math.exp(params.n * params.Ea_eV / (params.k * params.T_K))


def time_to_failure(profile, path, params, threshold=None):
    """Seconds until the path's delay shift reaches the failure threshold.

    Returns ``math.inf`` for a stress-free path.
    """
    if threshold is None:
        threshold = failure_threshold(path, params.guardband_fraction)
    s = stress_sum(profile, path, params.n, params.beta_clamp_epsilon)
    if s == 0:
        return math.inf
    if threshold <= 0:
        return 0.0
    return (threshold / (params.kappa * s)) ** (1 / params.n)


@dataclass
class AgedDelays:
    delays: dict
    t_seconds: float
    params: AgingParams
    convention: str = "worst-pin"

    def library(self, lib):
        """The nominal library with every gate overridden by its aged delay."""
        return lib.with_overrides(self.delays)

    def to_dict(self):
        return {"t_seconds": self.t_seconds, "convention": self.convention,
                "params": self.params.to_dict(), "delays": dict(sorted(self.delays.items()))}

    @classmethod
    def from_dict(cls, d):
        return cls(dict(d["delays"]), d["t_seconds"], AgingParams.from_dict(d["params"]),
                   d.get("convention", "worst-pin"))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def age_delays(n, lib, profile, params, t):
    """Aged delay of every gate, driven by the most stressed of its input pins."""
    scale = params.kappa * t ** params.n
    out = {}
    for g in n.gates:
        worst = max((profile.get(g.id, pin, 0.0) for pin in range(len(g.input_nets))), default=0.0)
        out[g.id] = lib.delay(g) + scale * stress_term(worst, params.n, params.beta_clamp_epsilon)
    return AgedDelays(out, t, params)


def uniform_aged_delays(n, lib, shift, params=None, t=0.0):
    """Every gate slowed by the same ``shift`` picoseconds."""
    out = {g.id: lib.delay(g) + shift for g in n.gates}
    return AgedDelays(out, t, params or AgingParams(), convention="uniform")


def path_aged_delays(n, lib, profile, path, params, t):
    """Only the gates of ``path`` aged, by their on-path pin; everything else nominal."""
    per_gate, _ = delta_delay(profile, path, params, t)
    out = {g.id: lib.delay(g) + per_gate.get(g.id, 0.0) for g in n.gates}
    return AgedDelays(out, t, params, convention="path-only")


def time_for_shift(profile, path, params, shift):
    """Stress time at which the path's total delay shift equals ``shift`` ps."""
    s = stress_sum(profile, path, params.n, params.beta_clamp_epsilon)
    if s == 0:
        return math.inf
    return (shift / (params.kappa * s)) ** (1 / params.n)
