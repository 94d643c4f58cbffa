"""End-to-end attack flow: path selection, pattern generation, aging evaluation,
aged timing and corruption demo, with every intermediate artifact on disk."""

import csv
import json
import math
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import networkx
import numpy as np

from . import __version__, circuits
from .aging import (SECONDS_PER_YEAR, AgingParams, acceleration_from_sums, age_delays,
                    calibrate_fitting_constant, delta_delay, path_aged_delays, stress_sum,
                    time_for_shift, time_to_failure, uniform_aged_delays)
from .atpg import compact_and_score, enumerate_path_faults, generate_patterns
from .constraints import ValidityPredicate
from .errors import IoError, PipelineError, TwaError
from .faultsim import diff_golden, timed_simulate
from .logicsim import (SimTrace, activity_proxy, adjust_for_idle, compute_duty_profile,
                       load_stimulus, simulate_cycles)
from .netlist import load_netlist, serialize_netlist
from .program import emit_stimulus_program
from .stabsearch import (StabilityQuery, dump_traces, recommend_targets, search_stable_traces,
                         sequential_depth)
from .timing import (ClockSpec, DelayLibrary, closure_period, default_library,
                     enumerate_near_critical_paths, run_sta, select_target_path)

BUNDLED = {
    "mac_demo": (circuits.mac_demo, circuits.mac_field_map),
    "chain4": (circuits.chain4, None),
    "c17": (circuits.c17, None),
    "diamond": (circuits.diamond, None),
    "inverter": (circuits.inverter, None),
    "xor2": (circuits.xor2, None),
    "toggle_enable": (circuits.toggle_enable, None),
}

DEFAULT_BASELINE = (
    {"kind": "uniform", "cycles": 1000},
    {"kind": "biased", "cycles": 1000, "p_one": 0.3},
    {"kind": "kernel", "cycles": 1000},
)


@dataclass
class AttackConfig:
    netlist: str = "bundled:mac_demo"
    library: str = None
    aging: dict = None
    period_ps: float = None
    guardband_fraction: float = 0.10
    target: str = "longest"
    margin_fraction: float = 0.05
    path_limit: int = 20
    source: str = "atpg"
    pattern_file: str = None
    field_map: object = None
    baseline: list = field(default_factory=lambda: [dict(w) for w in DEFAULT_BASELINE])
    idle_fraction: float = 0.0
    idle_mode: str = "multiplicative"
    horizon_years: float = 2.0
    pattern_length: int = 10
    atpg_budget: int = 10_000
    atpg_passes: int = 3
    stability: dict = field(default_factory=dict)
    loop_cycles: int = 200
    victim: dict = field(default_factory=lambda: {"kind": "uniform", "cycles": 500})
    faultsim_degradation_pct: float = 40.0
    seed: int = 42
    out_dir: str = "twa_out"

    def __post_init__(self):
        if not self.horizon_years > 0:
            raise ValueError("aging horizon must be positive")
        if self.source not in ("atpg", "stability", "file"):
            raise ValueError(f"unknown pattern source {self.source!r}")
        if self.source == "file" and not self.pattern_file:
            raise ValueError("pattern source 'file' needs pattern_file")

    @classmethod
    def from_dict(cls, d, base_dir=None):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        if base_dir is not None:
            base = Path(base_dir)
            for key in ("netlist", "library", "pattern_file"):
                v = getattr(cfg, key)
                if isinstance(v, str) and not v.startswith("bundled:") and not Path(v).is_absolute():
                    setattr(cfg, key, str(base / v))
            for w in cfg.baseline:
                if "path" in w and not Path(w["path"]).is_absolute():
                    w["path"] = str(base / w["path"])
        return cfg

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), Path(path).parent)

    def to_dict(self):
        d = asdict(self)
        if isinstance(self.field_map, ValidityPredicate):
            d["field_map"] = self.field_map.to_dict()
        return d


@dataclass
class ReportRow:
    name: str
    source: str
    acceleration: float
    lifetime_ratio: float
    degradation_pct_at_t: float
    guardband_verdict: str
    mean_toggles_per_cycle: float
    stress_sum: float = 0.0
    time_to_failure_years: float = math.inf

    CSV_COLUMNS = ("name", "source", "acceleration", "lifetime_ratio", "degradation_pct_at_t",
                   "guardband_verdict", "mean_toggles_per_cycle")


@dataclass
class AttackReport:
    netlist: str
    selected_path: dict
    timing: dict
    baseline: dict
    rows: list
    top_pattern: str
    aged_timing: dict
    corruption: dict
    coverage: dict
    provenance: dict

    def to_dict(self):
        d = asdict(self)
        d["rows"] = [asdict(r) for r in self.rows]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["rows"] = [ReportRow(**r) for r in d["rows"]]
        return cls(**d)

    def row(self, name):
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)


def guardband_verdict(degradation_pct, guardband_fraction):
    return "fails" if degradation_pct >= guardband_fraction * 100 else "passes"


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, typ, exc, tb):
        if exc is None or isinstance(exc, PipelineError):
            return False
        if isinstance(exc, (TwaError, OSError, ValueError, KeyError, TypeError)):
            raise PipelineError(self.name, exc) from exc
        return False


def _write(path, text):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


def _dump(obj):
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _load_netlist(cfg):
    if cfg.netlist.startswith("bundled:"):
        name = cfg.netlist.split(":", 1)[1]
        if name not in BUNDLED:
            raise ValueError(f"unknown bundled netlist {name!r}")
        build, fmap = BUNDLED[name]
        return build(), (fmap() if fmap else None)
    if not Path(cfg.netlist).exists():
        raise FileNotFoundError(f"netlist {cfg.netlist} not found")
    return load_netlist(cfg.netlist), None


def _field_map(cfg, default):
    fm = cfg.field_map
    if fm is None:
        return default
    if isinstance(fm, ValidityPredicate):
        return fm
    if isinstance(fm, str):
        return ValidityPredicate.load(fm)
    return ValidityPredicate.from_dict(fm)


def _aging_params(cfg):
    a = cfg.aging
    if isinstance(a, str):
        with open(a, encoding="utf-8") as fh:
            a = json.load(fh)
    a = dict(a or {})
    a.setdefault("guardband_fraction", cfg.guardband_fraction)
    calibrate = a.get("A") is None
    return AgingParams.from_dict(a), calibrate


def _workload(spec, n, fmap, rng):
    kind = spec["kind"]
    width = len(n.primary_inputs)
    cycles = int(spec.get("cycles", 1000))
    if kind == "uniform":
        return circuits.uniform_workload(width, cycles, rng, fmap)
    if kind == "biased":
        return circuits.biased_workload(width, cycles, rng, float(spec.get("p_one", 0.3)), fmap)
    if kind == "kernel":
        names = {f.name for f in fmap.fields} if fmap else set()
        if not {"op", "a", "b", "c"} <= names:
            raise ValueError("kernel workload needs a field map with op, a, b, c")
        return circuits.kernel_workload(cycles, rng, fmap.field("a").width)
    if kind == "file":
        vecs, repeat = load_stimulus(spec["path"])
        return vecs * repeat
    raise ValueError(f"unknown workload kind {kind!r}")


def _steady_trace(n, vectors, min_cycles, warm):
    """Loop ``vectors`` for at least ``min_cycles`` after dropping ``warm`` cycles."""
    vectors = list(vectors)
    repeat = max(1, math.ceil((min_cycles + warm) / len(vectors)))
    tr = simulate_cycles(n, vectors, repeat)
    if tr.cycles - warm >= 2:
        tr = SimTrace(n, tr.net_names, tr.values[warm:], tr.stimulus[warm:])
    return tr


def run_attack_pipeline(cfg):
    """Run the whole flow and write artifacts to ``cfg.out_dir``; returns the report."""
    out = Path(cfg.out_dir)
    stage_rng = lambda k: np.random.default_rng([cfg.seed, k])  # noqa: E731

    with _Stage("load"):
        n, bundled_fmap = _load_netlist(cfg)
        lib = DelayLibrary.load(cfg.library) if cfg.library else default_library()
        fmap = _field_map(cfg, bundled_fmap)
        params, calibrate = _aging_params(cfg)
        if cfg.pattern_file and not Path(cfg.pattern_file).exists():
            raise FileNotFoundError(f"pattern file {cfg.pattern_file} not found")
        _write(out / "netlist.json", serialize_netlist(n) + "\n")

    with _Stage("sta"):
        probe = run_sta(n, lib, ClockSpec(1.0, cfg.guardband_fraction))
        period = cfg.period_ps or closure_period(probe, cfg.guardband_fraction)
        clk = ClockSpec(period, cfg.guardband_fraction)
        sta = run_sta(n, lib, clk)
        paths = enumerate_near_critical_paths(sta, cfg.margin_fraction, cfg.path_limit)
        path = select_target_path(paths, cfg.target)
        _write(out / "sta.json", _dump(sta.to_dict(paths)))

    with _Stage("calibrate"):
        if calibrate:
            params = AgingParams.from_dict({**params.to_dict(),
                                            "A": calibrate_fitting_constant(path, params)})
        t = cfg.horizon_years * SECONDS_PER_YEAR

    coverage = {}
    patterns = []  # (name, stimulus vectors)
    with _Stage("patterns"):
        if cfg.source == "atpg":
            faults = enumerate_path_faults(n, path)
            raw, cov = generate_patterns(n, faults, cfg.pattern_length, cfg.atpg_budget,
                                         cfg.atpg_passes, cfg.seed)
            ranked = compact_and_score(n, raw, path, fmap)
            coverage = {"faults": len(faults), **{k: len(v) for k, v in cov.to_dict().items()}}
            _write(out / "patterns.json", _dump({"patterns": [p.to_dict() for p in ranked],
                                                 "coverage": cov.to_dict()}))
            patterns = [(f"atpg_{p.id}", list(p.stimulus)) for p in ranked if p.stimulus]
        elif cfg.source == "stability":
            s = dict(cfg.stability)
            q = StabilityQuery(tuple(s.get("targets") or recommend_targets(n, path)),
                               int(s.get("hold_cycles", 10)), fmap or ValidityPredicate(),
                               tuple(path.gates), s.get("warmup"))
            strategy = s.get("strategy", {"kind": "mutational", "seed": cfg.seed, "iterations": 20_000})
            traces = search_stable_traces(n, q, strategy, int(s.get("want", 20)))
            _write(out / "traces.json", dump_traces(traces))
            patterns = [(f"stab_{k}", list(tr.vectors)) for k, tr in enumerate(traces)]
        else:
            vecs, repeat = load_stimulus(cfg.pattern_file)
            patterns = [(f"file_{Path(cfg.pattern_file).stem}", vecs * repeat)]
        if not patterns:
            raise ValueError("pattern generation produced no usable pattern")
        if fmap is not None and fmap.fields:
            for name, vecs in patterns[:1]:
                _write(out / f"program_{name}.txt", emit_stimulus_program(vecs, fmap))

    warm = sequential_depth(n)
    with _Stage("baseline"):
        base = []
        for k, spec in enumerate(cfg.baseline):
            name = spec.get("name", spec["kind"])
            vecs = _workload(spec, n, fmap, stage_rng(100 + k))
            tr = _steady_trace(n, vecs, len(vecs), warm)
            prof = compute_duty_profile(tr)
            if cfg.idle_fraction:
                prof = adjust_for_idle(prof, cfg.idle_fraction, cfg.idle_mode)
            base.append((name, prof, activity_proxy(tr)))
            _write(out / "profiles" / f"baseline_{name}.json", _dump(prof.to_dict()))
        sums = [stress_sum(p, path, params.n, params.beta_clamp_epsilon) for _, p, _ in base]
        ref = math.fsum(sums) / len(sums)

    def row(name, source, prof, act):
        s = stress_sum(prof, path, params.n, params.beta_clamp_epsilon)
        af = acceleration_from_sums(s, ref, params.n)
        _, dd = delta_delay(prof, path, params, t)
        deg = dd / path.nominal_delay * 100
        tf = time_to_failure(prof, path, params)
        return ReportRow(name, source, af.aging_acceleration, af.lifetime_ratio, deg,
                         guardband_verdict(deg, params.guardband_fraction),
                         act.mean_toggles_per_cycle, s, tf / SECONDS_PER_YEAR)

    with _Stage("evaluate"):
        rows = [row(name, "baseline", p, a) for name, p, a in base]
        profiles = {}
        for name, vecs in patterns:
            tr = _steady_trace(n, vecs, cfg.loop_cycles, warm)
            prof = compute_duty_profile(tr)
            profiles[name] = prof
            _write(out / "profiles" / f"{name}.json", _dump(prof.to_dict()))
            rows.append(row(name, cfg.source, prof, activity_proxy(tr)))
        top = patterns[0][0]

    with _Stage("aged_timing"):
        aged = age_delays(n, lib, profiles[top], params, t)
        _write(out / "aged_delays.json", _dump(aged.to_dict()))
        aged_sta = run_sta(n, aged.library(lib), clk)
        aged_path_delay = sum(aged.delays[g] for g in path.gate_ids)
        aged_timing = {"t_seconds": t, "pattern": top, "critical_delay": aged_sta.critical_delay,
                       "target_path_delay": aged_path_delay,
                       "target_path_slack": period - path.launch_offset - aged_path_delay
                       - (lib.ff_setup if path.capture_kind == "ff" else 0),
                       "meets_timing": aged_sta.critical_delay <= period - lib.ff_setup}

    with _Stage("faultsim"):
        # demo point: the top pattern has pushed the target path this far past nominal
        t_demo = time_for_shift(profiles[top], path, params,
                                cfg.faultsim_degradation_pct / 100 * path.nominal_delay)
        if not math.isfinite(t_demo):
            t_demo = t
        victim = _workload(cfg.victim, n, fmap, stage_rng(200))
        golden = simulate_cycles(n, victim)
        targeted = path_aged_delays(n, lib, profiles[top], path, params, t_demo)
        _, shift = delta_delay(profiles[top], path, params, t_demo)
        per_gate = shift / len(path.gates)
        uniform = uniform_aged_delays(n, lib, per_gate, params, t_demo)
        corruption = {"t_seconds": t_demo, "victim_cycles": len(victim), "pattern": top,
                      "target_path_shift": shift, "uniform_shift_per_gate": per_gate}
        for label, delays in (("targeted", targeted), ("uniform", uniform)):
            res = timed_simulate(n, delays, clk, victim, lib)
            diff = diff_golden(golden, res)
            _write(out / f"corruption_{label}.json", diff.to_json())
            corruption[label] = {"corrupted_bits": diff.corrupted_bits,
                                 "first_divergence": diff.first_divergence,
                                 "violations": res.violation_count,
                                 "cap_events": len(res.cap_events)}

    report = AttackReport(
        netlist=n.name,
        selected_path=path.to_dict(),
        timing={"period_ps": period, "critical_delay": sta.critical_delay, "paths_considered": len(paths),
                "ff_setup": lib.ff_setup, "ff_clk_to_q": lib.ff_clk_to_q},
        baseline={"workloads": [name for name, _, _ in base], "stress_sums": sums,
                  "reference_stress": ref, "idle_fraction": cfg.idle_fraction, "idle_mode": cfg.idle_mode},
        rows=rows,
        top_pattern=top,
        aged_timing=aged_timing,
        corruption=corruption,
        coverage=coverage,
        provenance={"seed": cfg.seed, "aging_params": params.to_dict(), "calibrated_A": calibrate,
                    "horizon_seconds": t, "config": _provenance_config(cfg), "twa": __version__,
                    "numpy": np.__version__, "networkx": networkx.__version__},
    )
    with _Stage("report"):
        emit_report(report, out)
        _write(out / "metadata.json", _dump({"created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                                            "python": sys.version.split()[0],
                                            "platform": platform.platform()}))
    return report


def _provenance_config(cfg):
    # the output location is not part of the result, so it stays out of the report
    d = cfg.to_dict()
    del d["out_dir"]
    return d


def emit_report(report, out_dir, formats=("json", "csv")):
    """Write report.json and/or summary.csv; returns the paths written."""
    out = Path(out_dir)
    written = []
    if "json" in formats:
        _write(out / "report.json", _dump(report.to_dict()))
        written.append(out / "report.json")
    if "csv" in formats:
        try:
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(ReportRow.CSV_COLUMNS)
                for r in report.rows:
                    w.writerow([getattr(r, c) for c in ReportRow.CSV_COLUMNS])
        except OSError as e:
            raise IoError(f"cannot write summary.csv: {e}") from e
        written.append(out / "summary.csv")
    return written


def load_report(path):
    with open(path, encoding="utf-8") as fh:
        return AttackReport.from_dict(json.load(fh))
