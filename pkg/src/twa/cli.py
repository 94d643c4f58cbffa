"""Command-line front end: ``twa <subcommand> ...``."""

import argparse
import json
import sys
from pathlib import Path

from .aging import SECONDS_PER_YEAR, AgingParams, AgedDelays, acceleration_from_sums, age_delays, \
    calibrate_fitting_constant, stress_sum, time_to_failure
from .atpg import compact_and_score, enumerate_path_faults, generate_patterns
from .constraints import ValidityPredicate
from .errors import TwaError
from .faultsim import diff_golden, timed_simulate
from .logicsim import (DutyProfile, activity_proxy, adjust_for_idle, compute_duty_profile,
                       load_stimulus, simulate_cycles, vector_to_str)
from .netlist import load_netlist, validate_netlist
from .pipeline import BUNDLED, AttackConfig, run_attack_pipeline
from .program import emit_stimulus_program
from .stabsearch import StabilityQuery, dump_traces, search_stable_traces
from .timing import (ClockSpec, DelayLibrary, closure_period, default_library,
                     TimingPath, enumerate_near_critical_paths, run_sta, select_target_path)


def _netlist(arg):
    if isinstance(arg, argparse.Namespace):
        arg = arg.netlist or arg.netlist_opt
        if not arg:
            raise SystemExit("a netlist is required")
    if arg.startswith("bundled:"):
        name = arg.split(":", 1)[1]
        if name not in BUNDLED:
            raise SystemExit(f"unknown bundled netlist {name!r}; choose from {sorted(BUNDLED)}")
        return BUNDLED[name][0]()
    return load_netlist(arg)


def _library(path):
    return DelayLibrary.load(path) if path else default_library()


def _emit(args, name, text):
    """Write to --out, else into --out-dir/<name> when given, else stdout."""
    target = getattr(args, "out", None)
    if target is None and args.out_dir:
        target = Path(args.out_dir) / name
    if target is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    Path(target).parent.mkdir(parents=True, exist_ok=True)
    Path(target).write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    print(f"wrote {target}")


def _write_file(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text + "\n", encoding="utf-8")
    print(f"wrote {path}")


def _dump(obj):
    return json.dumps(obj, indent=1, sort_keys=True)


def _clock(args, n, lib):
    if args.period_ps:
        return ClockSpec(args.period_ps, args.guardband)
    probe = run_sta(n, lib, ClockSpec(1.0, args.guardband))
    return ClockSpec(closure_period(probe, args.guardband), args.guardband)


def _target_path(args, n, lib):
    if getattr(args, "path", None):
        with open(args.path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return None, [], TimingPath.from_dict(doc.get("critical_path") or doc)
    clk = _clock(args, n, lib)
    sta = run_sta(n, lib, clk)
    paths = enumerate_near_critical_paths(sta, args.margin, args.limit)
    return sta, paths, select_target_path(paths, args.target)


def cmd_netlist_validate(args):
    n = _netlist(args.netlist)
    diags = validate_netlist(n)
    for d in diags:
        print(f"{d}: {d.detail}")
    if not diags:
        print(f"{n.name}: ok ({len(n.gates)} gates, {len(n.flipflops)} flip-flops)")
    return 1 if diags else 0


def cmd_sta(args):
    n = _netlist(args.netlist)
    lib = _library(args.lib)
    sta, paths, _ = _target_path(args, n, lib)
    _emit(args, "sta.json", _dump(sta.to_dict(paths)))
    return 0


def cmd_sim(args):
    n = _netlist(args.netlist)
    vecs, repeat = load_stimulus(args.stimulus)
    tr = simulate_cycles(n, vecs, args.repeat or repeat)
    prof = compute_duty_profile(tr)
    if args.idle:
        prof = adjust_for_idle(prof, args.idle, args.idle_mode)
    doc = {"cycles": tr.cycles, "outputs": [vector_to_str(r) for r in tr.outputs().tolist()],
           "duty": prof.to_dict()}
    if tr.cycles >= 2:
        doc["activity"] = activity_proxy(tr).to_dict()
    if args.duty:
        _write_file(args.duty, _dump(doc["duty"]))
    if args.activity:
        _write_file(args.activity, _dump(doc.get("activity", {})))
    if not (args.duty or args.activity) or args.out:
        _emit(args, "sim.json", _dump(doc))
    return 0


def cmd_atpg(args):
    n = _netlist(args.netlist)
    lib = _library(args.lib)
    _, _, path = _target_path(args, n, lib)
    faults = enumerate_path_faults(n, path)
    raw, cov = generate_patterns(n, faults, args.pattern_length, args.budget, args.passes, args.seed)
    fmap = ValidityPredicate.load(args.constraints) if args.constraints else None
    ranked = compact_and_score(n, raw, path, fmap)
    _emit(args, "patterns.json", _dump({"path": path.to_dict(), "coverage": cov.to_dict(),
                                        "patterns": [p.to_dict() for p in ranked]}))
    return 0


def cmd_stab(args):
    n = _netlist(args.netlist)
    with open(args.query, encoding="utf-8") as fh:
        doc = json.load(fh)
    q = StabilityQuery.from_dict(doc)
    strategy = doc.get("strategy", {"kind": "mutational", "seed": args.seed, "iterations": 100_000})
    traces = search_stable_traces(n, q, strategy, args.want)
    _emit(args, "traces.json", dump_traces(traces))
    return 0


def _params(args):
    return AgingParams.load(args.params) if args.params else AgingParams()


def cmd_age(args):
    n = _netlist(args)
    lib = _library(args.lib)
    prof = DutyProfile.load(args.duty)
    params = _params(args)
    if args.calibrate:
        _, _, path = _target_path(args, n, lib)
        params = AgingParams.from_dict({**params.to_dict(), "A": calibrate_fitting_constant(path, params)})
    if args.t_seconds is None and args.t_years is None:
        raise SystemExit("give --t-years or --t-seconds")
    t = args.t_seconds if args.t_seconds is not None else args.t_years * SECONDS_PER_YEAR
    aged = age_delays(n, lib, prof, params, t)
    _emit(args, "aged_delays.json", _dump(aged.to_dict()))
    return 0


def cmd_af(args):
    n = _netlist(args)
    lib = _library(args.lib)
    _, _, path = _target_path(args, n, lib)
    params = _params(args)
    dut = DutyProfile.load(args.dut)
    refs = [DutyProfile.load(r) for r in args.ref]
    s_dut = stress_sum(dut, path, params.n, params.beta_clamp_epsilon)
    s_ref = sum(stress_sum(r, path, params.n, params.beta_clamp_epsilon) for r in refs) / len(refs)
    af = acceleration_from_sums(s_dut, s_ref, params.n)
    doc = {"path": {"launch": path.launch, "capture": path.capture, "gates": list(path.gate_ids),
                    "nominal_delay": path.nominal_delay}, **af.to_dict()}
    if args.calibrate:
        params = AgingParams.from_dict({**params.to_dict(), "A": calibrate_fitting_constant(path, params)})
        doc["time_to_failure_years"] = time_to_failure(dut, path, params) / SECONDS_PER_YEAR
    _emit(args, "af.json", _dump(doc))
    return 0


def cmd_faultsim(args):
    n = _netlist(args.netlist)
    lib = _library(args.lib)
    aged = AgedDelays.load(args.aged)
    vecs, repeat = load_stimulus(args.stimulus)
    vecs = vecs * repeat
    res = timed_simulate(n, aged, ClockSpec(args.period_ps), vecs, lib)
    diff = diff_golden(simulate_cycles(n, vecs), res)
    if args.golden_diff:
        Path(args.golden_diff).parent.mkdir(parents=True, exist_ok=True)
        Path(args.golden_diff).write_text(diff.to_json() + "\n", encoding="utf-8")
    print(_dump({"violations": res.violation_count, "corrupted_bits": diff.corrupted_bits,
                 "first_divergence": diff.first_divergence, "cap_events": len(res.cap_events)}))
    return 0


def cmd_attack(args):
    if args.config:
        cfg = AttackConfig.load(args.config)
    else:
        cfg = AttackConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out_dir:
        cfg.out_dir = args.out_dir
    report = run_attack_pipeline(cfg)
    top = report.row(report.top_pattern)
    print(f"path {report.selected_path['launch']} -> {report.selected_path['capture']}, "
          f"{len(report.selected_path['gates'])} gates")
    print(f"top pattern {top.name}: acceleration {top.acceleration:.4g}, "
          f"degradation {top.degradation_pct_at_t:.3g}% ({top.guardband_verdict})")
    print(f"artifacts in {cfg.out_dir}")
    return 0


def _load_vectors(path, index):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if "patterns" in doc:
        p = doc["patterns"][index]
        return [tuple(int(b) for b in v) for v in (p.get("stimulus") or p["vectors"])]
    if "traces" in doc:
        return [tuple(int(b) for b in v) for v in doc["traces"][index]["vectors"]]
    return [tuple(int(b) for b in v) for v in doc["vectors"]]


def cmd_emit_program(args):
    fmap = ValidityPredicate.load(args.field_map)
    text = emit_stimulus_program(_load_vectors(args.pattern, args.index), fmap)
    _emit(args, "program.txt", text)
    return 0


def _timing_args(p):
    p.add_argument("--lib", help="delay library JSON (default: bundled library)")
    p.add_argument("--period-ps", type=float, help="clock period (default: closure period)")
    p.add_argument("--guardband", type=float, default=0.10)
    p.add_argument("--margin", type=float, default=0.05, help="near-critical margin fraction")
    p.add_argument("--limit", type=int, default=20, help="max paths to enumerate")
    p.add_argument("--target", default="longest", help="longest | through_net:<net> | index:<k>")


def _path_arg(p):
    p.add_argument("--path", help="TimingPath JSON (or an sta report) instead of running STA")


def build_parser():
    # global options work before or after the subcommand; SUPPRESS keeps a
    # subcommand's unset copy from clobbering a value given up front
    def globals_(parser, default):
        parser.add_argument("--seed", type=int, default=default)
        parser.add_argument("--out-dir", default=default)
        parser.add_argument("--config", default=default, help="pipeline config JSON")

    common = argparse.ArgumentParser(add_help=False)
    globals_(common, argparse.SUPPRESS)
    ap = argparse.ArgumentParser(prog="twa", description="Targeted wearout analysis toolkit")
    globals_(ap, None)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add(parent, name, **kw):
        return parent.add_parser(name, parents=[common], **kw)

    p = add(sub, "netlist", help="netlist utilities")
    nsub = p.add_subparsers(dest="netcmd", required=True)
    v = add(nsub, "validate", help="report structural problems")
    v.add_argument("netlist")
    v.set_defaults(func=cmd_netlist_validate)

    p = add(sub, "sta", help="static timing analysis")
    p.add_argument("netlist")
    _timing_args(p)
    p.add_argument("--out", "--report", dest="out")
    p.set_defaults(func=cmd_sta)

    p = add(sub, "sim", help="functional simulation, duty cycles, activity")
    p.add_argument("netlist")
    p.add_argument("--stimulus", required=True)
    p.add_argument("--repeat", type=int)
    p.add_argument("--idle", type=float, default=0.0)
    p.add_argument("--idle-mode", default="multiplicative", choices=["multiplicative", "subtractive"])
    p.add_argument("--duty", help="write the duty profile here")
    p.add_argument("--activity", help="write the activity report here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sim)

    p = add(sub, "atpg", help="stuck-at-1 patterns for the target path")
    p.add_argument("netlist")
    _timing_args(p)
    p.add_argument("--pattern-length", type=int, default=10)
    p.add_argument("--budget", type=int, default=10_000, help="backtrack limit per fault")
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--constraints", help="validity predicate JSON")
    p.add_argument("--out")
    _path_arg(p)
    p.set_defaults(func=cmd_atpg)

    p = add(sub, "stab", help="search for stable input traces")
    p.add_argument("netlist")
    p.add_argument("--query", required=True)
    p.add_argument("--want", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stab)

    p = add(sub, "age", help="aged delays from a duty profile")
    p.add_argument("netlist", nargs="?")
    p.add_argument("--netlist", dest="netlist_opt")
    _timing_args(p)
    p.add_argument("--duty", required=True)
    p.add_argument("--params")
    p.add_argument("--t-years", type=float)
    p.add_argument("--t-seconds", type=float)
    p.add_argument("--calibrate", action="store_true", help="fit A to a 5-year life at duty 0.5")
    p.add_argument("--out")
    _path_arg(p)
    p.set_defaults(func=cmd_age)

    p = add(sub, "af", help="acceleration factor of one profile against references")
    p.add_argument("netlist", nargs="?")
    p.add_argument("--netlist", dest="netlist_opt")
    _timing_args(p)
    p.add_argument("--dut", required=True)
    p.add_argument("--ref", required=True, nargs="+")
    p.add_argument("--params")
    p.add_argument("--calibrate", action="store_true")
    p.add_argument("--out")
    _path_arg(p)
    p.set_defaults(func=cmd_af)

    p = add(sub, "faultsim", help="timed simulation against aged delays")
    p.add_argument("netlist")
    p.add_argument("--aged", required=True)
    p.add_argument("--lib")
    p.add_argument("--period-ps", type=float, required=True)
    p.add_argument("--stimulus", required=True)
    p.add_argument("--golden-diff")
    p.set_defaults(func=cmd_faultsim)

    p = add(sub, "attack", help="run the whole pipeline")
    p.set_defaults(func=cmd_attack)

    p = add(sub, "emit-program", help="render a pattern as a stimulus program")
    p.add_argument("--pattern", required=True, help="patterns.json, traces.json or stimulus JSON")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--field-map", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_emit_program)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is None and args.cmd != "attack":
        args.seed = 42
    try:
        return args.func(args)
    except TwaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
