"""Command-line interface: verify, simulate, sweep, emit-model.

Exit codes: 0 ok, 2 config error, 3 formula error, 4 numerical failure.
All outputs are deterministic given (config, seed); sweep rows are written
in parameter order regardless of execution order.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .battery import BatteryVariant
from .config import ConfigError, load_config
from .dtmc import Dtmc
from .expr import GclSyntaxError
from .gcl import BuildOptions, compose_and_build, parse_model
from .mission import MissionConfig, build_mission_model, build_model_text, scenario_preset
from .pctl import PctlError, UnknownLabelError, UnknownRewardError, check, parse_formula
from .sim import estimate_expected_reward, estimate_reach_probability, \
    simulate_trace, trace_to_csv
from .solver import SolverError, SolverOptions

STANDARD_PROPERTIES = (
    'P=? [ F "success" ]',
    'R{"mt"}=? [ F "done" ]',
    'R{"rc"}=? [ F "done" ]',
)

SWEEP_PARAMETERS = ("c_new", "safe_t", "p_wsp_c")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windcheck",
        description="Probabilistic verification of battery-constrained "
                    "inspection missions.")
    parser.add_argument("--version", action="version",
                        version=f"windcheck {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_source(p, with_gcl=True):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--scenario", type=int, choices=(1, 2, 3, 4),
                       help="built-in scenario preset (default 1)")
        g.add_argument("--config", metavar="PATH",
                       help="mission config file (INI sections)")
        if with_gcl:
            g.add_argument("--model", metavar="PATH",
                           help="guarded-command model text instead of a mission")
        p.add_argument("--variant",
                       choices=[v.value for v in BatteryVariant],
                       help="battery model variant override")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p_verify = sub.add_parser("verify", help="exact checking of PCTL properties")
    add_model_source(p_verify)
    p_verify.add_argument("formulas", nargs="*", metavar="FORMULA",
                          help="PCTL formulas (default: the standard three)")
    p_verify.add_argument("--per-state", metavar="DIR",
                          help="also write per-state value CSVs into DIR")
    p_verify.set_defaults(func=cmd_verify)

    p_sim = sub.add_parser("simulate", help="Monte Carlo estimation")
    add_model_source(p_sim, with_gcl=False)
    p_sim.add_argument("-n", "--samples", type=int, default=100_000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--threads", type=int, default=1,
                       help="worker streams (results do not depend on this)")
    p_sim.add_argument("--step-cap", type=int, default=1_000_000)
    p_sim.add_argument("--trace-out", metavar="PATH",
                       help="write example trace CSV (prefers failing traces)")
    p_sim.add_argument("--traces", type=int, default=1,
                       help="number of example traces for --trace-out")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="parameter sweep to CSV")
    add_model_source(p_sweep, with_gcl=False)
    p_sweep.add_argument("--parameter", choices=SWEEP_PARAMETERS, required=True)
    p_sweep.add_argument("--from", dest="lo", type=float, required=True)
    p_sweep.add_argument("--to", dest="hi", type=float, required=True)
    p_sweep.add_argument("--step", type=float, required=True)
    p_sweep.add_argument("--variants",
                         default=",".join(v.value for v in BatteryVariant),
                         help="comma-separated battery variants")
    p_sweep.add_argument("--properties", nargs="*", metavar="FORMULA",
                         help="formulas per point (default: the standard three)")
    p_sweep.add_argument("--threads", type=int, default=1)
    p_sweep.add_argument("--out", metavar="PATH", help="CSV path (default stdout)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_emit = sub.add_parser("emit-model",
                            help="print the generated guarded-command text")
    add_model_source(p_emit, with_gcl=False)
    p_emit.add_argument("--out", metavar="PATH")
    p_emit.set_defaults(func=cmd_emit_model)
    return parser


def _mission_config(args) -> MissionConfig:
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        cfg = scenario_preset(args.scenario or 1)
    if args.variant:
        cfg.variant = BatteryVariant(args.variant)
    return cfg


def _build(args):
    """Returns (dtmc, description dict)."""
    if getattr(args, "model", None):
        try:
            with open(args.model) as fh:
                text = fh.read()
        except OSError as err:
            raise ConfigError(f"cannot read model {args.model!r}: {err}") from err
        model = parse_model(text)
        d = compose_and_build(model, BuildOptions())
        src = {"model": args.model}
    else:
        cfg = _mission_config(args)
        d = build_mission_model(cfg)
        src = {"scenario": args.scenario or (None if args.config else 1),
               "config": getattr(args, "config", None),
               "variant": cfg.variant.value}
    return d, src


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if np.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def cmd_verify(args) -> int:
    d, src = _build(args)
    formulas = args.formulas or list(STANDARD_PROPERTIES)
    results = []
    for i, text in enumerate(formulas):
        res = check(d, text)
        record = {
            "formula": res.formula,
            "kind": res.kind,
            "value": "inf" if isinstance(res.value, float) and np.isinf(res.value)
                     else res.value,
            "method": res.stats.method,
            "iterations": res.stats.iterations,
            "residual": res.stats.residual,
        }
        if args.per_state:
            import os
            os.makedirs(args.per_state, exist_ok=True)
            path = f"{args.per_state.rstrip('/')}/formula_{i}.csv"
            with open(path, "w") as fh:
                fh.write("state,value\n")
                for s, v in enumerate(res.values):
                    fh.write(f"{s},{_fmt_value(v if not isinstance(v, np.bool_) else bool(v))}\n")
            record["per_state"] = path
        results.append(record)
    if args.json:
        payload = {"command": "verify", "source": src,
                   "states": d.n_states, "transitions": d.n_transitions,
                   "results": results}
        print(json.dumps(payload))
    else:
        print(f"model: {d.n_states} states, {d.n_transitions} transitions")
        for rec in results:
            extra = f"  [{rec['method']}, {rec['iterations']} iterations, " \
                    f"residual {rec['residual']:.3e}]"
            print(f"{rec['formula']}  =  {_fmt_value(rec['value'])}{extra}")
    return 0


def cmd_simulate(args) -> int:
    cfg = _mission_config(args)
    d = build_mission_model(cfg)
    n, seed = args.samples, args.seed
    est_p = estimate_reach_probability(d, "success", n, seed,
                                       step_cap=args.step_cap,
                                       workers=args.threads)
    est_mt = estimate_expected_reward(d, "mt", "done", n, seed,
                                      step_cap=args.step_cap,
                                      workers=args.threads)
    est_rc = estimate_expected_reward(d, "rc", "done", n, seed,
                                      step_cap=args.step_cap,
                                      workers=args.threads)
    records = []
    for name, est in (("P[F success]", est_p), ("E[mt]", est_mt), ("E[rc]", est_rc)):
        records.append({
            "property": name, "mean": est.mean, "half_width": est.half_width,
            "n": est.n_samples, "seed": est.seed, "truncated": est.truncated,
            "degenerate_ci": est.degenerate,
        })
    trace_files = []
    if args.trace_out:
        trace_files = _write_traces(d, args, cfg)
    if args.json:
        print(json.dumps({"command": "simulate",
                          "states": d.n_states, "transitions": d.n_transitions,
                          "estimates": records, "traces": trace_files}))
    else:
        print(f"model: {d.n_states} states, {d.n_transitions} transitions")
        for rec in records:
            flags = ""
            if rec["truncated"]:
                flags += f"  truncated={rec['truncated']}"
            if rec["degenerate_ci"]:
                flags += "  (degenerate CI)"
            print(f"{rec['property']}: {rec['mean']!r} +/- {rec['half_width']!r} "
                  f"(n={rec['n']}, seed={rec['seed']}){flags}")
        for path in trace_files:
            print(f"trace written: {path}")
    return 0


def _write_traces(d: Dtmc, args, cfg) -> list:
    """Sample traces for export, preferring failing ones when any appear
    within a bounded, seed-deterministic search."""
    want = max(1, args.traces)
    found = []      # (is_fail, order, trace)
    attempts = max(want * 50, 200)
    fails = 0
    for i in range(attempts):
        tr = simulate_trace(d, args.seed + i, step_cap=args.step_cap)
        if tr.terminal == "fail":
            fails += 1
            found.append((0, i, tr))
        else:
            found.append((1, i, tr))
        if fails >= want:
            break
    found.sort()
    chosen = [tr for _, _, tr in found[:want]]
    paths = []
    for j, tr in enumerate(chosen):
        path = args.trace_out if want == 1 else _numbered(args.trace_out, j)
        with open(path, "w") as fh:
            fh.write(trace_to_csv(tr, d))
        paths.append(path)
    return paths


def _numbered(path: str, j: int) -> str:
    if "." in path.rsplit("/", 1)[-1]:
        stem, ext = path.rsplit(".", 1)
        return f"{stem}_{j}.{ext}"
    return f"{path}_{j}"


def _sweep_values(lo: float, hi: float, step: float) -> list:
    if not (lo < hi and step > 0):
        raise ConfigError("sweep needs lo < hi and step > 0")
    count = int((hi - lo) / step + 1e-9) + 1
    return [round(lo + i * step, 10) for i in range(count)]


def _sweep_point(payload):
    """One (value, variant) sweep cell; returns CSV fields after 'variant'."""
    cfg, parameter, value, variant, properties = payload
    cfg = replace(cfg)
    cfg.variant = BatteryVariant(variant)
    if parameter == "c_new":
        cfg.battery = replace(cfg.battery, c_new=value)
    elif parameter == "safe_t":
        cfg.safe_t = value
    else:
        cfg.p_wsp_c = value
    try:
        cfg.__post_init__()
        d = build_mission_model(cfg)
        fields = []
        for text in properties:
            res = check(d, text)
            fields.append(_fmt_value(res.value))
        return fields + [str(d.n_states), str(d.n_transitions), ""]
    except Exception as err:  # per-point failures recorded in-row
        n_props = len(properties)
        return [""] * n_props + ["", "", f"error: {err}"]


def cmd_sweep(args) -> int:
    cfg = _mission_config(args)
    properties = args.properties or list(STANDARD_PROPERTIES)
    for text in properties:
        parse_formula(text)          # fail fast with exit 3
    variants = [v.strip() for v in args.variants.split(",") if v.strip()]
    for v in variants:
        BatteryVariant(v)
    values = _sweep_values(args.lo, args.hi, args.step)
    jobs = [(cfg, args.parameter, value, variant, tuple(properties))
            for value in values for variant in variants]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_sweep_point, jobs, chunksize=1))
    else:
        rows = [_sweep_point(job) for job in jobs]

    prop_cols = [f"prop_{i}" for i in range(len(properties))]
    lines = [f"# windcheck v{__version__}"]
    lines.append("# properties: " + " | ".join(properties))
    lines.append(",".join(["parameter", "value", "variant"] + prop_cols
                          + ["states", "transitions", "error"]))
    for (value, variant), fields in zip(
            ((v, var) for v in values for var in variants), rows):
        lines.append(",".join([args.parameter, repr(value), variant] + fields))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_emit_model(args) -> int:
    cfg = _mission_config(args)
    text = build_model_text(cfg)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as err:
        if isinstance(err, (PctlError, GclSyntaxError)):
            print(f"formula/model error: {err}", file=sys.stderr)
            return 3
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (UnknownLabelError, UnknownRewardError) as err:
        print(f"formula error: unknown name {err}", file=sys.stderr)
        return 3
    except SolverError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
