"""Command-line interface: simulate, encode, recover, sweep and ingest traces.

Exit codes: 0 success, 2 invalid arguments or configuration, 3 file access
errors, 4 ingestion or estimation errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .encoder import ModelWarning, ModuloParams, encode_and_sample, min_fold_separation_bound
from .experiments import (PRESETS, SWEEP_FIELDS, ConfigError, ExperimentConfig, build_signal,
                          evaluate_report, load_config, preset, recover, run_experiment, sweep)
from .io import (EstimationError, TraceFormatError, ingest_trace, write_plot_csv, write_report,
                 write_trace)
from .lowrate import UnrecoverableTraceError
from .metrics import prop1_bound, prop1_bound_unknown_p, thm2_bound, thm3_bound
from .report import _jsonable
from .signals import BandlimitedSignal
from .threshold import check_conditions, max_order

log = logging.getLogger("modfold")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DATA = 0, 2, 3, 4


def _order(text):
    if text == "auto":
        return text
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"order must be a positive integer or 'auto', got {text!r}")
    if n < 1:
        raise argparse.ArgumentTypeError("order must be at least 1")
    return n


def _print_json(obj):
    print(json.dumps(_jsonable(obj), indent=2))


def _params_from(args, fallback=None):
    vals = {"lam": args.lam, "h": args.h, "alpha": args.alpha}
    if all(v is None for v in vals.values()):
        return fallback
    if fallback is None and any(v is None for v in vals.values()):
        raise ConfigError("give all of --lambda, --h and --alpha")
    base = fallback.to_dict() if fallback is not None else {}
    base = {"lam": base.get("lambda"), "h": base.get("h"), "alpha": base.get("alpha")}
    base.update({k: v for k, v in vals.items() if v is not None})
    return ModuloParams(base["lam"], base["h"], base["alpha"])


def _add_param_flags(p, required=False):
    p.add_argument("--lambda", dest="lam", type=float, required=required, help="modulo threshold")
    p.add_argument("--h", type=float, required=required, help="hysteresis")
    p.add_argument("--alpha", type=float, required=required, help="transient length in seconds")


def _add_config_flags(p):
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
    p.add_argument("--seed", type=int, help="seed of a random signal")
    p.add_argument("--method", choices=("threshold", "lowrate", "usalg"))
    p.add_argument("--N", type=_order, help="filter order or 'auto'")
    p.add_argument("--T", type=float, help="sampling period")
    p.add_argument("--K", type=int, help="number of samples")
    p.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                   help="override any config field, value parsed as JSON")


def _config_from(args) -> ExperimentConfig:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("give exactly one of --config and --preset")
    over = {}
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            over[key] = json.loads(val)
        except json.JSONDecodeError:
            over[key] = val
    for key in ("method", "N", "T", "K"):
        if getattr(args, key) is not None:
            over[key] = getattr(args, key)
    if args.preset:
        if args.seed is not None:
            over["seed"] = args.seed
        return preset(args.preset, **over)
    cfg = load_config(args.config, over)
    if args.seed is not None:
        if cfg.signal.get("kind") != "random_sinc":
            raise ConfigError("--seed applies to random signals only")
        cfg.signal = dict(cfg.signal, seed=args.seed)
    return cfg


def cmd_gen_signal(args):
    if args.sinusoid is not None:
        g = BandlimitedSignal.sinusoid(args.omega, args.sinusoid, args.phase)
    else:
        cfg = ExperimentConfig(signal={"kind": "random_sinc", "omega": args.omega,
                                       "n_centers": args.n_centers, "t_start": args.t_start,
                                       "spacing": args.spacing, "amp_bound": args.amp_bound,
                                       "seed": args.seed, "scale_to": args.scale_to},
                               lam=1.0, h=0.0, alpha=0.0, T=args.T, K=args.K)
        g = build_signal(cfg)
    text = json.dumps(g.to_dict(), indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_encode(args):
    try:
        desc = json.loads(Path(args.signal).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.signal}: line {exc.lineno}: {exc.msg}") from None
    g = BandlimitedSignal.from_dict(desc)
    params = ModuloParams(args.lam, args.h, args.alpha)
    if args.K < 1:
        raise ConfigError("K must be at least 1")
    trace = encode_and_sample(g, params, args.T, args.K, args.t0, args.eta_inf, args.noise_seed)
    side = write_trace(trace, args.output)
    print(f"wrote {args.output} and {side} ({len(trace.ground_truth.folds)} folds)")
    return EXIT_OK


def cmd_recover(args):
    trace = ingest_trace(args.trace, T=args.T, keep_truth=True)
    params = _params_from(args, trace.params)
    g_inf = args.g_inf
    if g_inf is None and trace.ground_truth is not None:
        g_inf = float(np.max(np.abs(trace.ground_truth.gamma)))
    N = args.N
    if N == "auto":
        if g_inf is None or trace.omega is None:
            raise ConfigError("N='auto' needs omega in the sidecar and --g-inf or a gamma column")
        N = max_order(params, trace.T, trace.omega, g_inf, trace.eta_inf)
        if N is None:
            raise ConfigError("no filter order meets the recovery conditions")
    report = recover(trace, params, args.method, N, args.theta_beta, args.lambda_eff,
                     grid_count=args.grid_count, g_inf=g_inf)
    report.metrics = evaluate_report(report, trace, params, g_inf)
    if "estimated" in trace.flags:
        report.diagnostics["params_estimated"] = params.to_dict()
    if args.report:
        write_report(report, args.report)
    if args.plot:
        write_plot_csv(args.plot, trace, report)
    _print_json({"method": report.method, "N": N, "P": report.P, "metrics": report.metrics,
                 "warnings": report.warnings})
    return EXIT_OK


def cmd_experiment(args):
    cfg = _config_from(args)
    if args.report:
        cfg.report = args.report
    if args.plot:
        cfg.plot = args.plot
    _, report = run_experiment(cfg)
    _print_json({"name": cfg.name, "method": report.method, "N": report.N, "P": report.P,
                 "metrics": report.metrics, "warnings": report.warnings,
                 "error": report.diagnostics.get("error")})
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config_from(args)
    if args.values:
        values = [json.loads(v) for v in args.values.split(",")]
    elif args.range:
        lo, hi, n = args.range
        values = list(np.linspace(float(lo), float(hi), int(n)))
    else:
        raise ConfigError("give --values or --range")
    rows = sweep(cfg, args.over, values, args.output)
    print(",".join(rows[0]))
    for r in rows:
        print(",".join(str(v) for v in r.values()))
    return EXIT_OK


def cmd_ingest(args):
    meta = _params_from(args, None)
    trace = ingest_trace(args.trace, meta=meta, T=args.T)
    out = {"K": trace.K, "T": trace.T, "params": trace.params.to_dict(), "flags": trace.flags}
    if args.method:
        if args.method == "usalg" and args.lambda_eff is None:
            raise ConfigError("usalg on ingested data needs --lambda-eff")
        N = args.N if args.N != "auto" else 1
        report = recover(trace, trace.params, args.method, N, lambda_eff=args.lambda_eff)
        out.update({"method": report.method, "P": report.P, "warnings": report.warnings})
        if args.report:
            write_report(report, args.report)
        if args.plot:
            write_plot_csv(args.plot, trace, report)
    _print_json(out)
    return EXIT_OK


def cmd_bounds(args):
    params = ModuloParams(args.lam, args.h, args.alpha)
    out = {"lambda_h": params.lambda_h, "h_star": params.h_star,
           "min_fold_separation": min_fold_separation_bound(params, args.omega, args.g_inf, args.T),
           "max_order": max_order(params, args.T, args.omega, args.g_inf, args.eta_inf),
           "conditions": check_conditions(params, args.T, args.omega, args.g_inf, args.eta_inf,
                                          args.N)}
    if args.P is not None:
        out["prop1"] = prop1_bound(params, args.N, args.P, args.K)
    if params.h_star > 0:
        out["prop1_unknown_P"] = prop1_bound_unknown_p(params, args.N, args.T, args.omega,
                                                       args.g_inf)
        out["thm2"] = thm2_bound(params, args.T, args.omega, args.g_inf)
        if args.eta_inf <= params.lambda_h / 8:
            out["thm3"] = thm3_bound(params, args.T, args.omega, args.g_inf, args.eta_inf)
    _print_json(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modfold", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-signal", help="write a signal description as JSON")
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--n-centers", type=int, default=10)
    p.add_argument("--t-start", type=float, default=0.0)
    p.add_argument("--spacing", type=float, help="atom spacing (default pi/omega)")
    p.add_argument("--amp-bound", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale-to", type=float, help="rescale to this sup norm over the window")
    p.add_argument("--T", type=float, default=0.01, help="window for --scale-to: K samples at T")
    p.add_argument("--K", type=int, default=1000)
    p.add_argument("--sinusoid", type=float, metavar="AMP", help="sinusoid of this amplitude")
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_gen_signal)

    p = sub.add_parser("encode", help="encode and sample a signal into a trace CSV")
    p.add_argument("signal", help="signal JSON")
    _add_param_flags(p, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--eta-inf", type=float, default=0.0)
    p.add_argument("--noise-seed", type=int)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("recover", help="recover the input from a trace CSV")
    p.add_argument("trace")
    p.add_argument("--method", choices=("threshold", "lowrate", "usalg"), default="threshold")
    p.add_argument("--N", type=_order, default=1)
    _add_param_flags(p)
    p.add_argument("--T", type=float)
    p.add_argument("--g-inf", type=float)
    p.add_argument("--theta-beta", type=float)
    p.add_argument("--lambda-eff", type=float)
    p.add_argument("--grid-count", type=int, default=200)
    p.add_argument("--report")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("experiment", help="run one configured pipeline")
    _add_config_flags(p)
    p.add_argument("--report")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sweep", help="score a pipeline over a grid of N, T or lambda_eff")
    _add_config_flags(p)
    p.add_argument("--over", choices=SWEEP_FIELDS, required=True)
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--range", nargs=3, metavar=("LO", "HI", "COUNT"))
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ingest", help="load a measured trace, estimating parameters if needed")
    p.add_argument("trace")
    _add_param_flags(p)
    p.add_argument("--T", type=float)
    p.add_argument("--method", choices=("threshold", "lowrate", "usalg"))
    p.add_argument("--N", type=_order, default=1)
    p.add_argument("--lambda-eff", type=float)
    p.add_argument("--report")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("bounds", help="evaluate recovery conditions and error bounds")
    _add_param_flags(p, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--g-inf", type=float, required=True)
    p.add_argument("--eta-inf", type=float, default=0.0)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--K", type=int, default=1)
    p.add_argument("--P", type=int)
    p.set_defaults(func=cmd_bounds)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", ModelWarning)
    try:
        return args.func(args)
    except (TraceFormatError, EstimationError, UnrecoverableTraceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
