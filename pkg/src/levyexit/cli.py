"""Command line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage or domain error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import lemma31_bounds, rate_constant, simplex_min_brute, simplex_min_closed
from .dynamics import Mode, Potential, SimConfig, simulate_exit
from .errors import (
    ConfigurationError,
    DomainError,
    EstimationError,
    LevyExitError,
    ParameterError,
)
from .experiments import (
    SweepPlan,
    derive_seed,
    fit_log_rate,
    run_batch,
    summarize,
    write_fit_json,
    write_sweep_csv,
)
from .measures import LevyTriplet, TailSpec
from .processes import PathEvents, check_big_sum_bound, check_small_sup_bound, write_path_events_csv

log = logging.getLogger("levyexit")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
_USAGE_ERRORS = (DomainError, ParameterError, ConfigurationError)


def _float_or_inf(text: str) -> float:
    if text.lower() in ("inf", "infinity", "+inf"):
        return math.inf
    return float(text)


def _pair(text: str) -> tuple:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma separated numbers")
    return tuple(parts)


def _float_list(text: str) -> list:
    return [float(p) for p in text.split(",") if p.strip()]


@contextlib.contextmanager
def _sink(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


# -- parser ---------------------------------------------------------------------------


def _common_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
    g.add_argument("--threads", type=int, default=1, help="worker processes for sweeps (default 1)")
    g.add_argument("--output", default=None, help="output file (directory for sweep)")
    return p


def _measure_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("jump measure")
    g.add_argument("--measure", help="measure as a JSON object, or @path to a JSON file")
    g.add_argument(
        "--kind",
        default="ExpPower",
        choices=["ExpPower", "TemperedStable", "PowerLaw"],
        help="measure family when built from flags (default ExpPower)",
    )
    g.add_argument("--alpha", type=float, help="tail index alpha")
    g.add_argument("--c", type=float, default=1.0, help="ExpPower scale c (default 1)")
    g.add_argument("--p", type=float, default=0.0, help="ExpPower log power p (default 0)")
    g.add_argument("--lambda", dest="lam", type=float, help="TemperedStable tempering rate")
    g.add_argument("--beta", type=float, help="TemperedStable stability index")
    g.add_argument("--r", type=float, help="PowerLaw exponent")
    g.add_argument("--u0", type=float, default=1.0, help="support edge (default 1)")
    g.add_argument("--trunc", type=float, help="truncation bound")
    return p


def _sim_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("simulation")
    g.add_argument("--d", type=float, default=0.0, help="Gaussian variance (default 0)")
    g.add_argument("--mu", type=float, default=0.0, help="drift of the driving process (default 0)")
    g.add_argument(
        "--potential", default="Quadratic", choices=["Quadratic", "Quartic"], help="potential (default Quadratic)"
    )
    g.add_argument("--x0", type=float, default=0.0, help="starting point (default 0)")
    g.add_argument("--t-max", type=float, default=1e4, help="censoring horizon (default 1e4)")
    g.add_argument("--mode", default="PdmpExact", choices=["PdmpExact", "EulerJumpAdapted"])
    g.add_argument("--step-h", type=float, default=0.01, help="Euler step (default 0.01)")
    g.add_argument("--cutoff-g", type=float, help="large jump cutoff (default max(u0, 1/(2 eps)))")
    g.add_argument("--ar-threshold", type=float, help="Gaussian approximation level (Euler)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common, measure, sim = _common_parent(), _measure_parent(), _sim_parent()
    parser = argparse.ArgumentParser(
        prog="levyexit",
        description="Exit times of jump diffusions driven by light-tailed Levy noise.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("predict", parents=[common, measure], help="leading-order rate prediction")
    p.add_argument("--eps", type=float, required=True, help="noise intensity")
    p.add_argument(
        "--regime",
        required=True,
        choices=["subexp", "superexp", "bounded", "powertail", "gaussian"],
        help="tail regime selecting the predictor",
    )
    p.add_argument("--theta", type=_float_or_inf, help="jump bound for the bounded regime")
    p.add_argument("--barriers", type=_pair, help="barrier heights 'U(-1),U(1)' (gaussian)")
    p.add_argument("--tail-index", type=float, help="explicit alpha for TableTail measures")

    p = sub.add_parser("minimize", parents=[common], help="constrained simplex minimum")
    p.add_argument("--alpha", type=float, required=True, help="exponent of the objective x**alpha")
    p.add_argument("--a", type=float, default=1.0, help="required coordinate sum (default 1)")
    p.add_argument("--theta", type=_float_or_inf, default=math.inf, help="box bound theta*a")
    p.add_argument("--k", type=int, required=True, help="number of coordinates")
    p.add_argument("--grid-n", type=int, default=400, help="grid levels of the oracle (default 400)")

    p = sub.add_parser("simulate", parents=[common, measure, sim], help="simulate exit times")
    p.add_argument("--eps", type=float, required=True, help="noise intensity")
    p.add_argument("--n-paths", type=int, default=1, help="number of paths (default 1)")
    p.add_argument("--dump-events", metavar="CSV", help="write large jumps as path_id,S_k,W_k")

    p = sub.add_parser("sweep", parents=[common], help="run a sweep plan and fit log-rates")
    p.add_argument("plan", help="sweep plan JSON file")

    p = sub.add_parser("verify-bounds", parents=[common], help="Monte Carlo check of tail bounds")
    p.add_argument("--lemma", required=True, choices=["31", "33", "34"], help="31 survival bounds, 33 small-jump supremum, 34 big-jump sum")
    p.add_argument("--alpha", type=float, help="tail index (default: both 0.5 and 2)")
    p.add_argument("--samples", type=int, default=100_000, help="MC samples (default 1e5)")
    p.add_argument("--delta", type=float, default=0.1, help="delta (default 0.1)")
    p.add_argument("--k", type=int, help="number of big jumps (with --lemma 34)")
    p.add_argument("--r", type=float, help="sum threshold (with --lemma 34)")
    p.add_argument("--g", type=float, help="cutoff (with --lemma 33 or 34)")
    p.add_argument("--f", type=float, help="deviation level (with --lemma 33)")
    p.add_argument("--T", type=float, help="time horizon (with --lemma 31 or 33)")
    p.add_argument("--C", type=float, help="rate constant (with --lemma 31)")
    p.add_argument("--t-grid", type=_float_list, help="comma separated times (with --lemma 31)")

    p = sub.add_parser("report", parents=[common], help="summarize a sweep output directory")
    p.add_argument("directory", help="directory written by 'sweep'")
    return parser


# -- helpers --------------------------------------------------------------------------


def _measure_from_args(args) -> TailSpec:
    if args.measure:
        text = args.measure
        if text.startswith("@"):
            text = Path(text[1:]).read_text(encoding="utf-8")
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"measure is not valid JSON: {exc}") from None
        return TailSpec.from_json(obj)
    if args.kind == "ExpPower":
        if args.alpha is None:
            raise ParameterError("--alpha is required for ExpPower")
        return TailSpec.exp_power(args.alpha, args.c, args.p, args.u0, args.trunc)
    if args.kind == "TemperedStable":
        return TailSpec.tempered_stable(args.lam, args.alpha, args.beta, args.trunc)
    return TailSpec.power_law(args.r, args.u0, args.trunc)


def _dump_json(obj, fh):
    json.dump(obj, fh, indent=2, sort_keys=True)
    fh.write("\n")


# -- commands -------------------------------------------------------------------------


def cmd_predict(args) -> int:
    spec = None if args.regime == "gaussian" and not (args.measure or args.alpha) else _measure_from_args(args)
    if args.regime == "bounded" and args.theta is None:
        raise DomainError("--theta is required for the bounded regime")
    pred = rate_constant(
        spec, args.eps, args.regime, args.theta, barriers=args.barriers, alpha=args.tail_index
    )
    with _sink(args.output) as fh:
        _dump_json(pred.to_json(), fh)
    return EXIT_OK


def cmd_minimize(args) -> int:
    closed = simplex_min_closed(args.alpha, args.a, args.theta, args.k)
    brute = simplex_min_brute(lambda x: x**args.alpha, args.a, args.theta, args.k, args.grid_n)
    out = {
        "alpha": args.alpha,
        "a": args.a,
        "theta": None if math.isinf(args.theta) else args.theta,
        "k": args.k,
        "grid_n": args.grid_n,
        "closed": closed,
        "brute": brute,
    }
    with _sink(args.output) as fh:
        _dump_json(out, fh)
    return EXIT_OK


def cmd_simulate(args) -> int:
    triplet = LevyTriplet(args.d, _measure_from_args(args), args.mu)
    pot = Potential.from_json(args.potential)
    traces = []
    with _sink(args.output) as fh:
        for i in range(args.n_paths):
            cfg = SimConfig(
                eps=args.eps,
                x0=args.x0,
                t_max=args.t_max,
                mode=Mode.parse(args.mode),
                step_h=args.step_h,
                cutoff_g=args.cutoff_g,
                ar_threshold=args.ar_threshold,
                seed=derive_seed(args.seed, 0, i),
            )
            trace = [] if args.dump_events else None
            rec = simulate_exit(triplet, pot, cfg, trace=trace)
            row = {
                "path": i,
                "exit_time": rec.exit_time,
                "exit_side": rec.exit_side.value,
                "n_large_jumps": rec.n_large_jumps,
                "seed": rec.seed,
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")
            if trace is not None:
                horizon = rec.exit_time if rec.exit_time is not None else args.t_max
                times = np.array([t for t, _ in trace])
                sizes = np.array([w for _, w in trace])
                traces.append((i, PathEvents(horizon, times, sizes)))
    if args.dump_events:
        with open(args.dump_events, "w", encoding="utf-8", newline="") as fh:
            write_path_events_csv(fh, traces)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        obj = json.loads(Path(args.plan).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"plan is not valid JSON: {exc}") from None
    plan = SweepPlan.from_json(obj)
    out_dir = Path(args.output or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    batch = run_batch(plan, workers=max(1, args.threads))
    results = summarize(plan, batch)
    with open(out_dir / "sweep.csv", "w", encoding="utf-8", newline="") as fh:
        write_sweep_csv(results, fh)
    status = EXIT_OK
    try:
        fit = fit_log_rate(results)
        with open(out_dir / "fit.json", "w", encoding="utf-8") as fh:
            write_fit_json(fit, fh)
    except EstimationError as exc:
        log.error("fit failed: %s", exc)
        status = EXIT_RUNTIME
    return status


_LEMMA34_DEFAULTS = [(alpha, k) for alpha in (0.5, 2.0) for k in (1, 2, 3)]
_LEMMA33_DEFAULTS = [(1.0, 10.0, 0.25), (2.0, 20.0, 0.5), (3.0, 60.0, 1.0)]


def cmd_verify_bounds(args) -> int:
    rng = np.random.default_rng(args.seed)
    lines, ok = [], True
    if args.lemma == "31":
        C = 0.1 if args.C is None else args.C
        T = 1.0 if args.T is None else args.T
        t_grid = args.t_grid or [0.0, 1.0, 5.0, 10.0, 20.0, 40.0]
        lemma31_bounds(C, T, 0.0)  # domain check before sampling
        # exponential exit with P(sigma <= T) = C T meets both hypotheses at once
        rate = -math.log1p(-C * T) / T
        sigma = rng.exponential(1.0 / rate, args.samples)
        for t in t_grid:
            upper, lower = lemma31_bounds(C, T, t)
            p = float(np.mean(sigma > t))
            margin = 4.0 * math.sqrt(p * (1.0 - p) / args.samples)
            good = lower - margin <= p <= upper + margin
            ok &= good
            lines.append(
                f"[{'PASS' if good else 'FAIL'}] lemma31(C={C}, T={T}, t={t}): "
                f"lower={lower:.6g} mc={p:.6g} upper={upper:.6g} margin={margin:.3g}"
            )
    elif args.lemma == "34":
        alphas = [args.alpha] if args.alpha is not None else [0.5, 2.0]
        ks = [args.k] if args.k is not None else [1, 2, 3]
        g = 2.0 if args.g is None else args.g
        for alpha in alphas:
            spec = TailSpec.exp_power(alpha)
            for k in ks:
                r = 1.5 * k * g if args.r is None else args.r
                check = check_big_sum_bound(spec, k, r, g, args.delta, args.samples, rng)
                ok &= check.passed
                lines.append(check.line())
    else:
        alphas = [args.alpha] if args.alpha is not None else [0.5, 2.0]
        if args.g is not None or args.f is not None or args.T is not None:
            if None in (args.g, args.f, args.T):
                raise ParameterError("--lemma 33 needs --g, --f and --T together")
            cases = [(args.g, args.f, args.T)]
        else:
            cases = _LEMMA33_DEFAULTS
        for alpha in alphas:
            spec = TailSpec.exp_power(alpha)
            for g, f, T in cases:
                check = check_small_sup_bound(spec, g, f, T, args.delta, args.samples, rng)
                if check.skipped:
                    log.warning("%s", check.note)
                ok &= check.passed
                lines.append(check.line())
    with _sink(args.output) as fh:
        for line in lines:
            fh.write(line + "\n")
        fh.write(("all bounds hold" if ok else "bound violations found") + "\n")
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_report(args) -> int:
    d = Path(args.directory)
    csv_path = d / "sweep.csv"
    if not csv_path.exists():
        raise ConfigurationError(f"{csv_path} not found")
    with open(csv_path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    with _sink(args.output) as fh:
        fh.write(f"{'eps':>10} {'mean_exit':>12} {'ci95':>10} {'cens':>6} {'ks':>6} "
                 f"{'ln mean':>9} {'predicted':>9} {'ratio':>6}\n")
        for r in rows:
            pred, lm = float(r["predicted_log_rate"]), float(r["log_mean"])
            ratio = lm / pred if pred else math.nan
            flag = " *" if float(r["censored_fraction"]) > 0.05 else ""
            fh.write(
                f"{float(r['eps']):>10.4g} {float(r['mean_exit']):>12.5g} {float(r['ci95']):>10.4g} "
                f"{float(r['censored_fraction']):>6.3f} {float(r['ks_stat']):>6.3f} "
                f"{lm:>9.4f} {pred:>9.4f} {ratio:>6.3f}{flag}\n"
            )
        fit_path = d / "fit.json"
        if fit_path.exists():
            fit = json.loads(fit_path.read_text(encoding="utf-8"))
            fh.write(
                f"fit: slope={fit['slope']:.4f} intercept={fit['intercept']:.4f} "
                f"r_squared={fit['r_squared']:.4f}\n"
            )
        if any(float(r["censored_fraction"]) > 0.05 for r in rows):
            fh.write("* censored fraction above 5%, excluded from the fit\n")
    return EXIT_OK


_COMMANDS = {
    "predict": cmd_predict,
    "minimize": cmd_minimize,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "verify-bounds": cmd_verify_bounds,
    "report": cmd_report,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("LEVYEXIT_LOG", "WARNING"), format="%(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _USAGE_ERRORS as exc:
        print(f"levyexit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LevyExitError, OSError) as exc:
        print(f"levyexit {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
