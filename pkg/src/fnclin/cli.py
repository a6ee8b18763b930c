"""Command-line entry point wiring all pipeline stages.

Exit codes: 0 success, 1 validation/usage error, 2 runtime or numerical
failure.  All randomness flows from explicit seeds; identical command lines
on identical inputs produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import data as datamod
from . import evaluate as evalmod
from .constraints import audit_constraints, emit_constraints, save_constraints
from .errors import ValidationError
from .features import feature_matrix, init_weights
from .fileio import load_scenario, load_system
from .margin import MarginSpec, margin_bisect
from .modelfile import load_trained_model, save_trained_model
from .pwl import predict_margin, train_elm_pwl
from .reduced import aggregate, analytic_margin
from .sfr import find_nadir, simulate_response

log = logging.getLogger("fnclin")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the CLI contract reserves 2 for runtime
    # failures, so usage problems are remapped to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _default_seed() -> int:
    return int(os.environ.get("FNCLIN_SEED", "0"))


def _margin_spec(args) -> MarginSpec:
    return MarginSpec(delta_f_max_pu=args.fmax, tol_pu=args.tol,
                      dp_hi=args.dp_hi, cap_pu=args.cap,
                      dt=args.dt, horizon_s=args.horizon)


def _add_margin_options(p, with_dt=True):
    p.add_argument("--fmax", type=float, default=0.01,
                   help="frequency deviation limit, pu (default 0.01)")
    p.add_argument("--tol", type=float, default=1e-4,
                   help="bisection tolerance on the disturbance, pu")
    p.add_argument("--dp-hi", type=float, default=0.05, help="initial upper bracket, pu")
    p.add_argument("--cap", type=float, default=1.0, help="disturbance cap, pu")
    if with_dt:
        p.add_argument("--dt", type=float, default=1e-3, help="integration step, s")
        p.add_argument("--horizon", type=float, default=30.0, help="horizon, s")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fnclin",
                     description="Frequency nadir constraint surrogate toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate a frequency trace")
    p.add_argument("--model", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--dp", type=float, required=True, help="disturbance, pu")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--horizon", type=float, default=30.0)
    p.add_argument("--no-early-stop", action="store_true")
    p.add_argument("--out", required=True, help="trace CSV (t_s, delta_f_pu)")

    p = sub.add_parser("reduce", help="print the second-order aggregation")
    p.add_argument("--model", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--fmax", type=float, default=0.01)

    p = sub.add_parser("margin", help="full-order security margin by bisection")
    p.add_argument("--model", required=True)
    p.add_argument("--scenario", required=True)
    _add_margin_options(p)

    p = sub.add_parser("gen-data", help="generate and label scenarios")
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    _add_margin_options(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("perturb", help="noise-perturbed replica with re-labeling")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--flip", type=float, default=0.05)
    p.add_argument("--jitter", type=float, default=0.1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)

    p = sub.add_parser("split", help="deterministic train/test split")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--train", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-train", default=None)
    p.add_argument("--out-test", default=None)

    p = sub.add_parser("train", help="train the safe margin surrogate")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="system model file")
    p.add_argument("--L", type=int, default=3, dest="n_segments")
    p.add_argument("--hidden", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=30)
    p.add_argument("--out", required=True, help="trained model (.fnc)")

    p = sub.add_parser("predict", help="predict the margin for one scenario")
    p.add_argument("--model-file", required=True, help="trained .fnc file")
    p.add_argument("--system", required=True, help="system model file")
    p.add_argument("--scenario", required=True)

    p = sub.add_parser("evaluate", help="multi-trial evaluation vs baseline")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("export-fnc", help="emit per-contingency linear constraints")
    p.add_argument("--model-file", required=True)
    p.add_argument("--system", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--audit-scenarios", type=int, default=0,
                   help="audit against simulated truth on N generated scenarios")
    p.add_argument("--seed", type=int, default=None)
    _add_margin_options(p, with_dt=False)
    return parser


def _cmd_simulate(args) -> int:
    model = load_system(args.model)
    scenario = load_scenario(args.scenario)
    trace = simulate_response(model, scenario, args.dp, dt=args.dt,
                              horizon_s=args.horizon,
                              early_stop=not args.no_early_stop)
    lines = ["t_s,delta_f_pu"]
    lines += [f"{float(t)!r},{float(f)!r}" for t, f in zip(trace.times, trace.samples)]
    Path(args.out).write_text("\n".join(lines) + "\n")
    nadir = find_nadir(trace)
    print(f"nadir {nadir.delta_f_nadir:.6f} pu at t = {nadir.t_nadir:.3f} s"
          + (" (monotone at horizon)" if nadir.monotone else ""))
    return 0


def _cmd_reduce(args) -> int:
    model = load_system(args.model)
    scenario = load_scenario(args.scenario)
    red = aggregate(model, scenario)
    print(f"H = {red.h:.6f} s\nD = {red.d:.6f}\nR = {red.r:.6f}\nF = {red.f:.6f}")
    if red.degenerate:
        print("T, zeta, omega_n: n/a (no online TG: first-order model)")
        return 0
    print(f"T = {red.t:.6f} s\nzeta = {red.zeta:.6f}\nomega_n = {red.omega_n:.6f} rad/s")
    print(f"analytic margin ({args.fmax} pu limit) = "
          f"{analytic_margin(red, args.fmax):.6f} pu")
    return 0


def _cmd_margin(args) -> int:
    model = load_system(args.model)
    scenario = load_scenario(args.scenario)
    result = margin_bisect(model, scenario, _margin_spec(args))
    suffix = " (unbounded at cap)" if result.unbounded else ""
    print(f"margin = {result.margin_pu:.6f} pu = "
          f"{result.margin_pu * model.s_base_mva:.2f} MW{suffix}")
    return 0


def _cmd_gen_data(args) -> int:
    model = load_system(args.model)
    seed = args.seed if args.seed is not None else _default_seed()
    scenarios = datamod.generate_scenarios(model, args.count, seed)
    dataset = datamod.label_dataset(model, scenarios, _margin_spec(args),
                                    seed=seed, jobs=args.jobs)
    datamod.save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} labeled records to {args.out}")
    return 0


def _cmd_perturb(args) -> int:
    model = load_system(args.model)
    dataset = datamod.load_dataset(args.infile)
    seed = args.seed if args.seed is not None else _default_seed()
    out = datamod.perturb_dataset(model, dataset, noise_seed=seed,
                                  flip_prob=args.flip, jitter_frac=args.jitter,
                                  jobs=args.jobs)
    datamod.save_dataset(out, args.out)
    print(f"wrote {len(out)} perturbed records to {args.out}")
    return 0


def _cmd_split(args) -> int:
    dataset = datamod.load_dataset(args.infile)
    seed = args.seed if args.seed is not None else _default_seed()
    train, test = datamod.split(dataset, args.train, seed)
    stem = Path(args.infile)
    out_train = args.out_train or str(stem.with_suffix("")) + "_train" + stem.suffix
    out_test = args.out_test or str(stem.with_suffix("")) + "_test" + stem.suffix
    datamod.save_dataset(train, out_train)
    datamod.save_dataset(test, out_test)
    print(f"wrote {len(train)} train records to {out_train}")
    print(f"wrote {len(test)} test records to {out_test}")
    return 0


def _cmd_train(args) -> int:
    model = load_system(args.model)
    dataset = datamod.load_dataset(args.data)
    if datamod.model_hash(model) != dataset.provenance.model_hash:
        raise ValidationError("dataset was labeled against a different system model")
    seed = args.seed if args.seed is not None else _default_seed()
    weights = init_weights(args.hidden, seed, model)
    features = feature_matrix(weights, model, dataset.scenarios)
    pwl = train_elm_pwl(features, dataset.labels, n_segments=args.n_segments,
                        seed=seed, max_iters=args.max_iters, restarts=args.restarts)
    save_trained_model(weights, pwl, args.out)
    gap = pwl.training_meta["objective"]
    print(f"trained {args.n_segments}-segment surrogate on {len(dataset)} records; "
          f"total underestimation gap {gap:.6f} pu; wrote {args.out}")
    return 0


def _cmd_predict(args) -> int:
    weights, pwl = load_trained_model(args.model_file)
    model = load_system(args.system)
    scenario = load_scenario(args.scenario)
    margin = predict_margin(pwl, weights, model, scenario)
    print(f"predicted margin = {margin:.6f} pu = {margin * model.s_base_mva:.2f} MW")
    return 0


def _cmd_evaluate(args) -> int:
    config = evalmod.parse_config(args.config)
    report = evalmod.run_experiment(config)
    Path(args.out).write_text(evalmod.render_report(report, "text"))
    csv_path = Path(args.out).with_suffix(Path(args.out).suffix + ".csv")
    csv_path.write_text(evalmod.render_report(report, "csv"))
    print(evalmod.render_report(report, "text"))
    print(f"wrote {args.out} and {csv_path}")
    return 0


def _cmd_export_fnc(args) -> int:
    weights, pwl = load_trained_model(args.model_file)
    model = load_system(args.system)
    blocks = emit_constraints(pwl, weights, model)
    save_constraints(blocks, model, args.out)
    print(f"wrote {len(blocks)} contingency blocks "
          f"({pwl.n_segments} rows each) to {args.out}")
    if args.audit_scenarios > 0:
        seed = args.seed if args.seed is not None else _default_seed()
        scenarios = datamod.generate_scenarios(model, args.audit_scenarios, seed)
        spec = MarginSpec(delta_f_max_pu=args.fmax, tol_pu=args.tol,
                          dp_hi=args.dp_hi, cap_pu=args.cap)
        report = audit_constraints(blocks, model, scenarios, spec)
        print(f"audit: {report.n_checked} checks, "
              f"false-safe {report.false_safe_rate:.1%}, "
              f"conservative {report.conservative_rate:.1%}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "reduce": _cmd_reduce,
    "margin": _cmd_margin,
    "gen-data": _cmd_gen_data,
    "perturb": _cmd_perturb,
    "split": _cmd_split,
    "train": _cmd_train,
    "predict": _cmd_predict,
    "evaluate": _cmd_evaluate,
    "export-fnc": _cmd_export_fnc,
}


def dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (ValidationError, FileNotFoundError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except Exception as exc:  # numerical / runtime failures
        sys.stderr.write(f"runtime error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
