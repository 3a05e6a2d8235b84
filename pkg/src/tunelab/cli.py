"""Batch command-line front end.

Subcommands: solve, profile, tune, gadget, shatter, experiment, bound.
Each prints a JSON summary to stdout and writes CSV artifacts to --out.
Exit codes: 0 success, 1 verification failure (constructions that do not
certify), 2 input error.  A JSON config file (--config) supplies flag
defaults; explicit flags win.  ``TUNELAB_THREADS`` caps parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import gadgets, gnn, instances, profiler, tuner
from .instances import TunelabError
from .solvers import (DEFAULT_C_CONST, RESIDUALS, clamped_predictions,
                      get_family, predict)


class VerificationFailure(TunelabError):
    """A requested certification did not hold (exit code 1)."""


def _require(args, *names) -> None:
    """Flags may arrive via --config, so presence is checked after parsing."""
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise TunelabError(f"missing required flags: {flags}")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v)
                             for v in row) + "\n")


def _ensure_out(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _family_of(args):
    c_const = getattr(args, "c_const", None) or DEFAULT_C_CONST
    return get_family(args.family, c_const)


def _load_instances(path) -> list[instances.ProblemInstance]:
    if os.path.isdir(path):
        names = sorted(f for f in os.listdir(path)
                       if f.endswith(".json") and f != "shatter.json")
        if not names:
            raise TunelabError(f"no instance files in {path}")
        return [instances.load(os.path.join(path, name)) for name in names]
    return [instances.load(path)]


# -- commands -----------------------------------------------------------------


def cmd_solve(args) -> int:
    _require(args, "infile", "family", "param")
    out = _ensure_out(args)
    inst = _load_instances(args.infile)[0]
    family = _family_of(args)
    scores = family.solve(inst, args.param)
    raw = np.asarray(scores.F)
    preds_raw = predict(scores)
    preds = clamped_predictions(inst, scores)
    _write_csv(os.path.join(out, "scores.csv"),
               ["node"] + [f"score_{c}" for c in range(raw.shape[1])],
               [[i] + [float(v) for v in raw[i]] for i in range(inst.n)])
    _write_csv(os.path.join(out, "predictions.csv"),
               ["node", "prediction", "raw_prediction"],
               [[i, int(preds[i]), int(preds_raw[i])] for i in range(inst.n)])
    _emit({
        "command": "solve",
        "family": args.family,
        "param": args.param,
        "n": inst.n,
        "out": out,
        "max_residual": RESIDUALS.max_residual,
    })
    return 0


def cmd_profile(args) -> int:
    _require(args, "infile", "family")
    out = _ensure_out(args)
    insts = _load_instances(args.infile)
    family = _family_of(args)
    config = profiler.ProfilerConfig(tolerance=args.tol, grid_size=args.grid,
                                     max_depth=args.depth)
    prof = profiler.profile(insts if len(insts) > 1 else insts[0], family, config)
    profiler.export_profile_csv(prof,
                                os.path.join(out, "profile_pieces.csv"),
                                os.path.join(out, "profile_breakpoints.csv"))
    _emit({
        "command": "profile",
        "family": args.family,
        "instances": len(insts),
        "breakpoints": len(prof.breakpoints),
        "locations": list(prof.locations),
        "piece_losses": list(prof.piece_losses),
        "unresolved": [list(iv) for iv in prof.unresolved],
        "out": out,
    })
    return 0


def cmd_tune(args) -> int:
    _require(args, "infile", "family")
    out = _ensure_out(args)
    insts = _load_instances(args.infile)
    family = _family_of(args)
    result = tuner.erm_tune(insts, family, mode=args.mode, grid_size=args.grid)
    _write_csv(os.path.join(out, "tune_per_instance.csv"),
               ["instance", "loss_at_optimum"],
               [[k, float(v)] for k, v in enumerate(result.per_instance_losses)])
    _emit({
        "command": "tune",
        "family": args.family,
        "mode": result.mode,
        "best_param": result.best_param,
        "best_loss": result.best_loss,
        "candidates": len(result.candidates),
        "warnings": list(result.warnings),
        "out": out,
    })
    return 0


def cmd_gadget(args) -> int:
    _require(args, "family")
    out = _ensure_out(args)
    family = _family_of(args)
    if args.random:
        if args.seed is None:
            raise TunelabError("--seed is mandatory with --random")
        rng = np.random.default_rng(args.seed)
        lo, hi = gadgets.admissible_range(args.family, family.c_const)
        if args.family == "lambda":
            hi = 20.0
        span = hi - lo
        thresholds = sorted(float(lo + span * (0.02 + 0.96 * u))
                            for u in rng.random(args.random))
    else:
        if args.threshold is None:
            raise TunelabError("need --threshold or --random N")
        thresholds = [args.threshold]
    rows = []
    worst = 0.0
    for idx, t in enumerate(thresholds):
        spec = gadgets.GadgetSpec(kind=args.family, threshold=float(t),
                                  c_const=family.c_const)
        inst = gadgets.build_gadget(spec)
        instances.save(os.path.join(out, f"gadget_{idx:03d}.json"), inst)
        try:
            measured = gadgets.verify_flip(inst, family, tol=args.tol)
        except gadgets.GadgetError as exc:
            raise VerificationFailure(str(exc)) from exc
        err = abs(measured - t)
        worst = max(worst, err)
        rows.append([idx, float(t), float(measured), float(err)])
    _write_csv(os.path.join(out, "gadget_flips.csv"),
               ["index", "designed", "measured", "abs_error"], rows)
    passed = worst <= args.tol
    _emit({
        "command": "gadget",
        "family": args.family,
        "count": len(thresholds),
        "max_abs_error": worst,
        "tol": args.tol,
        "pass": passed,
        "out": out,
    })
    if not passed:
        raise VerificationFailure(
            f"flip location error {worst:.3e} exceeds tolerance {args.tol:.0e}")
    return 0


def cmd_shatter(args) -> int:
    _require(args, "family", "m")
    out = _ensure_out(args)
    family = _family_of(args)
    fam = gadgets.build_shatter_family(args.family, args.m, c_const=family.c_const)
    gadgets.save_shatter_family(fam, out)
    report = gadgets.verify_shattering(fam)
    _write_csv(os.path.join(out, "shatter_cells.csv"),
               ["cell", "param"] + [f"bit_{i + 1}" for i in range(fam.m)],
               [[k, float(p)] + list(bits)
                for k, (p, bits) in enumerate(zip(report.cell_params,
                                                  report.cell_patterns))])
    total = 2 ** fam.m
    _emit({
        "command": "shatter",
        "family": args.family,
        "m": fam.m,
        "patterns": f"{len(report.achieved)}/{total}",
        "pass": report.passed,
        "missing": [list(b) for b in report.missing],
        "out": out,
    })
    if not report.passed:
        raise VerificationFailure(
            f"shattering incomplete: {len(report.missing)} patterns missing")
    return 0


def cmd_experiment(args) -> int:
    _require(args, "family")
    out = _ensure_out(args)
    if args.seed is None:
        raise TunelabError("--seed is mandatory for experiment")
    family = _family_of(args)
    gen = tuner.GeneratorConfig(n=args.n, num_classes=args.classes,
                                edge_density=args.density,
                                label_fraction=args.label_fraction)
    plan = tuner.sample_size(args.n, args.eps, args.failure_probability)
    rows, gaps = [], []
    for k in range(args.seeds):
        seed = args.seed + 1_000_000 * k
        rep = tuner.generalization_experiment(
            gen, family, args.m_train, args.m_test, seed=seed, mode=args.mode)
        rows.append([seed, rep["best_param"], rep["train_loss"],
                     rep["test_loss"], rep["gap"]])
        gaps.append(rep["gap"])
    _write_csv(os.path.join(out, "experiment_gaps.csv"),
               ["seed", "best_param", "train_loss", "test_loss", "gap"], rows)
    _emit({
        "command": "experiment",
        "family": args.family,
        "n": args.n,
        "eps": args.eps,
        "m_train": args.m_train,
        "m_test": args.m_test,
        "seeds": args.seeds,
        "mean_gap": float(np.mean(gaps)),
        "max_gap": float(np.max(gaps)),
        "suggested_m": plan.m,
        "out": out,
    })
    return 0


def cmd_bound(args) -> int:
    _require(args, "model", "m", "d", "L", "gamma")
    b = gnn.BoundInputs(m=args.m, d=args.d, L=args.L, gamma=args.gamma,
                        c_dl=args.c_dl, c_dh=args.c_dh, c_z=args.c_z,
                        c_theta=args.c_theta, c_w=args.c_w, c_u=args.c_u,
                        c_v=args.c_v, r=args.r)
    if args.model == "sgc":
        k1, k2, k3 = gnn.sgc_constants(b)
        value = gnn.rademacher_bound_sgc(b)
        constants = {"k1": k1, "k2": k2, "k3": k3}
    else:
        k1, k2, k3, k4, A, B = gnn.gcan_constants(b)
        value = gnn.rademacher_bound_gcan(b)
        constants = {"k1": k1, "k2": k2, "k3": k3, "k4": k4, "A": A, "B": B}
    _emit({
        "command": "bound",
        "model": args.model,
        "value": value,
        "constants": constants,
        "log_base": "natural",
    })
    return 0


# -- parser ----------------------------------------------------------------------


def _add_common(p, family=True):
    if family:
        p.add_argument("--family", choices=["alpha", "lambda", "delta"], default=None)
        p.add_argument("--c-const", type=float, default=None,
                       help="constant c for the delta family (default 0.99)")
    p.add_argument("--out", default=None, help="output directory (default .)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tunelab",
        description="Hyperparameter tuning for graph-based semi-supervised learners")
    parser.add_argument("--config", default=None,
                        help="JSON file of flag defaults (flags win on conflict)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance at one parameter")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--param", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("profile", help="loss profile of an instance or directory")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--depth", type=int, default=60)
    _add_common(p)
    p.set_defaults(func=cmd_profile, tol=1e-9)

    p = sub.add_parser("tune", help="ERM over instances in a file or directory")
    p.add_argument("--in", dest="infile", default=None)
    p.add_argument("--mode", choices=["exact", "grid"], default="exact")
    p.add_argument("--grid", type=int, default=1024, help="grid-mode resolution")
    _add_common(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("gadget", help="build gadgets and verify flip locations")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--random", type=int, default=0,
                   help="verify N random admissible thresholds instead")
    _add_common(p)
    p.set_defaults(func=cmd_gadget)

    p = sub.add_parser("shatter", help="build and certify a shattering family")
    p.add_argument("--m", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_shatter)

    p = sub.add_parser("experiment", help="synthetic generalization-gap experiment")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--label-fraction", type=float, default=0.2)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--failure-probability", type=float, default=0.05)
    p.add_argument("--m-train", type=int, default=300)
    p.add_argument("--m-test", type=int, default=300)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--mode", choices=["exact", "grid"], default="exact")
    _add_common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bound", help="Rademacher-bound calculators")
    p.add_argument("--model", choices=["sgc", "gcan"], default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    for name in ("c-dl", "c-dh", "c-z", "c-theta", "c-w", "c-u", "c-v", "r"):
        p.add_argument(f"--{name}", type=float, default=None)
    p.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()

    config_probe = argparse.ArgumentParser(add_help=False)
    config_probe.add_argument("--config", default=None)
    probe, _ = config_probe.parse_known_args(argv)
    if probe.config:
        try:
            with open(probe.config, encoding="utf-8") as fh:
                defaults = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(json.dumps({"error": f"bad config file: {exc}"}), file=sys.stderr)
            return 2
        if not isinstance(defaults, dict):
            print(json.dumps({"error": "config file must hold a JSON object"}),
                  file=sys.stderr)
            return 2
        for action in parser._subparsers._group_actions[0].choices.values():
            action.set_defaults(**{k: v for k, v in defaults.items()
                                   if any(a.dest == k for a in action._actions)})

    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except VerificationFailure as exc:
        print(json.dumps({"error": str(exc), "kind": "verification"}),
              file=sys.stderr)
        return 1
    except (TunelabError, OSError, ValueError, KeyError) as exc:
        print(json.dumps({"error": str(exc), "kind": "input"}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
