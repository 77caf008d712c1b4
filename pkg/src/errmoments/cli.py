"""Command-line front end: moment tables, MC validation, RMS surfaces, sample-size plans.

Every subcommand writes its CSV/JSON outputs plus ``manifest.json`` into
``--out``.  ``errmoments rerun <manifest>`` replays a recorded invocation.

Exit codes: 0 success, 1 invalid input, 2 numeric inconsistency, 3 a
planning target not reached within the search ceiling.
"""

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .gauss import NumericError
from .mc import McConfig, run
from .model import (
    ModelError,
    ReducedUnconditional,
    centered_conditional,
    load_spec,
    profile_from_reduced,
)
from .moments import (
    MomentMatrix,
    asymptotic_limits,
    conditional_coefficients,
    conditional_moment_matrix,
    unconditional_coefficients,
    unconditional_moment_matrix,
)
from .planner import DEFAULT_PS, DEFAULT_TAUS, plan_table, write_plan_csv

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_NOT_FOUND = 0, 1, 2, 3
SEED_ENV = "ERRMOMENTS_SEED"
_MC_ROWS = MomentMatrix.FIRST + MomentMatrix.SECOND + MomentMatrix.CROSS + (
    "mean_est", "mean_true", "second_est", "second_true", "cross", "bias", "dev_var", "rms"
)


class CliError(Exception):
    def __init__(self, msg, code=EXIT_INVALID):
        super().__init__(msg)
        self.code = code


def fmt(x) -> str:
    """Console formatting: 6 significant digits."""
    return f"{x:.6g}"


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"{SEED_ENV}={env!r} is not an integer")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _load(args) -> dict:
    if not args.config:
        raise CliError("--config is required for this subcommand")
    if not Path(args.config).is_file():
        raise CliError(f"config file not found: {args.config}")
    return load_spec(args.config)


# --- subcommands -----------------------------------------------------------

def cmd_moments(args, out: Path):
    models = _load(args)
    pipelines = []
    coef_rows = []
    if "conditional" in models:
        rc = models["conditional"]
        pipelines.append(("conditional", conditional_moment_matrix(rc)))
        pipelines.append(("conditional_simple", asymptotic_limits(profile_from_reduced(rc), "conditional")))
        coef_rows += [("conditional", k, repr(float(v))) for k, v in asdict(conditional_coefficients(rc)).items()]
    if "unconditional" in models:
        ru = models["unconditional"]
        pipelines.append(("unconditional", unconditional_moment_matrix(ru, args.cross_prior_term)))
        pipelines.append(("unconditional_simple", asymptotic_limits(profile_from_reduced(ru), "unconditional")))
        coef_rows += [("unconditional", k, repr(float(v)))
                      for k, v in asdict(unconditional_coefficients(ru, args.cross_prior_term)).items()]
    if "asymptotic" in models:
        ap = models["asymptotic"]
        pipelines.append(("asymptotic_conditional", asymptotic_limits(ap, "conditional")))
        if ap.gamma0 > 0 and ap.gamma1 > 0:
            pipelines.append(("asymptotic_unconditional", asymptotic_limits(ap, "unconditional")))

    names = MomentMatrix.entry_names()
    _write_csv(
        out / "moments.csv",
        ("pipeline",) + names + ("alpha0", "clamped"),
        [(p,) + tuple(repr(float(getattr(mm, k))) for k in names) + (repr(float(mm.alpha0)), mm.n_clamped)
         for p, mm in pipelines],
    )
    _write_csv(out / "coefficients.csv", ("pipeline", "coefficient", "value"), coef_rows)

    lines = []
    for key in ("conditional", "unconditional"):
        if key in models:
            r = models[key]
            lines.append(f"{key} model: p = {fmt(r.p)}, n0 = {fmt(r.n0)}, n1 = {fmt(r.n1)}, "
                         f"alpha0 = {fmt(r.alpha0)}, c = {fmt(r.c)}")
    for p, mm in pipelines:
        lines.append(f"[{p}] E[est] = {fmt(mm.mean_est)}  E[true] = {fmt(mm.mean_true)}  "
                     f"bias = {fmt(mm.bias)}  dev_var = {fmt(mm.dev_var)}  rms = {fmt(mm.rms)}"
                     + (f"  ({mm.n_clamped} correlation clamps)" if mm.n_clamped else ""))
    summary = "\n".join(lines) + "\n"
    (out / "summary.txt").write_text(summary)
    print(summary, end="")
    return ["moments.csv", "coefficients.csv", "summary.txt"], EXIT_OK


def _mc_config(args, models, mode, seed):
    if "full" not in models:
        raise CliError("Monte Carlo needs a full model (vectors and covariance), not a reduced one")
    t1 = args.t1 if args.t1 is not None else (10_000 if mode == "conditional" else 300)
    t2 = args.t2 if args.t2 is not None else (1 if mode == "conditional" else 300)
    return McConfig(models["full"], mode, t1, t2, seed, full_samples=args.full_samples)


def _warn_rejections(est):
    if est.rejected > 0.001 * est.n_pairs:
        print(f"warning: {est.rejected} degenerate samples redrawn (> 0.1% of {est.n_pairs})", file=sys.stderr)


def cmd_mc(args, out: Path):
    models = _load(args)
    est = run(_mc_config(args, models, args.mode, _seed(args)), workers=args.threads)
    _warn_rejections(est)
    (out / "mc.json").write_text(est.to_json(indent=2, sort_keys=True) + "\n")
    print(f"{args.mode} Monte Carlo: {est.n_pairs} pairs, seed {est.config['seed']}")
    for k in ("mean_est", "mean_true", "bias", "rms"):
        print(f"  {k:10s} {fmt(est.mean[k])} +/- {fmt(est.stderr[k])}")
    return ["mc.json"], EXIT_OK


def cmd_validate(args, out: Path):
    models = _load(args)
    mode = args.mode
    mm = conditional_moment_matrix(models["conditional"]) if mode == "conditional" \
        else unconditional_moment_matrix(models["unconditional"], args.cross_prior_term)
    est = run(_mc_config(args, models, mode, _seed(args)), workers=args.threads)
    _warn_rejections(est)
    rows = []
    flagged = []
    for k in _MC_ROWS:
        a, m, s = float(getattr(mm, k)), est.mean[k], est.stderr[k]
        z = (a - m) / s if s > 0 else (0.0 if a == m else float("inf"))
        flag = abs(z) > 3
        if flag:
            flagged.append(k)
        rows.append((k, repr(a), repr(m), repr(s), repr(z), "FLAG" if flag else ""))
    _write_csv(out / "validate.csv", ("entry", "analytic", "mc_mean", "mc_stderr", "z", "flag"), rows)
    lines = [f"{mode} validation: T1 = {est.config['T1']}, T2 = {est.config['T2']}, seed = {est.config['seed']}",
             f"{'entry':12s} {'analytic':>12s} {'mc_mean':>12s} {'mc_stderr':>12s} {'z':>9s}"]
    for k, a, m, s, z, f in rows:
        lines.append(f"{k:12s} {fmt(float(a)):>12s} {fmt(float(m)):>12s} {fmt(float(s)):>12s} {fmt(float(z)):>9s} {f}")
    lines.append(f"{len(flagged)} of {len(rows)} entries with |z| > 3" + (f": {', '.join(flagged)}" if flagged else ""))
    report = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(report)
    (out / "mc.json").write_text(json.dumps({"mean": est.mean, "stderr": est.stderr, "n_pairs": est.n_pairs,
                                             "rejected": est.rejected, "config": est.config},
                                            indent=2, sort_keys=True) + "\n")
    print(report, end="")
    return ["validate.csv", "report.txt", "mc.json"], EXIT_OK


def parse_range(text: str, name: str) -> np.ndarray:
    """``a`` | ``a:b`` (step 1) | ``a:b:step`` (inclusive) | ``a,b,c``."""
    try:
        if "," in text:
            vals = [float(v) for v in text.split(",")]
        else:
            parts = [float(v) for v in text.split(":")]
            if len(parts) == 1:
                vals = parts
            elif len(parts) in (2, 3):
                lo, hi = parts[0], parts[1]
                step = parts[2] if len(parts) == 3 else 1.0
                if step <= 0 or hi < lo:
                    raise ValueError
                vals = list(np.arange(lo, hi + step / 2, step))
            else:
                raise ValueError
    except ValueError:
        raise CliError(f"invalid {name} range {text!r}; use a, a:b, a:b:step or a,b,c")
    if not vals or any(v <= 0 for v in vals):
        raise CliError(f"{name} range must be nonempty and positive: {text!r}")
    return np.array(vals, dtype=float)


def cmd_surface(args, out: Path):
    ps = parse_range(args.p_range, "p")
    ns = parse_range(args.n_range, "n")
    P, N = np.meshgrid(ps, ns, indexing="ij")
    if args.mode == "conditional":
        d2 = args.delta2 if args.delta2 is not None else 4.0
        mm = conditional_moment_matrix(centered_conditional(P, N, args.beta, np.full(P.shape, d2)))
    else:
        D2 = args.Delta2 if args.Delta2 is not None else 4.0
        half = N / 2.0
        mm = unconditional_moment_matrix(ReducedUnconditional(
            p=P, n0=half, n1=half, nu0=args.beta * half, nu1=args.beta * half, c=0.0,
            Delta2=np.full(P.shape, D2)), args.cross_prior_term)
    rms = np.broadcast_to(mm.rms, P.shape)
    _write_csv(out / "surface.csv", ("p", "n", "rms"),
               [(repr(float(p)), repr(float(n)), repr(float(r))) for p, n, r in zip(P.ravel(), N.ravel(), rms.ravel())])
    i = int(np.argmax(rms))
    print(f"{args.mode} RMS surface: {P.size} cells, max {fmt(rms.ravel()[i])} at p = {fmt(P.ravel()[i])}, "
          f"n = {fmt(N.ravel()[i])}")
    return ["surface.csv"], EXIT_OK


def _float_list(text, name):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise CliError(f"invalid {name} list {text!r}")


def cmd_plan(args, out: Path):
    taus = _float_list(args.tau_list, "tau") if args.tau_list else list(DEFAULT_TAUS[args.mode])
    ps = [int(v) for v in _float_list(args.p_list, "p")] if args.p_list else list(DEFAULT_PS)
    if not taus or not ps:
        raise CliError("tau and p lists must be nonempty")
    rule = "literal" if args.literal else "safe"
    results = plan_table(args.mode, args.beta, taus, ps, rule=rule, n_max=args.n_max,
                         horizon=args.horizon, n_start=args.n_start, cross_prior_term=args.cross_prior_term)
    write_plan_csv(results, out / "plan.csv")
    print(f"{args.mode} minimum n (beta = {fmt(args.beta)}, {rule} rule)")
    print("tau \\ p " + " ".join(f"{p:>6d}" for p in ps))
    missing = 0
    for tau in taus:
        cells = []
        for r in results:
            if r.query.tau == tau:
                cells.append(f"{r.n_min:>6d}" if r.found else f"{'>' + str(args.n_max):>6s}")
                missing += not r.found
        print(f"{fmt(tau):>7s} " + " ".join(cells))
    if missing:
        print(f"{missing} cell(s) not reached by n = {args.n_max}", file=sys.stderr)
    return ["plan.csv"], EXIT_NOT_FOUND if missing else EXIT_OK


# --- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON model (moments/validate/mc) or option defaults (surface/plan)")
    common.add_argument("--out", default="errmoments_out", help="output directory")
    common.add_argument("--seed", type=int, default=None, help=f"RNG seed (falls back to ${SEED_ENV}, then 0)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo")

    ap = argparse.ArgumentParser(prog="errmoments", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"errmoments {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    cpt = argparse.ArgumentParser(add_help=False)
    cpt.add_argument("--cross-prior-term", action="store_true",
                     help="use the exact estimator self-covariance in unconditional formulas")

    sub.add_parser("moments", parents=[common, cpt], help="analytic moment tables for a model")

    for name, hlp in (("mc", "Monte Carlo estimates"), ("validate", "analytic vs Monte Carlo comparison")):
        p = sub.add_parser(name, parents=[common, cpt], help=hlp)
        p.add_argument("--mode", choices=("conditional", "unconditional"), default="conditional")
        p.add_argument("--t1", type=int, default=None, help="inner replications")
        p.add_argument("--t2", type=int, default=None, help="outer replications (unconditional)")
        p.add_argument("--full-samples", action="store_true", help="draw every point, not just the sample means")

    p = sub.add_parser("surface", parents=[common, cpt], help="RMS over a (p, n) grid")
    p.add_argument("--mode", choices=("conditional", "unconditional"), default="conditional")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--delta2", type=float, default=None, help="squared distance between class means")
    p.add_argument("--Delta2", type=float, default=None, help="squared distance between prior means")
    p.add_argument("--p-range", default="4:200:4")
    p.add_argument("--n-range", default="4:200:4")

    p = sub.add_parser("plan", parents=[common, cpt], help="minimum sample sizes for RMS targets")
    p.add_argument("--mode", choices=("conditional", "unconditional"), default="conditional")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--tau-list", default=None, help="comma-separated RMS targets")
    p.add_argument("--p-list", default=None, help="comma-separated dimensions")
    rule = p.add_mutually_exclusive_group()
    rule.add_argument("--safe", action="store_true", help="require the target to hold over the horizon (default)")
    rule.add_argument("--literal", action="store_true", help="first crossing of the target")
    p.add_argument("--horizon", type=int, default=200)
    p.add_argument("--n-max", type=int, default=10_000)
    p.add_argument("--n-start", type=int, default=4)

    p = sub.add_parser("rerun", help="replay the invocation recorded in a manifest")
    p.add_argument("manifest")
    return ap


_COMMANDS = {"moments": cmd_moments, "mc": cmd_mc, "validate": cmd_validate, "surface": cmd_surface, "plan": cmd_plan}
_OPTION_CONFIG = ("surface", "plan")


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in _OPTION_CONFIG and args.config:
        # a config file supplies defaults; explicit flags still win
        try:
            defaults = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"{args.config}: {exc}")
        if not isinstance(defaults, dict):
            raise CliError(f"{args.config}: expected a JSON object of option values")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions}
        bad = [k for k in defaults if k.replace("-", "_") not in known]
        if bad:
            raise CliError(f"{args.config}: unknown option(s) {bad}")
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in defaults.items()})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse(argv)
        if args.command == "rerun":
            manifest = json.loads(Path(args.manifest).read_text())
            return main(manifest["argv"])
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        seed = _seed(args)
        files, code = _COMMANDS[args.command](args, out)
        manifest = {
            "subcommand": args.command,
            "argv": argv,
            "config": {k: v for k, v in vars(args).items() if k != "command"},
            "seed": seed,
            "outputs": [str(out / f) for f in files] + [str(out / "manifest.json")],
            "version": __version__,
            "wall_time_s": time.perf_counter() - t0,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
        return code
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except NumericError as exc:
        print(f"numeric inconsistency: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ModelError as exc:
        print(f"invalid model: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
