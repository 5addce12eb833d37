"""Command-line entry point.

Subcommands:
  run     simulate policies on an environment, writing curves.csv, plot.png,
          manifest and (with --sweep) sweep.csv into --out
  plot    re-render a plot from an existing curves.csv
  verify  run a numerical validation suite; nonzero exit on failure
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, LinBanditError
from .harness import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_REPEATS,
    EnvSpec,
    ExperimentSpec,
    base_policy_config,
    emit_csv,
    emit_manifest,
    emit_plot,
    emit_sweep_csv,
    read_csv,
    run_experiment,
    run_one,
    sweep_alpha,
)
from .policies import Mode
from .verify import (
    POTENTIAL_M_GRID,
    check_coverage,
    check_index_oracle,
    check_inverse,
    check_potential,
)

BUNDLED_RATINGS = "synthetic_ratings.dat"


def bundled_ratings_path() -> Path:
    return Path(resources.files("linbandit") / "data" / BUNDLED_RATINGS)


def load_config_file(path: str | Path) -> dict[str, str]:
    """Flat `key = value` file mirroring the CLI flags; '#' starts a comment."""
    values: dict[str, str] = {}
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{ln}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _fill_from_config(args: argparse.Namespace, cfg: dict[str, str]) -> None:
    """Apply config-file values for flags the command line left at None/False."""
    casts = {
        "T": int,
        "repeats": int,
        "seed": int,
        "K": int,
        "d": int,
        "jobs": int,
        "alpha": float,
        "eps": float,
        "sweep": lambda v: v.lower() in ("1", "true", "yes"),
    }
    for key, raw in cfg.items():
        if not hasattr(args, key):
            raise ConfigurationError(f"unknown config key {key!r}")
        current = getattr(args, key)
        if current is None or (key == "sweep" and current is False):
            setattr(args, key, casts.get(key, str)(raw))


def _parse_policies(spec: str) -> list[Mode]:
    modes = []
    for name in spec.split(","):
        name = name.strip().lower()
        try:
            modes.append(Mode(name))
        except ValueError:
            valid = ", ".join(m.value for m in Mode)
            raise ConfigurationError(f"unknown policy {name!r}; choose from {valid}")
    return modes


def cmd_run(args: argparse.Namespace) -> int:
    if args.config:
        _fill_from_config(args, load_config_file(args.config))
    for key, default in (("env", "synthetic"), ("policy", "linimed1"), ("seed", 0), ("jobs", 1)):
        if getattr(args, key) is None:
            setattr(args, key, default)
    if args.out is None:
        raise ConfigurationError("an output directory is required (--out)")
    if args.T is None:
        args.T = 1000
    if args.repeats is None:
        args.repeats = DEFAULT_REPEATS[args.env]

    kind = args.env
    env_spec = EnvSpec(
        kind=kind,
        K=args.K if args.K is not None else (20 if kind == "movielens" else 10),
        d=args.d if args.d is not None else (25 if kind == "movielens" else 2),
        epsilon=args.eps if args.eps is not None else 0.01,
        ratings_path=(
            args.ratings
            if args.ratings is not None
            else (str(bundled_ratings_path()) if kind == "movielens" else None)
        ),
    )
    modes = _parse_policies(args.policy)
    policies = [base_policy_config(kind, m, args.T, alpha=args.alpha) for m in modes]
    metric = "ctr" if kind == "movielens" else "regret"
    spec = ExperimentSpec(
        env=env_spec,
        policies=policies,
        horizon_T=args.T,
        repeats=args.repeats,
        base_seed=args.seed,
        alpha_grid=list(DEFAULT_ALPHA_GRID) if args.sweep else None,
        metric=metric,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    extra: dict = {}
    if args.sweep:
        sweep = sweep_alpha(spec, jobs=args.jobs)
        emit_sweep_csv(sweep, out / "sweep.csv")
        # curves at each policy's best grid point
        policies = [
            base_policy_config(kind, m, args.T, alpha=sweep.best[m.value]) for m in modes
        ]
        spec = ExperimentSpec(
            env=env_spec,
            policies=policies,
            horizon_T=args.T,
            repeats=args.repeats,
            base_seed=args.seed,
            alpha_grid=spec.alpha_grid,
            metric=metric,
        )
        extra["best_alpha"] = sweep.best
    result = run_experiment(spec, jobs=args.jobs)
    curves = [result.curves[m.value] for m in modes]
    emit_csv(curves, out / "curves.csv")
    emit_plot(curves, out / "plot.png", metric=metric)
    emit_manifest(spec, out / "manifest", extra=extra)
    for curve in curves:
        print(f"{curve.label}: final mean {metric} = {curve.mean[-1]:.4f} (n={curve.n})")
    return 0


def cmd_plot(args: argparse.Namespace) -> int:
    curves = read_csv(args.curves)
    emit_plot(curves, args.out, metric=args.metric)
    print(f"wrote {args.out}")
    return 0


def _verify_inverse(args, report: dict) -> bool:
    rng = np.random.default_rng(args.seed)
    n, d = args.trials or 500, 10
    trace = [(rng.standard_normal(d), float(rng.standard_normal())) for _ in range(n)]
    dev = check_inverse(trace, dim=d, lam=1.0)
    report["inverse.random.deviation"] = dev
    report["inverse.random.threshold"] = 1e-8
    ok = dev < 1e-8

    # near-collinear contexts around one direction
    base = rng.standard_normal(d)
    base /= np.linalg.norm(base)
    trace2 = []
    for _ in range(n):
        x = base + 1e-3 * rng.standard_normal(d)
        trace2.append((x, float(rng.standard_normal())))
    dev2 = check_inverse(trace2, dim=d, lam=1e-4)
    report["inverse.collinear.deviation"] = dev2
    report["inverse.collinear.threshold"] = 1e-5
    return ok and dev2 < 1e-5


def _verify_coverage(args, report: dict) -> bool:
    cov = check_coverage(d=2, T=200, gamma=0.05, trials=args.trials or 1000, seed=args.seed)
    report["coverage.rate"] = cov.rate
    report["coverage.threshold"] = cov.threshold
    report["coverage.violations"] = cov.violations
    return cov.passed


def _verify_potential(args, report: dict) -> bool:
    from .envs import EndOfOptimismEnv

    env = EndOfOptimismEnv(epsilon=0.01)
    cfg = base_policy_config("eoo", Mode.LINIMED1, 10_000)
    traj = run_one(env, cfg, 10_000, seed=args.seed)
    ok = True
    for rep in check_potential(traj.contexts, lam=cfg.lam, bound_L=cfg.bound_L):
        report[f"potential.m={rep.m}.count"] = rep.observed_count
        report[f"potential.m={rep.m}.bound"] = rep.bound
        ok = ok and rep.holds
    return ok


def _verify_index(args, report: dict) -> bool:
    rng = np.random.default_rng(args.seed)
    trials = args.trials or 1000
    disagreements = 0
    for mode in (Mode.LINIMED1, Mode.LINIMED2, Mode.LINIMED3):
        for _ in range(trials):
            K = int(rng.integers(2, 7))
            means = rng.normal(0, 1, K)
            widths_sq = rng.uniform(0.001, 4.0, K)
            ucbs = means + np.sqrt(widths_sq)
            if not check_index_oracle(means, ucbs, widths_sq, mode):
                disagreements += 1
    report["index.disagreements"] = disagreements
    report["index.trials_per_mode"] = trials
    return disagreements == 0


def cmd_verify(args: argparse.Namespace) -> int:
    suites = {
        "inverse": _verify_inverse,
        "coverage": _verify_coverage,
        "potential": _verify_potential,
        "index": _verify_index,
    }
    report: dict = {"suite": args.suite, "seed": args.seed}
    passed = suites[args.suite](args, report)
    report["pass"] = passed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "verify.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for key in sorted(report):
        print(f"{key}: {report[key]}")
    return 0 if passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linbandit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a simulation or replay experiment")
    run.add_argument("--config", help="key = value file; explicit flags override it")
    run.add_argument("--env", choices=["synthetic", "eoo", "movielens"])
    run.add_argument("--policy", default=None, help="comma-separated policy names")
    run.add_argument("--T", type=int, default=None)
    run.add_argument("--repeats", type=int, default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--alpha", type=float, default=None, help="width multiplier (default: tuned preset)")
    run.add_argument("--sweep", action="store_true", help="grid-search alpha instead of one value")
    run.add_argument("--K", type=int, default=None)
    run.add_argument("--d", type=int, default=None)
    run.add_argument("--eps", type=float, default=None)
    run.add_argument("--ratings", default=None, help="ratings file (default: bundled sample)")
    run.add_argument("--jobs", type=int, default=None)
    run.add_argument("--out", default=None)
    run.set_defaults(func=cmd_run)

    plot = sub.add_parser("plot", help="render plot.png from a curves.csv")
    plot.add_argument("--curves", required=True)
    plot.add_argument("--out", default="plot.png")
    plot.add_argument("--metric", choices=["regret", "ctr"], default="regret")
    plot.set_defaults(func=cmd_plot)

    verify = sub.add_parser("verify", help="run a validation suite")
    verify.add_argument("--suite", choices=["inverse", "coverage", "potential", "index"], required=True)
    verify.add_argument("--trials", type=int, default=None)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--out", default=".")
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LinBanditError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
