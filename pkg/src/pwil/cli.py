"""Command-line entry point: ``pwil <command> ...``.

Exit codes: 0 on success, 1 on usage or I/O errors, 2 when a validation
check fails (bound violation or infeasible coupling).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from .config import RunConfig, Variant, load_config
from .core import measure_from_demos, validate_coupling
from .envs import generate_demos, gridworld, line_world, loop_gridworld, point_mass, scripted_expert
from .harness import REPORT_COLUMNS, run_imitation, subsample, validate_bound
from .io import JSONLParseError, dump_record, read_embeddings, read_trajectories, trajectory_records, write_trajectories
from .metric import MetricKind, fit_metric
from .ot_exact import solve_w1
from .rewarder import MassExhaustedError, PWILRewarder, RewardParams

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2

ENV_FACTORIES = {
    "grid": gridworld,
    "loop": loop_gridworld,
    "line": line_world,
    "pointmass": point_mass,
}


def _resolve_config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "variant", None) is not None:
        changes["variant"] = Variant.parse(args.variant)
    if getattr(args, "metric", None) is not None:
        changes["metric"] = MetricKind(args.metric)
    if getattr(args, "alpha", None) is not None:
        changes["alpha"] = args.alpha
    if getattr(args, "beta", None) is not None:
        changes["beta"] = args.beta
    if getattr(args, "normalizer", None) is not None:
        changes["reward_normalizer"] = args.normalizer
    return cfg.with_(**changes) if changes else cfg


def _load_embeddings(args):
    path = getattr(args, "embeddings", None)
    return read_embeddings(path) if path else None


def cmd_demo_gen(args) -> int:
    spec = ENV_FACTORIES[args.env]()
    rng = np.random.default_rng(args.seed)
    demos = generate_demos(spec, scripted_expert(spec), args.n, rng)
    write_trajectories(demos, args.out)
    return EXIT_OK


def cmd_subsample(args) -> int:
    demos = read_trajectories(args.input)
    out = subsample(demos, args.rate, np.random.default_rng(args.seed))
    write_trajectories(out, args.out)
    return EXIT_OK


def cmd_reward(args) -> int:
    cfg = _resolve_config(args)
    demos = read_trajectories(args.demos)
    trajs = read_trajectories(args.traj)
    metric = fit_metric(demos, cfg.metric_kind, embedding_table=_load_embeddings(args))
    measure = measure_from_demos(demos)
    dim = metric.feature_dim(measure.points[0])
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    totals = []
    try:
        for traj in trajs:
            T = args.horizon if args.horizon is not None else len(traj)
            params = RewardParams.build(cfg.alpha, cfg.beta, T, dim, cfg.reward_normalizer)
            rewarder = PWILRewarder(measure, metric, params, T)
            step = rewarder.step_support if cfg.support else rewarder.step
            costs = []
            for rec, point in zip(trajectory_records(traj), traj.points):
                try:
                    c, r = step(point)
                except MassExhaustedError as exc:
                    print(f"error: episode {traj.episode_id}, t={rec['t']}: {exc}", file=sys.stderr)
                    return EXIT_USAGE
                costs.append(c)
                dump_record({**rec, "c": c, "r": r}, out)
            totals.append({"totals": True, "episode": traj.episode_id, "c_total": sum(costs)})
        for rec in totals:
            dump_record(rec, out)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_wdist(args) -> int:
    cfg = _resolve_config(args)
    a = read_trajectories(args.a)
    b = read_trajectories(args.b)
    metric = fit_metric(b, cfg.metric_kind, embedding_table=_load_embeddings(args))
    mu = measure_from_demos(a)
    nu = measure_from_demos(b)
    value, coupling = solve_w1(mu, nu, metric)
    print(json.dumps({"w1": value}))
    if args.coupling:
        rows, cols = np.nonzero(coupling.entries)
        with open(args.coupling, "w", encoding="utf-8") as fh:
            fh.write("i,j,mass\n")
            for i, j in zip(rows.tolist(), cols.tolist()):
                fh.write(f"{i},{j},{coupling.entries[i, j]!r}\n")
    report = validate_coupling(coupling, len(mu), len(nu))
    return EXIT_OK if report.passed else EXIT_VALIDATION


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    if args.env is not None:
        cfg = cfg.with_(env=ENV_FACTORIES[args.env]())
    if args.episodes is not None:
        cfg = cfg.with_(n_episodes=args.episodes)
    if args.rate is not None:
        cfg = cfg.with_(subsample_rate=args.rate)
    full = read_trajectories(args.demos) if args.demos else None
    demos = full
    if full is not None and cfg.subsample_rate > 1:
        demos = subsample(full, cfg.subsample_rate, np.random.default_rng([cfg.seed, 2]))
    report = run_imitation(cfg, demos=demos, full_demos=full)
    if args.out:
        report.to_csv(args.out)
    else:
        print(",".join(REPORT_COLUMNS))
        for row in report.rows:
            print(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c]) for c in REPORT_COLUMNS))
    return EXIT_OK


def cmd_bound_check(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    report = validate_bound(args.instances, args.dims, args.max_t, args.max_d, rng)
    print(f"instances: {report.n_instances}")
    print(f"violations: {report.violations}")
    print(f"infeasible couplings: {report.infeasible_couplings}")
    print(f"mean gap: {report.mean_gap!r}")
    print(f"max relative gap: {report.max_rel_gap!r}")
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _add_reward_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--variant", help="full, state, support, nofill, l2 (combine with '+')")
    p.add_argument("--metric", choices=[k.value for k in MetricKind])
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--normalizer", choices=["dim", "horizon"])
    p.add_argument("--embeddings", help="embedding sidecar JSONL for --metric embedding")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pwil", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo-gen", help="write scripted-expert demonstrations")
    p.add_argument("--env", choices=sorted(ENV_FACTORIES), default="grid")
    p.add_argument("-n", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_demo_gen)

    p = sub.add_parser("subsample", help="keep every k-th demonstration point")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--rate", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_subsample)

    p = sub.add_parser("reward", help="annotate a trajectory with greedy-coupling costs and rewards")
    p.add_argument("--demos", required=True)
    p.add_argument("--traj", required=True)
    p.add_argument("--horizon", type=int, help="nominal horizon T (default: episode length)")
    p.add_argument("--out")
    _add_reward_flags(p)
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("wdist", help="exact W1 between two trajectory files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--coupling", help="write the optimal coupling as CSV (i, j, mass)")
    _add_reward_flags(p)
    p.set_defaults(func=cmd_wdist)

    p = sub.add_parser("train", help="run imitation training and write the eval report CSV")
    p.add_argument("--demos", help="demonstration JSONL (default: generate from the scripted expert)")
    p.add_argument("--env", choices=sorted(ENV_FACTORIES))
    p.add_argument("--episodes", type=int)
    p.add_argument("--rate", type=int, help="demonstration subsampling rate")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    _add_reward_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bound-check", help="check greedy cost >= exact W1 on random instances")
    p.add_argument("--instances", type=int, default=1000)
    p.add_argument("--dims", type=int, default=8)
    p.add_argument("--max-t", type=int, default=50)
    p.add_argument("--max-d", type=int, default=50)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.set_defaults(func=cmd_bound_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (JSONLParseError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
