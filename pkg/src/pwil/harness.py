"""Experiment orchestration: subsampling, imitation training, evaluation, bound checks."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .agent import (Discretizer, QLearner, ReplayBuffer, Transition, action_decoder,
                    linear_epsilon, observe_update, prefill)
from .config import RunConfig
from .core import EmpiricalMeasure, Point, Trajectory, measure_from_demos, measure_from_trajectory, validate_coupling
from .envs import EnvSpec, ImitationEnv, Policy, action_vector, rollout, scripted_expert, generate_demos
from .metric import MetricSpec, fit_metric
from .ot_exact import solve_w1_matrix
from .rewarder import PWILRewarder, RewardParams, greedy_cost_total

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("episode", "mean_return", "std_return", "w1_mean", "greedy_bound_mean")


def subsample(demos: Sequence[Trajectory], rate: int, rng: np.random.Generator) -> list[Trajectory]:
    """Keep every ``rate``-th point from a per-episode random offset in ``[0, rate)``."""
    if rate < 1:
        raise ValueError("rate must be >= 1")
    if rate == 1:
        return list(demos)
    out = []
    for traj in demos:
        offset = int(rng.integers(rate))
        pts = traj.points[offset::rate]
        out.append(Trajectory(pts, episode_id=traj.episode_id, nominal_horizon=traj.nominal_horizon))
    return out


@dataclass
class EvalResult:
    returns: list[float]
    w1: list[float]
    greedy_bound: list[float]
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)


@dataclass
class RunReport:
    """Evaluation time series of one imitation run."""

    rows: list[dict] = field(default_factory=list)
    variant: str = "full"
    seed: int = 0
    expert_return: float = 1.0

    def add(self, episode: int, result: EvalResult) -> None:
        self.rows.append({
            "episode": episode,
            "mean_return": float(np.mean(result.returns)),
            "std_return": float(np.std(result.returns)),
            "w1_mean": float(np.mean(result.w1)),
            "greedy_bound_mean": float(np.mean(result.greedy_bound)),
        })

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    @property
    def final_return(self) -> float:
        return self.rows[-1]["mean_return"]

    @property
    def initial_w1(self) -> float:
        return self.rows[0]["w1_mean"]

    @property
    def final_w1(self) -> float:
        return self.rows[-1]["w1_mean"]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})

    @classmethod
    def from_csv(cls, path: str | Path) -> "RunReport":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [{k: (int(v) if k == "episode" else float(v)) for k, v in r.items()}
                    for r in csv.DictReader(fh)]
        return cls(rows=rows)


def make_demos(config: RunConfig, rng: Optional[np.random.Generator] = None) -> tuple[list[Trajectory], list[Trajectory]]:
    """Scripted-expert demonstrations for ``config.env``: ``(full, subsampled)``."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    full = generate_demos(config.env, scripted_expert(config.env), config.n_demos, rng)
    return full, subsample(full, config.subsample_rate, rng)


def evaluate(env: EnvSpec, policy: Policy, demo_measure: EmpiricalMeasure, metric: MetricSpec,
             n_episodes: int, rng: np.random.Generator) -> EvalResult:
    """Greedy rollouts scored by task return, exact W1 and the greedy upper bound.

    Episodes that stop early are compared on their realized support.
    """
    returns, w1s, bounds, trajs = [], [], [], []
    for k in range(n_episodes):
        traj, ret = rollout(env, policy, rng, episode_id=k)
        mu = measure_from_trajectory(traj)
        dist = metric.pairwise(mu.points, demo_measure.points)
        w1, _ = solve_w1_matrix(dist)
        bound = greedy_cost_total(traj.points, demo_measure, metric, nominal_T=len(traj))
        returns.append(ret)
        w1s.append(w1)
        bounds.append(bound)
        trajs.append(traj)
    return EvalResult(returns, w1s, bounds, trajs)


def run_imitation(config: RunConfig, env: Optional[EnvSpec] = None, demos: Optional[Sequence[Trajectory]] = None,
                  policy: Optional[Policy] = None, full_demos: Optional[Sequence[Trajectory]] = None) -> RunReport:
    """Train a Q-learner on the greedy-coupling reward and track evaluation metrics.

    ``demos`` are the (already subsampled) demonstrations the rewarder sees;
    when omitted they are generated from the scripted expert. Passing
    ``policy`` replaces the learner by a fixed policy (no learning), which is
    how the expert-as-agent probe is run.
    """
    env = env if env is not None else config.env
    rng = np.random.default_rng(config.seed)
    eval_rng = np.random.default_rng([config.seed, 1])
    if demos is None:
        base = config.with_(env=env)
        full_demos, demos = make_demos(base, np.random.default_rng([config.seed, 2]))
    demos = list(demos)
    metric = fit_metric(demos, config.metric_kind)
    demo_measure = measure_from_demos(demos)
    eval_measure = measure_from_demos(full_demos) if (config.eval_on_full_demos and full_demos) else demo_measure

    T = env.horizon
    dim = metric.feature_dim(demo_measure.points[0])
    params = RewardParams.build(config.alpha, config.beta, T, dim, config.reward_normalizer)
    rewarder = PWILRewarder(demo_measure, metric, params, T)

    low, high = env.obs_bounds()
    learner = QLearner(env.n_actions, Discretizer(low, high, config.bins, config.time_feature),
                       gamma=config.gamma, learning_rate=config.learning_rate, q_init=config.q_init)
    buffer = ReplayBuffer(config.buffer_capacity)
    encodings = [action_vector(env, a) for a in range(env.n_actions)]
    if config.effective_prefill and policy is None:
        prefill(buffer, demos, config.effective_prefill, config.alpha, rng, learner.key,
                action_decoder(encodings))
    epsilon = linear_epsilon(config.epsilon_start, config.epsilon_end,
                             int(config.epsilon_decay_fraction * config.n_episodes))

    report = RunReport(variant=config.variant.label(), seed=config.seed)
    if config.n_episodes == 0:
        return report

    def current_policy():
        return policy if policy is not None else learner.policy()

    report.add(0, evaluate(env, current_policy(), eval_measure, metric, config.eval_episodes, eval_rng))
    train_env = ImitationEnv(env)
    step_fn = rewarder.step_support if config.support else rewarder.step
    n_steps = 0
    for episode in range(config.n_episodes):
        learner.epsilon = epsilon(episode)
        rewarder.reset()
        obs = train_env.reset(rng)
        for t in range(T):
            a = policy(obs, t) if policy is not None else learner.act(obs, t, rng)
            nxt, done = train_env.step(a)
            _, r = step_fn(Point(obs, encodings[a]))
            if policy is None:
                n_steps += 1
                tr = Transition(learner.key(obs, t), a, r, learner.key(nxt, t + 1), done)
                observe_update(learner, buffer, tr, config.batch_size, rng,
                               update=n_steps % config.update_every == 0)
            obs = nxt
            if done:
                break
        if (episode + 1) % config.eval_interval == 0 or episode + 1 == config.n_episodes:
            report.add(episode + 1, evaluate(env, current_policy(), eval_measure, metric,
                                             config.eval_episodes, eval_rng))
    return report


@dataclass
class BoundReport:
    n_instances: int
    violations: int
    infeasible_couplings: int
    mean_gap: float
    max_gap: float
    mean_rel_gap: float
    max_rel_gap: float
    gaps: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.infeasible_couplings == 0


def bound_instance(traj: Sequence[Point], demos: Sequence[Point], metric: MetricSpec) -> tuple[float, float, bool]:
    """``(greedy total, exact W1, both couplings feasible)`` for one instance."""
    T, D = len(traj), len(demos)
    measure = EmpiricalMeasure.uniform(demos)
    rw = PWILRewarder(measure, metric, RewardParams(1.0, 1.0, 1.0), T)
    greedy = math.fsum(rw.step(p)[0] for p in traj)
    greedy_c = rw.finish_episode()
    dist = metric.pairwise(list(traj), list(demos))
    exact, opt_c = solve_w1_matrix(dist)
    feasible = validate_coupling(greedy_c, T, D).passed and validate_coupling(opt_c, T, D).passed
    return greedy, exact, feasible


def validate_bound(n_instances: int = 1000, dims: int = 8, T: int = 50, D: int = 50,
                   rng: Optional[np.random.Generator] = None, tol: float = 1e-9) -> BoundReport:
    """Random-instance check that the greedy cost dominates exact W1.

    Sizes are drawn uniformly from ``[1, T] x [1, D]`` and dimensions from
    ``[1, dims]``; points are standard normal under the plain L2 metric.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    metric = MetricSpec.plain()
    gaps, rel = [], []
    violations = infeasible = 0
    for _ in range(n_instances):
        t = int(rng.integers(1, T + 1))
        d = int(rng.integers(1, D + 1))
        k = int(rng.integers(1, dims + 1))
        traj = [Point(x) for x in rng.normal(size=(t, k))]
        demos = [Point(x) for x in rng.normal(size=(d, k))]
        greedy, exact, feasible = bound_instance(traj, demos, metric)
        gap = greedy - exact
        if gap < -tol:
            violations += 1
        if not feasible:
            infeasible += 1
        gaps.append(gap)
        rel.append(gap / exact if exact > 0 else 0.0)
    gaps_arr = np.array(gaps)
    rel_arr = np.array(rel)
    return BoundReport(
        n_instances=n_instances,
        violations=violations,
        infeasible_couplings=infeasible,
        mean_gap=float(gaps_arr.mean()) if n_instances else 0.0,
        max_gap=float(gaps_arr.max()) if n_instances else 0.0,
        mean_rel_gap=float(rel_arr.mean()) if n_instances else 0.0,
        max_rel_gap=float(rel_arr.max()) if n_instances else 0.0,
        gaps=gaps_arr,
    )
