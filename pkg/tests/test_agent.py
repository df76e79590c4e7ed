import numpy as np
import pytest

from pwil.agent import (Discretizer, QLearner, ReplayBuffer, Transition, action_decoder, expert_transitions,
                        linear_epsilon, observe_update, prefill)
from pwil.core import Point, Trajectory
from pwil.envs import Env, gridworld, rollout


def tiny_mdp():
    """Two states, two actions; action 1 in state 0 pays 1 and moves to state 1."""
    nxt = {(0, 0): 0, (0, 1): 1, (1, 0): 0, (1, 1): 1}
    rew = {(0, 0): 0.0, (0, 1): 1.0, (1, 0): 2.0, (1, 1): 0.5}
    return nxt, rew


def value_iteration(nxt, rew, gamma, sweeps=5000):
    q = np.zeros((2, 2))
    for _ in range(sweeps):
        v = q.max(axis=1)
        q = np.array([[rew[s, a] + gamma * v[nxt[s, a]] for a in range(2)] for s in range(2)])
    return q


def test_q_learning_converges_on_tiny_mdp():
    nxt, rew = tiny_mdp()
    gamma = 0.9
    learner = QLearner(2, Discretizer([0.0], [1.0], time_feature=False), gamma=gamma, learning_rate=0.5)
    buffer = ReplayBuffer(100)
    for (s, a), s2 in nxt.items():
        buffer.add(Transition(s, a, rew[s, a], s2, False))
    rng = np.random.default_rng(0)
    for _ in range(5000):
        for tr in buffer.sample(8, rng):
            learner.backup(tr)
    q = np.array([learner.q_table[s] for s in range(2)])
    assert np.abs(q - value_iteration(nxt, rew, gamma)).max() < 1e-3


def test_terminal_backup_ignores_successor():
    learner = QLearner(2, Discretizer([0.0], [1.0]), learning_rate=1.0, q_init=10.0)
    learner.backup(Transition("s", 0, 1.0, "t", True))
    assert learner.q_table["s"][0] == 1.0


def test_greedy_ties_pick_lowest_action():
    learner = QLearner(3, Discretizer([0.0], [1.0]))
    assert learner.greedy_action("unseen") == 0
    learner.q_table["s"][:] = [1.0, 2.0, 2.0]
    assert learner.greedy_action("s") == 1


def test_epsilon_one_acts_uniformly():
    learner = QLearner(4, Discretizer([0.0], [1.0]), epsilon=1.0)
    rng = np.random.default_rng(0)
    counts = np.bincount([learner.act(np.zeros(1), 0, rng) for _ in range(4000)], minlength=4)
    assert counts.min() > 850


def test_discretizer_bins_and_time():
    d = Discretizer([0.0, 0.0], [8.0, 8.0], bins=8)
    assert d(np.array([0.0, 7.99]), 3) == (0, 7, 3)
    assert d(np.array([8.0, -1.0]), 0) == (7, 0, 0)
    assert Discretizer([0.0], [1.0], bins=4, time_feature=False)(np.array([0.6]), 9) == (2,)


def test_replay_buffer_fifo():
    buf = ReplayBuffer(3)
    for k in range(5):
        buf.add(Transition(k, 0, 0.0, k, False))
    assert [tr.state for tr in buf] == [2, 3, 4]
    assert ReplayBuffer(2).sample(4, np.random.default_rng(0)) == []


def test_observe_update_applies_batch_backups():
    learner = QLearner(2, Discretizer([0.0], [1.0]), learning_rate=1.0)
    buf = ReplayBuffer(10)
    observe_update(learner, buf, Transition("s", 1, 3.0, "s2", True), 4, np.random.default_rng(0))
    assert learner.q_table["s"][1] == 3.0
    observe_update(learner, buf, Transition("a", 0, 5.0, "b", True), 4, np.random.default_rng(0), update=False)
    assert "a" not in learner.q_table


def demo_with_actions(n):
    states = [[float(t)] for t in range(n)]
    return Trajectory.from_arrays(states, [[1.0]] * n)


def identity_key(obs, t):
    return (float(obs[0]), t)


def test_prefill_count_and_reward():
    buf = ReplayBuffer(1000)
    prefill(buf, [demo_with_actions(10)], 100, 5.0, np.random.default_rng(0), identity_key, lambda a: 0)
    assert len(buf) == 100
    assert {tr.reward for tr in buf} == {5.0}
    assert all(tr.next_state[0] == tr.state[0] + 1 for tr in buf)


def test_prefill_zero_is_noop():
    buf = ReplayBuffer(10)
    prefill(buf, [demo_with_actions(4)], 0, 5.0, np.random.default_rng(0), identity_key, lambda a: 0)
    assert len(buf) == 0


def test_prefill_needs_actions():
    no_actions = Trajectory((Point([0.0]), Point([1.0])))
    with pytest.raises(ValueError, match="prefill requires expert actions"):
        prefill(ReplayBuffer(10), [no_actions], 10, 5.0, np.random.default_rng(0), identity_key, lambda a: 0)
    with pytest.raises(ValueError, match="prefill requires expert actions"):
        prefill(ReplayBuffer(10), [demo_with_actions(3)], 10, 5.0, np.random.default_rng(0), identity_key,
                lambda a: 0, state_only=True)


def test_expert_transitions_follow_subsampled_keys():
    pts = (Point([0.0], [1.0], key=(0, 2)), Point([4.0], [1.0], key=(0, 6)))
    pairs = expert_transitions([Trajectory(pts, nominal_horizon=10)], identity_key, lambda a: 0)
    assert pairs == [((0.0, 2), 0, (4.0, 6), False)]


def test_action_decoder():
    decode = action_decoder([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
    assert decode(np.array([0.0, 1.0])) == 1


def test_linear_epsilon():
    sched = linear_epsilon(1.0, 0.1, 10)
    assert sched(0) == 1.0 and sched(10) == pytest.approx(0.1) and sched(50) == pytest.approx(0.1)
    assert sched(5) == pytest.approx(0.55)


def test_learns_gridworld_from_task_reward():
    spec = gridworld(size=4)
    low, high = spec.obs_bounds()
    learner = QLearner(spec.n_actions, Discretizer(low, high, bins=4), gamma=0.99)
    buf = ReplayBuffer(10000)
    rng = np.random.default_rng(0)
    env = Env(spec)
    n_episodes = 300
    for ep in range(n_episodes):
        learner.epsilon = max(0.05, 1.0 - ep / (0.5 * n_episodes))
        obs = env.reset(rng)
        for t in range(spec.horizon):
            a = learner.act(obs, t, rng)
            nxt, done, hidden = env.step(a)
            observe_update(learner, buf, Transition(learner.key(obs, t), a, hidden, learner.key(nxt, t + 1), done),
                           16, rng)
            obs = nxt
            if done:
                break
    _, ret = rollout(spec, learner.policy(), rng)
    assert ret == pytest.approx(1.0)
