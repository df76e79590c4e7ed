"""Tabular Q-learning agent with a replay buffer and expert prefill."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Callable, Hashable, NamedTuple, Sequence

import numpy as np

from .core import Trajectory


class Transition(NamedTuple):
    state: Hashable
    action: int
    reward: float
    next_state: Hashable
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._data: deque[Transition] = deque(maxlen=capacity)

    def __len__(self):
        return len(self._data)

    def __iter__(self):
        return iter(self._data)

    def __getitem__(self, idx) -> Transition:
        return self._data[idx]

    def add(self, transition: Transition) -> None:
        self._data.append(transition)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        if not self._data:
            return []
        idx = rng.integers(0, len(self._data), size=batch_size)
        return [self._data[i] for i in idx]


@dataclass
class Discretizer:
    """Uniform bins per observation dimension, optionally keyed by timestep."""

    low: np.ndarray
    high: np.ndarray
    bins: int = 16
    time_feature: bool = True

    def __post_init__(self):
        self.low = np.asarray(self.low, dtype=np.float64)
        self.high = np.asarray(self.high, dtype=np.float64)
        self._span = np.where(self.high > self.low, self.high - self.low, 1.0)

    def __call__(self, obs: np.ndarray, t: int) -> tuple:
        frac = (np.asarray(obs, dtype=np.float64) - self.low) / self._span
        idx = np.clip((frac * self.bins).astype(np.int64), 0, self.bins - 1)
        cells = tuple(idx.tolist())
        return cells + (int(t),) if self.time_feature else cells


class QLearner:
    """Epsilon-greedy tabular Q-learning over discretized states."""

    def __init__(self, n_actions: int, discretizer: Discretizer, gamma: float = 0.99,
                 learning_rate: float = 0.5, epsilon: float = 1.0, q_init: float = 0.0):
        if not 0 <= gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        self.n_actions = n_actions
        self.key: Callable[[np.ndarray, int], tuple] = discretizer
        self.gamma = gamma
        self.learning_rate = learning_rate
        self.epsilon = epsilon
        self.q_init = float(q_init)
        self.q_table: defaultdict[Hashable, np.ndarray] = defaultdict(lambda: np.full(n_actions, self.q_init))

    @property
    def epsilon(self) -> float:
        return self._epsilon

    @epsilon.setter
    def epsilon(self, value: float) -> None:
        if not 0.0 <= value <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        self._epsilon = float(value)

    def greedy_action(self, state_key: Hashable) -> int:
        q = self.q_table.get(state_key)
        return 0 if q is None else int(np.argmax(q))

    def act(self, obs: np.ndarray, t: int, rng: np.random.Generator, greedy: bool = False) -> int:
        if not greedy and rng.random() < self._epsilon:
            return int(rng.integers(self.n_actions))
        return self.greedy_action(self.key(obs, t))

    def backup(self, tr: Transition) -> None:
        q = self.q_table[tr.state]
        target = tr.reward
        if not tr.done:
            nxt = self.q_table.get(tr.next_state)
            target += self.gamma * (float(nxt.max()) if nxt is not None else self.q_init)
        q[tr.action] += self.learning_rate * (target - q[tr.action])

    def policy(self) -> Callable[[np.ndarray, int], int]:
        """Frozen greedy policy, usable by ``envs.rollout``."""
        return lambda obs, t: self.greedy_action(self.key(obs, t))


def observe_update(learner: QLearner, buffer: ReplayBuffer, transition: Transition,
                   batch_size: int, rng: np.random.Generator, update: bool = True) -> None:
    """Store the transition, then apply one backup per uniformly sampled batch element."""
    buffer.add(transition)
    if update:
        for tr in buffer.sample(batch_size, rng):
            learner.backup(tr)


def expert_transitions(demos: Sequence[Trajectory], key: Callable[[np.ndarray, int], Hashable],
                       action_index: Callable[[np.ndarray], int]) -> list[tuple[Hashable, int, Hashable, bool]]:
    """``(s, a, s_next, done)`` pairs from consecutive retained demo points.

    On subsampled demos the next retained point stands in for the true next
    state. A demo's last point has no successor and yields no pair.
    """
    pairs = []
    for traj in demos:
        pts = traj.points
        for k in range(len(pts) - 1):
            p, q = pts[k], pts[k + 1]
            if p.action is None:
                raise ValueError("prefill requires expert actions")
            tp = p.key[1] if p.key is not None else k
            tq = q.key[1] if q.key is not None else k + 1
            pairs.append((key(p.state, tp), action_index(p.action), key(q.state, tq), False))
    return pairs


def prefill(buffer: ReplayBuffer, demos: Sequence[Trajectory], count: int, alpha: float,
            rng: np.random.Generator, key: Callable[[np.ndarray, int], Hashable],
            action_index: Callable[[np.ndarray], int], state_only: bool = False) -> None:
    """Seed the buffer with ``count`` expert transitions resampled with replacement, reward ``alpha``."""
    if count == 0:
        return
    if state_only:
        raise ValueError("prefill requires expert actions")
    pairs = expert_transitions(demos, key, action_index)
    if not pairs:
        raise ValueError("no demonstration transitions to prefill from")
    for idx in rng.integers(0, len(pairs), size=count):
        s, a, s2, done = pairs[idx]
        buffer.add(Transition(s, a, float(alpha), s2, done))


def action_decoder(encodings: Sequence[np.ndarray]) -> Callable[[np.ndarray], int]:
    """Map an action's real-vector encoding back to its index (nearest match)."""
    table = np.array([np.asarray(e, dtype=np.float64) for e in encodings])

    def decode(vec: np.ndarray) -> int:
        return int(np.argmin(np.abs(table - np.asarray(vec)[None, :]).sum(axis=1)))

    return decode


def linear_epsilon(start: float, end: float, decay_episodes: int) -> Callable[[int], float]:
    def schedule(episode: int) -> float:
        if decay_episodes <= 0:
            return end
        frac = min(1.0, episode / decay_episodes)
        return start + frac * (end - start)

    return schedule
