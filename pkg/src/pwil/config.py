"""Run configuration and its JSON file format."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .envs import EnvSpec, gridworld
from .metric import MetricKind
from .rewarder import Normalizer


class Variant(enum.Flag):
    FULL = 0
    STATE = enum.auto()
    SUPPORT = enum.auto()
    NOFILL = enum.auto()
    L2 = enum.auto()

    @classmethod
    def parse(cls, text: str) -> "Variant":
        """Parse ``"full"``, ``"support"`` or ``"state+nofill"`` style names."""
        out = cls.FULL
        for part in text.replace(",", "+").split("+"):
            part = part.strip().lower()
            if not part or part == "full":
                continue
            try:
                out |= cls[part.upper()]
            except KeyError:
                raise ValueError(f"unknown variant {part!r}") from None
        return out

    def label(self) -> str:
        if self is Variant.FULL:
            return "full"
        return "+".join(m.name.lower() for m in Variant if m.value and m in self)


@dataclass(frozen=True)
class RunConfig:
    """Everything one imitation run needs besides the demonstrations."""

    alpha: float = 5.0
    beta: float = 5.0
    metric: MetricKind = MetricKind.STANDARDIZED
    subsample_rate: int = 1
    prefill_count: int = 1000
    reward_normalizer: Normalizer = Normalizer.DIM_SCALED
    variant: Variant = Variant.FULL
    seed: int = 0
    n_demos: int = 1

    n_episodes: int = 2000
    eval_interval: int = 100
    eval_episodes: int = 10
    eval_on_full_demos: bool = False

    gamma: float = 0.99
    learning_rate: float = 0.5
    q_init: float = 20.0
    batch_size: int = 16
    update_every: int = 1
    buffer_capacity: int = 100_000
    bins: int = 16
    time_feature: bool = True
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5

    env: EnvSpec = field(default_factory=gridworld)

    def __post_init__(self):
        object.__setattr__(self, "metric", MetricKind(self.metric))
        object.__setattr__(self, "reward_normalizer", Normalizer(self.reward_normalizer))
        if isinstance(self.variant, str):
            object.__setattr__(self, "variant", Variant.parse(self.variant))
        if isinstance(self.env, dict):
            object.__setattr__(self, "env", EnvSpec.from_dict(self.env))
        if not self.alpha > 0 or not self.beta > 0:
            raise ValueError("alpha and beta must be positive")
        if self.subsample_rate < 1:
            raise ValueError("subsample_rate must be >= 1")
        if self.prefill_count < 0:
            raise ValueError("prefill_count must be >= 0")
        if self.n_episodes < 0:
            raise ValueError("n_episodes must be >= 0")
        if self.eval_interval < 1 or self.eval_episodes < 1:
            raise ValueError("eval_interval and eval_episodes must be positive")
        if self.batch_size < 1 or self.update_every < 1:
            raise ValueError("batch_size and update_every must be positive")
        if Variant.STATE in self.variant and Variant.L2 in self.variant:
            raise ValueError("state and l2 variants both choose the metric; pick one")

    @property
    def metric_kind(self) -> MetricKind:
        if Variant.STATE in self.variant:
            return MetricKind.STATE_STANDARDIZED
        if Variant.L2 in self.variant:
            return MetricKind.L2
        return self.metric

    @property
    def effective_prefill(self) -> int:
        # Without expert actions there is nothing to prefill with.
        if Variant.NOFILL in self.variant or Variant.STATE in self.variant:
            return 0
        return self.prefill_count

    @property
    def support(self) -> bool:
        return Variant.SUPPORT in self.variant

    def with_(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["metric"] = self.metric.value
        d["reward_normalizer"] = self.reward_normalizer.value
        d["variant"] = self.variant.label()
        d["env"] = self.env.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def load_config(path: Optional[str | Path]) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return RunConfig.from_dict(json.load(fh))


def save_config(config: RunConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
