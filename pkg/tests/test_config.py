import json

import pytest

from pwil.config import RunConfig, Variant, load_config, save_config
from pwil.envs import loop_gridworld
from pwil.metric import MetricKind
from pwil.rewarder import Normalizer


def test_defaults():
    cfg = RunConfig()
    assert (cfg.alpha, cfg.beta, cfg.prefill_count) == (5.0, 5.0, 1000)
    assert cfg.metric_kind is MetricKind.STANDARDIZED
    assert cfg.reward_normalizer is Normalizer.DIM_SCALED
    assert not cfg.support and cfg.effective_prefill == 1000


@pytest.mark.parametrize("text,metric,prefill,support", [
    ("full", MetricKind.STANDARDIZED, 1000, False),
    ("state", MetricKind.STATE_STANDARDIZED, 0, False),
    ("support", MetricKind.STANDARDIZED, 1000, True),
    ("nofill", MetricKind.STANDARDIZED, 0, False),
    ("l2", MetricKind.L2, 1000, False),
    ("support+nofill", MetricKind.STANDARDIZED, 0, True),
])
def test_variant_semantics(text, metric, prefill, support):
    cfg = RunConfig(variant=Variant.parse(text))
    assert cfg.metric_kind is metric
    assert cfg.effective_prefill == prefill
    assert cfg.support is support


def test_variant_labels_round_trip():
    for text in ("full", "state", "support+nofill", "nofill+l2"):
        assert Variant.parse(Variant.parse(text).label()) == Variant.parse(text)
    with pytest.raises(ValueError):
        Variant.parse("bogus")


def test_json_round_trip(tmp_path):
    cfg = RunConfig(alpha=2.0, variant=Variant.parse("support"), env=loop_gridworld(), seed=7,
                    reward_normalizer=Normalizer.HORIZON_ONLY)
    path = tmp_path / "cfg.json"
    save_config(cfg, path)
    assert load_config(path) == cfg
    assert json.loads(path.read_text())["variant"] == "support"


def test_partial_file_keeps_defaults(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"beta": 1.5}')
    cfg = load_config(path)
    assert cfg.beta == 1.5 and cfg.alpha == 5.0
    assert load_config(None) == RunConfig()


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"gama": 0.5}')
    with pytest.raises(ValueError, match="gama"):
        load_config(path)


@pytest.mark.parametrize("bad", [dict(alpha=0.0), dict(subsample_rate=0), dict(prefill_count=-1),
                                 dict(n_episodes=-1), dict(eval_interval=0)])
def test_invalid_values(bad):
    with pytest.raises(ValueError):
        RunConfig(**bad)
