"""Config file parsing, canonical rendering, and hashing."""

import dataclasses

import pytest

from linkpred.config import (
    PipelineConfig,
    config_hash,
    config_to_text,
    parse_config,
)


def test_empty_config_gives_defaults():
    cfg = parse_config("")
    assert cfg.seed == 0
    assert cfg.directed is True
    assert cfg.test_fraction == 0.1
    assert cfg.feature_mode == "heuristic"
    assert cfg.heuristic.pagerank_damping == 0.85
    assert cfg.walk.walk_length == 80
    assert cfg.sgns.dim == 64
    assert cfg.train.batch_size == 256
    assert cfg.arch == "X"
    assert cfg.head_widths == (64, 16)


def test_values_parse_with_comments_and_blanks():
    cfg = parse_config(
        """
        # follower-graph experiment
        dataset.path = data/net.txt
        dataset.directed = 0
        split.test_fraction = 0.2
        seed = 42
        feature_mode = combined
        heuristic.katz_alpha = 0.005
        walk.length = 40
        sgns.negatives = 10
        train.val_fraction = 0
        model.head_widths = 32,8
        model.activation = elu
        """
    )
    assert cfg.dataset_path == "data/net.txt"
    assert cfg.directed is False
    assert cfg.test_fraction == 0.2
    assert cfg.seed == 42
    assert cfg.feature_mode == "combined"
    assert cfg.heuristic.katz_alpha == 0.005
    assert cfg.walk.walk_length == 40
    assert cfg.sgns.negatives_per_positive == 10
    assert cfg.train.val_fraction == 0.0
    assert cfg.head_widths == (32, 8)
    assert cfg.activation == "elu"


def test_empty_head_widths_means_no_hidden_head():
    cfg = parse_config("model.head_widths=\n")
    assert cfg.head_widths == ()
    spec = cfg.model_spec(10)
    assert [name for name, _, _ in spec.layers] == ["out"]


@pytest.mark.parametrize("line,match", [
    ("nonsense.key=1", "unknown key"),
    ("seed=1\nseed=2", "duplicate key"),
    ("just a line", "key=value"),
    ("dataset.directed=maybe", "boolean"),
    ("seed=1.5", "seed"),
    ("feature_mode=magic", "feature_mode"),
    ("split.test_fraction=1.5", "test_fraction"),
    ("model.arch=fc0(X)", "fc"),
])
def test_bad_configs_rejected(line, match):
    with pytest.raises(ValueError, match=match):
        parse_config(line)


def test_overrides_win_over_file_values():
    cfg = parse_config("seed=1\n", overrides={"seed": 7})
    assert cfg.seed == 7
    with pytest.raises(ValueError, match="unknown config key"):
        parse_config("", overrides={"bogus": 1})


def test_canonical_text_is_sorted_and_complete():
    text = config_to_text(parse_config(""))
    keys = [line.split("=")[0] for line in text.strip().splitlines()]
    assert keys == sorted(keys)
    assert "heuristic.katz_alpha" in keys
    assert "model.head_widths" in keys
    assert text.endswith("\n")


def test_hash_stable_and_sensitive():
    a = parse_config("seed=3\n")
    b = parse_config("# comment\n\nseed = 3\n")
    assert config_hash(a) == config_hash(b)
    assert len(config_hash(a)) == 64
    c = parse_config("seed=4\n")
    d = parse_config("seed=3\nheuristic.katz_alpha=0.01\n")
    assert config_hash(c) != config_hash(a)
    assert config_hash(d) != config_hash(a)


def test_stage_seeds_distinct_and_deterministic():
    cfg = parse_config("seed=9\n")
    names = ("split", "svd", "walks", "sgns", "train")
    seeds = [cfg.stage_seed(s) for s in names]
    assert len(set(seeds)) == len(seeds)
    assert seeds == [parse_config("seed=9\n").stage_seed(s) for s in names]
    other = parse_config("seed=10\n")
    assert other.stage_seed("split") != cfg.stage_seed("split")


def test_stage_configs_carry_derived_seeds():
    cfg = parse_config("seed=5\n")
    assert cfg.heuristic_config().svd_seed == cfg.stage_seed("svd")
    assert cfg.walk_config().seed == cfg.stage_seed("walks")
    assert cfg.sgns_config().seed == cfg.stage_seed("sgns")
    assert cfg.train_config().seed == cfg.stage_seed("train")
    # non-seed fields pass through untouched
    assert cfg.walk_config().walk_length == cfg.walk.walk_length


def test_feature_width_per_mode():
    assert parse_config("feature_mode=heuristic\n").feature_width() == 56
    assert parse_config("feature_mode=embedding\n").feature_width() == 64
    assert parse_config("feature_mode=combined\n").feature_width() == 120
    small = parse_config("feature_mode=combined\nheuristic.svd_rank=2\nsgns.dim=16\n")
    assert small.feature_width() == (32 + 4 * 2) + 16


def test_model_spec_wraps_single_feature_block():
    cfg = parse_config("model.arch=fc2(X)\nmodel.tower_width=32\n")
    spec = cfg.model_spec(56)
    assert spec.inputs == {"X": 56}
    dims = [(fi, fo) for _, fi, fo in spec.layers]
    assert dims == [(56, 32), (32, 32), (32, 64), (64, 16), (16, 1)]


def test_config_is_frozen():
    cfg = parse_config("")
    with pytest.raises(dataclasses.FrozenInstanceError):
        cfg.seed = 3
