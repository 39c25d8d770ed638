"""Pipeline configuration: flat key=value files with dotted section prefixes.

A config file is a list of `section.key=value` lines (blank lines and
`#` comments ignored). Every key has a default, so an empty file is a
valid config; unknown keys are rejected. The canonical rendering lists
every key in sorted order with normalized value formatting, and its
sha256 digest is the config hash stamped into pipeline artifacts.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from linkpred.embeddings import SkipGramConfig, WalkConfig
from linkpred.heuristics import HeuristicConfig
from linkpred.model import TowerSpec, TrainConfig, parse_arch

FEATURE_MODES = ("heuristic", "embedding", "combined")

# Stage names mapped to fixed slots of the derived-seed vector, so adding a
# stage later cannot silently reshuffle the seeds of existing ones.
_STAGE_SLOTS = {"split": 0, "svd": 1, "walks": 2, "sgns": 3, "train": 4}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes"):
        return True
    if low in ("0", "false", "no"):
        return False
    raise ValueError(f"expected a boolean (1/0/true/false), got {text!r}")


def _parse_widths(text: str) -> tuple[int, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(tok) for tok in text.split(","))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one end-to-end run needs, resolved to concrete values."""

    dataset_path: str = ""
    directed: bool = True
    test_fraction: float = 0.1
    seed: int = 0
    feature_mode: str = "heuristic"

    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    walk: WalkConfig = field(default_factory=WalkConfig)
    sgns: SkipGramConfig = field(default_factory=SkipGramConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    arch: str = "X"
    tower_width: int = 64
    head_widths: tuple[int, ...] = (64, 16)
    activation: str = "relu"

    def __post_init__(self):
        if self.feature_mode not in FEATURE_MODES:
            raise ValueError(
                f"feature_mode must be one of {FEATURE_MODES}, got {self.feature_mode!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("split.test_fraction must be in (0, 1)")
        if self.tower_width < 1:
            raise ValueError("model.tower_width must be positive")
        parse_arch(self.arch, self.tower_width)  # reject bad expressions early

    # -- derived pieces ------------------------------------------------------

    def stage_seed(self, stage: str) -> int:
        """Per-stage seed derived from the global seed; stages never share."""
        states = np.random.SeedSequence(self.seed).generate_state(len(_STAGE_SLOTS))
        return int(states[_STAGE_SLOTS[stage]])

    def heuristic_config(self) -> HeuristicConfig:
        return replace(self.heuristic, svd_seed=self.stage_seed("svd"))

    def walk_config(self) -> WalkConfig:
        return replace(self.walk, seed=self.stage_seed("walks"))

    def sgns_config(self) -> SkipGramConfig:
        return replace(self.sgns, seed=self.stage_seed("sgns"))

    def train_config(self) -> TrainConfig:
        return replace(self.train, seed=self.stage_seed("train"))

    def feature_width(self) -> int:
        from linkpred.heuristics import HEURISTIC_DIM

        base = HEURISTIC_DIM - 24 + 4 * self.heuristic.svd_rank
        if self.feature_mode == "heuristic":
            return base
        if self.feature_mode == "embedding":
            return self.sgns.dim
        return base + self.sgns.dim

    def model_spec(self, width: int) -> TowerSpec:
        """The classifier over one flat feature block named X."""
        return TowerSpec(
            inputs={"X": width},
            root=parse_arch(self.arch, self.tower_width),
            head_widths=self.head_widths,
            activation=self.activation,
        )


# Flat key registry: config-file key -> (path into PipelineConfig, caster).
# A path of ("heuristic", "katz_alpha") means cfg.heuristic.katz_alpha.
_KEYS: dict[str, tuple[tuple[str, ...], object]] = {
    "dataset.path": (("dataset_path",), str),
    "dataset.directed": (("directed",), _parse_bool),
    "split.test_fraction": (("test_fraction",), float),
    "seed": (("seed",), int),
    "feature_mode": (("feature_mode",), str),
    "heuristic.pagerank_damping": (("heuristic", "pagerank_damping"), float),
    "heuristic.pagerank_tol": (("heuristic", "pagerank_tol"), float),
    "heuristic.katz_alpha": (("heuristic", "katz_alpha"), float),
    "heuristic.katz_beta": (("heuristic", "katz_beta"), float),
    "heuristic.katz_tol": (("heuristic", "katz_tol"), float),
    "heuristic.hits_tol": (("heuristic", "hits_tol"), float),
    "heuristic.max_iters": (("heuristic", "max_iters"), int),
    "heuristic.svd_rank": (("heuristic", "svd_rank"), int),
    "heuristic.path_max_depth": (("heuristic", "path_max_depth"), int),
    "heuristic.missing_path_sentinel": (("heuristic", "missing_path_sentinel"), float),
    "walk.walks_per_node": (("walk", "walks_per_node"), int),
    "walk.length": (("walk", "walk_length"), int),
    "walk.p": (("walk", "p"), float),
    "walk.q": (("walk", "q"), float),
    "sgns.dim": (("sgns", "dim"), int),
    "sgns.window": (("sgns", "window"), int),
    "sgns.negatives": (("sgns", "negatives_per_positive"), int),
    "sgns.initial_lr": (("sgns", "initial_lr"), float),
    "sgns.epochs": (("sgns", "epochs"), int),
    "train.learning_rate": (("train", "learning_rate"), float),
    "train.batch_size": (("train", "batch_size"), int),
    "train.epochs": (("train", "epochs"), int),
    "train.patience": (("train", "patience"), int),
    "train.val_fraction": (("train", "val_fraction"), float),
    "model.arch": (("arch",), str),
    "model.tower_width": (("tower_width",), int),
    "model.head_widths": (("head_widths",), _parse_widths),
    "model.activation": (("activation",), str),
}


def _get(cfg: PipelineConfig, path: tuple[str, ...]):
    obj = cfg
    for attr in path:
        obj = getattr(obj, attr)
    return obj


def parse_config(text: str, overrides: dict | None = None) -> PipelineConfig:
    """Parse key=value text into a PipelineConfig.

    `overrides` maps registry keys to raw string values applied on top of
    the file (used for command-line --seed style flags).
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = value
    for key, value in (overrides or {}).items():
        if key not in _KEYS:
            raise ValueError(f"unknown config key {key!r}")
        values[key] = str(value)

    top: dict[str, object] = {}
    sections: dict[str, dict[str, object]] = {
        "heuristic": {}, "walk": {}, "sgns": {}, "train": {}}
    for key, raw_value in values.items():
        path, caster = _KEYS[key]
        try:
            parsed = caster(raw_value)
        except ValueError as exc:
            raise ValueError(f"config key {key!r}: {exc}") from None
        if len(path) == 1:
            top[path[0]] = parsed
        else:
            sections[path[0]][path[1]] = parsed

    return PipelineConfig(
        heuristic=HeuristicConfig(**sections["heuristic"]),
        walk=WalkConfig(**sections["walk"]),
        sgns=SkipGramConfig(**sections["sgns"]),
        train=TrainConfig(**sections["train"]),
        **top,
    )


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    return parse_config(Path(path).read_text(), overrides)


def config_to_text(cfg: PipelineConfig) -> str:
    """Canonical rendering: every registry key, sorted, normalized values."""
    lines = []
    for key in sorted(_KEYS):
        path, _ = _KEYS[key]
        lines.append(f"{key}={_fmt(_get(cfg, path))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: PipelineConfig) -> str:
    """sha256 over the canonical text; stamps every pipeline artifact."""
    return hashlib.sha256(config_to_text(cfg).encode()).hexdigest()
