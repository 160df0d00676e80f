"""Run configuration: defaults, JSON loading, flag precedence, hashing."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class RunConfig:
    """Every knob for data generation, the model, and training.

    A single flat record keeps the JSON config file, the report manifest,
    and the config hash all trivially in sync.
    """

    # model dimensions
    embed_dim: int = 18
    path_len: int = 8
    hist_paths: int = 20
    path_topk: Optional[int] = None  # None -> ceil(path_len / 2)
    match_topk: int = 5
    temperature: float = 0.1
    contrast_weight: float = 0.1
    mask_ratio: float = 0.25
    contrast_cap: int = 256
    pool_paths: str = "concat"  # or "sum"

    # vocabulary sizes (row 0 reserved for padding).  item_rows / user_rows
    # shrink the embedding tables below the id space, folding ids modulo the
    # row count as a hashing trick; None keeps one row per id.
    n_items: int = 2000
    n_categories: int = 100
    n_users: int = 1000
    item_rows: Optional[int] = None
    user_rows: Optional[int] = None
    pos_cap: int = 256
    t_max: int = 200

    # MLP widths
    act_hidden: tuple[int, ...] = (36,)
    score_hidden: tuple[int, ...] = ()
    gate_hidden: tuple[int, ...] = (36,)
    click_hidden: tuple[int, ...] = (36,)
    head_hidden: tuple[int, ...] = (200, 80)
    init_std: float = 0.01

    # ablation switches
    use_enhance: bool = True
    use_match: bool = True
    use_contrast: bool = True

    # optimizer and loop
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 128
    epochs: int = 2
    seed: int = 0

    # synthetic generator
    n_patterns: int = 20
    pattern_strength: float = 0.9
    pattern_len: Optional[int] = None  # None -> path_len
    events_min: int = 60
    events_max: int = 120
    noise_rate: float = 0.3
    patterns_per_user: int = 4
    n_holdouts: int = 4
    test_frac: float = 0.2

    # ingestion / evaluation
    neg_ratio: int = 1
    baseline_auc: Optional[float] = None
    relaimpr_mode: str = "ratio"

    @property
    def k1(self) -> int:
        return self.path_topk if self.path_topk is not None else math.ceil(self.path_len / 2)

    @property
    def k2(self) -> int:
        return self.match_topk

    @property
    def motif_len(self) -> int:
        return self.pattern_len if self.pattern_len is not None else self.path_len

    @property
    def item_cap(self) -> int:
        return self.item_rows if self.item_rows is not None else self.n_items

    @property
    def user_cap(self) -> int:
        return self.user_rows if self.user_rows is not None else self.n_users

    def validate(self) -> "RunConfig":
        c = self
        checks = [
            (c.embed_dim >= 1, "embed_dim must be >= 1"),
            (c.path_len >= 1, "path_len must be >= 1"),
            (c.hist_paths >= 1, "hist_paths must be >= 1"),
            (1 <= c.k1 <= c.path_len, "path_topk must lie in [1, path_len]"),
            (1 <= c.k2 <= c.hist_paths, "match_topk must lie in [1, hist_paths]"),
            (c.temperature > 0, "temperature must be > 0"),
            (c.contrast_weight >= 0, "contrast_weight must be >= 0"),
            (0 <= c.mask_ratio < 1, "mask_ratio must lie in [0, 1)"),
            (c.contrast_cap >= 2, "contrast_cap must be >= 2"),
            (c.pool_paths in ("concat", "sum"), "pool_paths must be concat or sum"),
            (c.n_items >= 1, "n_items must be >= 1"),
            (c.n_categories >= 1, "n_categories must be >= 1"),
            (c.n_users >= 1, "n_users must be >= 1"),
            (c.item_cap >= 1, "item_rows must be >= 1"),
            (c.user_cap >= 1, "user_rows must be >= 1"),
            (c.pos_cap >= 2, "pos_cap must be >= 2"),
            (c.t_max >= 1, "t_max must be >= 1"),
            (c.init_std > 0, "init_std must be > 0"),
            (c.lr > 0, "lr must be > 0"),
            (0 < c.beta1 < 1, "beta1 must lie in (0, 1)"),
            (0 < c.beta2 < 1, "beta2 must lie in (0, 1)"),
            (c.batch_size >= 1, "batch_size must be >= 1"),
            (c.epochs >= 1, "epochs must be >= 1"),
            (c.n_patterns >= 1, "n_patterns must be >= 1"),
            (0 <= c.pattern_strength <= 1, "pattern_strength must lie in [0, 1]"),
            (c.motif_len >= 1, "pattern_len must be >= 1"),
            (1 <= c.events_min <= c.events_max, "events range must satisfy 1 <= min <= max"),
            (0 <= c.noise_rate < 1, "noise_rate must lie in [0, 1)"),
            (c.patterns_per_user >= 1, "patterns_per_user must be >= 1"),
            (c.n_holdouts >= 1, "n_holdouts must be >= 1"),
            (0 <= c.test_frac < 1, "test_frac must lie in [0, 1)"),
            (c.neg_ratio >= 1, "neg_ratio must be >= 1"),
            (c.relaimpr_mode in ("ratio", "centered"), "relaimpr_mode must be ratio or centered"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready dict with derived values resolved."""
        d = dataclasses.asdict(self)
        for key in ("act_hidden", "score_hidden", "gate_hidden", "click_hidden", "head_hidden"):
            d[key] = list(d[key])
        d["path_topk"] = self.k1
        d["pattern_len"] = self.motif_len
        return d


_FIELD_NAMES = {f.name for f in dataclasses.fields(RunConfig)}
_TUPLE_FIELDS = ("act_hidden", "score_hidden", "gate_hidden", "click_hidden", "head_hidden")


def _coerce(values: Mapping[str, Any]) -> dict[str, Any]:
    out = dict(values)
    for key in _TUPLE_FIELDS:
        if key in out and out[key] is not None:
            out[key] = tuple(int(v) for v in out[key])
    return out


def load_config_file(path: str) -> dict[str, Any]:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    unknown = set(raw) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return raw


def resolve_config(
    file_values: Optional[Mapping[str, Any]] = None,
    flag_values: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """Built-in defaults, overridden by the config file, then by flags."""
    merged: dict[str, Any] = {}
    if file_values:
        merged.update(_coerce(file_values))
    if flag_values:
        merged.update(_coerce({k: v for k, v in flag_values.items() if v is not None}))
    bad = set(merged) - _FIELD_NAMES
    if bad:
        raise ConfigError(f"unknown config keys: {sorted(bad)}")
    try:
        cfg = RunConfig(**merged)
    except TypeError as e:
        raise ConfigError(str(e)) from e
    return cfg.validate()


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
