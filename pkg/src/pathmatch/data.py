"""Training data: a seeded synthetic generator with planted path-to-click
patterns, an event-log ingester, and JSONL serialization.

The generator plants its signal in (behavior-type, category) motifs: each
pattern is a fixed motif of length pattern_len whose occurrence makes the
next click land in a consequent item cluster with probability
pattern_strength, and in a uniformly drawn non-consequent cluster
otherwise.  Negatives are always non-consequent draws, so at strength 0
the label carries no information about the history.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from .config import RunConfig
from .paths import BehaviorEvent, BehaviorSequence, BehaviorType, time_bucket


class DataError(ValueError):
    """Malformed or infeasible data inputs."""


class IngestError(DataError):
    """Event-log ingestion failed."""


@dataclass(frozen=True)
class RawEvent:
    """One interaction as stored on disk, before sequence encoding."""

    item: int
    cat: int
    btype: BehaviorType
    ts: int


@dataclass(frozen=True)
class EventLogRecord:
    user: int
    item: int
    cat: int
    btype: BehaviorType
    ts: int


@dataclass(frozen=True)
class TrainingExample:
    """One labeled prediction instance with its behavior history."""

    user: int
    cand_item: int
    cand_cat: int
    label: int
    seq: BehaviorSequence
    raw_events: tuple[RawEvent, ...]


_TYPE_TO_STR = {
    BehaviorType.CLICK: "click",
    BehaviorType.IMPRESSION: "impression",
    BehaviorType.ORDER: "order",
}
_STR_TO_TYPE = {v: k for k, v in _TYPE_TO_STR.items()}

DEFAULT_TYPE_MAP: Mapping[str, BehaviorType] = {
    "pv": BehaviorType.CLICK,
    "buy": BehaviorType.ORDER,
    "cart": BehaviorType.IMPRESSION,
    "fav": BehaviorType.IMPRESSION,
}


def make_sequence(raw_events: Iterable[RawEvent], t_max: int) -> BehaviorSequence:
    """Order by timestamp, keep the t_max most recent, bucket times.

    The prediction timestamp is taken as one second past the last event,
    so reloading an example from disk rebuilds identical buckets.
    """
    ordered = sorted(raw_events, key=lambda r: r.ts)
    ordered = ordered[-t_max:]
    if not ordered:
        return BehaviorSequence(events=())
    now = ordered[-1].ts + 1
    events = tuple(
        BehaviorEvent(
            item_id=r.item,
            category_id=r.cat,
            behavior_type=r.btype,
            time_bucket=time_bucket(now - r.ts),
            position=i + 1,
        )
        for i, r in enumerate(ordered)
    )
    return BehaviorSequence(events=events)


def make_example(
    user: int,
    cand_item: int,
    cand_cat: int,
    label: int,
    raw_events: Iterable[RawEvent],
    t_max: int,
) -> TrainingExample:
    if label not in (0, 1):
        raise DataError(f"label must be 0 or 1, got {label}")
    if cand_item < 1 or cand_cat < 1:
        raise DataError("candidate ids must be >= 1")
    raw = tuple(sorted(raw_events, key=lambda r: r.ts))
    return TrainingExample(
        user=user,
        cand_item=cand_item,
        cand_cat=cand_cat,
        label=label,
        seq=make_sequence(raw, t_max),
        raw_events=raw,
    )


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------


def example_to_json(ex: TrainingExample) -> str:
    obj = {
        "user": ex.user,
        "candidate": {"item": ex.cand_item, "cat": ex.cand_cat},
        "label": ex.label,
        "events": [
            {"item": r.item, "cat": r.cat, "type": _TYPE_TO_STR[r.btype], "ts": r.ts}
            for r in ex.raw_events
        ],
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def example_from_json(line: str, t_max: int) -> TrainingExample:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise DataError(f"bad example line: {e}") from e
    try:
        raw = tuple(
            RawEvent(
                item=int(ev["item"]),
                cat=int(ev["cat"]),
                btype=_STR_TO_TYPE[ev["type"]],
                ts=int(ev["ts"]),
            )
            for ev in obj["events"]
        )
        return make_example(
            user=int(obj["user"]),
            cand_item=int(obj["candidate"]["item"]),
            cand_cat=int(obj["candidate"]["cat"]),
            label=int(obj["label"]),
            raw_events=raw,
            t_max=t_max,
        )
    except (KeyError, TypeError) as e:
        raise DataError(f"bad example line: {e}") from e


def write_examples(path: str, examples: Iterable[TrainingExample]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(example_to_json(ex))
            fh.write("\n")


def read_examples(path: str, t_max: int) -> list[TrainingExample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(example_from_json(line, t_max))
    return out


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    n_users: int = 1000
    n_items: int = 2000
    n_categories: int = 100
    n_patterns: int = 20
    pattern_len: int = 8
    pattern_strength: float = 0.9
    events_min: int = 60
    events_max: int = 120
    noise_rate: float = 0.3
    patterns_per_user: int = 4
    n_holdouts: int = 4
    t_max: int = 200
    seed: int = 0

    @classmethod
    def from_run_config(cls, cfg: RunConfig) -> "SynthConfig":
        return cls(
            n_users=cfg.n_users,
            n_items=cfg.n_items,
            n_categories=cfg.n_categories,
            n_patterns=cfg.n_patterns,
            pattern_len=cfg.motif_len,
            pattern_strength=cfg.pattern_strength,
            events_min=cfg.events_min,
            events_max=cfg.events_max,
            noise_rate=cfg.noise_rate,
            patterns_per_user=cfg.patterns_per_user,
            n_holdouts=cfg.n_holdouts,
            t_max=cfg.t_max,
            seed=cfg.seed,
        )

    def validate(self) -> "SynthConfig":
        checks = [
            (self.n_users >= 1, "n_users must be >= 1"),
            (self.n_patterns >= 2, "need >= 2 patterns so non-consequent items exist"),
            (self.n_categories >= self.n_patterns, "need >= 1 category per pattern cluster"),
            (self.n_items >= self.n_categories, "need >= 1 item per category"),
            (self.pattern_len >= 1, "pattern_len must be >= 1"),
            (0 <= self.pattern_strength <= 1, "pattern_strength must lie in [0, 1]"),
            (1 <= self.events_min <= self.events_max, "bad events range"),
            (0 <= self.noise_rate < 1, "noise_rate must lie in [0, 1)"),
            (self.patterns_per_user >= 1, "patterns_per_user must be >= 1"),
            (self.n_holdouts >= 1, "n_holdouts must be >= 1"),
            (self.t_max >= 1, "t_max must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise DataError(msg)
        return self


@dataclass(frozen=True)
class PatternSet:
    """The planted rules: per pattern, a motif and its consequent cluster."""

    types: np.ndarray  # (n_patterns, pattern_len) BehaviorType values
    cats: np.ndarray  # (n_patterns, pattern_len) category ids
    consequent: np.ndarray  # (n_patterns,) cluster ids


def item_category(cfg: SynthConfig, item: int) -> int:
    return (item - 1) % cfg.n_categories + 1


def category_cluster(cfg: SynthConfig, cat: int) -> int:
    return (cat - 1) % cfg.n_patterns


def item_cluster(cfg: SynthConfig, item: int) -> int:
    return category_cluster(cfg, item_category(cfg, item))


def _cluster_categories(cfg: SynthConfig, cluster: int) -> np.ndarray:
    cats = np.arange(1, cfg.n_categories + 1)
    return cats[(cats - 1) % cfg.n_patterns == cluster]


def planted_patterns(cfg: SynthConfig) -> PatternSet:
    """The seeded rules; recomputable independently of the user stream.

    Motif behaviors are non-click types.  Clicks inside a motif would open
    extra windows that straddle play boundaries and pull the final,
    label-determining motif into the encoded history; keeping motifs
    click-free means each completed play yields exactly one window (its
    consequent click's) and that window is the pure motif.
    """
    cfg.validate()
    rng = np.random.default_rng([cfg.seed, 0])
    motif_types = np.array([BehaviorType.IMPRESSION, BehaviorType.ORDER], dtype=np.int64)
    types = rng.choice(motif_types, size=(cfg.n_patterns, cfg.pattern_len))
    cats = np.zeros((cfg.n_patterns, cfg.pattern_len), dtype=np.int64)
    for k in range(cfg.n_patterns):
        cats[k] = rng.choice(_cluster_categories(cfg, k), size=cfg.pattern_len)
    consequent = rng.permutation(cfg.n_patterns)
    return PatternSet(types=types, cats=cats, consequent=consequent)


def _sample_item_of_cat(cfg: SynthConfig, cat: int, rng: np.random.Generator) -> int:
    # Items of category c are c, c + n_categories, c + 2*n_categories, ...
    count = (cfg.n_items - cat) // cfg.n_categories + 1
    return cat + int(rng.integers(count)) * cfg.n_categories


def _sample_item_of_cluster(cfg: SynthConfig, cluster: int, rng: np.random.Generator) -> int:
    # Categories of cluster k are k+1, k+1 + n_patterns, ...
    count = (cfg.n_categories - (cluster + 1)) // cfg.n_patterns + 1
    cat = cluster + 1 + int(rng.integers(count)) * cfg.n_patterns
    return _sample_item_of_cat(cfg, cat, rng)


def _sample_nonconsequent(
    cfg: SynthConfig, consequent_cluster: int, rng: np.random.Generator
) -> int:
    other = rng.integers(cfg.n_patterns - 1)
    cluster = int(other if other < consequent_cluster else other + 1)
    return _sample_item_of_cluster(cfg, cluster, rng)


def _sample_distractor(
    cfg: SynthConfig,
    patterns: PatternSet,
    personal: np.ndarray,
    k: int,
    rng: np.random.Generator,
) -> int:
    """An item from the consequent cluster of one of the user's other
    patterns: a hard negative that only the current path can rule out.
    When labels carry no signal (pattern_strength 0) positives are drawn
    from this same distribution, making label and history independent."""
    others = [int(patterns.consequent[p]) for p in personal if p != k]
    if not others:
        return _sample_nonconsequent(cfg, int(patterns.consequent[k]), rng)
    cluster = others[int(rng.integers(len(others)))]
    return _sample_item_of_cluster(cfg, cluster, rng)


def generate_synthetic(cfg: SynthConfig) -> list[TrainingExample]:
    """Labeled examples holding out each of a user's last n_holdouts clicks.

    Per held-out click: the events strictly before it form the history, the
    click's item is the positive candidate, and a distractor drawn from the
    user's other consequent clusters is the negative, so a user contributes
    up to 2 * n_holdouts examples.  The earliest click never becomes a
    holdout, keeping at least one complete play in every history.
    """
    cfg.validate()
    patterns = planted_patterns(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    examples: list[TrainingExample] = []
    # All of a user's events share one timestamp: event order alone defines
    # the stream (sorts are stable), and the time feature stays flat instead
    # of branding each play with its lookback depth, which would make plays
    # of the same pattern look different to the path gates for reasons that
    # carry no label information.
    ts = 0

    for user in range(1, cfg.n_users + 1):
        personal = rng.choice(
            cfg.n_patterns, size=min(cfg.patterns_per_user, cfg.n_patterns), replace=False
        )
        target = int(rng.integers(cfg.events_min, cfg.events_max + 1))
        events: list[RawEvent] = []
        plays: list[tuple[int, int, int]] = []  # (click index, pattern, clicked item)

        def play_motif(k: int) -> None:
            for j in range(cfg.pattern_len):
                cat = int(patterns.cats[k, j])
                events.append(
                    RawEvent(
                        item=_sample_item_of_cat(cfg, cat, rng),
                        cat=cat,
                        btype=BehaviorType(int(patterns.types[k, j])),
                        ts=ts,
                    )
                )

        def next_click_item(k: int) -> int:
            if rng.random() < cfg.pattern_strength:
                return _sample_item_of_cluster(cfg, int(patterns.consequent[k]), rng)
            return _sample_distractor(cfg, patterns, personal, k, rng)

        while len(events) < target:
            k = int(personal[rng.integers(len(personal))])
            play_motif(k)
            item = next_click_item(k)
            plays.append((len(events), k, item))
            events.append(
                RawEvent(item=item, cat=item_category(cfg, item), btype=BehaviorType.CLICK, ts=ts)
            )
            while rng.random() < cfg.noise_rate:
                noise_item = int(rng.integers(1, cfg.n_items + 1))
                noise_type = BehaviorType.IMPRESSION if rng.random() < 0.5 else BehaviorType.ORDER
                events.append(
                    RawEvent(
                        item=noise_item,
                        cat=item_category(cfg, noise_item),
                        btype=noise_type,
                        ts=ts,
                    )
                )

        n_hold = min(cfg.n_holdouts, len(plays) - 1)
        for click_idx, k, pos_item in plays[len(plays) - n_hold :]:
            history = tuple(events[:click_idx])
            neg_item = _sample_distractor(cfg, patterns, personal, k, rng)
            examples.append(
                make_example(user, pos_item, item_category(cfg, pos_item), 1, history, cfg.t_max)
            )
            examples.append(
                make_example(user, neg_item, item_category(cfg, neg_item), 0, history, cfg.t_max)
            )
    return examples


def split_by_user(
    examples: list[TrainingExample], test_frac: float, seed: int
) -> tuple[list[TrainingExample], list[TrainingExample]]:
    """Deterministic user-level split; all of a user's examples stay together."""
    if not 0 <= test_frac < 1:
        raise DataError("test_frac must lie in [0, 1)")
    users = sorted({ex.user for ex in examples})
    rng = np.random.default_rng([seed, 2])
    shuffled = rng.permutation(users)
    n_test = int(math.floor(len(users) * test_frac))
    test_users = set(int(u) for u in shuffled[:n_test])
    train = [ex for ex in examples if ex.user not in test_users]
    test = [ex for ex in examples if ex.user in test_users]
    return train, test


# ---------------------------------------------------------------------------
# event-log ingestion
# ---------------------------------------------------------------------------


@dataclass
class IngestResult:
    users: dict[int, tuple[EventLogRecord, ...]]
    skipped: int
    total: int


# Below this many lines the >1% malformed-rate abort is not applied, so
# small crafted files with a bad line still ingest.
_ABORT_MIN_LINES = 100


def ingest_events(
    path: str,
    mapping: Optional[Mapping[str, BehaviorType]] = None,
    t_max: int = 200,
) -> IngestResult:
    """Parse `user_id,item_id,category_id,behavior_type,timestamp` lines."""
    type_map = dict(DEFAULT_TYPE_MAP if mapping is None else mapping)
    per_user: dict[int, list[EventLogRecord]] = {}
    skipped = 0
    total = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            total += 1
            parts = line.split(",")
            if len(parts) != 5:
                skipped += 1
                continue
            try:
                user, item, cat = int(parts[0]), int(parts[1]), int(parts[2])
                ts = int(parts[4])
                btype = type_map[parts[3].strip()]
            except (ValueError, KeyError):
                skipped += 1
                continue
            if ts < 0 or item < 1 or cat < 1:
                skipped += 1
                continue
            per_user.setdefault(user, []).append(
                EventLogRecord(user=user, item=item, cat=cat, btype=btype, ts=ts)
            )
    if total >= _ABORT_MIN_LINES and skipped > total * 0.01:
        raise IngestError(
            f"{skipped} of {total} lines malformed (> 1%); aborting ingestion of {path}"
        )
    users = {
        u: tuple(sorted(recs, key=lambda r: r.ts)[-t_max:])
        for u, recs in sorted(per_user.items())
    }
    return IngestResult(users=users, skipped=skipped, total=total)


def assemble_examples(
    users: Mapping[int, tuple[EventLogRecord, ...]],
    l: int,
    t: int,
    neg_ratio: int,
    rng: np.random.Generator,
    t_max: int = 200,
) -> tuple[list[TrainingExample], int]:
    """Hold out each user's last click as the positive; sample negatives
    from items the user never touched.  Returns (examples, users skipped
    for having no clicks).  Paths of length l capped at t per user are
    derived later at encoding time; l and t are validated here.
    """
    if l < 1 or t < 1:
        raise DataError("l and t must be >= 1")
    if neg_ratio < 1:
        raise DataError("neg_ratio must be >= 1")
    item_cat: dict[int, int] = {}
    for recs in users.values():
        for r in recs:
            item_cat.setdefault(r.item, r.cat)
    all_items = sorted(item_cat)
    examples: list[TrainingExample] = []
    skipped_users = 0
    for user in sorted(users):
        recs = users[user]
        click_idx = [i for i, r in enumerate(recs) if r.btype is BehaviorType.CLICK]
        if not click_idx:
            skipped_users += 1
            continue
        last = click_idx[-1]
        cand = recs[last]
        history = tuple(
            RawEvent(item=r.item, cat=r.cat, btype=r.btype, ts=r.ts)
            for r in recs[:last]
            if r.ts < cand.ts
        )
        examples.append(make_example(user, cand.item, cand.cat, 1, history, t_max))
        seen = {r.item for r in recs}
        pool = [it for it in all_items if it not in seen]
        if not pool:
            continue
        for _ in range(neg_ratio):
            neg = pool[int(rng.integers(len(pool)))]
            examples.append(make_example(user, neg, item_cat[neg], 0, history, t_max))
    return examples, skipped_users
