"""Behavior sequences and the click-anchored paths extracted from them.

A user's history is an ordered sequence of events; every click anchors a
path made of the l events strictly before it.  Short histories are
left-padded with a reserved Pad event (item id 0) so every path has
exactly l slots, and the per-user path list is capped at the t most
recent clicks with all-Pad dummy paths filling the tail.

Event positions are 1-based sequence coordinates assigned when the
sequence is built; the Pad event sits at position 0.  Functions that
address an event inside the sequence take plain 0-based list indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional


class BehaviorType(IntEnum):
    """Event kinds; values double as embedding rows, with Pad on row 0."""

    PAD = 0
    CLICK = 1
    IMPRESSION = 2
    ORDER = 3


PAD_ITEM_ID = 0

N_TIME_BUCKETS = 16


def time_bucket(delta: int) -> int:
    """Logarithmic bucket of a nonnegative seconds-until-prediction delta."""
    if delta < 0:
        delta = 0
    return min(N_TIME_BUCKETS - 1, int(math.log2(delta + 1)))


@dataclass(frozen=True)
class BehaviorEvent:
    item_id: int
    category_id: int
    behavior_type: BehaviorType
    time_bucket: int
    position: int

    def __post_init__(self):
        is_pad = self.behavior_type is BehaviorType.PAD
        if is_pad != (self.item_id == PAD_ITEM_ID):
            raise ValueError("Pad type and the reserved item id 0 must coincide")

    @property
    def is_pad(self) -> bool:
        return self.behavior_type is BehaviorType.PAD


PAD_EVENT = BehaviorEvent(
    item_id=PAD_ITEM_ID,
    category_id=0,
    behavior_type=BehaviorType.PAD,
    time_bucket=0,
    position=0,
)


@dataclass(frozen=True)
class BehaviorSequence:
    """Events ordered by occurrence time, positions strictly increasing."""

    events: tuple[BehaviorEvent, ...]

    def __post_init__(self):
        for prev, cur in zip(self.events, self.events[1:]):
            if cur.position <= prev.position:
                raise ValueError("event positions must be strictly increasing")

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True)
class BehaviorPath:
    """Exactly l events preceding one anchor click (left-padded).

    anchor_click is None for dummy paths and for the current path, whose
    anchor is a placeholder one step past the end of the sequence.
    """

    events: tuple[BehaviorEvent, ...]
    anchor_click: Optional[BehaviorEvent]
    anchor_position: int

    def __post_init__(self):
        if self.anchor_click is not None:
            if self.anchor_click.behavior_type is not BehaviorType.CLICK:
                raise ValueError("anchor must be a click")
        for e in self.events:
            if not e.is_pad and e.position >= self.anchor_position:
                raise ValueError("path events must precede the anchor")


@dataclass(frozen=True)
class PathSequence:
    """Exactly t paths: valid_count real ones first, then all-Pad dummies."""

    paths: tuple[BehaviorPath, ...]
    valid_count: int

    def __post_init__(self):
        if not 0 <= self.valid_count <= len(self.paths):
            raise ValueError("valid_count out of range")
        real = self.paths[: self.valid_count]
        for prev, cur in zip(real, real[1:]):
            if cur.anchor_position <= prev.anchor_position:
                raise ValueError("paths must be ordered by anchor position")


def dummy_path(l: int) -> BehaviorPath:
    return BehaviorPath(events=(PAD_EVENT,) * l, anchor_click=None, anchor_position=0)


def extract_click_sequence(seq: BehaviorSequence) -> list[tuple[int, BehaviorEvent]]:
    """All click events with their sequence positions, in order."""
    return [(e.position, e) for e in seq.events if e.behavior_type is BehaviorType.CLICK]


def extract_behavior_path(seq: BehaviorSequence, click_index: int, l: int) -> BehaviorPath:
    """The l events strictly before the click at list index click_index."""
    if l < 1:
        raise ValueError(f"path length must be >= 1, got {l}")
    anchor = seq.events[click_index]
    if anchor.behavior_type is not BehaviorType.CLICK:
        raise ValueError(f"event at index {click_index} is not a click")
    window = seq.events[max(0, click_index - l) : click_index]
    padded = (PAD_EVENT,) * (l - len(window)) + tuple(window)
    return BehaviorPath(events=padded, anchor_click=anchor, anchor_position=anchor.position)


def build_path_sequence(seq: BehaviorSequence, l: int, t: int) -> PathSequence:
    """One path per click, keeping the t most recent, dummy-padded to t."""
    if l < 1 or t < 1:
        raise ValueError("l and t must be >= 1")
    click_indices = [
        i for i, e in enumerate(seq.events) if e.behavior_type is BehaviorType.CLICK
    ]
    kept = click_indices[-t:]
    paths = [extract_behavior_path(seq, i, l) for i in kept]
    paths += [dummy_path(l)] * (t - len(paths))
    return PathSequence(paths=tuple(paths), valid_count=len(kept))


def current_path(seq: BehaviorSequence, l: int) -> BehaviorPath:
    """The last l events, anchored on a placeholder one past the end."""
    if l < 1:
        raise ValueError(f"path length must be >= 1, got {l}")
    window = seq.events[-l:] if seq.events else ()
    padded = (PAD_EVENT,) * (l - len(window)) + tuple(window)
    anchor_position = (seq.events[-1].position + 1) if seq.events else 1
    return BehaviorPath(events=padded, anchor_click=None, anchor_position=anchor_position)
