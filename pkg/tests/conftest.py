"""Shared fixtures: small configs and one cached miniature training run.

Also hosts the acceptance summary: test_acceptance.py tests call
acceptance_note() with their headline numbers, and the terminal-summary
hook prints one PASS/FAIL line per criterion at the end of the run.
"""

import os

import numpy as np
import pytest

from pathmatch.config import RunConfig
from pathmatch.data import SynthConfig, generate_synthetic, split_by_user
from pathmatch.model import encode_dataset, init_params
from pathmatch.train import train_model

_ACCEPT_NOTES: dict[str, str] = {}
_ACCEPT_OUTCOMES: list[tuple[str, str]] = []


def acceptance_note(message: str) -> None:
    """Attach a detail string to the currently running acceptance test."""
    current = os.environ.get("PYTEST_CURRENT_TEST", "")
    name = current.split("::")[-1].split(" ")[0]
    _ACCEPT_NOTES[name] = message


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    _ACCEPT_OUTCOMES.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPT_OUTCOMES:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for name, outcome in sorted(_ACCEPT_OUTCOMES):
        mark = "PASS" if outcome == "passed" else "FAIL"
        note = _ACCEPT_NOTES.get(name)
        suffix = f" -- {note}" if note else ""
        terminalreporter.write_line(f"  {mark} {name}{suffix}")


def small_config(**overrides) -> RunConfig:
    """A config small enough for per-test training but exercising every
    module: real top-k truncation at both levels, multiple patterns."""
    base = dict(
        embed_dim=6,
        path_len=4,
        hist_paths=6,
        path_topk=2,
        match_topk=3,
        n_items=60,
        n_categories=20,
        n_users=30,
        pos_cap=8,
        t_max=60,
        act_hidden=(8,),
        score_hidden=(),
        gate_hidden=(8,),
        click_hidden=(8,),
        head_hidden=(16, 8),
        contrast_cap=16,
        batch_size=16,
        epochs=1,
        n_patterns=5,
        pattern_len=4,
        events_min=25,
        events_max=40,
        patterns_per_user=2,
        n_holdouts=2,
        seed=11,
    )
    base.update(overrides)
    return RunConfig(**base).validate()


@pytest.fixture(scope="session")
def small_cfg():
    return small_config()


@pytest.fixture(scope="session")
def small_dataset(small_cfg):
    examples = generate_synthetic(SynthConfig.from_run_config(small_cfg))
    train, test = split_by_user(examples, small_cfg.test_frac, small_cfg.seed)
    return examples, train, test


@pytest.fixture(scope="session")
def small_batches(small_cfg, small_dataset):
    _, train, test = small_dataset
    return encode_dataset(train, small_cfg), encode_dataset(test, small_cfg)


@pytest.fixture(scope="session")
def trained_small(small_cfg, small_batches):
    """One short trained run shared by tests that only read the result."""
    train_batch, _ = small_batches
    params, history = train_model(small_cfg, train_batch)
    return params, history


@pytest.fixture()
def fresh_params(small_cfg):
    return init_params(small_cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(123)
