"""End-to-end subcommand flows through the in-process entry point."""

import json

import pytest
from conftest import small_config

from pathmatch.cli import (
    EXIT_CONFIG,
    EXIT_MISSING,
    EXIT_OK,
    main,
    resolve_from_args,
)


@pytest.fixture()
def config_file(tmp_path):
    cfg = small_config()
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg.to_dict()))
    return str(path)


def run(*argv):
    return main(list(argv))


class TestSynth:
    def test_writes_split_and_meta(self, tmp_path, config_file, capsys):
        out = tmp_path / "data"
        assert run("synth", "--config", config_file, "--out", str(out)) == EXIT_OK
        assert (out / "train.jsonl").exists()
        assert (out / "test.jsonl").exists()
        meta = json.loads((out / "synth_config.json").read_text())
        assert meta["n_train"] > 0 and meta["n_test"] > 0
        assert "config_hash" in meta
        assert "seed=" in capsys.readouterr().out

    def test_double_run_byte_identical(self, tmp_path, config_file):
        a, b = tmp_path / "a", tmp_path / "b"
        run("synth", "--config", config_file, "--out", str(a))
        run("synth", "--config", config_file, "--out", str(b))
        assert (a / "train.jsonl").read_bytes() == (b / "train.jsonl").read_bytes()
        assert (a / "test.jsonl").read_bytes() == (b / "test.jsonl").read_bytes()


class TestTrainEval:
    def test_train_then_eval_round_trip(self, tmp_path, config_file, capsys):
        data = tmp_path / "data"
        run_dir = tmp_path / "run"
        assert run("synth", "--config", config_file, "--out", str(data)) == EXIT_OK
        assert (
            run("train", "--config", config_file, "--data", str(data), "--out", str(run_dir))
            == EXIT_OK
        )
        assert (run_dir / "params.bin").exists()
        report = json.loads((run_dir / "report.json").read_text())
        assert 0.0 <= report["auc"] <= 1.0
        capsys.readouterr()
        assert run("eval", "--checkpoint", str(run_dir), "--data", str(data)) == EXIT_OK
        eval_report = json.loads((run_dir / "eval_report.json").read_text())
        # Same checkpoint, same test set: evaluation reproduces training's auc.
        assert eval_report["auc"] == pytest.approx(report["auc"])

    def test_missing_data_dir(self, tmp_path, config_file):
        code = run(
            "train", "--config", config_file, "--data", str(tmp_path / "nope"), "--out",
            str(tmp_path / "run"),
        )
        assert code == EXIT_MISSING


class TestIngest:
    def test_csv_to_examples(self, tmp_path, config_file):
        csv = tmp_path / "events.csv"
        lines = []
        for user in range(1, 7):
            for i in range(12):
                kind = "pv" if i % 3 == 0 else ("buy" if i % 3 == 1 else "cart")
                item = user * 12 + i  # disjoint per user so negatives exist
                lines.append(f"{user},{item},{1 + i % 5},{kind},{i * 10}")
        csv.write_text("\n".join(lines) + "\n")
        out = tmp_path / "ingested"
        assert run("ingest", "--config", config_file, "--csv", str(csv), "--out", str(out)) == EXIT_OK
        summary = json.loads((out / "ingest_summary.json").read_text())
        assert summary["users"] == 6
        assert summary["lines_skipped"] == 0
        assert summary["n_train"] + summary["n_test"] > 0

    def test_missing_csv(self, tmp_path, config_file):
        code = run(
            "ingest", "--config", config_file, "--csv", str(tmp_path / "no.csv"), "--out",
            str(tmp_path / "out"),
        )
        assert code == EXIT_MISSING


class TestAblate:
    def test_runs_all_four_variants(self, tmp_path, capsys):
        cfg = small_config(n_users=16, events_min=20, events_max=30, n_holdouts=1)
        config_file = tmp_path / "c.json"
        config_file.write_text(json.dumps(cfg.to_dict()))
        out = tmp_path / "ablate"
        assert run("ablate", "--config", str(config_file), "--out", str(out)) == EXIT_OK
        for name in ("full", "no_enhance", "no_match", "no_contrast"):
            assert (out / f"report_{name}.json").exists()
        csv_rows = (out / "summary.csv").read_text().splitlines()
        assert len(csv_rows) == 5  # header + 4 variants
        assert "largest drop" in capsys.readouterr().out


class TestConfigHandling:
    def test_precedence_and_env_seed(self, tmp_path, monkeypatch):
        config_file = tmp_path / "c.json"
        config_file.write_text(json.dumps({"epochs": 3, "seed": 5}))
        import argparse

        args = argparse.Namespace(
            config=str(config_file), overrides=["epochs=7"], seed=None
        )
        assert resolve_from_args(args).epochs == 7
        args = argparse.Namespace(config=str(config_file), overrides=[], seed=9)
        assert resolve_from_args(args).seed == 9
        monkeypatch.setenv("PATHMATCH_SEED", "42")
        assert resolve_from_args(args).seed == 42
        monkeypatch.setenv("PATHMATCH_SEED", "pi")
        from pathmatch.config import ConfigError

        with pytest.raises(ConfigError):
            resolve_from_args(args)

    def test_set_parses_json_values(self, tmp_path):
        import argparse

        args = argparse.Namespace(
            config=None,
            overrides=["head_hidden=[8,4]", "pool_paths=sum", "lr=0.5"],
            seed=None,
        )
        cfg = resolve_from_args(args)
        assert cfg.head_hidden == (8, 4)
        assert cfg.pool_paths == "sum"
        assert cfg.lr == 0.5

    def test_bad_config_exits_3(self, tmp_path):
        out = tmp_path / "d"
        assert run("synth", "--set", "lr=0", "--out", str(out)) == EXIT_CONFIG
        assert run("synth", "--set", "bogus_key=1", "--out", str(out)) == EXIT_CONFIG

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run("synth", "--bogus")
        assert exc.value.code == 2

    def test_help_exits_0(self):
        with pytest.raises(SystemExit) as exc:
            run("train", "--help")
        assert exc.value.code == 0
