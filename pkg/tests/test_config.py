"""Config defaults, validation, precedence, and hashing."""

import json

import pytest

from pathmatch.config import (
    ConfigError,
    RunConfig,
    config_hash,
    load_config_file,
    resolve_config,
)


class TestDefaults:
    def test_defaults_validate(self):
        cfg = RunConfig().validate()
        assert cfg.embed_dim == 18
        assert cfg.path_len == 8
        assert cfg.hist_paths == 20
        assert cfg.k1 == 4  # ceil(8 / 2)
        assert cfg.k2 == 5
        assert cfg.temperature == 0.1
        assert cfg.contrast_weight == 0.1
        assert cfg.mask_ratio == 0.25
        assert cfg.lr == 0.001
        assert cfg.batch_size == 128
        assert cfg.head_hidden == (200, 80)

    def test_derived_k1_follows_path_len(self):
        assert RunConfig(path_len=16).k1 == 8
        assert RunConfig(path_len=5).k1 == 3
        assert RunConfig(path_len=8, path_topk=2).k1 == 2

    def test_motif_len_defaults_to_path_len(self):
        assert RunConfig(path_len=6).motif_len == 6
        assert RunConfig(path_len=6, pattern_len=3).motif_len == 3

    def test_vocab_caps_default_to_id_spaces(self):
        cfg = RunConfig(n_items=500, n_users=70)
        assert cfg.item_cap == 500 and cfg.user_cap == 70
        folded = RunConfig(n_items=500, n_users=70, item_rows=50, user_rows=7)
        assert folded.item_cap == 50 and folded.user_cap == 7


class TestValidation:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"embed_dim": 0},
            {"path_topk": 9, "path_len": 8},
            {"match_topk": 21, "hist_paths": 20},
            {"temperature": 0.0},
            {"mask_ratio": 1.0},
            {"pool_paths": "max"},
            {"pos_cap": 1},
            {"lr": 0.0},
            {"beta1": 1.0},
            {"epochs": 0},
            {"pattern_strength": 1.5},
            {"events_min": 10, "events_max": 5},
            {"n_holdouts": 0},
            {"test_frac": 1.0},
            {"relaimpr_mode": "other"},
            {"item_rows": 0},
            {"user_rows": 0},
        ],
    )
    def test_bad_values_rejected(self, overrides):
        with pytest.raises(ConfigError):
            RunConfig(**overrides).validate()


class TestResolution:
    def test_precedence_flag_over_file_over_default(self):
        cfg = resolve_config({"epochs": 5, "lr": 0.01}, {"lr": 0.5})
        assert cfg.epochs == 5  # file beats default
        assert cfg.lr == 0.5  # flag beats file
        assert cfg.batch_size == 128  # default survives

    def test_none_flags_do_not_override(self):
        cfg = resolve_config({"epochs": 5}, {"epochs": None})
        assert cfg.epochs == 5

    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config({"epoch": 5}, {})
        with pytest.raises(ConfigError):
            resolve_config({}, {"learning_rate": 0.1})

    def test_hidden_sizes_coerced_to_tuples(self):
        cfg = resolve_config({"head_hidden": [32, 16]}, {})
        assert cfg.head_hidden == (32, 16)

    def test_file_round_trip(self, tmp_path):
        cfg = RunConfig(epochs=3, path_len=6).validate()
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg.to_dict()))
        loaded = resolve_config(load_config_file(str(path)), {})
        assert loaded == RunConfig(**{**cfg.to_dict(),
                                      "head_hidden": cfg.head_hidden,
                                      "act_hidden": cfg.act_hidden,
                                      "score_hidden": cfg.score_hidden,
                                      "gate_hidden": cfg.gate_hidden,
                                      "click_hidden": cfg.click_hidden})

    def test_bad_json_file_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{broken")
        with pytest.raises(ConfigError):
            load_config_file(str(path))
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            load_config_file(str(path))


class TestHash:
    def test_stable_for_equal_configs(self):
        assert config_hash(RunConfig()) == config_hash(RunConfig())

    def test_changes_with_any_field(self):
        base = config_hash(RunConfig())
        assert config_hash(RunConfig(seed=1)) != base
        assert config_hash(RunConfig(lr=0.002)) != base

    def test_derived_fields_resolved_in_dict(self):
        d = RunConfig(path_len=8).to_dict()
        assert d["path_topk"] == 4
        assert d["pattern_len"] == 8
        assert isinstance(d["head_hidden"], list)
