import json

import pytest

from topomol.config import (
    encoder_from_config,
    filters_from_config,
    load_config_file,
    resolve_config,
    run_manifest,
    train_from_config,
)
from topomol.errors import ConfigError


class TestResolve:
    def test_defaults(self):
        cfg = resolve_config({})
        assert cfg["filters"] == "atom"
        assert cfg["loss"]["mode"] == "combined"
        assert cfg["pi"]["resolution"] == 16

    def test_unknown_key_rejected_with_path(self):
        with pytest.raises(ConfigError) as e:
            resolve_config({"trainer": {}})
        assert "$.trainer" in str(e.value)
        with pytest.raises(ConfigError) as e:
            resolve_config({"train": {"warmup": 5}})
        assert "$.train.warmup" in str(e.value)

    def test_wrong_type_rejected(self):
        with pytest.raises(ConfigError):
            resolve_config({"seed": "zero"})

    def test_preset_inheritance_with_override(self):
        cfg = resolve_config({"preset": "full", "train": {"epochs": 7}})
        assert cfg["encoder"]["hidden"] == 300
        assert cfg["train"]["epochs"] == 7
        assert cfg["train"]["batch_size"] == 256

    def test_desk_preset(self):
        cfg = resolve_config({"preset": "desk"})
        assert cfg["encoder"] == {"layers": 3, "hidden": 64, "dropout": 0.0}

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            resolve_config({"preset": "datacenter"})

    def test_bad_loss_mode(self):
        with pytest.raises(ConfigError):
            resolve_config({"loss": {"mode": "mystery"}})

    def test_fractions_validated(self):
        with pytest.raises(ConfigError):
            resolve_config({"split": {"fractions": [0.5, 0.5]}})


class TestFileLoading:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"seed": 5, "filters": "ahd"}))
        cfg = load_config_file(str(p))
        assert cfg["seed"] == 5
        assert [k.name for k in filters_from_config(cfg)] == ["atomic_number", "hks", "degree"]

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config_file(str(p))

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_config_file("/does/not/exist.json")


class TestDerivedConfigs:
    def test_encoder_and_train(self):
        cfg = resolve_config({"preset": "desk", "seed": 3})
        enc = encoder_from_config(cfg)
        assert (enc.layers, enc.hidden) == (3, 64)
        tr = train_from_config(cfg)
        assert tr.seed == 3 and tr.loss.mode == "combined"

    def test_filter_list_form(self):
        cfg = resolve_config({"filters": ["degree", "hks"]})
        kinds = filters_from_config(cfg)
        assert [k.name for k in kinds] == ["degree", "hks"]
        with pytest.raises(ConfigError):
            filters_from_config(resolve_config({"filters": ["charge"]}))


class TestManifest:
    def test_hashes_inputs(self, tmp_path):
        p = tmp_path / "data.csv"
        p.write_text("smiles,y\nCC,1\n")
        cfg = resolve_config({"seed": 2})
        m = run_manifest("fingerprint", cfg, [str(p)])
        assert m["seed"] == 2
        assert len(m["inputs"][str(p)]) == 64  # sha256 hex
        m2 = run_manifest("fingerprint", cfg, [str(p)])
        assert m == m2
