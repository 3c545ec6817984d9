"""Run configuration: a single JSON document with preset inheritance,
schema-validated with unknown keys rejected.
"""

from __future__ import annotations

import copy
import hashlib
import json

from .encoder import EncoderConfig
from .errors import ConfigError
from .filtration import FILTER_PRESETS, FilterKind
from .losses import LOSS_MODES, LossConfig
from .trainer import TrainConfig

DEFAULTS = {
    "dataset": {"path": None, "format": "csv-smiles"},
    "filters": "atom",
    "pi": {"resolution": 16, "sigma": None},
    "encoder": {"layers": 3, "hidden": 64, "dropout": 0.0},
    "train": {"epochs": 20, "batch_size": 64, "learning_rate": 0.001},
    "loss": {"mode": "combined", "tau": 0.1, "lambda": 1.0},
    "split": {"fractions": [0.8, 0.1, 0.1]},
    "augment": {"kind": "node-drop", "ratio": 0.2},
    "seed": 0,
    "out_dir": None,
}

PRESETS = {
    # laptop-scale profile: acceptance experiments finish in minutes
    "desk": {
        "encoder": {"layers": 3, "hidden": 64},
        "train": {"batch_size": 64},
    },
    # configuration matching the reference large-scale setup
    "full": {
        "encoder": {"layers": 5, "hidden": 300},
        "train": {"epochs": 100, "batch_size": 256, "learning_rate": 0.001},
    },
}

_SCHEMA = {
    "preset": str,
    "dataset": {"path": str, "format": str},
    "filters": (str, list),
    "pi": {"resolution": int, "sigma": (int, float, type(None))},
    "encoder": {"layers": int, "hidden": int, "dropout": (int, float)},
    "train": {
        "epochs": int,
        "batch_size": int,
        "learning_rate": (int, float),
    },
    "loss": {"mode": str, "tau": (int, float), "lambda": (int, float)},
    "split": {"fractions": list},
    "augment": {"kind": str, "ratio": (int, float)},
    "seed": int,
    "out_dir": (str, type(None)),
}


def _validate(obj, schema, path="$"):
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object")
    for key, value in obj.items():
        if key not in schema:
            raise ConfigError(f"{path}.{key}: unknown key")
        expected = schema[key]
        if isinstance(expected, dict):
            _validate(value, expected, f"{path}.{key}")
        elif not isinstance(value, expected):
            raise ConfigError(f"{path}.{key}: wrong type {type(value).__name__}")


def _deep_merge(base, override):
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(user: dict) -> dict:
    """Validate, apply preset inheritance, and merge over defaults."""
    _validate(user, _SCHEMA)
    merged = DEFAULTS
    preset = user.get("preset")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"$.preset: unknown preset {preset!r}")
        merged = _deep_merge(merged, PRESETS[preset])
    user = {k: v for k, v in user.items() if k != "preset"}
    merged = _deep_merge(merged, user)

    if merged["loss"]["mode"] not in LOSS_MODES:
        raise ConfigError(f"$.loss.mode: unknown mode {merged['loss']['mode']!r}")
    fr = merged["split"]["fractions"]
    if len(fr) != 3 or abs(sum(fr) - 1.0) > 1e-9:
        raise ConfigError("$.split.fractions: need three fractions summing to 1")
    return merged


def load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except OSError as e:
        raise ConfigError(f"$.{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"$: invalid JSON ({e.msg})") from e
    return resolve_config(user)


def filters_from_config(cfg) -> list[FilterKind]:
    spec = cfg["filters"]
    if isinstance(spec, str):
        if spec not in FILTER_PRESETS:
            raise ConfigError(f"$.filters: unknown preset {spec!r}")
        return list(FILTER_PRESETS[spec])
    out = []
    for name in spec:
        if name == "hks":
            out.append(FilterKind("hks", 0.1))
        elif name in ("atomic_number", "degree"):
            out.append(FilterKind(name))
        else:
            raise ConfigError(f"$.filters: unknown filter {name!r}")
    return out


def encoder_from_config(cfg) -> EncoderConfig:
    e = cfg["encoder"]
    return EncoderConfig(layers=e["layers"], hidden=e["hidden"], dropout=e["dropout"])


def train_from_config(cfg) -> TrainConfig:
    t, l, a = cfg["train"], cfg["loss"], cfg["augment"]
    return TrainConfig(
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        learning_rate=t["learning_rate"],
        seed=cfg["seed"],
        loss=LossConfig(mode=l["mode"], tau=l["tau"], lam=l["lambda"]),
        aug_kind=a["kind"],
        aug_ratio=a["ratio"],
    )


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def run_manifest(command: str, cfg: dict, input_paths) -> dict:
    return {
        "command": command,
        "config": cfg,
        "seed": cfg.get("seed", 0),
        "inputs": {str(p): file_sha256(p) for p in input_paths},
    }
