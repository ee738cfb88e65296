"""Per-dataset hyperparameter presets and the sensitivity-sweep grid."""

from ..errors import ConfigError

_DEFAULT_D = 18

DATASET_PRESETS = {
    "PEMSD3": {"batch_size": 18, "d": 18, "m": 5},
    "PEMSD4": {"batch_size": 32, "m": 5},
    "PEMSD7": {"batch_size": 6, "m": 6},
    "PEMSD8": {"batch_size": 48, "m": 8},
    "PEMSD7M": {"batch_size": 48, "m": 6},
    "METR-LA": {"batch_size": 48, "m": 5, "split": (7, 1, 2)},
    "PEMS-BAY": {"batch_size": 12, "m": 5, "split": (7, 1, 2)},
    "SWAT": {"batch_size": 256, "m": 5, "normalizer": "minmax"},
    "WADI": {"batch_size": 64, "d": 12, "m": 5, "normalizer": "minmax"},
    "ELECTRICITY": {"batch_size": 32, "m": 2},
    "SOLAR": {"batch_size": 32, "m": 6},
    "EXCHANGE": {"batch_size": 32, "m": 6},
    "TRAFFIC": {"batch_size": 8, "m": 5},
}

_PRESET_ALIASES = {
    "pemsd7(m)": "PEMSD7M",
    "metrla": "METR-LA",
    "pemsbay": "PEMS-BAY",
    "solar-energy": "SOLAR",
    "exchange-rate": "EXCHANGE",
}

# documented search ranges for the sweep command
SENSITIVITY_GRID = {
    "model.d": [2, 6, 10, 18, 24],
    "model.m": [2, 5, 8],
    "train.batch_size": [2, 6, 10, 18, 24, 32, 64],
    "train.lr": [1e-1, 1e-2, 1e-3, 1e-4],
}


def normalize_preset(name):
    """Canonical preset name for ``name`` (case, dashes and aliases folded)."""
    if not name:
        return name
    key = name.strip().lower()
    if key in _PRESET_ALIASES:
        return _PRESET_ALIASES[key]
    for preset in DATASET_PRESETS:
        if key == preset.lower() or key.replace("-", "").replace("_", "") == preset.lower().replace("-", ""):
            return preset
    return name


def preset_settings(name):
    """Flat ``section.key`` settings for a preset."""
    canonical = normalize_preset(name)
    if canonical not in DATASET_PRESETS:
        raise ConfigError(f"unknown data preset {name!r} (known: {', '.join(DATASET_PRESETS)})")
    row = DATASET_PRESETS[canonical]
    split = row.get("split", (6, 2, 2))
    return {
        "train.batch_size": row["batch_size"],
        "model.d": row.get("d", _DEFAULT_D),
        "model.m": row["m"],
        "data.split": split,
        "data.normalizer": row.get("normalizer", "zscore"),
    }
