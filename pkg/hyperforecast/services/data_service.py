"""Dataset pipeline: CSV ingestion, splitting, rolling windows and missingness.

Wide CSV layout: a header row of series names (optionally led by a
``timestamp``/``time``/``date`` column), one row per time step, blank cells
for missing values. Multi-channel series use column groups ``name.ch0``,
``name.ch1``, ...
"""

from __future__ import annotations

import csv
import io
import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError, DataError, ParseError, RaggedRows, TooShort
from ..models.series import SeriesTable, WindowBatch

log = logging.getLogger("hf.data")

_TIME_COLUMNS = {"timestamp", "time", "date", "datetime"}
_CHANNEL_RE = re.compile(r"^(?P<name>.+)\.ch(?P<k>\d+)$")

SPLIT_SCOPES = ("train", "val", "test")
MISSING_PATTERNS = ("none", "point", "block")
MEAN_BLOCK_LENGTH = 10


# ── ingestion ───────────────────────────────────────────────────────────────

def _read_rows(path: Path):
    try:
        text = path.read_text(encoding="utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    reader = csv.reader(io.StringIO(text))
    rows, lines = [], []
    for row in reader:
        if not row:
            continue
        rows.append(row)
        lines.append(reader.line_num)
    return rows, lines


def _group_channels(columns: list[str]):
    """Map header columns to (series names, {name: [column per channel]})."""
    names, groups = [], {}
    for col in columns:
        match = _CHANNEL_RE.match(col)
        name, k = (match["name"], int(match["k"])) if match else (col, 0)
        if name not in groups:
            names.append(name)
            groups[name] = {}
        if k in groups[name]:
            raise ParseError(f"duplicate column for series {name!r} channel {k}", row=1, column=col)
        groups[name][k] = col

    widths = {len(g) for g in groups.values()}
    if len(widths) != 1:
        raise ParseError("series have differing channel counts", row=1)
    for name, g in groups.items():
        if sorted(g) != list(range(len(g))):
            raise ParseError(f"channels of {name!r} are not numbered 0..{len(g) - 1}", row=1)
    return names, {name: [g[k] for k in sorted(g)] for name, g in groups.items()}


def load_csv(path) -> SeriesTable:
    """Read a wide-format CSV into a SeriesTable (blank cells become mask 0)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")

    rows, lines = _read_rows(path)
    if len(rows) < 2:
        raise DataError(f"{path} has no data rows")
    header = [h.strip() for h in rows[0]]
    width = len(header)
    for row, line in zip(rows[1:], lines[1:]):
        if len(row) != width:
            raise RaggedRows(f"{path}: row {line} has {len(row)} cells, header has {width}")

    frame = pd.DataFrame(rows[1:], columns=range(width), dtype=str)
    line_numbers = lines[1:]

    timestamps = None
    value_cols = list(range(width))
    if header[0].lower() in _TIME_COLUMNS:
        value_cols = value_cols[1:]
        parsed = pd.to_datetime(frame[0].str.strip(), errors="coerce")
        if parsed.isna().any():
            bad = int(np.flatnonzero(parsed.isna().to_numpy())[0])
            raise ParseError(f"unparseable timestamp {frame[0][bad]!r}", row=line_numbers[bad], column=header[0])
        steps = parsed.diff().iloc[1:]
        if (steps <= pd.Timedelta(0)).any():
            bad = int(np.flatnonzero((steps <= pd.Timedelta(0)).to_numpy())[0]) + 1
            raise ParseError("timestamps must be strictly increasing", row=line_numbers[bad], column=header[0])
        timestamps = pd.DatetimeIndex(parsed)
    if not value_cols:
        raise DataError(f"{path} has no series columns")

    numeric = {}
    for col in value_cols:
        cells = frame[col].str.strip()
        blank = cells == ""
        values = pd.to_numeric(cells.where(~blank), errors="coerce")
        bad = (values.isna() & ~blank) | ~np.isfinite(values.fillna(0.0))
        if bad.any():
            i = int(np.flatnonzero(bad.to_numpy())[0])
            raise ParseError(f"non-numeric value {frame[col][i]!r}", row=line_numbers[i], column=header[col])
        numeric[header[col]] = values.to_numpy(dtype=np.float64)

    names, groups = _group_channels([header[c] for c in value_cols])
    T, n, c = len(frame), len(names), len(groups[names[0]])
    raw = np.empty((T, n, c))
    for i, name in enumerate(names):
        for k, col in enumerate(groups[name]):
            raw[:, i, k] = numeric[col]
    mask = (~np.isnan(raw)).astype(np.float64)
    table = SeriesTable(np.nan_to_num(raw, nan=0.0), mask, names, timestamps)
    log.info("Loaded %s: %d steps, %d series, %d channel(s), %d missing", path, T, n, c, table.missing)
    return table


def write_csv(table: SeriesTable, path) -> Path:
    """Write a table in the wide layout ``load_csv`` reads (blank = missing)."""
    path = Path(path)
    data = {}
    if table.timestamps is not None:
        data["timestamp"] = table.timestamps.strftime("%Y-%m-%d %H:%M:%S")
    for i, name in enumerate(table.names):
        for k in range(table.c):
            col = name if table.c == 1 else f"{name}.ch{k}"
            data[col] = np.where(table.mask[:, i, k] > 0, table.values[:, i, k], np.nan)
    pd.DataFrame(data).to_csv(path, index=False, na_rep="")
    return path


# ── splitting and windows ───────────────────────────────────────────────────

def split_chronological(table: SeriesTable, ratio=(6, 2, 2), min_length: int = 1):
    """Contiguous train/val/test parts; floor sizes with the remainder going to train."""
    ratio = tuple(int(r) for r in ratio)
    if len(ratio) != 3 or any(r <= 0 for r in ratio):
        raise ConfigError(f"split ratio needs three positive integers, got {ratio}")
    total = sum(ratio)
    val = table.T * ratio[1] // total
    test = table.T * ratio[2] // total
    train = table.T - val - test
    sizes = (train, val, test)
    need = max(min_length, 1)
    if min(sizes) < need:
        raise TooShort(f"{table.T} steps split {':'.join(map(str, ratio))} gives parts {sizes}; each needs >= {need}")

    bounds = (0, train, train + val, table.T)
    parts = tuple(table.slice(bounds[k], bounds[k + 1], SPLIT_SCOPES[k]) for k in range(3))
    log.debug("Split %d steps into %d/%d/%d", table.T, *sizes)
    return parts


def make_windows(part: SeriesTable, tau: int, upsilon: int, stride: int = 1) -> WindowBatch:
    """All rolling windows of a part: ⌊(T − τ − υ)/stride⌋ + 1 of them."""
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    length = tau + upsilon
    if part.T < length:
        raise TooShort(f"{part.scope or 'table'} has {part.T} steps; windows need tau + upsilon = {length}")

    def windows(arr):
        view = sliding_window_view(arr, length, axis=0)[::stride]
        return np.ascontiguousarray(view.transpose(0, 1, 3, 2))

    values, mask = windows(part.values), windows(part.mask)
    starts = np.arange(0, part.T - length + 1, stride)
    return WindowBatch(values[:, :, :tau], values[:, :, tau:], mask[:, :, :tau], mask[:, :, tau:], starts)


def iter_batches(windows: WindowBatch, batch_size: int, rng: np.random.Generator | None = None):
    """Yield batches (shuffled when ``rng`` is given), skipping ones with no observed target."""
    order = rng.permutation(windows.size) if rng is not None else np.arange(windows.size)
    skipped = 0
    for lo in range(0, windows.size, batch_size):
        batch = windows.subset(order[lo:lo + batch_size])
        if batch.observed == 0:
            skipped += 1
            continue
        yield batch
    if skipped:
        log.info("Skipped %d batch(es) with no observed targets", skipped)


# ── missingness ─────────────────────────────────────────────────────────────

def _mask_blocks(mask: np.ndarray, target: int, rng: np.random.Generator, mean_run: int) -> int:
    T, n, _ = mask.shape
    remaining = target
    while remaining > 0 and mask.any():
        i = int(rng.integers(n))
        t0 = int(rng.integers(T))
        run = int(rng.geometric(1.0 / mean_run))
        segment = mask[t0:t0 + run, i, :]
        observed = np.flatnonzero(segment > 0)[:remaining]
        if observed.size == 0:
            continue
        r, ch = np.unravel_index(observed, segment.shape)
        mask[t0 + r, i, ch] = 0.0
        remaining -= observed.size
    return target - remaining


def apply_missingness(table: SeriesTable, pattern: str = "point", ratio: float = 0.0,
                      sensor_fail_prob: float = 0.0, rng: np.random.Generator | None = None,
                      mean_run: int = MEAN_BLOCK_LENGTH) -> SeriesTable:
    """Hide observed entries; only the mask changes.

    ``point`` hides exactly ⌊ratio·observed⌋ entries uniformly at random, and
    for one seed a higher ratio hides a superset of a lower one;
    ``block`` hides geometric-length runs per series until that count is met.
    Independently, every (series, step) starts a whole-series failure run with
    probability ``sensor_fail_prob``.
    """
    if pattern not in MISSING_PATTERNS:
        raise ConfigError(f"unknown missing pattern {pattern!r}")
    if not 0 <= ratio < 1:
        raise ConfigError(f"missing ratio must lie in [0, 1), got {ratio}")
    if not 0 <= sensor_fail_prob < 1:
        raise ConfigError(f"sensor failure probability must lie in [0, 1), got {sensor_fail_prob}")
    rng = rng if rng is not None else np.random.default_rng(0)

    mask = table.mask.copy()
    target = int(np.floor(ratio * mask.sum())) if pattern != "none" else 0
    if target and pattern == "point":
        observed = np.flatnonzero(mask > 0)
        chosen = observed[rng.permutation(observed.size)[:target]]
        mask.flat[chosen] = 0.0
    elif target and pattern == "block":
        _mask_blocks(mask, target, rng, mean_run)

    failures = 0
    if sensor_fail_prob > 0:
        starts = np.argwhere(rng.random((table.T, table.n)) < sensor_fail_prob)
        for t0, i in starts:
            run = int(rng.geometric(1.0 / mean_run))
            mask[t0:t0 + run, i, :] = 0.0
        failures = len(starts)

    hidden = int(table.mask.sum() - mask.sum())
    log.info("Missingness %s ratio=%.2f: %d entries hidden (%d sensor failures)", pattern, ratio, hidden, failures)
    return table.with_mask(mask)
