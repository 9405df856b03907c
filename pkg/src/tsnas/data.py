"""CSV ingestion, chronological splits, deterministic windowing, synthetics."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng
from .tensor import ContractError

BIG_VARIABLE_THRESHOLD = 100


class DataError(ValueError):
    pass


@dataclass
class TimeSeriesDataset:
    values: np.ndarray  # [T, N] float64
    names: list
    timestamps: list | None = None
    target_mask: np.ndarray | None = None  # bool [N]; default: every column
    name: str = ""
    big_threshold: int = BIG_VARIABLE_THRESHOLD

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise DataError("dataset values must be a [T, N] matrix")
        if self.target_mask is None:
            self.target_mask = np.ones(self.values.shape[1], dtype=bool)
        self.target_mask = np.asarray(self.target_mask, dtype=bool)

    @property
    def T(self):
        return self.values.shape[0]

    @property
    def n_vars(self):
        return self.values.shape[1]

    @property
    def n_targets(self):
        return int(self.target_mask.sum())

    @property
    def size_class(self):
        return "big" if self.n_targets > self.big_threshold else "small"

    def targets(self):
        return self.values[:, self.target_mask]

    def features(self):
        if self.target_mask.all():
            return None
        return self.values[:, ~self.target_mask]

    def time_span(self):
        if self.timestamps:
            return [self.timestamps[0], self.timestamps[-1]]
        return [0, self.T - 1]


def load_csv(path, name=None, big_threshold=BIG_VARIABLE_THRESHOLD) -> TimeSeriesDataset:
    """Header row required; optional leading 'date' column; numeric cells.

    Rows containing NaN (empty or literal nan cells) are dropped with a
    warning that reports the count. A non-numeric cell is an error naming
    its (1-based) data row and column.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file")
        has_date = bool(header) and header[0].strip().lower() == "date"
        names = [h.strip() for h in (header[1:] if has_date else header)]
        if not names:
            raise DataError(f"{path}: no value columns")
        timestamps = [] if has_date else None
        rows = []
        dropped = 0
        for r, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            cells = row[1:] if has_date else row
            if len(cells) != len(names):
                raise DataError(f"{path}: row {r} has {len(cells)} cells, expected {len(names)}")
            parsed = np.empty(len(names), dtype=np.float64)
            for c, cell in enumerate(cells):
                text = cell.strip()
                if text == "" or text.lower() == "nan":
                    parsed[c] = np.nan
                    continue
                try:
                    parsed[c] = float(text)
                except ValueError:
                    raise DataError(
                        f"{path}: unparsable numeric cell at row {r}, column {names[c]!r}: {cell!r}"
                    )
            if np.isnan(parsed).any():
                dropped += 1
                continue
            rows.append(parsed)
            if has_date:
                timestamps.append(row[0].strip())
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} row(s) containing NaN")
    if not rows:
        raise DataError(f"{path}: no usable data rows")
    return TimeSeriesDataset(
        values=np.stack(rows),
        names=names,
        timestamps=timestamps,
        name=name or str(path),
        big_threshold=big_threshold,
    )


def save_csv(path, dataset: TimeSeriesDataset):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = (["date"] if dataset.timestamps else []) + list(dataset.names)
        writer.writerow(header)
        for i, row in enumerate(dataset.values):
            cells = [f"{v:.17g}" for v in row]
            if dataset.timestamps:
                cells = [dataset.timestamps[i]] + cells
            writer.writerow(cells)


def split_search_data(T, L=None, H=None):
    """Equal-size chronological halves; validation at the tail."""
    if L is not None and H is not None and T < 2 * (L + H):
        raise DataError(f"series length {T} too short for search with L={L}, H={H}")
    half = T // 2
    return (0, half), (half, T)


def chrono_split(dataset, purpose, L=None, H=None, ratios=(0.7, 0.1, 0.2)):
    """'search' -> two equal halves; 'final' -> train/val/test by ratios."""
    T = dataset.T
    if purpose == "search":
        return split_search_data(T, L, H)
    if purpose != "final":
        raise ContractError(f"unknown split purpose {purpose!r}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"split ratios must sum to 1, got {ratios}")
    a = int(T * ratios[0])
    b = int(T * (ratios[0] + ratios[1]))
    parts = ((0, a), (a, b), (b, T))
    if L is not None and H is not None:
        for lo, hi in parts:
            if hi - lo < L + H:
                raise DataError(f"split range [{lo},{hi}) shorter than L+H={L + H}")
    return parts


@dataclass
class WindowBatch:
    past_targets: np.ndarray  # [B, L, N]
    future_targets: np.ndarray  # [B, H, N]
    past_features: np.ndarray | None = None
    future_features: np.ndarray | None = None
    starts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def batch_size(self):
        return self.past_targets.shape[0]


def window_starts(rng_range, L, H, stride=1):
    """All starts s with s + L + H <= range end; empty ranges warn only."""
    lo, hi = rng_range
    if stride < 1:
        raise ContractError("stride must be >= 1")
    last = hi - (L + H)
    if last < lo:
        warnings.warn(f"range [{lo},{hi}) too small for any window (L={L}, H={H})")
        return np.zeros(0, dtype=int)
    return np.arange(lo, last + 1, stride, dtype=int)


def gather_batch(dataset: TimeSeriesDataset, starts, L, H) -> WindowBatch:
    targets = dataset.targets()
    feats = dataset.features()
    past = np.stack([targets[s : s + L] for s in starts])
    future = np.stack([targets[s + L : s + L + H] for s in starts])
    pf = np.stack([feats[s : s + L] for s in starts]) if feats is not None else None
    return WindowBatch(
        past_targets=past,
        future_targets=future,
        past_features=pf,
        future_features=None,
        starts=np.asarray(starts),
    )


def iter_batches(dataset, rng_range, L, H, batch_size, stride=1, shuffle=False, rng: Rng = None):
    """Deterministic window batches; shuffling requires the named rng."""
    starts = window_starts(rng_range, L, H, stride)
    if shuffle:
        if rng is None:
            raise ContractError("shuffling requires an explicit rng")
        starts = starts[rng.permutation(len(starts))]
    for i in range(0, len(starts), batch_size):
        chunk = starts[i : i + batch_size]
        if len(chunk) == 0:
            continue
        yield gather_batch(dataset, chunk, L, H)


@dataclass
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, values):
        mean = values.mean(axis=0)
        std = values.std(axis=0)
        std = np.where(std < 1e-8, 1.0, std)
        return cls(mean=mean, std=std)

    def transform(self, values):
        return (values - self.mean) / self.std

    def inverse(self, values):
        return values * self.std + self.mean


def standardize(dataset: TimeSeriesDataset, train_range) -> tuple[TimeSeriesDataset, Scaler]:
    """Z-score using statistics from the training range only."""
    lo, hi = train_range
    scaler = Scaler.fit(dataset.values[lo:hi])
    out = TimeSeriesDataset(
        values=scaler.transform(dataset.values),
        names=list(dataset.names),
        timestamps=list(dataset.timestamps) if dataset.timestamps else None,
        target_mask=dataset.target_mask.copy(),
        name=dataset.name,
        big_threshold=dataset.big_threshold,
    )
    return out, scaler


def make_synthetic(kind, T, N, noise=0.0, seed=0, period=24) -> TimeSeriesDataset:
    """Deterministic test fixtures: sine mixtures, linear ramps, regime switches."""
    if T < 1 or N < 1:
        raise ContractError("make_synthetic: T and N must be >= 1")
    rng = Rng(seed, f"synthetic/{kind}")
    t = np.arange(T, dtype=np.float64)
    cols = []
    if kind == "sine":
        for j in range(N):
            p = period * (1.0 + 0.5 * j)
            phase = rng.uniform((), 0, 2 * np.pi)
            amp = 1.0 + 0.25 * j
            col = amp * np.sin(2 * np.pi * t / p + float(phase))
            col += 0.4 * np.sin(2 * np.pi * t / (p * 3.7) + float(phase) * 0.5)
            cols.append(col)
    elif kind == "trend":
        for j in range(N):
            slope = 1.0 if N == 1 else 1.0 + j
            cols.append(slope * t)
    elif kind == "piecewise":
        n_regimes = 4
        for j in range(N):
            levels = rng.normal((n_regimes,), std=2.0, dtype=np.float64)
            col = np.repeat(levels, int(np.ceil(T / n_regimes)))[:T]
            cols.append(col.astype(np.float64))
    else:
        raise ContractError(f"unknown synthetic kind {kind!r}")
    values = np.stack(cols, axis=1)
    if noise > 0:
        values = values + rng.normal(values.shape, std=noise, dtype=np.float64)
    return TimeSeriesDataset(
        values=values, names=[f"v{j}" for j in range(N)], name=f"synthetic-{kind}"
    )


def make_trend_seasonal(T, N, seed=0, noise=0.0):
    """Noiseless-by-default trend + seasonal mixture (linearly predictable)."""
    rng = Rng(seed, "synthetic/trend_seasonal")
    t = np.arange(T, dtype=np.float64)
    cols = []
    for j in range(N):
        p = 24.0 * (1.0 + 0.5 * j)
        col = 0.002 * (1 + 0.3 * j) * t + np.sin(2 * np.pi * t / p)
        col += 0.5 * np.cos(2 * np.pi * t / (p * 2.5))
        cols.append(col)
    values = np.stack(cols, axis=1)
    if noise > 0:
        values = values + rng.normal(values.shape, std=noise, dtype=np.float64)
    return TimeSeriesDataset(values=values, names=[f"v{j}" for j in range(N)], name="trend-seasonal")


def load_registry(path):
    with open(path) as fh:
        reg = json.load(fh)
    if not isinstance(reg, dict):
        raise DataError(f"{path}: registry must be a JSON object")
    return reg


def resolve_dataset(ref, registry=None):
    """ref is a registry key (when a registry is given) or a CSV path."""
    if registry and ref in registry:
        entry = registry[ref]
        ds = load_csv(entry["path"], name=ref)
        if "targets" in entry:
            mask = np.array([n in set(entry["targets"]) for n in ds.names])
            if not mask.any():
                raise DataError(f"registry entry {ref}: no matching target columns")
            ds.target_mask = mask
        if "big_threshold" in entry:
            ds.big_threshold = int(entry["big_threshold"])
        return ds, entry
    return load_csv(ref), {}
