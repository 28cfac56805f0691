"""CSV ingestion, windowing, normalisation, splitting and synthetic data."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .tensor import Rng

STD_FLOOR = 1e-8


class DataError(ValueError):
    pass


@dataclass
class RawSeries:
    stations: list[str]
    timestamps: list  # ints or ISO-8601 strings, as read
    values: np.ndarray  # [E, T, F]
    feature_names: list[str]

    @property
    def E(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    @property
    def F(self) -> int:
        return self.values.shape[2]

    def slice(self, start: int, stop: int) -> "RawSeries":
        return replace(self, timestamps=self.timestamps[start:stop],
                       values=self.values[:, start:stop].copy())

    def equals(self, other: "RawSeries") -> bool:
        return (self.stations == other.stations
                and self.timestamps == other.timestamps
                and self.feature_names == other.feature_names
                and self.values.shape == other.values.shape
                and self.values.tobytes() == other.values.tobytes())


@dataclass
class NormStats:
    mean: np.ndarray  # [E, F]
    std: np.ndarray  # [E, F], already floored


@dataclass
class SamplePair:
    X: np.ndarray  # [E, T_enc, F]
    Y: np.ndarray  # [D, T_dec, F]
    start: int


@dataclass
class Dataset:
    """Stacked windows. ``X`` is ``[N, E, T_enc, F]``, ``Y`` is ``[N, D, T_dec, F]``."""

    X: np.ndarray
    Y: np.ndarray
    stats: NormStats | None = None
    starts: list[int] = field(default_factory=list)
    split: str = ""
    stride: int = 1

    def __len__(self) -> int:
        return self.X.shape[0]

    def __getitem__(self, n: int) -> SamplePair:
        return SamplePair(self.X[n], self.Y[n], self.starts[n] if self.starts else n)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        starts = [self.starts[i] for i in idx] if self.starts else []
        return replace(self, X=self.X[idx], Y=self.Y[idx], starts=starts)


# ------------------------------------------------------------------- CSV

def _parse_timestamp(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        datetime.fromisoformat(s)
    except ValueError:
        raise DataError(f"timestamp {s!r} is neither an integer nor ISO-8601") from None
    return s


def _ts_value(ts) -> float:
    if isinstance(ts, (int, np.integer)):
        return float(ts)
    return datetime.fromisoformat(ts).timestamp()


def load_csv(path) -> RawSeries:
    """Read ``station,timestamp,<feature...>`` rows sorted by station then time."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "station" or header[1] != "timestamp":
            raise DataError(f"{path}:1: header must be station,timestamp,<features...>")
        features = header[2:]
        order: list[str] = []
        per_station: dict[str, tuple[list, list]] = {}
        last = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            if any(cell.strip() == "" for cell in row):
                raise DataError(f"{path}:{lineno}: missing cell")
            st = row[0]
            ts = _parse_timestamp(row[1])
            try:
                vals = [float(c) for c in row[2:]]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value") from None
            if st != last:
                if st in per_station:
                    raise DataError(f"{path}:{lineno}: unsorted rows (station {st!r} resumes)")
                order.append(st)
                per_station[st] = ([], [])
                last = st
            tss, vs = per_station[st]
            if tss and _ts_value(ts) <= _ts_value(tss[-1]):
                raise DataError(f"{path}:{lineno}: unsorted rows (timestamp not increasing)")
            tss.append(ts)
            vs.append(vals)
    if not order:
        raise DataError(f"{path}: no data rows")
    grid = per_station[order[0]][0]
    for st in order[1:]:
        if per_station[st][0] != grid:
            raise DataError(f"{path}: ragged coverage for station {st!r}")
    if len(grid) > 2:
        steps = np.diff([_ts_value(t) for t in grid])
        if not np.all(steps == steps[0]):
            raise DataError(f"{path}: timestamps are not equally spaced")
    values = np.array([per_station[st][1] for st in order], dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite value")
    return RawSeries(order, list(grid), values, features)


def write_csv(series: RawSeries, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station", "timestamp", *series.feature_names])
        for i, st in enumerate(series.stations):
            for t, ts in enumerate(series.timestamps):
                w.writerow([st, ts, *(repr(float(v)) for v in series.values[i, t])])


# ------------------------------------------------------------- windowing

def window_count(T: int, T_enc: int, T_dec: int, stride: int) -> int:
    if T < T_enc + T_dec:
        return 0
    return (T - T_enc - T_dec) // stride + 1


def window(values, T_enc: int, T_dec: int, stride: int | None = None) -> list[SamplePair]:
    """Cut ``values`` (a RawSeries or ``[E, T, F]`` array) into encoder/decoder pairs.

    Window ``n`` starts at ``n * stride``; ``X`` covers ``[s, s+T_enc)`` and
    ``Y`` covers ``[s+T_enc, s+T_enc+T_dec)``.  ``stride`` defaults to ``T_dec``.
    """
    v = values.values if isinstance(values, RawSeries) else np.asarray(values, dtype=np.float64)
    stride = T_dec if stride is None else stride
    if stride < 1 or T_enc < 1 or T_dec < 1:
        raise DataError("T_enc, T_dec and stride must be >= 1")
    T = v.shape[1]
    if T < T_enc + T_dec:
        raise DataError(f"series too short: length {T}, need at least {T_enc + T_dec}")
    return [SamplePair(v[:, s:s + T_enc].copy(), v[:, s + T_enc:s + T_enc + T_dec].copy(), s)
            for s in range(0, T - T_enc - T_dec + 1, stride)]


def make_dataset(series: RawSeries, T_enc: int, T_dec: int, stride: int | None = None,
                 stats: NormStats | None = None, split: str = "") -> Dataset:
    """Normalise ``series`` with ``stats`` (if given) and window it."""
    if stats is not None:
        series = apply_normalize(series, stats)
    pairs = window(series, T_enc, T_dec, stride)
    return Dataset(np.stack([p.X for p in pairs]), np.stack([p.Y for p in pairs]), stats,
                   [p.start for p in pairs], split, T_dec if stride is None else stride)


# --------------------------------------------------------- normalisation

def fit_normalize(train: RawSeries | np.ndarray) -> NormStats:
    """Per-(station, feature) mean and population std over the training region."""
    v = train.values if isinstance(train, RawSeries) else np.asarray(train, dtype=np.float64)
    if v.shape[1] == 0:
        raise DataError("fit_normalize: empty training region")
    mean = v.mean(axis=1)
    std = np.maximum(v.std(axis=1), STD_FLOOR)
    return NormStats(mean, std)


def apply_normalize(x, stats: NormStats):
    """Normalise a RawSeries, an ``[E, T, F]`` array or a stack ``[N, E, T, F]``."""
    if isinstance(x, RawSeries):
        return replace(x, values=apply_normalize(x.values, stats))
    x = np.asarray(x, dtype=np.float64)
    return (x - stats.mean[:, None, :]) / stats.std[:, None, :]


def invert_normalize(x, stats: NormStats):
    if isinstance(x, RawSeries):
        return replace(x, values=invert_normalize(x.values, stats))
    x = np.asarray(x, dtype=np.float64)
    return x * stats.std[:, None, :] + stats.mean[:, None, :]


# --------------------------------------------------------------- splitting

def split(series: RawSeries, fractions=(0.7, 0.1, 0.2), boundaries=None):
    """Chronological train/valid/test split.

    ``boundaries`` (first valid timestamp, first test timestamp) overrides
    ``fractions``.  Empty valid/test parts come back as ``None``; an empty
    training part is an error.
    """
    T = series.T
    if boundaries is not None:
        b1, b2 = (_ts_value(_parse_timestamp(str(b))) for b in boundaries)
        if b2 < b1:
            raise DataError("split: boundaries must be chronological")
        tv = [_ts_value(t) for t in series.timestamps]
        n1 = sum(1 for t in tv if t < b1)
        n2 = sum(1 for t in tv if t < b2)
    else:
        if len(fractions) != 3 or any(f < 0 for f in fractions) or not math.isclose(sum(fractions), 1.0):
            raise DataError(f"split: fractions must be three non-negative values summing to 1, got {fractions}")
        n1 = int(round(T * fractions[0]))
        n2 = int(round(T * (fractions[0] + fractions[1])))
    if n1 == 0:
        raise DataError("split: empty training split")
    parts = []
    for a, b in ((0, n1), (n1, n2), (n2, T)):
        parts.append(series.slice(a, b) if b > a else None)
    return tuple(parts)


# ------------------------------------------------------------- synthetic

@dataclass(frozen=True)
class SynthParams:
    ar: float = 0.6
    amplitude: float = 0.8
    period: int = 24
    noise: float = 0.1
    regime_len: int = 48
    driven_gain: float = 0.9
    driven_noise: float = 0.1


def synth_generate_with_regimes(E: int, T: int, seed: int, params: SynthParams = SynthParams()):
    """Regime-switching sensor network; returns ``(series, regime_per_step)``.

    Stations ``1..E-1`` are noisy AR(1) processes driven by phase-shifted daily
    sinusoids.  Station 0 follows one driver with a one-step lag; every
    ``regime_len`` steps it switches to a different, uniformly drawn driver.
    """
    if E < 3:
        raise DataError(f"synth_generate needs E >= 3, got {E}")
    if T < 500:
        raise DataError(f"synth_generate needs T >= 500, got {T}")
    rng = Rng(seed)
    eps = rng.normal(size=(E, T))
    n_regimes = -(-T // params.regime_len)
    regimes = np.empty(n_regimes, dtype=np.int64)
    regimes[0] = rng.integers(1, E)
    for k in range(1, n_regimes):
        # uniform over the drivers other than the current one
        r = rng.integers(1, E - 1)
        regimes[k] = r if r < regimes[k - 1] else r + 1
    regime = np.repeat(regimes, params.regime_len)[:T]

    x = np.empty((E, T))
    t = np.arange(T)
    phase = params.period * np.arange(1, E) / E
    drive = (params.amplitude * np.sin(2.0 * np.pi * (t[None, :] + phase[:, None]) / params.period)
             + params.noise * eps[1:])
    x[1:] = lfilter([1.0], [1.0, -params.ar], drive, axis=1)
    lagged = np.zeros(T)
    lagged[1:] = x[regime[1:], t[:-1]]
    x[0] = params.driven_gain * lagged + params.driven_noise * eps[0]
    series = RawSeries([f"s{i}" for i in range(E)], list(range(T)), x[:, :, None], ["value"])
    return series, regime


def synth_generate(E: int, T: int, seed: int, params: SynthParams = SynthParams()) -> RawSeries:
    return synth_generate_with_regimes(E, T, seed, params)[0]
