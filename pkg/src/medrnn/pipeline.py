"""split -> normalise -> window -> fit -> score, shared by the CLI and scripts."""

from __future__ import annotations

from dataclasses import dataclass

from . import config as config_mod
from .data import Dataset, NormStats, RawSeries, fit_normalize, make_dataset, split
from .families import FittedModel, fit_family, mse_percent

SPLITS = ("train", "valid", "test")


def prepare(series: RawSeries, T_enc: int, T_dec: int, stride: int | None = None,
            fractions=(0.7, 0.1, 0.2), boundaries=None):
    """Returns ``(stats, {split name: Dataset or None})``; stats come from train only."""
    parts = split(series, fractions, boundaries)
    stats = fit_normalize(parts[0])
    out = {}
    for name, part in zip(SPLITS, parts):
        if part is None or part.T < T_enc + T_dec:
            out[name] = None
        else:
            out[name] = make_dataset(part, T_enc, T_dec, stride, stats, name)
    return stats, out


@dataclass
class RunResult:
    model: FittedModel
    stats: NormStats
    datasets: dict[str, Dataset | None]
    test_mse_percent: float | None


def run(series: RawSeries, run_cfg: dict) -> RunResult:
    """Train the family selected by ``run_cfg`` (a resolved config dict) on ``series``."""
    stats, ds = prepare(series, run_cfg["model.T_enc"], run_cfg["model.T_dec"],
                        run_cfg["data.stride"], tuple(run_cfg["data.fractions"]),
                        run_cfg["data.boundaries"])
    if ds["train"] is None:
        raise ValueError("training split is shorter than one window")
    family = run_cfg["family"]
    if family in ("attention", "rnn-joint", "rnn-per-station") and ds["valid"] is None:
        raise ValueError("validation split is shorter than one window; RNN families need it")
    base = config_mod.model_config(run_cfg, series.E, series.F)
    model = fit_family(family, ds["train"], ds["valid"], base,
                       config_mod.train_config(run_cfg), run_cfg["ridge.lambda"])
    test = ds["test"]
    mse = None if test is None else mse_percent(model.predict(test.X), test.Y)
    return RunResult(model, stats, ds, mse)
