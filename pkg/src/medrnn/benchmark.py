"""Seed-averaged family comparison on the synthetic regime-switching network."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import config as config_mod
from .data import synth_generate
from .pipeline import run

BENCH_FAMILIES = ("linreg-per-station", "linreg-joint", "rnn-per-station", "rnn-joint", "attention")


@dataclass
class BenchmarkResult:
    seeds: tuple
    mse: dict = field(default_factory=dict)  # family -> [test MSE % per seed]
    seconds: float = 0.0

    def mean(self, family: str) -> float:
        return float(np.mean(self.mse[family]))

    def checks(self) -> dict[str, bool]:
        m = self.mean
        return {
            "attention < rnn-joint": m("attention") < m("rnn-joint"),
            "attention < rnn-per-station": m("attention") < m("rnn-per-station"),
            "linreg-joint < linreg-per-station": m("linreg-joint") < m("linreg-per-station"),
            "attention >= 5% better than rnn-joint":
                m("attention") <= 0.95 * m("rnn-joint"),
        }

    def table(self) -> str:
        head = f"{'family':<20}" + "".join(f"{'seed ' + str(s):>10}" for s in self.seeds) + f"{'mean':>10}"
        rows = [head]
        for fam, vals in self.mse.items():
            rows.append(f"{fam:<20}" + "".join(f"{v:>10.2f}" for v in vals) + f"{self.mean(fam):>10.2f}")
        return "\n".join(rows)


def ordering_benchmark(seeds=(1, 2, 3), E: int = 6, T: int = 6000, overrides: dict | None = None,
                       families=BENCH_FAMILIES, progress=None) -> BenchmarkResult:
    """Train every family on ``synth_generate(E, T, seed)`` for each seed."""
    t0 = time.perf_counter()
    res = BenchmarkResult(tuple(seeds), {f: [] for f in families})
    for seed in seeds:
        series = synth_generate(E, T, seed)
        for fam in families:
            run_cfg = config_mod.resolve({"family": fam, **(overrides or {})})
            mse = run(series, run_cfg).test_mse_percent
            res.mse[fam].append(mse)
            if progress:
                progress(f"seed {seed} {fam}: {mse:.2f}")
    res.seconds = time.perf_counter() - t0
    return res
