"""Command-line entry point: ``medrnn {synth,train,eval,predict,attention}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime
from pathlib import Path

import numpy as np

from . import config as config_mod
from .checkpoint import read_container, write_container
from .data import (NormStats, RawSeries, apply_normalize, invert_normalize, load_csv,
                   make_dataset, split, synth_generate, write_csv)
from .families import FittedModel, mse_percent
from .pipeline import SPLITS, run

log = logging.getLogger("medrnn")


class CliError(Exception):
    pass


# ----------------------------------------------------------------- synth

def cmd_synth(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    series = synth_generate(args.stations, args.steps, args.seed)
    write_csv(series, out / "data.csv")
    log.info("wrote %s (%d stations x %d steps)", out / "data.csv", series.E, series.T)


# ----------------------------------------------------------------- train

def _checkpoint_payload(result, run_cfg: dict, series: RawSeries):
    header, arrays = result.model.to_container()
    header["seed"] = run_cfg["train.seed"]
    header["run_config"] = run_cfg
    header["data"] = {"stations": series.stations, "feature_names": series.feature_names}
    arrays = arrays + [("norm.mean", result.stats.mean), ("norm.std", result.stats.std)]
    return header, arrays


def cmd_train(args) -> None:
    run_cfg = config_mod.load(args.config, **{"train.seed": args.seed})
    series = load_csv(args.data)
    result = run(series, run_cfg)
    header, arrays = _checkpoint_payload(result, run_cfg, series)
    write_container(args.out, header, arrays)
    report = {
        "family": run_cfg["family"],
        "effective_config": run_cfg,
        "models": [r.to_dict() for r in result.model.reports],
        "test_mse_percent": result.test_mse_percent,
        "n_samples": {k: (0 if v is None else len(v)) for k, v in result.datasets.items()},
    }
    report_path = Path(args.report) if args.report else Path(str(args.out) + ".report.json")
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    log.info("checkpoint %s, report %s, test MSE %s%%", args.out, report_path,
             "n/a" if result.test_mse_percent is None else f"{result.test_mse_percent:.2f}")


# ------------------------------------------------------ eval and friends

def _load_model(path):
    header, arrays = read_container(path)
    if "run_config" not in header:
        raise CliError(f"{path}: checkpoint was not written by 'medrnn train'")
    model = FittedModel.from_container(header, arrays)
    stats = NormStats(arrays["norm.mean"], arrays["norm.std"])
    return model, stats, header


def _check_shape(model: FittedModel, series: RawSeries) -> None:
    base = model.base
    if series.E != base.E:
        raise CliError(f"data has {series.E} stations, model expects E={base.E}")
    if series.F != base.F_enc:
        raise CliError(f"data has {series.F} features, model expects F={base.F_enc}")


def _split_dataset(model, stats, header, series: RawSeries, which: str):
    rc = header["run_config"]
    T_enc, T_dec = model.base.T_enc, model.base.T_dec
    if which == "all":
        part = series
    else:
        part = dict(zip(SPLITS, split(series, tuple(rc["data.fractions"]), rc["data.boundaries"])))[which]
        if part is None:
            raise CliError(f"the {which} split of this data is empty")
    if part.T < T_enc + T_dec:
        raise CliError(f"{which} split has {part.T} steps, need T_enc + T_dec = {T_enc + T_dec}")
    return make_dataset(part, T_enc, T_dec, rc["data.stride"], stats, which)


def cmd_eval(args) -> None:
    model, stats, header = _load_model(args.model)
    series = load_csv(args.data)
    _check_shape(model, series)
    ds = _split_dataset(model, stats, header, series, args.split)
    print(f"{mse_percent(model.predict(ds.X), ds.Y):.2f}")


def _future_timestamps(timestamps: list, n: int) -> list:
    last = timestamps[-1]
    if isinstance(last, int):
        step = timestamps[-1] - timestamps[-2] if len(timestamps) > 1 else 1
        return [last + k * step for k in range(1, n + 1)]
    t = [datetime.fromisoformat(s) for s in timestamps[-2:]]
    step = t[-1] - t[0]
    return [(t[-1] + k * step).isoformat() for k in range(1, n + 1)]


def cmd_predict(args) -> None:
    model, stats, _ = _load_model(args.model)
    series = load_csv(args.data)
    _check_shape(model, series)
    T_enc, T_dec = model.base.T_enc, model.base.T_dec
    if series.T < T_enc:
        raise CliError(f"data has {series.T} steps, need at least T_enc = {T_enc}")
    if len(series.timestamps) < 2:
        raise CliError("need at least two timestamps to extrapolate the time grid")
    X = apply_normalize(series.values[:, -T_enc:], stats)
    Y = invert_normalize(model.predict(X), stats)
    out = RawSeries(series.stations, _future_timestamps(series.timestamps, T_dec), Y,
                    series.feature_names)
    write_csv(out, args.out)


def cmd_attention(args) -> None:
    model, stats, header = _load_model(args.model)
    if model.family != "attention":
        raise CliError(f"model family {model.family!r} has no attention weights")
    series = load_csv(args.data)
    _check_shape(model, series)
    ds = _split_dataset(model, stats, header, series, args.split)
    w = model.attention_weights(ds.X)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["sample", "decoder", "encoder", "weight"])
        for n, j, i in np.ndindex(*w.shape):
            wr.writerow([n, j, i, repr(float(w[n, j, i]))])


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="medrnn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic regime-switching data.csv")
    s.add_argument("--out", required=True)
    s.add_argument("--stations", type=int, default=6)
    s.add_argument("--steps", type=int, default=6000)
    s.add_argument("--seed", type=int, default=1)
    s.set_defaults(fn=cmd_synth)

    t = sub.add_parser("train", help="train one model family")
    t.add_argument("--data", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--report", help="report path (default: <out>.report.json)")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="print test MSE in percent")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--split", choices=(*SPLITS, "all"), default="test")
    e.set_defaults(fn=cmd_eval)

    r = sub.add_parser("predict", help="forecast the T_dec steps after the end of --data")
    r.add_argument("--model", required=True)
    r.add_argument("--data", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(fn=cmd_predict)

    a = sub.add_parser("attention", help="export attention weights as CSV")
    a.add_argument("--model", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--split", choices=(*SPLITS, "all"), default="test")
    a.set_defaults(fn=cmd_attention)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.command == "synth":
        if args.stations < 3:
            parser.error("--stations must be >= 3")
        if args.steps < 500:
            parser.error("--steps must be >= 500")
    try:
        args.fn(args)
    except (OSError, ValueError, RuntimeError, CliError, KeyError) as exc:
        print(f"medrnn {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
