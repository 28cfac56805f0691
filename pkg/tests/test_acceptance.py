"""Acceptance criteria, one test each.

Every test records a ``PASS``/``FAIL`` line that is printed in the terminal
summary.  Criterion 10 (real-data pathway at paper scale) needs user-supplied
station CSVs and is a manual procedure documented in the README.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, jittered_params, small_config
from medrnn.baselines import ridge_fit, ridge_predict, solve_ridge
from medrnn.checkpoint import (BadMagicError, CheckpointError, TruncatedCheckpointError,
                               VersionMismatchError, load_checkpoint, save_checkpoint)
from medrnn.cli import main
from medrnn.data import Dataset, NormStats, apply_normalize, fit_normalize, split, synth_generate
from medrnn.data import window, window_count
from medrnn.model import ModelConfig, backward, forward, plain_seq2seq
from medrnn.nn import grad_check
from test_baselines import gd_oracle


def record(n: int, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def random_params(cfg, r, scale):
    return jittered_params(cfg, seed=int(r.integers(2**31)), scale=scale)


def test_criterion_1_gradient_fidelity():
    t0 = time.perf_counter()
    r = np.random.default_rng(1)
    worst = 0.0
    for mean_scale in (True, False):
        for teacher in (True, False):
            cfg = ModelConfig(E=3, D=2, T_enc=4, T_dec=3, F_enc=2, F_dec=2, h=5, p_att=4,
                              mean_scale=mean_scale, teacher_forcing=teacher)
            p = random_params(cfg, r, 0.1)
            X, Y = r.standard_normal((3, 4, 2)), r.standard_normal((2, 3, 2))
            mask = [True, False, True]
            worst = max(worst, grad_check(lambda q: backward(X, Y, q, cfg, mask), p, eps=1e-5))
    secs = time.perf_counter() - t0
    record(1, worst < 1e-4 and secs < 30,
           f"max relative gradient error {worst:.2e} (< 1e-4) in {secs:.1f} s (< 30 s)")


def test_criterion_2_reduction_equivalence():
    r = np.random.default_rng(2)
    cfg = small_config(E=1, D=1)
    same = 0
    for _ in range(100):
        p = random_params(cfg, r, float(r.uniform(0.05, 1.0)))
        X = r.standard_normal((4, 1, cfg.T_enc, cfg.F_enc))
        same += np.array_equal(forward(X, p, cfg).y_hat, plain_seq2seq(X, p, cfg))
    record(2, same == 100, f"{same}/100 parameter draws bitwise equal to plain seq2seq")


def test_criterion_3_simplex_and_masking():
    r = np.random.default_rng(3)
    bad = 0
    worst = 0.0
    for _ in range(1000):
        E, D = int(r.integers(1, 7)), int(r.integers(1, 4))
        cfg = ModelConfig(E=E, D=D, T_enc=3, T_dec=2, F_enc=2, F_dec=2, h=4, p_att=3,
                          mean_scale=bool(r.integers(2)), share_attention=bool(r.integers(2)))
        p = random_params(cfg, r, float(r.uniform(0.1, 3.0)))
        mask = r.random(E) < 0.6
        if not mask.any():
            mask[r.integers(E)] = True
        w = forward(r.standard_normal((E, 3, 2)), p, cfg, mask).trace.w
        err = float(np.abs(w.sum(axis=1) - 1).max())
        worst = max(worst, err)
        bad += not (err <= 1e-12 and np.all(w >= 0) and np.all(w[:, ~mask] == 0.0))
    record(3, bad == 0, f"{1000 - bad}/1000 forwards on the simplex; max |sum - 1| = {worst:.1e}")


def test_criterion_4_permutation_equivariance():
    r = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        cfg = small_config(E=5, D=3, mean_scale=bool(r.integers(2)))
        p = random_params(cfg, r, 0.5)
        X = r.standard_normal((2, 5, cfg.T_enc, cfg.F_enc))
        perm = r.permutation(5)
        q = p.copy()
        for name in ("enc.W_x", "enc.W_h", "enc.b"):
            q.arrays[name] = p[name][perm]
        a = forward(X, p, cfg).y_hat
        b = forward(X[:, perm], q, cfg).y_hat
        worst = max(worst, float(np.max(np.abs(b - a) / np.abs(a))))
    record(4, worst < 1e-10, f"max relative output change {worst:.1e} over 50 permutations")


def test_criterion_5_normalisation_convention():
    s = synth_generate(6, 6000, 1)
    tr, _, te = split(s)
    stats = fit_normalize(tr)
    mse_tr = float(np.mean(apply_normalize(tr, stats).values ** 2))
    mse_te = float(np.mean(apply_normalize(te, stats).values ** 2))
    record(5, abs(mse_tr - 1) <= 1e-9 and abs(mse_te - 1) <= 0.15,
           f"zero-prediction MSE train {mse_tr:.12f} (1 +- 1e-9), test {mse_te:.4f} (1 +- 0.15)")


@pytest.mark.slow
def test_criterion_6_ordering_benchmark():
    from medrnn.benchmark import ordering_benchmark

    res = ordering_benchmark((1, 2, 3))
    print()
    print(res.table())
    checks = res.checks()
    failed = [k for k, ok in checks.items() if not ok]
    means = ", ".join(f"{f} {res.mean(f):.2f}" for f in res.mse)
    ok = not failed and res.seconds < 15 * 60
    record(6, ok, f"seed-mean test MSE %: {means}; {res.seconds:.0f} s"
           + (f"; failed: {'; '.join(failed)}" if failed else ""))


def test_criterion_7_ridge_oracle():
    worst = 0.0
    for seed in range(20):
        r = np.random.default_rng(seed)
        n, k, m = int(r.integers(8, 30)), int(r.integers(1, 6)), int(r.integers(1, 4))
        A = np.concatenate([r.standard_normal((n, k)), np.ones((n, 1))], axis=1)
        B = r.standard_normal((n, m))
        lam = float(r.uniform(0.01, 1.0))
        worst = max(worst, float(np.abs(solve_ridge(A, B, lam) - gd_oracle(A, B, lam)).max()))
    r = np.random.default_rng(70)
    X = r.standard_normal((50, 2, 4, 1))
    W = r.standard_normal((3, 5))
    A = np.concatenate([X[:, 0, :, 0], np.ones((50, 1))], axis=1)
    Y = np.stack([A @ W.T, A @ W.T], axis=1)[..., None]
    ds = Dataset(X, Y, NormStats(np.zeros((2, 1)), np.ones((2, 1))), list(range(50)), "t", 1)
    model = ridge_fit(ds, joint=False, lam=0.0)
    exact = float(np.mean((ridge_predict(model, X)[:, 0] - Y[:, 0]) ** 2))
    record(7, worst < 1e-6 and exact < 1e-16,
           f"max |ridge - GD oracle| {worst:.1e} over 20 systems; exact-data MSE {exact:.1e}")


def test_criterion_8_determinism_and_persistence(tmp_path):
    d = tmp_path / "d"
    main(["synth", "--out", str(d), "--stations", "3", "--steps", "600"])
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text('{"model.T_enc": 8, "model.T_dec": 4, "model.h": 4, "train.max_epochs": 2}')
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.ckpt"
        main(["train", "--data", str(d / "data.csv"), "--config", str(cfg_path), "--out", str(out),
              "--seed", "5"])
        outs.append(out.read_bytes())
    identical = outs[0] == outs[1]

    cfg = small_config()
    p = jittered_params(cfg)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, cfg, p, seed=0)
    cfg2, p2 = load_checkpoint(path)
    round_trip = cfg2 == cfg and p2.equals(p)

    good = path.read_bytes()
    errors = {}
    for label, buf in {"magic": b"Q" + good[1:], "version": good[:4] + b"\x07" + good[5:],
                       "truncated": good[:-1]}.items():
        path.write_bytes(buf)
        try:
            load_checkpoint(path)
            errors[label] = None
        except CheckpointError as exc:
            errors[label] = type(exc)
    classes_ok = errors == {"magic": BadMagicError, "version": VersionMismatchError,
                            "truncated": TruncatedCheckpointError}
    record(8, identical and round_trip and classes_ok,
           f"rerun byte-identical {identical}; round trip bitwise {round_trip}; "
           f"error classes {', '.join(f'{k}->{v.__name__ if v else None}' for k, v in errors.items())}")


def test_criterion_9_window_counts():
    r = np.random.default_rng(9)
    tuples = [(96, 72, 24, 24), (24 * 365, 72, 24, 24), (24 * 365, 72, 24, 1), (365, 21, 3, 3),
              (365, 21, 3, 1)]
    while len(tuples) < 200:
        T_enc, T_dec = int(r.integers(1, 80)), int(r.integers(1, 30))
        tuples.append((int(r.integers(T_enc + T_dec, 600)), T_enc, T_dec, int(r.integers(1, 60))))
    mismatches = 0
    for T, T_enc, T_dec, stride in tuples:
        brute = sum(1 for s in range(T) if s % stride == 0 and s + T_enc + T_dec <= T)
        got = len(window(np.zeros((1, T, 1)), T_enc, T_dec, stride))
        mismatches += not (window_count(T, T_enc, T_dec, stride) == brute == got)
    record(9, mismatches == 0, f"{len(tuples) - mismatches}/{len(tuples)} tuples match enumeration "
           "(including 72/24 hourly and 21/3 daily)")


@pytest.mark.skip(reason="manual: needs user-supplied station CSVs at paper scale (see README)")
def test_criterion_10_real_data_pathway():
    pass
