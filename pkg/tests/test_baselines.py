import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import jittered_params, small_config
from medrnn.baselines import (RidgeModel, SingularSystemError, from_joint, last_observed,
                              regular_rnn_configs, ridge_fit, ridge_objective, ridge_predict,
                              solve_ridge, to_joint)
from medrnn.data import Dataset, NormStats
from medrnn.model import forward, plain_seq2seq


def dataset(X, Y):
    E, F = X.shape[1], X.shape[3]
    return Dataset(X, Y, NormStats(np.zeros((E, F)), np.ones((E, F))), np.arange(len(X)), "t", 1)


def gd_oracle(A, B, lam, bias=True, iters=200_000, tol=1e-15):
    """Gradient descent on the ridge objective with step 1/L until the update stalls."""
    pen = np.full(A.shape[1], lam)
    if bias:
        pen[-1] = 0.0
    L = 2 * (np.linalg.eigvalsh(A.T @ A).max() + lam)
    W = np.zeros((B.shape[1], A.shape[1]))
    for _ in range(iters):
        g = 2 * (A @ W.T - B).T @ A + 2 * W * pen
        step = g / L
        W -= step
        if np.abs(step).max() < tol:
            break
    return W


# -------------------------------------------------------- last observed

def test_last_observed_constant_series():
    X = np.full((2, 5, 3), 4.0)
    y = last_observed(X, 4)
    assert y.shape == (2, 4, 3)
    assert np.mean((y - 4.0) ** 2) == 0.0


def test_last_observed_ignores_earlier_steps(rng):
    X = rng.standard_normal((3, 6, 2))
    X2 = X.copy()
    X2[:, :-1] = rng.standard_normal((3, 5, 2))
    assert np.array_equal(last_observed(X, 3), last_observed(X2, 3))
    for t in range(3):
        assert np.array_equal(last_observed(X, 3)[:, t], X[:, -1])


def test_last_observed_horizon_truncation(rng):
    X = rng.standard_normal((4, 3, 6, 2))
    assert np.array_equal(last_observed(X, 5)[:, :, :2], last_observed(X, 2))


def test_last_observed_noise_mse_is_two():
    r = np.random.default_rng(0)
    X = r.standard_normal((20000, 1, 3, 1))
    Y = r.standard_normal((20000, 1, 5, 1))
    mse = np.mean((last_observed(X, 5) - Y) ** 2)
    # variance of the difference of two independent unit normals; 1e5 draws
    assert abs(mse - 2.0) < 0.05


def test_last_observed_shape_error():
    with pytest.raises(ValueError):
        last_observed(np.zeros(5), 2)


# ---------------------------------------------------------------- ridge

def test_ridge_scalar_no_bias():
    W = solve_ridge(np.array([[1.0]]), np.array([[1.0]]), 1.0, bias=False)
    assert W.tolist() == [[0.5]]


def test_ridge_exact_linear_recovery(rng):
    N, E, T, F, Td = 60, 2, 4, 2, 3
    X = rng.standard_normal((N, E, T, F))
    Wtrue = [rng.standard_normal((Td * F, T * F + 1)) for _ in range(E)]
    A = [np.concatenate([X[:, j].reshape(N, -1), np.ones((N, 1))], axis=1) for j in range(E)]
    Y = np.stack([(A[j] @ Wtrue[j].T).reshape(N, Td, F) for j in range(E)], axis=1)
    m = ridge_fit(dataset(X, Y), joint=False, lam=0.0)
    for j in range(E):
        np.testing.assert_allclose(m.W[j], Wtrue[j], rtol=0, atol=1e-10)
    assert np.mean((ridge_predict(m, X) - Y) ** 2) < 1e-16


@pytest.mark.parametrize("seed", range(20))
def test_ridge_matches_gradient_descent(seed):
    r = np.random.default_rng(seed)
    n, k, m = int(r.integers(8, 30)), int(r.integers(1, 6)), int(r.integers(1, 4))
    A = np.concatenate([r.standard_normal((n, k)), np.ones((n, 1))], axis=1)
    B = r.standard_normal((n, m))
    lam = float(r.uniform(0.01, 1.0))
    np.testing.assert_allclose(solve_ridge(A, B, lam), gd_oracle(A, B, lam), rtol=0, atol=1e-6)


def test_ridge_singular_at_zero_lambda(rng):
    A = rng.standard_normal((10, 3))
    A = np.concatenate([A, A[:, :1], np.ones((10, 1))], axis=1)
    with pytest.raises(SingularSystemError, match="lambda > 0"):
        solve_ridge(A, rng.standard_normal((10, 2)), 0.0)
    solve_ridge(A, rng.standard_normal((10, 2)), 1e-3)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), lam=st.floats(1e-3, 10.0), bias=st.booleans())
def test_ridge_local_optimality(seed, lam, bias):
    r = np.random.default_rng(seed)
    A = np.concatenate([r.standard_normal((12, 3)), np.ones((12, 1))], axis=1)
    B = r.standard_normal((12, 2))
    W = solve_ridge(A, B, lam, bias)
    f0 = ridge_objective(A, B, W, lam, bias)
    for idx in np.ndindex(*W.shape):
        for d in (1e-3, -1e-3):
            Wp = W.copy()
            Wp[idx] += d
            assert ridge_objective(A, B, Wp, lam, bias) >= f0


def test_ridge_joint_uses_all_stations(rng):
    N, E, T, F, Td = 80, 3, 3, 1, 2
    X = rng.standard_normal((N, E, T, F))
    # station 0's target is station 2's last value: only the joint model can see it
    Y = np.repeat(X[:, :, -1:, :], Td, axis=2)
    Y[:, 0] = np.repeat(X[:, 2, -1:, :], Td, axis=1)
    joint = ridge_fit(dataset(X, Y), joint=True, lam=0.0)
    per = ridge_fit(dataset(X, Y), joint=False, lam=0.0)
    assert joint.W[0].shape == (E * Td * F, E * T * F + 1)
    assert [w.shape for w in per.W] == [(Td * F, T * F + 1)] * E
    assert np.mean((ridge_predict(joint, X) - Y) ** 2) < 1e-20
    assert np.mean((ridge_predict(per, X)[:, 0] - Y[:, 0]) ** 2) > 0.5
    assert ridge_predict(joint, X[0]).shape == (E, Td, F)


# --------------------------------------------------------- regular RNNs

def test_regular_rnn_configs_shapes():
    base = small_config(E=4, D=4, F_enc=2, F_dec=2)
    per, joint = regular_rnn_configs(base)
    assert len(per) == base.D
    assert all(c.E == 1 and c.D == 1 and c.F_enc == 2 for c in per)
    assert (joint.E, joint.D, joint.F_enc, joint.F_dec) == (1, 1, 8, 8)
    assert joint.h == base.h and joint.T_enc == base.T_enc


def test_per_station_reduction_bitwise(rng):
    base = small_config(E=3, D=3)
    per, _ = regular_rnn_configs(base)
    X = rng.standard_normal((5, 3, base.T_enc, base.F_enc))
    for j, cfg in enumerate(per):
        p = jittered_params(cfg, seed=j, scale=0.3)
        xs = X[:, j:j + 1]
        assert np.array_equal(forward(xs, p, cfg).y_hat, plain_seq2seq(xs, p, cfg))


def test_joint_layout_round_trip(rng):
    A = rng.standard_normal((2, 3, 4, 2))
    J = to_joint(A)
    assert J.shape == (2, 1, 4, 6)
    # station-major: features of station s occupy columns [s*F, (s+1)*F)
    assert np.array_equal(J[:, 0, :, 2:4], A[:, 1])
    assert np.array_equal(from_joint(J, 3), A)


def test_ridge_model_fields():
    m = RidgeModel([np.zeros((2, 3))], True, 0.1, 2, 1)
    assert m.W[0].shape[1] == 3 and m.lam == 0.1
