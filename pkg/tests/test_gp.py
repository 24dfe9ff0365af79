from __future__ import annotations

import numpy as np
import pytest

from chartopt import gp
from chartopt.gp import GPConfig, Observation, SingularGramError, SurrogateState, gp_fit, gp_posterior, gp_posterior_batch


def _obs(X, y):
    return [Observation(x, float(v)) for x, v in zip(np.atleast_2d(X), y)]


def dense_posterior(state: SurrogateState, Xq):
    """Direct evaluation of the GP posterior with plain dense solves."""
    X, ls, sf2 = state.X, state.lengthscales, state.signal_variance
    z = (state.y - state.y_mean) / state.y_std

    def k(a, b):
        d = (a[:, None, :] - b[None, :, :]) / ls
        return sf2 * np.exp(-0.5 * (d ** 2).sum(-1))

    A = k(X, X) + (state.noise_variance + state.jitter) * np.eye(len(X))
    kq = k(Xq, X)
    mean = kq @ np.linalg.solve(A, z)
    var = sf2 - np.einsum("ij,ji->i", kq, np.linalg.solve(A, kq.T))
    return state.y_mean + state.y_std * mean, np.maximum(var, 0.0) * state.y_std ** 2


def test_constant_observations_give_constant_mean():
    rng = np.random.default_rng(0)
    X = rng.random((8, 3))
    state = gp_fit(_obs(X, np.full(8, 2.5)))
    mean, _ = gp_posterior_batch(state, rng.random((50, 3)))
    assert np.abs(mean - 2.5).max() <= 1e-9


def test_single_noiseless_observation_interpolates():
    x = np.array([0.3, 0.7])
    state = gp_fit(_obs(x, [4.2]), GPConfig(lengthscales=0.5, signal_variance=1.0, noise_variance=0.0))
    mean, _ = gp_posterior(state, x)
    assert mean == pytest.approx(4.2, abs=1e-9)


def test_noiseless_training_points_recovered():
    X = np.array([[0.1, 0.2], [0.8, 0.3], [0.4, 0.9], [0.6, 0.6], [0.2, 0.7]])
    y = np.array([1.0, -0.5, 2.0, 0.3, 1.1])
    state = gp_fit(_obs(X, y), GPConfig(lengthscales=0.3, signal_variance=1.0, noise_variance=0.0))
    mean, var = gp_posterior_batch(state, X)
    assert np.abs(mean - y).max() <= 1e-9
    assert var.max() <= 1e-8


def test_prior_moments():
    assert gp_posterior(SurrogateState.prior(4), np.full(4, 0.5)) == (0.0, 1.0)


def test_smooth_function_fit_beats_constant_predictor():
    rng = np.random.default_rng(11)
    f = lambda x: np.sin(6 * x[:, 0]) + 0.5 * x[:, 0]
    X = rng.random((20, 1))
    Xt = rng.random((200, 1))
    state = gp_fit(_obs(X, f(X)), GPConfig(seed=0))
    mean, _ = gp_posterior_batch(state, Xt)
    rmse = np.sqrt(np.mean((mean - f(Xt)) ** 2))
    assert rmse < f(X).std()
    assert rmse < 0.05


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_posterior_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    X, y = rng.random((5, 12)), rng.normal(size=5) * 3 + 1
    state = gp_fit(_obs(X, y), GPConfig(seed=seed))
    Xq = rng.random((20, 12))
    mean, var = gp_posterior_batch(state, Xq)
    m_ref, v_ref = dense_posterior(state, Xq)
    assert np.abs(mean - m_ref).max() <= 1e-8
    assert np.abs(var - v_ref).max() <= 1e-8


def test_fit_is_deterministic_per_seed():
    rng = np.random.default_rng(5)
    obs = _obs(rng.random((12, 4)), rng.normal(size=12))
    a, b = gp_fit(obs, GPConfig(seed=9)), gp_fit(obs, GPConfig(seed=9))
    assert np.array_equal(a.lengthscales, b.lengthscales) and a.noise_variance == b.noise_variance


def test_fitted_hyperparameters_within_bounds():
    rng = np.random.default_rng(6)
    obs = _obs(rng.random((15, 12)), rng.normal(size=15))
    s = gp_fit(obs)
    assert np.all((s.lengthscales >= 1e-2 - 1e-12) & (s.lengthscales <= 1e2 + 1e-9))
    assert 1e-2 - 1e-12 <= s.signal_variance <= 1e2 + 1e-9
    assert 1e-8 - 1e-20 <= s.noise_variance <= 1.0 + 1e-12


def test_likelihood_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    n, d = 9, 3
    X = rng.random((n, d))
    z = rng.normal(size=n)
    sqd = ((X[:, None, :] - X[None, :, :]) ** 2).reshape(n * n, d)
    theta = np.r_[np.log([0.4, 0.9, 0.2]), np.log(1.3), np.log(1e-2)]
    _, grad = gp._neg_lml(theta, X, z, sqd)
    h = 1e-6
    fd = np.array([
        (gp._neg_lml(theta + h * e, X, z, sqd)[0] - gp._neg_lml(theta - h * e, X, z, sqd)[0]) / (2 * h)
        for e in np.eye(len(theta))
    ])
    assert np.allclose(grad, fd, atol=1e-5)


def test_duplicate_points_survive_with_jitter():
    X = np.array([[0.5, 0.5], [0.5, 0.5], [0.1, 0.9]])
    state = gp_fit(_obs(X, [1.0, 1.0, 0.0]), GPConfig(lengthscales=0.3, signal_variance=1.0, noise_variance=0.0))
    assert state.jitter > 0


def test_singular_gram_after_max_jitter():
    with pytest.raises(SingularGramError):
        gp._factor(-np.eye(3), 0.0)


def test_variance_non_negative_everywhere():
    rng = np.random.default_rng(8)
    X = rng.random((30, 12))
    state = gp_fit(_obs(X, rng.normal(size=30)))
    _, var = gp_posterior_batch(state, np.vstack([X, rng.random((500, 12))]))
    assert np.all(var >= 0)


def test_rejects_bad_observations():
    with pytest.raises(ValueError):
        gp_fit([])
    with pytest.raises(ValueError):
        gp_fit(_obs(np.zeros((1, 2)), [np.nan]))
