"""Gaussian-process surrogate with an ARD radial-basis-function kernel.

Outputs are z-scored before fitting and predictions are mapped back, so the
hyperparameter bounds are scale free. Hyperparameters maximise the log
marginal likelihood (multi-start L-BFGS-B over log-parameters).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

JITTERS = tuple(10.0 ** -k for k in range(10, 3, -1))  # 1e-10 .. 1e-4


class SingularGramError(LinAlgError):
    pass


@dataclass(frozen=True)
class Observation:
    point: np.ndarray
    y: float
    flags: frozenset = frozenset()


@dataclass(frozen=True)
class GPConfig:
    lengthscale_bounds: tuple[float, float] = (1e-2, 1e2)
    signal_variance_bounds: tuple[float, float] = (1e-2, 1e2)
    noise_bounds: tuple[float, float] = (1e-8, 1.0)
    n_restarts: int = 8
    seed: int = 0
    maxiter: int = 200
    # fixed hyperparameters skip the likelihood search when all three are given
    lengthscales: Sequence[float] | float | None = None
    signal_variance: float | None = None
    noise_variance: float | None = None


@dataclass(frozen=True)
class SurrogateState:
    X: np.ndarray  # (n, d) encoded points
    y: np.ndarray  # (n,) raw objective values
    y_mean: float
    y_std: float
    lengthscales: np.ndarray  # (d,)
    signal_variance: float
    noise_variance: float
    jitter: float
    chol: np.ndarray  # lower Cholesky factor of K + (noise + jitter) I
    alpha: np.ndarray  # (K + (noise + jitter) I)^-1 z, z = standardised y

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.lengthscales.shape[0]

    @classmethod
    def prior(cls, dim: int, lengthscales=1.0, signal_variance: float = 1.0,
              noise_variance: float = 0.0) -> "SurrogateState":
        return cls(
            X=np.zeros((0, dim)), y=np.zeros(0), y_mean=0.0, y_std=1.0,
            lengthscales=np.broadcast_to(np.asarray(lengthscales, float), (dim,)).copy(),
            signal_variance=float(signal_variance), noise_variance=float(noise_variance),
            jitter=0.0, chol=np.zeros((0, 0)), alpha=np.zeros(0),
        )


def rbf(X1: np.ndarray, X2: np.ndarray, lengthscales: np.ndarray, signal_variance: float) -> np.ndarray:
    A = X1 / lengthscales
    B = X2 / lengthscales
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return signal_variance * np.exp(-0.5 * np.maximum(sq, 0.0))


def _factor(K: np.ndarray, noise: float) -> tuple[np.ndarray, float]:
    n = K.shape[0]
    for jitter in JITTERS:
        try:
            return cholesky(K + (noise + jitter) * np.eye(n), lower=True, check_finite=False), jitter
        except LinAlgError:
            continue
    raise SingularGramError(f"gram matrix not positive definite with jitter up to {JITTERS[-1]:g}")


def _neg_lml(theta: np.ndarray, X: np.ndarray, z: np.ndarray, sqd: np.ndarray):
    """Negative log marginal likelihood and its gradient in log-parameter space.

    theta = [log lengthscales (d), log signal variance, log noise variance];
    ``sqd`` holds per-dimension squared differences, shape (n*n, d).
    """
    d = X.shape[1]
    n = X.shape[0]
    inv_l2 = np.exp(-2.0 * theta[:d])
    sf2 = np.exp(theta[d])
    noise = np.exp(theta[d + 1])
    Kf = sf2 * np.exp(-0.5 * (sqd @ inv_l2)).reshape(n, n)
    try:
        L, _ = _factor(Kf, noise)
    except SingularGramError:
        return 1e25, np.zeros_like(theta)
    alpha = cho_solve((L, True), z, check_finite=False)
    nll = 0.5 * z @ alpha + np.log(np.diag(L)).sum() + 0.5 * n * np.log(2 * np.pi)
    Kinv = cho_solve((L, True), np.eye(n), check_finite=False)
    W = np.outer(alpha, alpha) - Kinv
    WK = W * Kf
    grad = np.empty_like(theta)
    grad[:d] = 0.5 * (WK.ravel() @ sqd) * inv_l2
    grad[d] = 0.5 * WK.sum()
    grad[d + 1] = 0.5 * noise * np.trace(W)
    return nll, -grad


def _standardise(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(y.mean())
    std = float(y.std())
    if not np.isfinite(std) or std < 1e-12:
        std = 1.0
    return (y - mean) / std, mean, std


def _build(X, y, z, mean, std, ls, sf2, noise) -> SurrogateState:
    K = rbf(X, X, ls, sf2)
    L, jitter = _factor(K, noise)
    alpha = cho_solve((L, True), z)
    return SurrogateState(X, y, mean, std, np.asarray(ls, float), float(sf2), float(noise), jitter, L, alpha)


def gp_fit(observations: Sequence[Observation], config: GPConfig = GPConfig()) -> SurrogateState:
    """Fit hyperparameters to the observations and cache the factorisation."""
    if not observations:
        raise ValueError("gp_fit needs at least one observation")
    X = np.array([np.asarray(o.point, float) for o in observations])
    y = np.array([float(o.y) for o in observations])
    if not np.all(np.isfinite(y)):
        raise ValueError("observations must have finite y")
    z, mean, std = _standardise(y)
    n, d = X.shape

    if config.lengthscales is not None and config.signal_variance is not None and config.noise_variance is not None:
        ls = np.broadcast_to(np.asarray(config.lengthscales, float), (d,))
        return _build(X, y, z, mean, std, ls, config.signal_variance, config.noise_variance)

    lo = np.log(np.r_[np.full(d, config.lengthscale_bounds[0]), config.signal_variance_bounds[0], config.noise_bounds[0]])
    hi = np.log(np.r_[np.full(d, config.lengthscale_bounds[1]), config.signal_variance_bounds[1], config.noise_bounds[1]])
    if n == 1:
        # nothing to learn from one point; sit at a neutral, in-bounds setting
        theta = np.clip(np.r_[np.zeros(d), 0.0, np.log(1e-6)], lo, hi)
    else:
        sqd = ((X[:, None, :] - X[None, :, :]) ** 2).reshape(n * n, d)
        rng = np.random.default_rng(config.seed)
        starts = [np.clip(np.r_[np.full(d, np.log(0.5 * np.sqrt(d))), 0.0, np.log(1e-3)], lo, hi)]
        starts += [rng.uniform(lo, hi) for _ in range(max(config.n_restarts, 1) - 1)]
        best = None
        for t0 in starts:
            res = minimize(_neg_lml, t0, args=(X, z, sqd), jac=True, method="L-BFGS-B",
                           bounds=list(zip(lo, hi)), options={"maxiter": config.maxiter})
            if best is None or res.fun < best.fun:
                best = res
        theta = best.x
    return _build(X, y, z, mean, std, np.exp(theta[:d]), np.exp(theta[d]), np.exp(theta[d + 1]))


def gp_posterior_batch(state: SurrogateState, Xq) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and latent variance at each row of ``Xq`` (raw output units)."""
    Xq = np.atleast_2d(np.asarray(Xq, float))
    prior_var = np.full(Xq.shape[0], state.signal_variance)
    if state.n == 0:
        return np.full(Xq.shape[0], state.y_mean), prior_var * state.y_std**2
    Ks = rbf(Xq, state.X, state.lengthscales, state.signal_variance)
    mean = Ks @ state.alpha
    v = solve_triangular(state.chol, Ks.T, lower=True)
    var = np.maximum(prior_var - (v * v).sum(0), 0.0)
    return mean * state.y_std + state.y_mean, var * state.y_std**2


def gp_posterior(state: SurrogateState, x) -> tuple[float, float]:
    mean, var = gp_posterior_batch(state, np.asarray(x, float)[None, :])
    return float(mean[0]), float(var[0])
