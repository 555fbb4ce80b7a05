"""Exact Gaussian-process regression with a squared-exponential ARD kernel.

The posterior is computed through a Cholesky factor of ``K + jitter * I``::

    mean(x) = mu0 + k(x, X) @ alpha,          alpha = (K + jI)^-1 (y - mu0)
    var(x)  = k(x, x) - |L^-1 k(X, x)|^2

Kernel hyperparameters are picked by a deterministic grid search on the log
marginal likelihood followed by coordinate-wise refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

JITTER_START = 1e-8
JITTER_MAX = 1e-2
MIN_JITTER = 1e-10


class IllConditionedKernel(np.linalg.LinAlgError):
    """Kernel matrix could not be factorized even at the maximum jitter."""


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float
    length_scales: np.ndarray
    noise_jitter: float = JITTER_START

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        object.__setattr__(self, "length_scales", ls)
        if not self.signal_variance > 0:
            raise ValueError("signal_variance must be positive")
        if not np.all(ls > 0):
            raise ValueError("length scales must be positive")
        if not self.noise_jitter >= MIN_JITTER:
            raise ValueError(f"noise_jitter must be >= {MIN_JITTER}")

    @classmethod
    def isotropic(cls, d: int, length_scale: float = 1.0, signal_variance: float = 1.0,
                  noise_jitter: float = JITTER_START) -> "KernelParams":
        return cls(signal_variance, np.full(d, float(length_scale)), noise_jitter)


@dataclass(frozen=True)
class Posterior:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class GPModel:
    X: np.ndarray
    y: np.ndarray
    prior_mean: float
    kernel: KernelParams
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def kernel_matrix(A: np.ndarray, B: np.ndarray, k: KernelParams) -> np.ndarray:
    # subtract, then scale; the |a|^2 + |b|^2 - 2ab expansion cancels badly for close points
    diff = (np.atleast_2d(A)[:, None, :] - np.atleast_2d(B)[None, :, :]) / k.length_scales
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return k.signal_variance * np.exp(-0.5 * sq)


def kernel_eval(a, b, k: KernelParams) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    r = (a - b) / k.length_scales
    return float(k.signal_variance * math.exp(-0.5 * float(r @ r)))


def _duplicate_pair(X: np.ndarray) -> tuple[int, int] | None:
    for i in range(len(X)):
        same = np.flatnonzero(np.all(X[i + 1 :] == X[i], axis=1))
        if same.size:
            return i, i + 1 + int(same[0])
    return None


def fit(X, y, prior_mean: float, k: KernelParams) -> GPModel:
    """Factorize ``K + jitter * I``, escalating the jitter x10 up to 1e-2."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(X) != len(y) or len(y) == 0:
        raise ValueError("need |X| = |y| >= 1")
    if X.shape[1] != len(k.length_scales):
        raise ValueError(f"points have length {X.shape[1]}, kernel expects {len(k.length_scales)}")
    K = kernel_matrix(X, X, k)
    jitter = k.noise_jitter
    while True:
        A = K + jitter * np.eye(len(y))
        try:
            L = np.linalg.cholesky(A)
            # every pivot of K + jI is >= j in exact arithmetic; a pivot below
            # that, or one lost in the round-off of the diagonal, means the
            # jitter did not make the matrix numerically positive definite
            pivot = float(np.min(np.diag(L))) ** 2
            noise = 100.0 * len(y) * np.finfo(float).eps * float(np.max(np.diag(A)))
            ok = bool(np.all(np.isfinite(L))) and pivot >= max(0.5 * jitter, noise) and (
                np.linalg.norm(L @ L.T - A) <= 1e-8 * np.linalg.norm(A)
            )
        except np.linalg.LinAlgError:
            ok = False
        if ok:
            break
        if jitter >= JITTER_MAX:
            pair = _duplicate_pair(X)
            where = f" (duplicate points {pair[0]} and {pair[1]})" if pair else ""
            raise IllConditionedKernel(f"ill-conditioned kernel{where}")
        jitter = min(jitter * 10.0, JITTER_MAX)
    resid = y - prior_mean
    z = solve_triangular(L, resid, lower=True)
    alpha = solve_triangular(L.T, z, lower=False)
    return GPModel(X, y, float(prior_mean), k, L, alpha, jitter)


def posterior_many(model: GPModel, Xq) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized posterior mean and (clamped) variance at the rows of ``Xq``."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    if Xq.shape[1] != model.dim:
        raise ValueError(f"query length {Xq.shape[1]} != {model.dim}")
    Ks = kernel_matrix(Xq, model.X, model.kernel)
    mean = model.prior_mean + Ks @ model.alpha
    v = solve_triangular(model.chol, Ks.T, lower=True)
    var = model.kernel.signal_variance - (v * v).sum(0)
    return mean, np.maximum(var, 0.0)


def posterior(model: GPModel, x) -> Posterior:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dim,):
        raise ValueError(f"query length {x.shape} != ({model.dim},)")
    mean, var = posterior_many(model, x[None, :])
    return Posterior(float(mean[0]), float(var[0]))


def log_marginal_likelihood(model: GPModel) -> float:
    resid = model.y - model.prior_mean
    return float(
        -0.5 * resid @ model.alpha
        - np.log(np.diag(model.chol)).sum()
        - 0.5 * model.n * math.log(2.0 * math.pi)
    )


SIGNAL_GRID = (0.1, 1.0, 10.0)
LENGTH_GRID = tuple(np.geomspace(0.05, 5.0, 7))
_LOG_LS_BOUNDS = (math.log(1e-3), math.log(1e3))


def optimize_hyperparams(X, y, noise_jitter: float = JITTER_START) -> KernelParams:
    """Maximize the log marginal likelihood over kernel hyperparameters.

    Grid over signal variance (relative to the sample variance of ``y``) and a
    shared length scale, then three passes of coordinate-wise refinement of
    ``log signal_variance`` and each ``log length_scale`` with the step halved
    after every pass. The prior mean is the sample mean of ``y``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if len(y) < 2:
        raise ValueError("need at least two observations")
    d = X.shape[1]
    mu0 = float(y.mean())
    scale = float(y.var())
    if not scale > 1e-12:
        scale = 1.0

    def score(theta: np.ndarray) -> float:
        try:
            kp = KernelParams(scale * math.exp(theta[0]), np.exp(theta[1:]), noise_jitter)
            return log_marginal_likelihood(fit(X, y, mu0, kp))
        except (np.linalg.LinAlgError, ValueError):
            return -math.inf

    best, best_val = None, -math.inf
    for sv in SIGNAL_GRID:
        for ls in LENGTH_GRID:
            theta = np.concatenate([[math.log(sv)], np.full(d, math.log(ls))])
            val = score(theta)
            if val > best_val:
                best, best_val = theta, val
    if best is None:
        best = np.concatenate([[0.0], np.zeros(d)])

    steps = np.concatenate([[math.log(10.0)], np.full(d, math.log(LENGTH_GRID[1] / LENGTH_GRID[0]))])
    for _ in range(3):
        for i in range(d + 1):
            for sign in (1.0, -1.0):
                trial = best.copy()
                trial[i] += sign * steps[i]
                if i > 0 and not _LOG_LS_BOUNDS[0] <= trial[i] <= _LOG_LS_BOUNDS[1]:
                    continue
                val = score(trial)
                if val > best_val:
                    best, best_val = trial, val
                    break
        steps = steps / 2.0
    return KernelParams(scale * math.exp(best[0]), np.exp(best[1:]), noise_jitter)


def fit_auto(X, y, noise_jitter: float = JITTER_START) -> GPModel:
    """Hyperparameter search followed by a fit with the selected kernel."""
    y = np.asarray(y, dtype=float).ravel()
    if len(y) == 1:
        kp = KernelParams.isotropic(np.atleast_2d(X).shape[1], noise_jitter=noise_jitter)
        return fit(X, y, float(y[0]), kp)
    kp = optimize_hyperparams(X, y, noise_jitter)
    return fit(X, y, float(y.mean()), kp)
