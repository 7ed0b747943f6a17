"""Gaussian-process regression for the learned Lyapunov surrogate.

Exact inference with a Cholesky factorization of (K_N + sigma^2 I),
incremental updates when observations arrive one at a time, the kernel
ridge regression RKHS norm, the information gain of a training set, and
the confidence-width multiplier beta_N.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import FactorizationError

JITTER_START_REL = 1e-10
JITTER_MAX_REL = 1e-6
DEFAULT_THETA = 0.1
DEFAULT_RKHS_PRIOR_BOUND = 10.0
RKHS_REFRESH_MIN_N = 5


@dataclass(frozen=True)
class Kernel:
    """Squared-exponential (bounded by 1) or linear kernel."""

    kind: str = "se"
    length_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("se", "linear"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.length_scale <= 0:
            raise ValueError("length_scale must be > 0")

    def gram(self, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
        X1 = np.atleast_2d(X1)
        X2 = np.atleast_2d(X2)
        if self.kind == "linear":
            return X1 @ X2.T
        sq = (
            np.sum(X1**2, axis=1)[:, None]
            + np.sum(X2**2, axis=1)[None, :]
            - 2.0 * X1 @ X2.T
        )
        np.clip(sq, 0.0, None, out=sq)
        return np.exp(-sq / (2.0 * self.length_scale**2))

    def diag(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        if self.kind == "linear":
            return np.sum(X**2, axis=1)
        return np.ones(X.shape[0])


def _chol_with_jitter(A: np.ndarray):
    """Lower Cholesky factor with escalating diagonal jitter.

    Returns (L, jitter_used).  Jitter starts at 1e-10 * trace/N and grows
    tenfold up to 1e-6 * trace/N before giving up.
    """
    n = A.shape[0]
    scale = max(np.trace(A) / n, np.finfo(float).tiny)
    jitter = 0.0
    while True:
        try:
            L = cholesky(A + jitter * np.eye(n), lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            pass
        except Exception:
            pass
        if jitter == 0.0:
            jitter = JITTER_START_REL * scale
        elif jitter < JITTER_MAX_REL * scale:
            jitter *= 10.0
        else:
            raise FactorizationError(
                f"Cholesky failed at maximal jitter {jitter:.1e}"
            )


@dataclass(frozen=True)
class GpModel:
    """Immutable GP snapshot; add_observation returns a new model."""

    kernel: Kernel
    noise_sigma: float
    X: np.ndarray | None = None   # (N, d)
    y: np.ndarray | None = None   # (N,)
    L: np.ndarray | None = None   # chol of K + sigma^2 I (+ jitter)
    jitter: float = 0.0
    theta: float = DEFAULT_THETA

    def __post_init__(self):
        if self.noise_sigma <= 0:
            raise ValueError("noise_sigma must be > 0")

    @property
    def n_train(self) -> int:
        return 0 if self.X is None else self.X.shape[0]


def empty_model(kernel: Kernel, noise_sigma: float, theta: float = DEFAULT_THETA) -> GpModel:
    return GpModel(kernel=kernel, noise_sigma=noise_sigma, theta=theta)


def posterior(model: GpModel, x):
    """Posterior mean and standard deviation at query point(s) x.

    Accepts a single d-vector or an (n, d) batch; returns floats or arrays
    accordingly.  Prior mean is zero; negative variances within 1e-10 of
    zero are clamped.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Xq = np.atleast_2d(x)
    prior_var = model.kernel.diag(Xq)
    if model.n_train == 0:
        mu = np.zeros(Xq.shape[0])
        var = prior_var.copy()
    else:
        Ks = model.kernel.gram(model.X, Xq)          # (N, n)
        A = solve_triangular(model.L, Ks, lower=True)
        alpha = cho_solve((model.L, True), model.y)
        mu = Ks.T @ alpha
        var = prior_var - np.sum(A * A, axis=0)
    if np.any(var < -1e-6):
        raise FactorizationError(
            f"posterior variance {float(var.min()):.3e} far below zero"
        )
    np.clip(var, 0.0, None, out=var)
    sd = np.sqrt(var)
    if single:
        return float(mu[0]), float(sd[0])
    return mu, sd


def add_observation(model: GpModel, x, v: float) -> GpModel:
    """Append one training pair, extending the Cholesky factor in place.

    Falls back to a full refactorization when the rank-one extension loses
    positive definiteness.
    """
    if not np.isfinite(v):
        raise ValueError("observation value must be finite")
    x = np.asarray(x, dtype=float).ravel()
    if model.n_train == 0:
        X = x[None, :]
        y = np.array([float(v)])
        K = model.kernel.gram(X, X) + model.noise_sigma**2 * np.eye(1)
        L, jit = _chol_with_jitter(K)
        return replace(model, X=X, y=y, L=L, jitter=jit)

    X = np.vstack([model.X, x])
    y = np.append(model.y, float(v))
    kvec = model.kernel.gram(model.X, x[None, :])[:, 0]
    dnew = float(model.kernel.diag(x[None, :])[0]) + model.noise_sigma**2 + model.jitter
    l1 = solve_triangular(model.L, kvec, lower=True)
    rem = dnew - float(l1 @ l1)
    if rem > 1e-12 * dnew:
        n = model.n_train
        L = np.zeros((n + 1, n + 1))
        L[:n, :n] = model.L
        L[n, :n] = l1
        L[n, n] = math.sqrt(rem)
        return replace(model, X=X, y=y, L=L)
    K = model.kernel.gram(X, X) + model.noise_sigma**2 * np.eye(n := X.shape[0])
    L, jit = _chol_with_jitter(K)
    return replace(model, X=X, y=y, L=L, jitter=jit)


def refactorize(model: GpModel) -> GpModel:
    """Rebuild the factorization from scratch (used for cross-checks and loads)."""
    if model.n_train == 0:
        return model
    K = model.kernel.gram(model.X, model.X) + model.noise_sigma**2 * np.eye(model.n_train)
    L, jit = _chol_with_jitter(K)
    return replace(model, L=L, jitter=jit)


def rkhs_norm_sq(model: GpModel, theta: float | None = None) -> float:
    """Squared RKHS norm of the kernel ridge regressor through the data.

    Two algebraically equivalent routes are evaluated, an eigenvalue form
    and a linear-solve form c^T K c with c = (K + N theta I)^{-1} y, and
    must agree to 1e-8 relative.
    """
    if theta is None:
        theta = model.theta
    if theta <= 0:
        raise ValueError("theta must be > 0")
    if model.n_train < 1:
        raise ValueError("need at least one observation")
    N = model.n_train
    K = model.kernel.gram(model.X, model.X)
    lam, P = np.linalg.eigh(K)
    np.clip(lam, 0.0, None, out=lam)
    proj = P.T @ model.y
    eig_val = float(proj @ (lam / (lam + N * theta) ** 2 * proj))
    c = np.linalg.solve(K + N * theta * np.eye(N), model.y)
    solve_val = float(c @ K @ c)
    scale = max(abs(eig_val), abs(solve_val), 1.0)
    if abs(eig_val - solve_val) > 1e-8 * scale:
        raise FactorizationError(
            f"RKHS norm paths disagree: {eig_val:.12e} vs {solve_val:.12e}"
        )
    return eig_val


def info_gain(model: GpModel) -> float:
    """0.5 * sum log(1 + sigma^-2 lambda_i) over kernel-matrix eigenvalues."""
    if model.n_train < 1:
        raise ValueError("need at least one observation")
    K = model.kernel.gram(model.X, model.X)
    lam = np.linalg.eigvalsh(K)
    np.clip(lam, 0.0, None, out=lam)
    return float(0.5 * np.sum(np.log1p(lam / model.noise_sigma**2)))


def gamma_bound(N: int, sigma: float) -> float:
    """Kernel-free information-gain bound N / (2 sigma^2), valid for k <= 1."""
    if N < 1 or sigma <= 0:
        raise ValueError("need N >= 1 and sigma > 0")
    return N / (2.0 * sigma**2)


def beta(N: int, delta: float, rkhs_norm_sq_bound: float, gamma: float) -> float:
    """Confidence-width multiplier 2||V||_k^2 + 300 gamma ln^3(N/delta)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0,1)")
    if rkhs_norm_sq_bound < 0 or gamma < 0:
        raise ValueError("bounds must be >= 0")
    return 2.0 * rkhs_norm_sq_bound + 300.0 * gamma * math.log(N / delta) ** 3


@dataclass(frozen=True)
class BetaSchedule:
    """Per-iteration beta rule: 'theoretical', 'fixed:<v>' or 'scaled:<k>'.

    The theoretical rule is extremely conservative by construction; the
    fixed rule is the practical default for sampling runs.  The RKHS-norm
    bound starts at a configurable prior value and is refreshed from the
    data once enough observations exist.
    """

    mode: str = "fixed:4"
    rkhs_prior_bound: float = DEFAULT_RKHS_PRIOR_BOUND

    def __post_init__(self):
        kind, _, arg = self.mode.partition(":")
        if kind not in ("theoretical", "fixed", "scaled"):
            raise ValueError(f"unknown beta mode {self.mode!r}")
        if kind in ("fixed", "scaled"):
            float(arg)  # must parse

    def value(self, n_stable: int, delta: float, model: GpModel) -> float:
        kind, _, arg = self.mode.partition(":")
        if kind == "fixed":
            return float(arg)
        N = max(n_stable, 1)
        bound = self.rkhs_prior_bound
        if model.n_train >= RKHS_REFRESH_MIN_N:
            bound = rkhs_norm_sq(model)
        theo = beta(N, delta, bound, gamma_bound(N, model.noise_sigma))
        if kind == "scaled":
            return float(arg) * theo
        return theo


def save_checkpoint(model: GpModel, path) -> None:
    doc = {
        "kernel": {"kind": model.kernel.kind, "length_scale": model.kernel.length_scale},
        "noise_sigma": model.noise_sigma,
        "theta": model.theta,
        "inputs": [] if model.X is None else model.X.tolist(),
        "observations": [] if model.y is None else model.y.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def load_checkpoint(path) -> GpModel:
    with open(path) as fh:
        doc = json.load(fh)
    kernel = Kernel(kind=doc["kernel"]["kind"], length_scale=doc["kernel"]["length_scale"])
    model = GpModel(kernel=kernel, noise_sigma=doc["noise_sigma"], theta=doc["theta"])
    inputs = np.asarray(doc["inputs"], dtype=float)
    obs = np.asarray(doc["observations"], dtype=float)
    if inputs.size:
        model = replace(model, X=np.atleast_2d(inputs), y=obs)
        model = refactorize(model)
    return model
