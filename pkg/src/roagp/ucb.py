"""Upper-confidence-bound sampling loop for growing the stable training set.

Each iteration maximizes mu + sqrt(beta) * sigma over the box (minus
exclusion balls around points that failed to converge), simulates the
chosen initial state, and either appends a Lyapunov observation to the GP
or excludes the point.  Pure-mean and pure-variance acquisition variants
are available for baseline comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certified import build_certified, certified_membership_flat
from .dynamics import PowerSystem
from .errors import BudgetExhaustedError, EmptyDomainError
from .gp import BetaSchedule, GpModel, Kernel, add_observation, empty_model, posterior
from .integrator import SimConfig, classify_stable, simulate
from .lyapunov import (
    ErrorBoundParams,
    GammaFunction,
    alpha_square,
    error_bound,
    estimate_decay_envelope,
    estimate_kappa,
    estimate_v,
)

DEFAULT_CANDIDATES = 2048
DEFAULT_RESTARTS = 8
NOISE_FLOOR = 1e-4
EXCLUSION_FRACTION = 0.01
ASCENT_MIN_STEP = 1e-4
ASCENT_MAX_ITERS = 50


class SamplingDomain:
    """Axis-aligned sampling box with exclusion balls around unstable points."""

    def __init__(self, lower, upper, r_excl: float | None = None):
        self.lower = np.asarray(lower, dtype=float).ravel()
        self.upper = np.asarray(upper, dtype=float).ravel()
        if self.lower.shape != self.upper.shape or np.any(self.lower >= self.upper):
            raise ValueError("need lower < upper per dimension")
        diag = float(np.linalg.norm(self.upper - self.lower))
        self.r_excl = EXCLUSION_FRACTION * diag if r_excl is None else float(r_excl)
        self._excluded: list[np.ndarray] = []

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def excluded_points(self) -> np.ndarray:
        if not self._excluded:
            return np.empty((0, self.dim))
        return np.vstack(self._excluded)

    def add_exclusion(self, x) -> None:
        x = np.asarray(x, dtype=float).ravel()
        if np.any(x < self.lower) or np.any(x > self.upper):
            raise ValueError("excluded point must lie inside the box")
        self._excluded.append(x)

    def admissible(self, X: np.ndarray) -> np.ndarray:
        """Boolean mask of rows of X outside every exclusion ball."""
        X = np.atleast_2d(X)
        mask = np.all((X >= self.lower) & (X <= self.upper), axis=1)
        if self._excluded:
            E = self.excluded_points
            d2 = np.sum((X[:, None, :] - E[None, :, :]) ** 2, axis=2)
            mask &= np.all(d2 > self.r_excl**2, axis=1)
        return mask

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(count, self.dim))


@dataclass(frozen=True)
class SamplingRecord:
    iteration: int
    point: np.ndarray
    stable: bool
    v_hat: float | None
    acquisition_value: float


@dataclass(frozen=True)
class UcbConfig:
    n_stable: int = 100
    delta: float = 0.05
    sim: SimConfig = field(default_factory=SimConfig)
    kernel: Kernel = field(default_factory=Kernel)
    beta_schedule: BetaSchedule = field(default_factory=BetaSchedule)
    scheme: str = "ucb"                  # 'ucb' | 'mean' | 'variance'
    candidate_count: int = DEFAULT_CANDIDATES
    restarts: int = DEFAULT_RESTARTS
    rng_seed: int = 0
    max_total_iterations: int | None = None   # default 20 * n_stable
    early_exit: bool = False
    noise_floor: float = NOISE_FLOOR
    noise_sigma: float | None = None     # overrides the error-bound wiring

    def __post_init__(self):
        if self.n_stable < 1:
            raise ValueError("n_stable must be >= 1")
        if not 0 < self.delta < 1:
            raise ValueError("delta must be in (0,1)")
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")
        if self.scheme not in ("ucb", "mean", "variance"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def iteration_cap(self) -> int:
        return self.max_total_iterations or 20 * self.n_stable


def acquisition(model: GpModel, beta_i: float, x, scheme: str = "ucb"):
    """Acquisition value(s) at x: mean + sqrt(beta) * sd (or a baseline variant)."""
    if beta_i < 0:
        raise ValueError("beta must be >= 0")
    mu, sd = posterior(model, x)
    if scheme == "mean":
        return mu
    if scheme == "variance":
        return sd
    return mu + np.sqrt(beta_i) * sd


def _ascend(model, domain, beta_i, scheme, x0, v0):
    """Coordinate finite-difference gradient ascent inside the box."""
    x, v = x0.copy(), v0
    span = domain.upper - domain.lower
    step = 0.01 * float(np.linalg.norm(span))
    h = 1e-5 * span
    for _ in range(ASCENT_MAX_ITERS):
        if step < ASCENT_MIN_STEP:
            break
        grad = np.empty(domain.dim)
        for k in range(domain.dim):
            e = np.zeros(domain.dim)
            e[k] = h[k]
            hi = float(acquisition(model, beta_i, x + e, scheme))
            lo = float(acquisition(model, beta_i, x - e, scheme))
            grad[k] = (hi - lo) / (2.0 * h[k])
        gn = float(np.linalg.norm(grad))
        if gn == 0.0:
            break
        cand = np.clip(x + step * grad / gn, domain.lower, domain.upper)
        if domain.admissible(cand[None, :])[0]:
            vc = float(acquisition(model, beta_i, cand, scheme))
            if vc > v:
                x, v = cand, vc
                step *= 1.5
                continue
        step *= 0.5
    return x, v


def maximize_acquisition(
    model: GpModel,
    domain: SamplingDomain,
    beta_i: float,
    cfg: UcbConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Heuristic acquisition maximizer: seeded candidates + gradient refinement.

    Ties are broken toward larger posterior sd, then the lexicographically
    smallest point, so an initially constant surface is still deterministic.
    """
    cands = domain.sample(rng, cfg.candidate_count)
    mask = domain.admissible(cands)
    if not np.any(mask):
        raise EmptyDomainError("exclusions cover every candidate")
    cands = cands[mask]
    vals = np.asarray(acquisition(model, beta_i, cands, cfg.scheme))
    order = np.argsort(vals)[::-1]
    top = order[: max(cfg.restarts, 1)]
    finalists = [(cands[k], float(vals[k])) for k in top]
    refined = [
        _ascend(model, domain, beta_i, cfg.scheme, x, v) for x, v in finalists
    ]
    best_v = max(v for _, v in refined)
    tied = [x for x, v in refined if v >= best_v - 1e-12]
    if len(tied) == 1:
        return tied[0]
    sds = np.array([posterior(model, x)[1] for x in tied])
    keep = [x for x, s in zip(tied, sds) if s >= sds.max() - 1e-12]
    keep.sort(key=lambda p: tuple(p))
    return keep[0]


def _auto_noise_sigma(sys, traj, alpha: GammaFunction, cfg: UcbConfig) -> float:
    """GP noise from the discretization error bound of the first stable run."""
    kappa = estimate_kappa(traj, sys, alpha)
    eta, lam = estimate_decay_envelope(sys)
    params = ErrorBoundParams(kappa=kappa, eta=eta, lam=lam, m=alpha.growth_exponent)
    bound = error_bound(
        params, cfg.sim.n_steps, cfg.sim.dt, float(np.linalg.norm(traj.final_state))
    )
    return max(bound, cfg.noise_floor)


def run_gp_ucb(
    sys: PowerSystem,
    domain: SamplingDomain,
    cfg: UcbConfig,
    alpha: GammaFunction | None = None,
):
    """Collect n_stable convergent samples and the GP trained on their values.

    Returns (model, records); unstable picks are recorded but excluded from
    the training set.  Raises BudgetExhaustedError when the iteration cap
    is hit first.
    """
    alpha = alpha or alpha_square()
    estimate_decay_envelope(sys)  # Hurwitz precondition
    rng = np.random.default_rng(cfg.rng_seed)
    certified = build_certified(sys) if cfg.early_exit else None
    model = None
    prior = empty_model(cfg.kernel, 1.0)  # placeholder until noise is wired
    records: list[SamplingRecord] = []
    n_stable = 0
    for it in range(1, cfg.iteration_cap + 1):
        current = model if model is not None else prior
        beta_i = cfg.beta_schedule.value(n_stable, cfg.delta, current)
        x = maximize_acquisition(current, domain, beta_i, cfg, rng)
        acq = float(acquisition(current, beta_i, x, cfg.scheme))
        traj = simulate(sys, x, cfg.sim)
        stable = classify_stable(traj, cfg.sim)
        if not stable and cfg.early_exit and not traj.truncated:
            stable = any(
                certified_membership_flat(certified, s) for s in traj.states
            )
        if stable:
            if traj.converged:
                v_hat = estimate_v(traj, alpha)
            else:
                # early-exit verdict: certificate guarantees convergence, the
                # recorded horizon still provides the quadrature
                vals = np.array([alpha.value(r) for r in traj.norms()])
                v_hat = float(np.trapezoid(vals, dx=traj.dt))
            if model is None:
                sigma = cfg.noise_sigma or _auto_noise_sigma(sys, traj, alpha, cfg)
                model = empty_model(cfg.kernel, sigma)
            model = add_observation(model, x, v_hat)
            n_stable += 1
            records.append(SamplingRecord(it, x, True, v_hat, acq))
            if n_stable >= cfg.n_stable:
                return model, records
        else:
            domain.add_exclusion(x)
            records.append(SamplingRecord(it, x, False, None, acq))
    raise BudgetExhaustedError(
        f"found {n_stable}/{cfg.n_stable} stable points in {cfg.iteration_cap} iterations"
    )


def c_max(records) -> float:
    """Largest estimated Lyapunov value among stable records."""
    vals = [r.v_hat for r in records if r.stable]
    if not vals:
        raise ValueError("no stable records")
    return max(vals)
