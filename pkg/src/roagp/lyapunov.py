"""Converse-Lyapunov value estimation and its discretization error bound.

The Lyapunov value of a convergent trajectory is the time integral of
alpha(||phi(x,t)||) for a class-Gamma comparison function alpha.  The
recorded grid is integrated with the composite trapezoidal rule; the bound
on the resulting error is

    kappa * n * dt^3 / 12  +  eta^m * ||phi(x,t_n)||^m / (m * lambda)

with kappa a bound on the second time derivative of alpha(||phi||) over the
horizon and (eta, lambda) an exponential-decay envelope of the linearized
dynamics.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import PowerSystem, vector_field
from .errors import DegenerateTrajectoryError, NotConvergedError, NotHurwitzError
from .integrator import Trajectory

NORM_FLOOR = 1e-9
DECAY_SAFETY = 0.9


@dataclass(frozen=True)
class GammaFunction:
    """Comparison function alpha with derivatives and growth exponent m.

    Requirements: alpha(0) = 0, strictly increasing, C^2 on z > 0, and
    alpha(z) <= z**m for z >= 0.
    """

    value: Callable[[float], float]
    deriv: Callable[[float], float]
    second_deriv: Callable[[float], float]
    growth_exponent: float


def alpha_square() -> GammaFunction:
    """The default comparison function alpha(z) = z^2 (m = 2)."""
    return GammaFunction(
        value=lambda z: z * z,
        deriv=lambda z: 2.0 * z,
        second_deriv=lambda z: 2.0,
        growth_exponent=2.0,
    )


@dataclass(frozen=True)
class ErrorBoundParams:
    kappa: float
    eta: float
    lam: float
    m: float

    def __post_init__(self):
        if min(self.eta, self.lam, self.m) <= 0 or self.kappa < 0:
            raise ValueError("eta, lam, m must be > 0 and kappa >= 0")


def estimate_v(traj: Trajectory, alpha: GammaFunction) -> float:
    """Trapezoidal estimate of the converse Lyapunov value along traj."""
    if not traj.converged:
        raise NotConvergedError("Lyapunov value defined only for convergent trajectories")
    vals = np.array([alpha.value(r) for r in traj.norms()])
    return float(np.trapezoid(vals, dx=traj.dt))


def error_bound(params: ErrorBoundParams, n: int, dt: float, tail_norm: float) -> float:
    """Upper bound on |V - V_hat| from quadrature error plus truncated tail."""
    if tail_norm < 0:
        raise ValueError("tail_norm must be >= 0")
    quad = params.kappa * n * dt**3 / 12.0
    tail = params.eta**params.m * tail_norm**params.m / (params.m * params.lam)
    return quad + tail


def _second_time_derivative(phi, f, jvp, alpha: GammaFunction) -> float:
    """d^2/dt^2 of alpha(||phi(t)||) from state, velocity and f'f."""
    r = float(np.linalg.norm(phi))
    pf = float(phi @ f)
    ff = float(f @ f)
    pjf = float(phi @ jvp)
    a1 = alpha.deriv(r)
    a2 = alpha.second_deriv(r)
    return a2 * pf * pf / r**2 + a1 * ((ff + pjf) / r - pf * pf / r**3)


def estimate_kappa(
    traj: Trajectory,
    sys_or_f,
    alpha: GammaFunction,
    norm_floor: float = NORM_FLOOR,
) -> float:
    """Max |d^2/dt^2 alpha(||phi||)| along the recorded trajectory.

    The Jacobian-vector product f'(phi) f is formed by central finite
    differences, so no analytic Jacobian is needed.  States with norm below
    norm_floor are skipped (the expression is singular at the origin).
    """
    if isinstance(sys_or_f, PowerSystem):
        f = lambda x: vector_field(sys_or_f, x)
    else:
        f = sys_or_f
    best = None
    for phi in traj.states:
        r = float(np.linalg.norm(phi))
        if r <= norm_floor:
            continue
        fx = np.asarray(f(phi), dtype=float)
        fn = float(np.linalg.norm(fx))
        if fn == 0.0:
            jvp = np.zeros_like(fx)
        else:
            u = fx / fn
            h = 1e-6 * (1.0 + r)
            jvp = (np.asarray(f(phi + h * u)) - np.asarray(f(phi - h * u))) / (2.0 * h) * fn
        val = abs(_second_time_derivative(phi, fx, jvp, alpha))
        if best is None or val > best:
            best = val
    if best is None:
        raise DegenerateTrajectoryError("all states below norm_floor")
    return best


def estimate_decay_envelope(sys_or_jac, safety_factor: float = DECAY_SAFETY):
    """Exponential envelope constants (eta, lambda) from the origin Jacobian.

    lambda is the slowest eigenvalue decay rate scaled by safety_factor;
    eta is the eigenvector-matrix condition number.  Raises NotHurwitzError
    when the linearization is not strictly stable.
    """
    if isinstance(sys_or_jac, PowerSystem):
        J = sys_or_jac.jacobian(np.zeros(sys_or_jac.state_dim))
    else:
        J = np.atleast_2d(np.asarray(sys_or_jac, dtype=float))
    eigvals, eigvecs = np.linalg.eig(J)
    max_real = float(np.max(eigvals.real))
    if max_real >= 0:
        raise NotHurwitzError(f"max Re(eig) = {max_real:.3e} >= 0")
    lam = abs(max_real) * safety_factor
    eta = float(np.linalg.cond(eigvecs))
    return eta, lam
