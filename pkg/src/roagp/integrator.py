"""Fixed-step RK4 integration, trajectory recording, stability screening.

The swing-equation fast path runs in a compiled Cython core when available;
set ``ROAGP_FORCE_PURE=1`` to force the NumPy fallback.  Generic callables
(used for test systems like dx/dt = -x) always take the Python path.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _simpure
from .dynamics import PowerSystem, vector_field
from .errors import NonFiniteError

if os.environ.get("ROAGP_FORCE_PURE") == "1":
    _core = _simpure
else:
    try:
        from . import _simcore as _core
    except ImportError:
        _core = _simpure

BACKEND = "compiled" if _core.COMPILED else "pure"

BLOWUP_NORM = 1e6


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    horizon: float = 100.0
    convergence_radius: float = 0.01

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.horizon < self.dt:
            raise ValueError("horizon must be >= dt")
        if self.convergence_radius <= 0:
            raise ValueError("convergence_radius must be > 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass(frozen=True)
class Trajectory:
    """Recorded states at t_i = (i-1)*dt; possibly truncated on blow-up."""

    states: np.ndarray       # (n_recorded, dim)
    dt: float
    truncated: bool
    converged: bool

    @property
    def initial_state(self) -> np.ndarray:
        return self.states[0]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.states))

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def _field(sys_or_f):
    if isinstance(sys_or_f, PowerSystem):
        return lambda x: vector_field(sys_or_f, x)
    return sys_or_f


def rk4_step(sys_or_f, x, dt: float) -> np.ndarray:
    """One classical RK4 step; raises NonFiniteError on blow-up."""
    f = _field(sys_or_f)
    x = np.asarray(x, dtype=float)
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("RK4 step produced non-finite state")
    return out


def _swing_arrays(sys: PowerSystem):
    idx = sys.node_state_index()
    dyn = sys.dynamic_nodes
    return (
        np.ascontiguousarray(sys.inertia[dyn], dtype=float),
        np.ascontiguousarray(sys.damping[dyn], dtype=float),
        np.ascontiguousarray(1.0 / sys.susceptance, dtype=float),
        np.ascontiguousarray(sys.branch_angle_offsets(), dtype=float),
        np.ascontiguousarray(idx[sys.branch_i], dtype=np.intp),
        np.ascontiguousarray(idx[sys.branch_j], dtype=np.intp),
    )


def simulate(sys_or_f, x0, cfg: SimConfig) -> Trajectory:
    """Integrate from x0 over [0, horizon]; truncates (unstable) on blow-up."""
    x0 = np.asarray(x0, dtype=float).ravel()
    n = cfg.n_steps
    if isinstance(sys_or_f, PowerSystem):
        ia, da, wv, ts, sa, sb = _swing_arrays(sys_or_f)
        if x0.shape[0] != 2 * len(ia):
            from .errors import DimensionError

            raise DimensionError("initial state dimension mismatch")
        states, n_rec, truncated = _core.simulate_swing(
            ia, da, wv, ts, sa, sb, x0, cfg.dt, n, BLOWUP_NORM
        )
        states = np.asarray(states)[:n_rec].copy()
    else:
        f = _field(sys_or_f)
        states = np.empty((n + 1, x0.shape[0]))
        states[0] = x0
        x = x0
        truncated = False
        n_rec = n + 1
        for i in range(1, n + 1):
            try:
                x = rk4_step(f, x, cfg.dt)
            except NonFiniteError:
                truncated, n_rec = True, i
                break
            if np.linalg.norm(x) > BLOWUP_NORM:
                truncated, n_rec = True, i
                break
            states[i] = x
        states = states[:n_rec].copy()
    converged = (not truncated) and float(
        np.linalg.norm(states[-1])
    ) < cfg.convergence_radius
    return Trajectory(states=states, dt=cfg.dt, truncated=truncated, converged=converged)


def classify_stable(traj: Trajectory, cfg: SimConfig) -> bool:
    """True iff the trajectory ran the full horizon and ended inside radius xi."""
    if traj.truncated:
        return False
    return float(np.linalg.norm(traj.final_state)) < cfg.convergence_radius


def early_exit_stable(traj_prefix: Trajectory, certified_membership) -> bool:
    """True as soon as any prefix state enters the certified region.

    ``certified_membership`` is a predicate on full state vectors.  Only a
    stability verdict shortcut: Lyapunov values still require a full run.
    """
    return any(certified_membership(s) for s in traj_prefix.states)


def export_csv(traj: Trajectory, path) -> None:
    m = traj.states.shape[1] // 2
    header = (
        "t,"
        + ",".join(f"psi_{k + 1}" for k in range(m))
        + ","
        + ",".join(f"psidot_{k + 1}" for k in range(m))
    )
    data = np.column_stack([traj.times, traj.states])
    np.savetxt(path, data, delimiter=",", header=header, comments="")
