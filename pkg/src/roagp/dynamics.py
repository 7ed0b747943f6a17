"""Power network model and the swing-equation vector field.

Machine rotor dynamics in angle-deviation coordinates around a power-flow
solution: for every dynamic machine i,

    m_i * dd(psi_i) = -d_i * d(psi_i)
                      + sum_{j in N_i} (1/B_ij) * (sin ts_ij - sin(ts_ij + psi_ij))

where ts_ij is the steady-state angle difference and psi_ij = psi_i - psi_j.
An optional swing node is pinned at psi = dpsi = 0 and carries no state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, EquilibriumError, ParseError, TopologyError

RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class PowerSystem:
    """Immutable network description.

    Arrays are indexed by node; ``swing_bus`` (if any) names the node whose
    angle deviation is held at zero.  The dynamic state vector is
    ``[psi_1..psi_M, dpsi_1..dpsi_M]`` over the M non-swing machines.
    """

    inertia: np.ndarray          # (n_nodes,)
    damping: np.ndarray          # (n_nodes,)
    power: np.ndarray            # (n_nodes,)
    steady_angles: np.ndarray    # (n_nodes,)
    branch_i: np.ndarray         # (n_branches,) int
    branch_j: np.ndarray         # (n_branches,) int
    susceptance: np.ndarray      # (n_branches,)
    swing_bus: int | None = None
    residual_tol: float = RESIDUAL_TOL
    # derived, filled in __post_init__
    dynamic_nodes: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.inertia)
        for name in ("damping", "power", "steady_angles"):
            if len(getattr(self, name)) != n:
                raise ParseError(f"{name} length != number of machines")
        if np.any(self.susceptance <= 0):
            raise ParseError("every branch susceptance must be > 0")
        if self.swing_bus is not None and not (0 <= self.swing_bus < n):
            raise ParseError("swing_bus index out of range")
        if np.any(self.branch_i == self.branch_j):
            raise ParseError("self-loop branch")
        if np.any((self.branch_i < 0) | (self.branch_i >= n)) or np.any(
            (self.branch_j < 0) | (self.branch_j >= n)
        ):
            raise ParseError("branch endpoint out of range")
        dyn = np.array(
            [k for k in range(n) if k != self.swing_bus], dtype=np.intp
        )
        object.__setattr__(self, "dynamic_nodes", dyn)
        self._check_connected()
        self._check_equilibrium()

    # -- invariants ------------------------------------------------------

    def _check_connected(self):
        n = self.n_nodes
        adj = [[] for _ in range(n)]
        for a, b in zip(self.branch_i, self.branch_j):
            adj[a].append(b)
            adj[b].append(a)
        seen = {0}
        stack = [0]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != n:
            raise TopologyError("machine branch graph is disconnected")

    def _check_equilibrium(self):
        """Mechanical power must balance the steady-state electrical power."""
        res = self.power.copy()
        ts = self.steady_angles
        for a, b, bsus in zip(self.branch_i, self.branch_j, self.susceptance):
            s = math.sin(ts[a] - ts[b]) / bsus
            res[a] -= s
            res[b] += s
        res = res[self.dynamic_nodes]
        worst = float(np.max(np.abs(res))) if len(res) else 0.0
        if worst > self.residual_tol:
            raise EquilibriumError(
                f"steady-state residual {worst:.3e} exceeds {self.residual_tol:.1e}"
            )

    # -- basic queries ----------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.inertia)

    @property
    def n_machines(self) -> int:
        """Number of dynamic (state-carrying) machines."""
        return len(self.dynamic_nodes)

    @property
    def state_dim(self) -> int:
        return 2 * self.n_machines

    def branch_angle_offsets(self) -> np.ndarray:
        """Steady-state angle difference ts_ij per branch."""
        return self.steady_angles[self.branch_i] - self.steady_angles[self.branch_j]

    def node_state_index(self) -> np.ndarray:
        """Map node -> position in the psi block of the state vector (-1 for swing)."""
        idx = np.full(self.n_nodes, -1, dtype=np.intp)
        idx[self.dynamic_nodes] = np.arange(self.n_machines)
        return idx

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Analytic Jacobian of the vector field at state x."""
        x = _check_state(self, x)
        m = self.n_machines
        psi_full = np.zeros(self.n_nodes)
        psi_full[self.dynamic_nodes] = x[:m]
        idx = self.node_state_index()
        # d(accel_i)/d(psi_k): -K_ik with K the cos-weighted Laplacian
        K = np.zeros((self.n_nodes, self.n_nodes))
        ts = self.branch_angle_offsets()
        for a, b, bsus, t in zip(self.branch_i, self.branch_j, self.susceptance, ts):
            w = math.cos(t + psi_full[a] - psi_full[b]) / bsus
            K[a, a] += w
            K[b, b] += w
            K[a, b] -= w
            K[b, a] -= w
        dyn = self.dynamic_nodes
        Kdyn = K[np.ix_(dyn, dyn)]
        minv = 1.0 / self.inertia[dyn]
        J = np.zeros((2 * m, 2 * m))
        J[:m, m:] = np.eye(m)
        J[m:, :m] = -Kdyn * minv[:, None]
        J[m:, m:] = np.diag(-self.damping[dyn] * minv)
        return J


def _check_state(sys: PowerSystem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != sys.state_dim:
        raise DimensionError(
            f"state dimension {x.shape[0]} != expected {sys.state_dim}"
        )
    return x


def vector_field(sys: PowerSystem, x) -> np.ndarray:
    """Evaluate (dpsi, ddpsi) at state x in perturbed coordinates."""
    x = _check_state(sys, x)
    m = sys.n_machines
    psi_full = np.zeros(sys.n_nodes)
    psi_full[sys.dynamic_nodes] = x[:m]
    ts = sys.branch_angle_offsets()
    dpsi = psi_full[sys.branch_i] - psi_full[sys.branch_j]
    flow = (np.sin(ts) - np.sin(ts + dpsi)) / sys.susceptance
    acc = np.zeros(sys.n_nodes)
    np.add.at(acc, sys.branch_i, flow)
    np.add.at(acc, sys.branch_j, -flow)
    dyn = sys.dynamic_nodes
    out = np.empty(2 * m)
    out[:m] = x[m:]
    out[m:] = (acc[dyn] - sys.damping[dyn] * x[m:]) / sys.inertia[dyn]
    return out


def build_smib() -> PowerSystem:
    """Single machine connected to an infinite bus pinned at zero.

    m=12, d=20, p=0.5, B=0.1 per unit; the steady angle satisfies
    sin(ts_12) = p * B = 0.05.
    """
    theta = math.asin(0.05)
    return PowerSystem(
        inertia=np.array([12.0, 0.0]),
        damping=np.array([20.0, 0.0]),
        power=np.array([0.5, -0.5]),
        steady_angles=np.array([theta, 0.0]),
        branch_i=np.array([0]),
        branch_j=np.array([1]),
        susceptance=np.array([0.1]),
        swing_bus=1,
    )


_SCHEMA_FIELDS = {"machines", "branches", "steady_angles", "angle_unit", "swing_bus"}
_MACHINE_FIELDS = {"inertia", "damping", "power"}
_BRANCH_FIELDS = {"from", "to", "susceptance"}


def load_system(config_path) -> PowerSystem:
    """Load a PowerSystem from a JSON description file.

    Schema: ``machines`` (list of {inertia, damping, power}), ``branches``
    (list of {from, to, susceptance}), ``steady_angles`` (radians),
    ``angle_unit`` ("rad"), ``swing_bus`` (index or null).  Unknown fields
    are rejected.
    """
    try:
        with open(config_path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as e:
        raise ParseError(f"system file not found: {config_path}") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON in {config_path}: {e}") from e

    if not isinstance(raw, dict):
        raise ParseError("top-level JSON value must be an object")
    unknown = set(raw) - _SCHEMA_FIELDS
    if unknown:
        raise ParseError(f"unknown fields: {sorted(unknown)}")
    missing = _SCHEMA_FIELDS - {"swing_bus"} - set(raw)
    if missing:
        raise ParseError(f"missing fields: {sorted(missing)}")
    if raw["angle_unit"] != "rad":
        raise ParseError(f"unsupported angle_unit {raw['angle_unit']!r}")

    machines = raw["machines"]
    if not machines:
        raise ParseError("machines list is empty")
    for mrec in machines:
        if set(mrec) != _MACHINE_FIELDS:
            raise ParseError(f"machine record fields must be {sorted(_MACHINE_FIELDS)}")
    branches = raw["branches"]
    for brec in branches:
        if set(brec) != _BRANCH_FIELDS:
            raise ParseError(f"branch record fields must be {sorted(_BRANCH_FIELDS)}")

    try:
        return PowerSystem(
            inertia=np.array([float(m["inertia"]) for m in machines]),
            damping=np.array([float(m["damping"]) for m in machines]),
            power=np.array([float(m["power"]) for m in machines]),
            steady_angles=np.array([float(a) for a in raw["steady_angles"]]),
            branch_i=np.array([int(b["from"]) for b in branches], dtype=np.intp),
            branch_j=np.array([int(b["to"]) for b in branches], dtype=np.intp),
            susceptance=np.array([float(b["susceptance"]) for b in branches]),
            swing_bus=None if raw.get("swing_bus") is None else int(raw["swing_bus"]),
        )
    except (TypeError, ValueError, KeyError) as e:
        raise ParseError(f"malformed system file: {e}") from e
