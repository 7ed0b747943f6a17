"""Classical energy function and the certified ellipsoidal ROA.

The energy function is the branch potential plus kinetic energy,

    V*(psi, dpsi) = sum_branches (1/B_ij) * U(psi_ij) + 0.5 * sum_i m_i dpsi_i^2
    U(s) = cos ts_ij - cos(ts_ij + s) - s * sin ts_ij,

which is positive definite near the origin and dissipates at rate
-sum_i d_i dpsi_i^2 along trajectories.  The certified region is the
ellipsoid  psi^T L psi + dpsi^T Lam dpsi <= C  with L the (grounded)
branch Laplacian weighted by 1/B_ij, Lam = diag(m), and

    C = min_ij (1/B_ij) (2 cos lam - (pi - 2 lam) sin lam),
    lam = max_ij |ts_ij|.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import PowerSystem
from .errors import CertificateVoidError, DimensionError


@dataclass(frozen=True)
class CertifiedRoa:
    laplacian: np.ndarray    # (M, M) over dynamic machines
    lambda_mat: np.ndarray   # (M, M) diagonal inertia matrix
    c_lambda: float
    max_angle: float

    def quadratic_form(self, psi: np.ndarray, psi_dot: np.ndarray) -> float:
        psi = np.asarray(psi, dtype=float).ravel()
        psi_dot = np.asarray(psi_dot, dtype=float).ravel()
        M = self.laplacian.shape[0]
        if psi.shape[0] != M or psi_dot.shape[0] != M:
            raise DimensionError("state dimension does not match certificate")
        return float(psi @ self.laplacian @ psi + psi_dot @ self.lambda_mat @ psi_dot)


def energy_v_star(sys: PowerSystem, psi, psi_dot) -> float:
    """Energy function value at (psi, psi_dot) over the dynamic machines."""
    psi = np.asarray(psi, dtype=float).ravel()
    psi_dot = np.asarray(psi_dot, dtype=float).ravel()
    if psi.shape[0] != sys.n_machines or psi_dot.shape[0] != sys.n_machines:
        raise DimensionError("state dimension does not match system")
    psi_full = np.zeros(sys.n_nodes)
    psi_full[sys.dynamic_nodes] = psi
    ts = sys.branch_angle_offsets()
    s = psi_full[sys.branch_i] - psi_full[sys.branch_j]
    potential = np.sum(
        (np.cos(ts) - np.cos(ts + s) - s * np.sin(ts)) / sys.susceptance
    )
    kinetic = 0.5 * float(sys.inertia[sys.dynamic_nodes] @ psi_dot**2)
    return float(potential) + kinetic


def energy_v_star_flat(sys: PowerSystem, x) -> float:
    """Energy function on a flat [psi, psi_dot] state vector."""
    x = np.asarray(x, dtype=float).ravel()
    m = sys.n_machines
    return energy_v_star(sys, x[:m], x[m:])


def build_certified(sys: PowerSystem) -> CertifiedRoa:
    """Construct the certified ellipsoid for a power system.

    The Laplacian is grounded at the swing bus (its row and column removed)
    so the quadratic form acts on dynamic machine coordinates only.
    """
    n = sys.n_nodes
    L = np.zeros((n, n))
    for a, b, bsus in zip(sys.branch_i, sys.branch_j, sys.susceptance):
        w = 1.0 / bsus
        L[a, a] += w
        L[b, b] += w
        L[a, b] -= w
        L[b, a] -= w
    dyn = sys.dynamic_nodes
    L = L[np.ix_(dyn, dyn)]
    lam = float(np.max(np.abs(sys.branch_angle_offsets())))
    margin = 2.0 * math.cos(lam) - (math.pi - 2.0 * lam) * math.sin(lam)
    c = float(np.min(1.0 / sys.susceptance)) * margin
    if c <= 0:
        raise CertificateVoidError(
            f"certificate constant {c:.3e} <= 0 at max angle {lam:.3f} rad"
        )
    return CertifiedRoa(
        laplacian=L,
        lambda_mat=np.diag(sys.inertia[dyn]),
        c_lambda=c,
        max_angle=lam,
    )


def certified_membership(roa: CertifiedRoa, psi, psi_dot) -> bool:
    """True iff the quadratic form is within the certified level."""
    return roa.quadratic_form(psi, psi_dot) <= roa.c_lambda


def certified_membership_flat(roa: CertifiedRoa, x) -> bool:
    x = np.asarray(x, dtype=float).ravel()
    m = roa.laplacian.shape[0]
    return certified_membership(roa, x[:m], x[m:])


def boundary_polyline(roa: CertifiedRoa, dims: tuple[int, int], n_points: int = 256):
    """2-D slice of the ellipsoid boundary with off-plane coordinates at zero.

    dims index the flat [psi, psi_dot] state; returns an (n_points, 2) array
    or None when the slice quadratic form is degenerate in those directions.
    """
    M = roa.laplacian.shape[0]
    Q = np.zeros((2 * M, 2 * M))
    Q[:M, :M] = roa.laplacian
    Q[M:, M:] = roa.lambda_mat
    a = Q[dims[0], dims[0]]
    bq = Q[dims[1], dims[1]]
    cross = Q[dims[0], dims[1]]
    sub = np.array([[a, cross], [cross, bq]])
    vals, vecs = np.linalg.eigh(sub)
    if np.any(vals <= 0):
        return None
    t = np.linspace(0.0, 2.0 * math.pi, n_points)
    circ = np.stack([np.cos(t), np.sin(t)])
    pts = vecs @ (np.sqrt(roa.c_lambda) / np.sqrt(vals)[:, None] * circ)
    return pts.T
