"""Confidence-region evaluation, rasterization, slices and volume ratios.

A state belongs to the confidence region when the GP upper confidence
bound (plus the energy-function offset, when the region extends an
existing certificate) stays below the largest observed Lyapunov value:

    [V*(x)] + mu(x) + sqrt(beta) * sigma(x) <= c_max
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .certified import CertifiedRoa, energy_v_star_flat
from .dynamics import PowerSystem
from .errors import ConsistencyError
from .gp import GpModel, posterior, refactorize


@dataclass(frozen=True)
class ConfidenceRegionSpec:
    """Frozen inputs of the membership inequality.

    In offset mode the model must have been trained on V_hat - V* residual
    observations (see build_spec), and v_star evaluates the offset on flat
    state vectors.
    """

    model: GpModel
    beta_n: float
    c_max: float
    delta: float
    mode: str = "equilibrium"          # 'equilibrium' | 'offset'
    v_star: object = None              # callable on flat states, offset mode only

    def __post_init__(self):
        if self.mode not in ("equilibrium", "offset"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "offset" and self.v_star is None:
            raise ValueError("offset mode needs a v_star callable")
        if self.c_max < 0 or self.beta_n < 0 or not 0 < self.delta < 1:
            raise ValueError("invalid spec parameters")


def build_spec(
    model: GpModel,
    records,
    beta_n: float,
    delta: float,
    mode: str = "equilibrium",
    sys: PowerSystem | None = None,
) -> ConfidenceRegionSpec:
    """Assemble a region spec from a finished sampling run.

    c_max is the largest stable-record Lyapunov value.  In offset mode the
    GP is retrained on the residuals V_hat - V* at the same inputs with the
    same kernel and noise.
    """
    stable = [r for r in records if r.stable]
    if not stable:
        raise ConsistencyError("no stable records")
    if model.n_train != len(stable):
        raise ConsistencyError(
            f"model has {model.n_train} observations, records have {len(stable)}"
        )
    cmax = max(r.v_hat for r in stable)
    v_star = None
    if mode == "offset":
        if sys is None:
            raise ValueError("offset mode needs the power system")
        v_star = lambda x: energy_v_star_flat(sys, x)
        resid = model.y - np.array([v_star(x) for x in model.X])
        model = refactorize(replace(model, y=resid))
    return ConfidenceRegionSpec(
        model=model, beta_n=beta_n, c_max=cmax, delta=delta, mode=mode, v_star=v_star
    )


def ucb_values(spec: ConfidenceRegionSpec, X: np.ndarray):
    """Left-hand side of the membership inequality, plus (mu, sigma)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mu, sd = posterior(spec.model, X)
    vals = mu + math.sqrt(spec.beta_n) * sd
    if spec.mode == "offset":
        vals = vals + np.array([spec.v_star(x) for x in X])
    return vals, mu, sd


def confidence_membership(spec: ConfidenceRegionSpec, x) -> bool:
    vals, _, _ = ucb_values(spec, np.asarray(x, dtype=float)[None, :])
    return bool(vals[0] <= spec.c_max)


@dataclass(frozen=True)
class RegionGrid:
    """Cell-center membership raster over a 2-D plane of the state space.

    ``dims`` are the state indices spanned by the grid axes; all other
    coordinates are fixed at ``fixed_value`` (the equilibrium).
    """

    lower: np.ndarray
    upper: np.ndarray
    resolution: tuple[int, int]
    dims: tuple[int, int]
    membership: np.ndarray   # (res_x, res_y) bool
    mu: np.ndarray
    sigma: np.ndarray
    state_dim: int
    fixed_value: float = 0.0

    def cell_centers_1d(self):
        cx = self.lower[0] + (np.arange(self.resolution[0]) + 0.5) * (
            self.upper[0] - self.lower[0]
        ) / self.resolution[0]
        cy = self.lower[1] + (np.arange(self.resolution[1]) + 0.5) * (
            self.upper[1] - self.lower[1]
        ) / self.resolution[1]
        return cx, cy

    def member_points(self) -> np.ndarray:
        """Full-dimensional centers of member cells."""
        cx, cy = self.cell_centers_1d()
        ii, jj = np.nonzero(self.membership)
        pts = np.full((len(ii), self.state_dim), self.fixed_value)
        pts[:, self.dims[0]] = cx[ii]
        pts[:, self.dims[1]] = cy[jj]
        return pts

    def contains_origin_cell(self) -> bool:
        """Membership of the cell whose center is nearest the origin."""
        cx, cy = self.cell_centers_1d()
        return bool(self.membership[np.argmin(np.abs(cx)), np.argmin(np.abs(cy))])


def build_region_grid(
    spec: ConfidenceRegionSpec,
    box,
    resolution,
    dims: tuple[int, int] | None = None,
    state_dim: int | None = None,
) -> RegionGrid:
    """Rasterize membership over cell centers of a 2-D box.

    ``box`` is ((lo_x, lo_y), (hi_x, hi_y)) for the two plotted axes; for
    systems with more than two state dimensions pass ``dims`` and
    ``state_dim`` and the remaining coordinates sit at the equilibrium.
    """
    lower = np.asarray(box[0], dtype=float)
    upper = np.asarray(box[1], dtype=float)
    rx, ry = (resolution, resolution) if np.isscalar(resolution) else resolution
    if rx < 2 or ry < 2:
        raise ValueError("resolution must be >= 2 per axis")
    dims = dims or (0, 1)
    state_dim = state_dim or 2
    if dims[0] == dims[1] or max(dims) >= state_dim:
        raise IndexError(f"bad plane dims {dims} for state dimension {state_dim}")
    grid = RegionGrid(
        lower=lower,
        upper=upper,
        resolution=(rx, ry),
        dims=dims,
        membership=np.zeros((rx, ry), dtype=bool),
        mu=np.zeros((rx, ry)),
        sigma=np.zeros((rx, ry)),
        state_dim=state_dim,
    )
    cx, cy = grid.cell_centers_1d()
    XX, YY = np.meshgrid(cx, cy, indexing="ij")
    pts = np.full((rx * ry, state_dim), grid.fixed_value)
    pts[:, dims[0]] = XX.ravel()
    pts[:, dims[1]] = YY.ravel()
    vals, mu, sd = ucb_values(spec, pts)
    return replace(
        grid,
        membership=(vals <= spec.c_max).reshape(rx, ry),
        mu=mu.reshape(rx, ry),
        sigma=sd.reshape(rx, ry),
    )


@dataclass(frozen=True)
class VolumeRatio:
    ratio: float                  # inf when the certified count is zero
    confidence_count: int
    certified_count: int
    n_samples: int
    halfwidth: float              # Wilson-interval based uncertainty on the ratio

    @property
    def infinite(self) -> bool:
        return math.isinf(self.ratio)


def _wilson_halfwidth(k: int, n: int, z: float = 1.96) -> float:
    if n == 0:
        return 0.0
    p = k / n
    denom = 1.0 + z * z / n
    return z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom


def volume_ratio(
    spec: ConfidenceRegionSpec,
    certified: CertifiedRoa,
    box,
    n_samples: int,
    seed: int,
) -> VolumeRatio:
    """Monte Carlo volume of the confidence region relative to the ellipsoid."""
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    lower = np.asarray(box[0], dtype=float)
    upper = np.asarray(box[1], dtype=float)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lower, upper, size=(n_samples, lower.shape[0]))
    vals, _, _ = ucb_values(spec, pts)
    n_conf = int(np.sum(vals <= spec.c_max))
    M = certified.laplacian.shape[0]
    quad = (
        np.einsum("ni,ij,nj->n", pts[:, :M], certified.laplacian, pts[:, :M])
        + np.einsum("ni,ij,nj->n", pts[:, M:], certified.lambda_mat, pts[:, M:])
    )
    n_cert = int(np.sum(quad <= certified.c_lambda))
    if n_cert == 0:
        return VolumeRatio(math.inf, n_conf, 0, n_samples, math.inf)
    ratio = n_conf / n_cert
    w_conf = _wilson_halfwidth(n_conf, n_samples)
    w_cert = _wilson_halfwidth(n_cert, n_samples)
    rel = 0.0
    if n_conf > 0:
        rel = math.sqrt(
            (w_conf / (n_conf / n_samples)) ** 2 + (w_cert / (n_cert / n_samples)) ** 2
        )
    return VolumeRatio(ratio, n_conf, n_cert, n_samples, ratio * rel)


def project_slices(
    spec: ConfidenceRegionSpec,
    plane_pairs,
    box,
    resolution,
    state_dim: int,
) -> list[RegionGrid]:
    """Membership slices through the equilibrium for each 2-D plane.

    ``box`` holds full-dimensional lower/upper bounds; each slice reuses
    the bounds of its two plotted dimensions.
    """
    lower = np.asarray(box[0], dtype=float)
    upper = np.asarray(box[1], dtype=float)
    grids = []
    for a, b in plane_pairs:
        if a == b or min(a, b) < 0 or max(a, b) >= state_dim:
            raise IndexError(f"bad plane pair ({a}, {b})")
        grids.append(
            build_region_grid(
                spec,
                ((lower[a], lower[b]), (upper[a], upper[b])),
                resolution,
                dims=(a, b),
                state_dim=state_dim,
            )
        )
    return grids


def export_grid_csv(grid: RegionGrid, path) -> None:
    cx, cy = grid.cell_centers_1d()
    XX, YY = np.meshgrid(cx, cy, indexing="ij")
    data = np.column_stack(
        [
            XX.ravel(),
            YY.ravel(),
            grid.membership.ravel().astype(int),
            grid.mu.ravel(),
            grid.sigma.ravel(),
        ]
    )
    np.savetxt(
        path, data, delimiter=",", header="x,y,member,mu,sigma", comments=""
    )
