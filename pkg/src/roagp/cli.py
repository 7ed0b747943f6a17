"""Command-line pipeline: sampling runs, region rasters, volume reports.

Set ROAGP_THREADS to cap BLAS/OpenMP threads (must happen before NumPy is
imported, which is why this module touches the environment first).
"""

import os

if os.environ.get("ROAGP_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["ROAGP_THREADS"])

import csv
import json
import math
import sys as _sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .certified import boundary_polyline, build_certified
from .dynamics import load_system
from .errors import (
    BudgetExhaustedError,
    ConsistencyError,
    EquilibriumError,
    FactorizationError,
    ParseError,
    RoaError,
    TopologyError,
)
from .gp import (
    BetaSchedule,
    Kernel,
    beta as beta_fn,
    gamma_bound,
    load_checkpoint,
    rkhs_norm_sq,
    save_checkpoint,
)
from .integrator import SimConfig
from .region import (
    build_spec,
    export_grid_csv,
    project_slices,
    volume_ratio,
)
from .ucb import SamplingDomain, SamplingRecord, UcbConfig, run_gp_ucb

EXIT_CODES = {
    ParseError: 2,
    EquilibriumError: 3,
    TopologyError: 4,
    BudgetExhaustedError: 5,
    FactorizationError: 6,
    ConsistencyError: 7,
}


def _fail(err: RoaError):
    code = EXIT_CODES.get(type(err), 1)
    click.echo(f"{type(err).__name__}: {err}", err=True)
    _sys.exit(code)


def _load_run_config(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read run config {path}: {e}") from e


def _ucb_config(doc: dict, seed: int) -> UcbConfig:
    sim = doc.get("sim", {})
    kern = doc.get("kernel", {})
    return UcbConfig(
        n_stable=int(doc.get("n_stable", 100)),
        delta=float(doc.get("delta", 0.05)),
        sim=SimConfig(
            dt=float(sim.get("dt", 0.01)),
            horizon=float(sim.get("horizon", 100.0)),
            convergence_radius=float(sim.get("convergence_radius", 0.01)),
        ),
        kernel=Kernel(
            kind=kern.get("kind", "se"),
            length_scale=float(kern.get("length_scale", 1.0)),
        ),
        beta_schedule=BetaSchedule(mode=doc.get("beta_mode", "fixed:4")),
        scheme=doc.get("scheme", "ucb"),
        candidate_count=int(doc.get("candidate_count", 2048)),
        restarts=int(doc.get("restarts", 8)),
        rng_seed=seed,
        max_total_iterations=doc.get("max_total_iterations"),
        early_exit=bool(doc.get("early_exit", False)),
        noise_sigma=doc.get("noise_sigma"),
    )


def write_records_csv(records, path) -> None:
    dim = len(records[0].point)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["iter", "stable"]
            + [f"x_{k + 1}" for k in range(dim)]
            + ["v_hat", "acquisition"]
        )
        for r in records:
            w.writerow(
                [r.iteration, int(r.stable)]
                + [repr(float(v)) for v in r.point]
                + [
                    "" if r.v_hat is None else repr(float(r.v_hat)),
                    repr(float(r.acquisition_value)),
                ]
            )


def read_records_csv(path):
    records = []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    dim = sum(1 for h in header if h.startswith("x_"))
    for row in rows[1:]:
        records.append(
            SamplingRecord(
                iteration=int(row[0]),
                point=np.array([float(v) for v in row[2 : 2 + dim]]),
                stable=bool(int(row[1])),
                v_hat=None if row[2 + dim] == "" else float(row[2 + dim]),
                acquisition_value=float(row[3 + dim]),
            )
        )
    return records


def _parse_box(text: str):
    lows, highs = [], []
    for part in text.split(","):
        lo, _, hi = part.partition(":")
        lows.append(float(lo))
        highs.append(float(hi))
    return np.array(lows), np.array(highs)


def _region_beta(spec_text: str, model, records, delta: float) -> float:
    """Region-side beta: 'theoretical', 'fixed:<v>' or 'cmax:<margin>'.

    The cmax rule calibrates sqrt(beta) to (1 + margin) * c_max so the
    prior-uncertainty far field (mu = 0, sd = prior) is excluded while the
    well-sampled neighborhood of the stable set stays inside.
    """
    kind, _, arg = spec_text.partition(":")
    if kind == "fixed":
        return float(arg)
    n = model.n_train
    if kind == "theoretical":
        return beta_fn(n, delta, rkhs_norm_sq(model), gamma_bound(n, model.noise_sigma))
    if kind == "cmax":
        margin = float(arg) if arg else 1.0
        cmax = max(r.v_hat for r in records if r.stable)
        return ((1.0 + margin) * cmax) ** 2
    raise ParseError(f"unknown beta spec {spec_text!r}")


@click.group()
@click.version_option(__version__)
def main():
    """Probabilistic region-of-attraction toolkit for swing-equation systems."""


@main.command("sample")
@click.option("--system", "system_file", required=True, type=click.Path())
@click.option("--config", "config_file", required=True, type=click.Path())
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True, type=int)
def cmd_sample(system_file, config_file, out_dir, seed):
    """Run the UCB sampling loop and write records, model and manifest."""
    t0 = time.time()
    try:
        sys_ = load_system(system_file)
        doc = _load_run_config(config_file)
        cfg = _ucb_config(doc, seed)
        box = doc.get("box", {})
        domain = SamplingDomain(
            lower=box.get("lower", [-4.0, -3.0]),
            upper=box.get("upper", [4.0, 3.0]),
            r_excl=doc.get("r_excl"),
        )
        model, records = run_gp_ucb(sys_, domain, cfg)
    except RoaError as e:
        _fail(e)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records_csv(records, out / "records.csv")
    save_checkpoint(model, out / "model.json")
    manifest = {
        "version": __version__,
        "seed": seed,
        "system_file": str(system_file),
        "config": doc,
        "box": {
            "lower": domain.lower.tolist(),
            "upper": domain.upper.tolist(),
        },
        "noise_sigma": model.noise_sigma,
        "artifacts": {"records": "records.csv", "model": "model.json"},
        "duration_s": time.time() - t0,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    n_stable = sum(1 for r in records if r.stable)
    click.echo(
        f"collected {n_stable} stable / {len(records)} total samples "
        f"in {manifest['duration_s']:.1f}s (noise sigma {model.noise_sigma:.3e})"
    )


@main.command("region")
@click.option("--model", "model_file", required=True, type=click.Path())
@click.option("--records", "records_file", required=True, type=click.Path())
@click.option("--system", "system_file", required=True, type=click.Path())
@click.option("--mode", default="equilibrium", type=click.Choice(["equilibrium", "offset"]))
@click.option("--beta", "beta_spec", default="cmax:1.0", show_default=True)
@click.option("--box", "box_text", default=None, help="lo:hi per state dim, comma separated")
@click.option("--resolution", default=200, show_default=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_region(model_file, records_file, system_file, mode, beta_spec, box_text, resolution, out_dir):
    """Rasterize the confidence region (per-machine slices) with overlays."""
    try:
        sys_ = load_system(system_file)
        model = load_checkpoint(model_file)
        records = read_records_csv(records_file)
        beta_n = _region_beta(beta_spec, model, records, 0.05)
        spec = build_spec(
            model,
            records,
            beta_n,
            delta=0.05,
            mode=mode,
            sys=sys_ if mode == "offset" else None,
        )
        certified = build_certified(sys_)
        dim = sys_.state_dim
        if box_text:
            lower, upper = _parse_box(box_text)
        else:
            manifest_path = Path(records_file).parent / "manifest.json"
            if not manifest_path.exists():
                raise ParseError("no --box given and no manifest.json next to records")
            with open(manifest_path) as fh:
                mbox = json.load(fh)["box"]
            lower, upper = np.asarray(mbox["lower"]), np.asarray(mbox["upper"])
        if len(lower) != dim:
            raise ConsistencyError(f"box dimension {len(lower)} != state dim {dim}")
        planes = [(k, sys_.n_machines + k) for k in range(sys_.n_machines)]
        grids = project_slices(spec, planes, (lower, upper), resolution, dim)
    except RoaError as e:
        _fail(e)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    slice_files = []
    for (a, b), grid in zip(planes, grids):
        name = f"slice_psi{a + 1}.csv"
        export_grid_csv(grid, out / name)
        poly = boundary_polyline(certified, (a, b))
        bname = None
        if poly is not None:
            bname = f"boundary_psi{a + 1}.csv"
            np.savetxt(out / bname, poly, delimiter=",", header="x,y", comments="")
        slice_files.append(
            {"plane": [a, b], "grid": name, "boundary": bname}
        )
    frac = float(np.mean([g.membership.mean() for g in grids]))
    with open(out / "slices.json", "w") as fh:
        json.dump(
            {
                "mode": mode,
                "beta": beta_n,
                "c_max": spec.c_max,
                "resolution": resolution,
                "slices": slice_files,
            },
            fh,
            indent=1,
        )
    click.echo(
        f"c_max={spec.c_max:.6g} beta={beta_n:.6g} member-cell fraction={frac:.4f}"
    )


@main.command("volume")
@click.option("--model", "model_file", required=True, type=click.Path())
@click.option("--records", "records_file", required=True, type=click.Path())
@click.option("--system", "system_file", required=True, type=click.Path())
@click.option("--mode", default="equilibrium", type=click.Choice(["equilibrium", "offset"]))
@click.option("--beta", "beta_spec", default="cmax:1.0", show_default=True)
@click.option("--box", "box_text", required=True)
@click.option("--samples", default=100000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def cmd_volume(model_file, records_file, system_file, mode, beta_spec, box_text, samples, seed):
    """Monte Carlo confidence-to-certified volume ratio, printed as JSON."""
    try:
        sys_ = load_system(system_file)
        model = load_checkpoint(model_file)
        records = read_records_csv(records_file)
        beta_n = _region_beta(beta_spec, model, records, 0.05)
        spec = build_spec(
            model,
            records,
            beta_n,
            delta=0.05,
            mode=mode,
            sys=sys_ if mode == "offset" else None,
        )
        certified = build_certified(sys_)
        lower, upper = _parse_box(box_text)
        result = volume_ratio(spec, certified, (lower, upper), samples, seed)
    except RoaError as e:
        _fail(e)
    click.echo(
        json.dumps(
            {
                "ratio": None if result.infinite else result.ratio,
                "infinite": result.infinite,
                "halfwidth": None if result.infinite else result.halfwidth,
                "confidence_count": result.confidence_count,
                "certified_count": result.certified_count,
                "n_samples": result.n_samples,
                "seed": seed,
            },
            sort_keys=True,
        )
    )


if __name__ == "__main__":
    main()
