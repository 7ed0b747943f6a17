"""Energy function and the certified ellipsoidal region."""

import math

import numpy as np
import pytest

from roagp.certified import (
    boundary_polyline,
    build_certified,
    certified_membership,
    certified_membership_flat,
    energy_v_star,
    energy_v_star_flat,
)
from roagp.dynamics import PowerSystem, build_smib, vector_field
from roagp.errors import CertificateVoidError, DimensionError
from roagp.integrator import SimConfig, simulate


def test_smib_certificate_constants(smib):
    roa = build_certified(smib)
    # quadratic form coefficients 1/B = 10 and m = 12
    assert roa.laplacian.shape == (1, 1)
    assert roa.laplacian[0, 0] == pytest.approx(10.0, abs=1e-12)
    assert roa.lambda_mat[0, 0] == pytest.approx(12.0, abs=1e-12)
    # [DERIVED] C = 10 * (2 cos l - (pi - 2l) sin l) at l = arcsin(0.05)
    lam = math.asin(0.05)
    expect = 10.0 * (2 * math.cos(lam) - (math.pi - 2 * lam) * math.sin(lam))
    assert roa.c_lambda == pytest.approx(expect, rel=1e-12)
    assert abs(roa.c_lambda - 18.45) < 0.01


def test_quadratic_form_and_membership(smib):
    roa = build_certified(smib)
    assert roa.quadratic_form([0.0], [0.0]) == 0.0
    assert roa.quadratic_form([1.0], [1.0]) == pytest.approx(22.0, abs=1e-12)
    assert certified_membership(roa, [1.0], [0.5])  # 10 + 3 <= 18.45
    assert not certified_membership(roa, [1.5], [0.0])  # 22.5 > 18.45
    assert certified_membership_flat(roa, np.array([1.0, 0.5]))
    with pytest.raises(DimensionError):
        roa.quadratic_form([1.0, 2.0], [0.0])


def test_energy_zero_at_equilibrium(smib):
    assert energy_v_star(smib, [0.0], [0.0]) == pytest.approx(0.0, abs=1e-15)


def test_energy_positive_near_equilibrium(smib, rng):
    for _ in range(20):
        x = rng.uniform(-1.0, 1.0, size=2)
        if np.linalg.norm(x) < 1e-3:
            continue
        assert energy_v_star_flat(smib, x) > 0.0


def test_energy_known_value(smib):
    # [DERIVED] V*(0.1, 0) = 10 (cos ts - cos(ts + 0.1) - 0.1 sin ts)
    ts = math.asin(0.05)
    expect = 10.0 * (math.cos(ts) - math.cos(ts + 0.1) - 0.1 * math.sin(ts))
    assert energy_v_star(smib, [0.1], [0.0]) == pytest.approx(expect, rel=1e-12)
    assert expect == pytest.approx(0.0498, abs=1e-4)
    # kinetic part: + 0.5 * 12 * 0.2^2
    assert energy_v_star(smib, [0.1], [0.2]) == pytest.approx(
        expect + 0.24, rel=1e-12
    )


def test_energy_dissipation_rate(smib):
    # [DERIVED] dV*/dt = -sum d_i dpsi_i^2 along the vector field
    for x in (np.array([0.7, 0.4]), np.array([-1.2, 0.9])):
        h = 1e-6
        f = vector_field(smib, x)
        dv = (
            energy_v_star_flat(smib, x + h * f)
            - energy_v_star_flat(smib, x - h * f)
        ) / (2 * h)
        assert dv == pytest.approx(-20.0 * x[1] ** 2, rel=1e-5)


def test_certificate_void_for_large_angles():
    # steady branch angle beyond pi/2 gives a non-positive level constant
    theta = 1.6
    sys_ = PowerSystem(
        inertia=np.array([1.0, 0.0]),
        damping=np.array([1.0, 0.0]),
        power=np.array([math.sin(theta) / 0.1, -math.sin(theta) / 0.1]),
        steady_angles=np.array([theta, 0.0]),
        branch_i=np.array([0]),
        branch_j=np.array([1]),
        susceptance=np.array([0.1]),
        swing_bus=1,
    )
    with pytest.raises(CertificateVoidError):
        build_certified(sys_)


def test_certified_points_all_converge(smib, rng):
    # certificate guarantee: everything inside the ellipse converges
    roa = build_certified(smib)
    cfg = SimConfig()
    count = 0
    while count < 25:
        x = rng.uniform([-1.4, -1.3], [1.4, 1.3])
        if roa.quadratic_form(x[:1], x[1:]) > roa.c_lambda:
            continue
        count += 1
        assert simulate(smib, x, cfg).converged


def test_boundary_polyline_on_level_set(smib):
    roa = build_certified(smib)
    poly = boundary_polyline(roa, (0, 1))
    assert poly.shape[1] == 2
    q = 10.0 * poly[:, 0] ** 2 + 12.0 * poly[:, 1] ** 2
    assert np.allclose(q, roa.c_lambda, rtol=1e-10)


def test_39_bus_certificate(data_dir):
    from roagp.dynamics import load_system

    sys_ = load_system(data_dir / "ieee39_reduced.json")
    roa = build_certified(sys_)
    assert roa.laplacian.shape == (9, 9)
    assert roa.c_lambda > 0
    # grounded Laplacian of a connected graph is positive definite
    assert np.all(np.linalg.eigvalsh(roa.laplacian) > 0)
