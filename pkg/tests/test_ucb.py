"""Upper-confidence-bound sampling loop and acquisition machinery."""

import numpy as np
import pytest

from roagp.errors import BudgetExhaustedError, EmptyDomainError
from roagp.gp import BetaSchedule, Kernel, add_observation, empty_model, posterior
from roagp.integrator import SimConfig, classify_stable, simulate
from roagp.ucb import (
    SamplingDomain,
    UcbConfig,
    acquisition,
    c_max,
    maximize_acquisition,
    run_gp_ucb,
)


def test_domain_validation():
    with pytest.raises(ValueError):
        SamplingDomain([0.0, 0.0], [1.0, -1.0])
    d = SamplingDomain([-1, -1], [1, 1])
    assert d.dim == 2
    with pytest.raises(ValueError):
        d.add_exclusion([2.0, 0.0])  # outside the box


def test_domain_default_exclusion_radius():
    d = SamplingDomain([-4, -3], [4, 3])
    assert d.r_excl == pytest.approx(0.01 * 10.0)  # 1% of box diagonal
    assert SamplingDomain([-1, -1], [1, 1], r_excl=0.5).r_excl == 0.5


def test_admissible_mask():
    d = SamplingDomain([-1, -1], [1, 1], r_excl=0.25)
    d.add_exclusion([0.0, 0.0])
    X = np.array([[0.0, 0.1], [0.5, 0.5], [2.0, 0.0], [0.0, 0.3]])
    assert list(d.admissible(X)) == [False, True, False, True]
    assert d.excluded_points.shape == (1, 2)


def test_domain_sampling_inside_box(rng):
    d = SamplingDomain([-2, 0], [0, 3])
    X = d.sample(rng, 100)
    assert np.all((X >= d.lower) & (X <= d.upper))


def test_acquisition_schemes(rng):
    m = empty_model(Kernel(), 0.1)
    for _ in range(4):
        m = add_observation(m, rng.uniform(-1, 1, size=2), rng.normal())
    x = np.array([0.2, -0.3])
    mu, sd = posterior(m, x)
    assert acquisition(m, 4.0, x, "ucb") == pytest.approx(mu + 2.0 * sd, abs=1e-12)
    assert acquisition(m, 4.0, x, "mean") == pytest.approx(mu, abs=1e-12)
    assert acquisition(m, 4.0, x, "variance") == pytest.approx(sd, abs=1e-12)
    with pytest.raises(ValueError):
        acquisition(m, -1.0, x)


def test_maximizer_deterministic_and_admissible():
    m = empty_model(Kernel(), 0.1)
    d = SamplingDomain([-1, -1], [1, 1], r_excl=0.3)
    d.add_exclusion([0.5, 0.5])
    cfg = UcbConfig(n_stable=1, candidate_count=128, restarts=4)
    a = maximize_acquisition(m, d, 4.0, cfg, np.random.default_rng(3))
    b = maximize_acquisition(m, d, 4.0, cfg, np.random.default_rng(3))
    assert np.array_equal(a, b)
    assert d.admissible(a[None, :])[0]


def test_maximizer_prefers_high_mean(rng):
    # with beta = 0 the maximizer should land near the best observation
    m = empty_model(Kernel(length_scale=0.5), 0.01)
    m = add_observation(m, np.array([0.5, 0.5]), 5.0)
    m = add_observation(m, np.array([-0.5, -0.5]), 1.0)
    d = SamplingDomain([-1, -1], [1, 1])
    cfg = UcbConfig(n_stable=1, candidate_count=512, restarts=4)
    x = maximize_acquisition(m, d, 0.0, cfg, rng)
    assert np.linalg.norm(x - [0.5, 0.5]) < 0.2


def test_empty_domain_error():
    m = empty_model(Kernel(), 0.1)
    d = SamplingDomain([-1, -1], [1, 1], r_excl=10.0)
    d.add_exclusion([0.0, 0.0])
    cfg = UcbConfig(n_stable=1, candidate_count=64)
    with pytest.raises(EmptyDomainError):
        maximize_acquisition(m, d, 4.0, cfg, np.random.default_rng(0))


def test_config_validation():
    with pytest.raises(ValueError):
        UcbConfig(n_stable=0)
    with pytest.raises(ValueError):
        UcbConfig(delta=0.0)
    with pytest.raises(ValueError):
        UcbConfig(scheme="thompson")
    assert UcbConfig(n_stable=10).iteration_cap == 200
    assert UcbConfig(n_stable=10, max_total_iterations=7).iteration_cap == 7


def test_run_small_smib(smib):
    dom = SamplingDomain([-1.0, -1.0], [1.0, 1.0], r_excl=0.2)
    cfg = UcbConfig(
        n_stable=5,
        sim=SimConfig(horizon=50.0),
        kernel=Kernel(length_scale=0.5),
        beta_schedule=BetaSchedule(mode="theoretical"),
        candidate_count=256,
        restarts=2,
        rng_seed=11,
    )
    model, records = run_gp_ucb(smib, dom, cfg)
    stable = [r for r in records if r.stable]
    assert len(stable) == 5
    assert model.n_train == 5
    assert all(r.v_hat is not None and r.v_hat >= 0 for r in stable)
    its = [r.iteration for r in records]
    assert its == sorted(its) and len(set(its)) == len(its)
    # noise sigma wired from the first stable trajectory, never below floor
    assert model.noise_sigma >= cfg.noise_floor
    assert c_max(records) == max(r.v_hat for r in stable)


def test_run_respects_noise_override(smib):
    dom = SamplingDomain([-0.5, -0.5], [0.5, 0.5], r_excl=0.2)
    cfg = UcbConfig(
        n_stable=2,
        sim=SimConfig(horizon=50.0),
        candidate_count=64,
        noise_sigma=0.123,
        rng_seed=1,
    )
    model, _ = run_gp_ucb(smib, dom, cfg)
    assert model.noise_sigma == 0.123


def test_run_deterministic(smib):
    dom1 = SamplingDomain([-1, -1], [1, 1], r_excl=0.2)
    dom2 = SamplingDomain([-1, -1], [1, 1], r_excl=0.2)
    cfg = UcbConfig(
        n_stable=3, sim=SimConfig(horizon=50.0), candidate_count=128, rng_seed=5
    )
    _, r1 = run_gp_ucb(smib, dom1, cfg)
    _, r2 = run_gp_ucb(smib, dom2, cfg)
    assert len(r1) == len(r2)
    for a, b in zip(r1, r2):
        assert np.array_equal(a.point, b.point)
        assert a.stable == b.stable


def test_budget_exhausted(smib):
    dom = SamplingDomain([-1, -1], [1, 1])
    cfg = UcbConfig(
        n_stable=5,
        sim=SimConfig(horizon=50.0),
        candidate_count=64,
        max_total_iterations=2,
    )
    with pytest.raises(BudgetExhaustedError):
        run_gp_ucb(smib, dom, cfg)


def test_unstable_picks_are_excluded_and_recorded(smib):
    # a box inside the unstable far field forces exclusions
    dom = SamplingDomain([2.9, 0.4], [3.4, 1.0], r_excl=0.05)
    cfg = UcbConfig(
        n_stable=1,
        candidate_count=64,
        max_total_iterations=3,
        rng_seed=2,
    )
    try:
        _, records = run_gp_ucb(smib, dom, cfg)
    except BudgetExhaustedError:
        records = None
    if records is None:
        assert len(dom.excluded_points) > 0
    else:
        for r in records:
            if not r.stable:
                assert r.v_hat is None


def test_c_max_requires_stable_record():
    with pytest.raises(ValueError):
        c_max([])


def test_stable_records_reverify(smib):
    dom = SamplingDomain([-1, -1], [1, 1], r_excl=0.2)
    cfg = UcbConfig(
        n_stable=3, sim=SimConfig(horizon=50.0), candidate_count=128, rng_seed=9
    )
    _, records = run_gp_ucb(smib, dom, cfg)
    for r in records:
        if r.stable:
            traj = simulate(smib, r.point, cfg.sim)
            assert classify_stable(traj, cfg.sim)
