import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from chaoslab import kernels as K
from chaoslab.grid import DensityPath, GridField
from chaoslab.particles import (BrownianDriver, BudgetExceededError, Mu0Spec, ParticleEnsemble, SimConfig,
                                batch_increments, em_step, initial_relative_entropy, sample_initial,
                                simulate_coupled_limit, simulate_moderate_system, simulate_particle_system)

GAUSS = Mu0Spec("gaussian", {"mean": 0.0, "std": 1.0})


def const_field(c):
    return lambda t, x, ens: np.full_like(x, c)


def test_euler_step_examples():
    drv = BrownianDriver(seed=1, dt=0.5)
    ens = ParticleEnsemble(np.array([[0.0]]))
    out = em_step(ens, lambda t, x, e: x + 1.0, 0.0, 0.5, drv)
    assert out.positions[0, 0] == pytest.approx(0.5)
    assert out.time == 0.5 and out.step == 1
    ens = ParticleEnsemble(np.array([[1.0], [2.0]]))
    out = em_step(ens, const_field(3.0), 0.0, 0.1, drv)
    np.testing.assert_allclose(out.positions[:, 0], [1.3, 2.3])


def test_pure_noise_step_uses_driver_increments():
    drv = BrownianDriver(seed=9, dt=0.01)
    ens = ParticleEnsemble(np.zeros((4, 2)))
    out = em_step(ens, const_field(0.0), 1.0, 0.01, drv)
    np.testing.assert_array_equal(out.positions, drv.increments(0, 4, 2))


def test_rank_step_example():
    k, F = K.make_rank_kernel(), K.make_linear_drift()
    ens = ParticleEnsemble(np.array([[0.0], [1.0], [2.0]]))
    field = lambda t, x, e: K.assemble_drift(F, k, t, x, e)
    out = em_step(ens, field, 0.0, 1.0, BrownianDriver(0, 1.0))
    np.testing.assert_allclose(out.positions[:, 0], [0.0, 4 / 3, 8 / 3])


def test_em_step_nonfinite_drift_names_particle():
    ens = ParticleEnsemble(np.array([[0.0], [1.0]]))
    bad = lambda t, x, e: np.where(x > 0.5, np.inf, 0.0)
    with pytest.raises(FloatingPointError, match="particle 1"):
        em_step(ens, bad, 1.0, 0.1, BrownianDriver(0, 0.1))


def test_ensemble_validation():
    with pytest.raises(FloatingPointError, match="particle 2"):
        ParticleEnsemble(np.array([[0.0], [1.0], [np.inf]]))
    with pytest.raises(ValueError):
        ParticleEnsemble(np.zeros((0, 1)))


def test_rng_streams_are_counter_based():
    drv = BrownianDriver(seed=42, dt=1.0)
    full = drv.normals(7, 10, 2)
    np.testing.assert_array_equal(drv.normals(7, 10, 2, streams=[3, 8]), full[[3, 8]])
    np.testing.assert_array_equal(BrownianDriver(42, 1.0).normals(7, 4, 2), full[:4])
    assert not np.array_equal(drv.normals(8, 10, 2), full)
    b = batch_increments(42, [0, 5], 7, 10, 2, 1.0)
    np.testing.assert_array_equal(b[0], full)
    np.testing.assert_array_equal(b[1], BrownianDriver(42, 1.0, replica=5).normals(7, 10, 2))


def test_rng_normal_moments():
    z = BrownianDriver(3, 1.0).normals(0, 200_000, 1)[:, 0]
    assert abs(z.mean()) < 4 / math.sqrt(z.size)
    assert abs(z.var() - 1) < 4 * math.sqrt(2 / z.size)
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_single_particle_matches_plain_sde():
    cfg = SimConfig(N=1, T=0.2, dt=0.01, sigma=1.0, seed=5, replicas=2)
    F = K.make_tanh_drift(0.5)
    path = simulate_particle_system(cfg, K.make_sin_kernel(), F, np.array([[0.3]]))
    for r in range(2):
        x = 0.3
        drv = BrownianDriver(5, 0.01, replica=r)
        for k in range(cfg.n_steps):
            x = x + 0.5 * math.tanh(0.0) * 0.01 + drv.increments(k, 1, 1)[0, 0]
        assert path.positions[r, -1, 0, 0] == pytest.approx(x, abs=1e-12)


def test_zero_kernel_gives_pure_diffusion():
    cfg = SimConfig(N=3, T=0.1, dt=0.01, sigma=1.0, seed=2)
    path = simulate_particle_system(cfg, K.make_zero_kernel(1), K.make_linear_drift(), np.zeros((3, 1)))
    inc = sum(batch_increments(2, [0], k, 3, 1, 0.01)[0] for k in range(cfg.n_steps))
    np.testing.assert_allclose(path.positions[0, -1], inc, atol=1e-14)


def _flat_path(T):
    g = GridField.from_function(lambda x: np.where(np.abs(x) < 5, 0.1, 0.0), [-10.0], [10.0], 200)
    return DensityPath(np.array([0.0, T]), [g, g])


@pytest.mark.parametrize("mode", ["mckean", "density"])
def test_coupling_nullity(mode):
    cfg = SimConfig(N=5, T=0.1, dt=0.01, sigma=1.0, seed=3, replicas=3, snapshot_every=1)
    F = K.make_linear_drift() if mode == "mckean" else K.make_zero_drift()
    res = simulate_coupled_limit(cfg, K.make_zero_kernel(1), F, _flat_path(0.1), mode, GAUSS)
    assert np.array_equal(res.particle, res.limit)


def test_zero_noise_zero_drift_is_constant():
    cfg = SimConfig(N=4, T=0.05, dt=0.01, sigma=1.0, seed=1)
    F = K.make_zero_drift()
    path = simulate_particle_system(cfg, K.make_sin_kernel(), F, np.arange(4.0)[:, None])
    assert path.positions.shape == (1, 2, 4, 1)


def test_thread_count_does_not_change_paths():
    cfg = dict(N=16, T=0.05, dt=0.01, sigma=1.0, seed=11, replicas=5)
    a = simulate_particle_system(SimConfig(**cfg, threads=1), K.make_rank_kernel(), K.make_linear_drift(), GAUSS)
    b = simulate_particle_system(SimConfig(**cfg, threads=3), K.make_rank_kernel(), K.make_linear_drift(), GAUSS)
    assert np.array_equal(a.positions, b.positions)
    c = simulate_particle_system(SimConfig(**cfg, threads=1), K.make_rank_kernel(), K.make_linear_drift(), GAUSS)
    assert np.array_equal(a.positions, c.positions)


def test_replica_split_matches_full_batch():
    cfg = SimConfig(N=8, T=0.05, dt=0.01, sigma=1.0, seed=4, replicas=4)
    full = simulate_particle_system(cfg, K.make_sin_kernel(), K.make_linear_drift(), GAUSS)
    tail = simulate_particle_system(SimConfig(N=8, T=0.05, dt=0.01, sigma=1.0, seed=4, replicas=2),
                                    K.make_sin_kernel(), K.make_linear_drift(), GAUSS, replica_start=2)
    assert np.array_equal(full.positions[2:], tail.positions)


@given(st.permutations(list(range(6))))
def test_exchangeability(perm):
    perm = np.array(perm)
    x0 = np.linspace(-1.0, 1.3, 6)[:, None]
    cfg = SimConfig(N=6, T=0.03, dt=0.01, sigma=1.0, seed=8)
    k, F = K.make_rank_kernel(), K.make_linear_drift()
    a = simulate_particle_system(cfg, k, F, x0)
    b = simulate_particle_system(cfg, k, F, x0[perm], streams=perm)
    np.testing.assert_allclose(b.positions[0, :, :, 0], a.positions[0, :, perm, 0].T, atol=1e-13)


def test_weak_sanity_variance():
    R, T = 400, 1.0
    cfg = SimConfig(N=2, T=T, dt=0.01, sigma=1.0, seed=21, replicas=R)
    path = simulate_particle_system(cfg, K.make_sin_kernel(), K.make_zero_drift(), np.zeros((2, 1)))
    x = path.positions[:, -1, 0, 0]
    assert abs(x.var(ddof=1) - T) <= 3 * T * math.sqrt(2 / (R - 1))


def test_budget_guard_checked_before_stepping():
    cfg = SimConfig(N=1000, T=1.0, dt=0.01, replicas=2, pair_budget=1e6)
    k = K.make_power_kernel(1.0, 0.5, 2)
    with pytest.raises(BudgetExceededError):
        simulate_particle_system(SimConfig(N=1000, d=2, T=1.0, dt=0.01, replicas=2, pair_budget=1e6),
                                 k, K.make_constant_drift([0.0, 0.0]), np.zeros((1000, 2)))
    assert cfg.n_steps == 100


def test_near_singular_diagnostic_is_recorded():
    cfg = SimConfig(N=3, d=2, T=0.02, dt=0.01, seed=1)
    x0 = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    F = K.make_linear_drift(0.0)
    path = simulate_particle_system(cfg, K.make_power_kernel(1.0, 0.5, 2), F, x0)
    assert path.diagnostics["near_singular_pairs"] >= 1


def test_simconfig_validation():
    with pytest.raises(ValueError):
        SimConfig(N=4, replicas=0)
    with pytest.raises(ValueError):
        SimConfig(N=4, dt=-1.0)
    with pytest.raises(ValueError, match="ellipticity"):
        SimConfig(N=4, sigma=3.0, kappa0=2.0)


def test_columns_layout():
    cfg = SimConfig(N=2, T=0.02, dt=0.01, seed=1, replicas=2, snapshot_every=1)
    path = simulate_particle_system(cfg, K.make_zero_kernel(1), K.make_zero_drift(), np.zeros((2, 1)))
    cols = path.columns()
    assert cols.shape == (2 * 3 * 2, 4)
    np.testing.assert_array_equal(cols[:3, :3], [[0, 0, 0], [0, 0, 1], [0, 1, 0]])
    assert cols[5, 3] == path.positions[0, 2, 1, 0]


def test_moderate_system_records_eps():
    cfg = SimConfig(N=16, T=0.02, dt=0.01, seed=1)
    path = simulate_moderate_system(cfg, K.make_box_mollifier(), K.eps_log_schedule(), K.make_tanh_drift(), GAUSS)
    assert path.diagnostics["eps"] == pytest.approx(1 / math.sqrt(math.log(16)))
    with pytest.raises(ValueError):
        simulate_moderate_system(cfg, K.make_box_mollifier(), K.eps_log_schedule(), K.make_linear_drift(), GAUSS)


def test_sample_initial_laws():
    a = sample_initial(GAUSS, 5, seed=3)
    b = sample_initial(GAUSS, 5, seed=3, correlation="exchangeable_mixture", w=1.0)
    np.testing.assert_array_equal(a.positions, b.positions)
    u = sample_initial(Mu0Spec("uniform", {"low": 2.0, "high": 3.0}), 1000, seed=1).positions
    assert u.min() >= 2.0 and u.max() <= 3.0
    with pytest.raises(ValueError):
        Mu0Spec("cauchy")
    with pytest.raises(ValueError):
        sample_initial(GAUSS, 3, 0, correlation="nope")


def test_sample_initial_moments():
    x = sample_initial(Mu0Spec("gaussian", {"mean": 2.0, "std": 0.5}), 100_000, seed=7).positions[:, 0]
    assert abs(x.mean() - 2.0) < 4 * 0.5 / math.sqrt(x.size)
    bim = sample_initial(Mu0Spec("bimodal", {"m1": -2.0, "m2": 2.0, "std": 0.1, "weight": 0.25}), 20_000, 1)
    assert abs((bim.positions < 0).mean() - 0.25) < 0.02


def test_initial_entropy_iid_is_zero():
    assert initial_relative_entropy(GAUSS, 3, w=1.0, shift=0.1) == 0.0
    assert initial_relative_entropy(GAUSS, 3, w=0.5, shift=0.0) == 0.0


def _brute_entropy_n2(w, shift):
    # dense 2D Simpson rule, independent of the Gauss-Hermite implementation
    x = np.linspace(-12, 12, 2401)
    n = stats.norm.pdf
    X, Y = np.meshgrid(x, x, indexing="ij")
    p = w * n(X) * n(Y) + (1 - w) * n(X - shift) * n(Y - shift)
    m = w * n(x) + (1 - w) * n(x - shift)
    q = m[:, None] * m[None, :]
    f = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0) / np.where(q > 0, q, 1.0)), 0.0)
    return integrate.simpson(integrate.simpson(f, x=x, axis=1), x=x)


@pytest.mark.parametrize("w,shift", [(0.5, 0.1), (0.3, 1.0)])
def test_initial_entropy_against_quadrature(w, shift):
    assert initial_relative_entropy(GAUSS, 1, w, shift) == pytest.approx(0.0, abs=1e-12)
    assert initial_relative_entropy(GAUSS, 2, w, shift) == pytest.approx(_brute_entropy_n2(w, shift), abs=1e-8)
