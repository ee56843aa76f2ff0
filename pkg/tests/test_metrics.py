import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from chaoslab import kernels as K
from chaoslab import metrics as M
from chaoslab.grid import GridField
from chaoslab.particles import Mu0Spec


def test_wasserstein_examples():
    assert M.wasserstein1_1d([0.3, 1.2], [1.2, 0.3]) == 0.0
    assert M.wasserstein1_1d([0.0], [1.0]) == 1.0
    assert M.wasserstein1_1d([0.0, 2.0], [1.0, 3.0]) == 1.0
    assert M.wasserstein1_1d([0.0, 1.0], [0.5]) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        M.wasserstein1_1d([], [1.0])


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=20), st.lists(st.floats(-100, 100), min_size=1, max_size=20))
def test_wasserstein_matches_scipy(a, b):
    assert M.wasserstein1_1d(a, b) == pytest.approx(stats.wasserstein_distance(a, b), abs=1e-9)


def test_tv_examples():
    assert M.tv_histogram([0.1, 0.5, 0.9], [0.1, 0.5, 0.9], bins=4) == 0.0
    assert M.tv_histogram([0.0, 0.1], [5.0, 5.1], bins=2) == 2.0
    mu, nu = M.DiscreteMeasure.from_weights([0.75, 0.25]), M.DiscreteMeasure.from_weights([0.5, 0.5])
    assert M.total_variation(mu, nu) == pytest.approx(0.5)


def test_tv_against_density_counts_outside_mass():
    rho = GridField.from_function(lambda x: np.ones_like(x), [0.0], [1.0], 100)
    assert M.tv_histogram([2.0, 3.0], rho, bins=4) == pytest.approx(2.0)
    masses = M.grid_bin_masses(rho, np.array([0.0, 0.25, 1.0]))
    np.testing.assert_allclose(masses, [0.25, 0.75, 0.0], atol=1e-12)


def test_freedman_diaconis_cap():
    x = np.random.default_rng(0).normal(size=10**6)
    assert M.freedman_diaconis_bins(x) == M.MAX_BINS
    assert M.freedman_diaconis_bins(np.ones(5)) == 1


def test_relative_entropy_examples():
    mu, nu = M.DiscreteMeasure.from_weights([0.75, 0.25]), M.DiscreteMeasure.from_weights([0.5, 0.5])
    assert M.relative_entropy_discrete(mu, mu) == 0.0
    assert M.relative_entropy_discrete([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert M.relative_entropy_discrete(mu, nu) == pytest.approx(0.75 * math.log(1.5) + 0.25 * math.log(0.5))
    assert M.relative_entropy_discrete(mu, nu) == pytest.approx(0.13081, abs=1e-5)
    assert M.relative_entropy_discrete([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_discrete_measure_alignment():
    a = M.DiscreteMeasure(("x", "y"), [0.5, 0.5])
    b = M.DiscreteMeasure(("y", "z"), [0.25, 0.75])
    p, q = a.aligned(b)
    np.testing.assert_allclose(p, [0.5, 0.5, 0.0])
    np.testing.assert_allclose(q, [0.0, 0.25, 0.75])
    assert M.total_variation(a, b) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        M.DiscreteMeasure(("x",), [0.5])


def test_pinsker_examples():
    mu = M.DiscreteMeasure.from_weights([0.75, 0.25])
    lhs, rhs, ok = M.pinsker_check(mu, mu)
    assert (lhs, rhs, ok) == (0.0, 0.0, True)
    lhs, rhs, ok = M.pinsker_check(mu, M.DiscreteMeasure.from_weights([0.5, 0.5]))
    assert lhs == pytest.approx(0.25) and rhs == pytest.approx(0.26162, abs=1e-5) and ok


def test_weighted_pinsker_examples():
    mu, nu = [0.2, 0.3, 0.5], [0.4, 0.4, 0.2]
    assert M.weighted_pinsker_check(mu, nu, np.zeros(3)) == (0.0, pytest.approx(2 * M.relative_entropy_discrete(mu, nu)), True)
    assert M.weighted_pinsker_check(mu, mu, [1.0, -2.0, 0.5])[0] == 0.0


measures = st.integers(2, 10).flatmap(lambda n: st.tuples(st.integers(0, 2**32 - 1), st.just(n)))


@given(measures)
def test_pinsker_random(arg):
    seed, n = arg
    rng = np.random.default_rng(seed)
    mu, nu = M.random_measure(rng, n, 0.3), M.random_measure(rng, n)
    assert M.pinsker_check(mu, nu)[2]
    f = rng.uniform(-2, 2, size=n)
    assert M.weighted_pinsker_check(mu, nu, f)[2]
    psi = rng.normal(size=n)
    assert M.variational_lower_bound(mu, nu, psi) <= M.relative_entropy_discrete(mu, nu) + 1e-12


def test_symmetry_tools():
    t = M.product_tensor([0.2, 0.8], 3)
    assert M.is_symmetric(t)
    a = np.zeros((2, 2, 2))
    a[0, 0, 1] = 1.0
    assert not M.is_symmetric(a)
    s = M.symmetrize(a)
    assert M.is_symmetric(s) and s.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(M.marginal(t, 1), [0.2, 0.8])


def test_marginal_bound_examples():
    mu = np.array([0.3, 0.7])
    lhs, rhs, ok = M.marginal_entropy_bound_check(M.product_tensor(mu, 4), mu, 2)
    assert lhs == pytest.approx(0.0, abs=1e-15) and rhs == pytest.approx(0.0, abs=1e-15) and ok
    mix = 0.5 * M.product_tensor([0.2, 0.8], 4) + 0.5 * M.product_tensor([0.6, 0.4], 4)
    m1 = M.marginal(mix, 1)
    assert M.marginal_entropy_bound_check(mix, m1, 2)[2]
    lhs, rhs, ok = M.marginal_entropy_bound_check(mix, m1, 4)
    assert ok and lhs <= rhs
    with pytest.raises(ValueError):
        M.marginal_entropy_bound_check(np.ones((5,) * 2) / 25, np.ones(5) / 5, 1)


@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 5))
def test_marginal_bound_random(seed, E, N):
    rng = np.random.default_rng(seed)
    t = M.symmetrize(M.random_measure(rng, E**N, 0.2).reshape((E,) * N))
    mu = M.random_measure(rng, E)
    for k in range(1, N + 1):
        assert M.marginal_entropy_bound_check(t, mu, k)[2]


def test_exp_moment_zero_kernel_is_one():
    est = M.exp_moment_lemma55(K.make_zero_kernel(1), Mu0Spec("uniform"), 10, 0.1, 50)
    assert est.estimate == 1.0 and est.std_error == 0.0


def test_exp_moment_warns_above_threshold():
    k = K.make_rank_kernel()
    with pytest.warns(RuntimeWarning):
        est = M.exp_moment_lemma55(k, Mu0Spec("uniform"), 10, 1.0, 20, density_cells=1024)
    assert est.warnings


def test_exp_moment_bound_small():
    k = K.make_rank_kernel()
    thr = M.lemma55_threshold(k)
    assert thr == pytest.approx(1 / (16 * math.e**2))
    est = M.exp_moment_lemma55(k, Mu0Spec("uniform"), 200, thr, 500, seed=3)
    assert est.estimate <= 6 + 2 * est.std_error


def test_strong_error_examples():
    p = np.zeros((3, 5, 1))
    assert np.all(M.strong_error_path(p, p) == 0)
    assert np.allclose(M.strong_error_path(p, p + 0.5), 0.25)
    with pytest.raises(ValueError):
        M.strong_error_path(p, np.zeros((3, 4, 1)))


def test_fluctuation_statistic_reference_is_small():
    rho = Mu0Spec("uniform").density_grid(0.0, 1.0, 4096)
    rng = np.random.default_rng(1)
    small = M.fluctuation_statistic(K.make_rank_kernel(), rng.uniform(size=(200, 16)), rho)[0]
    large = M.fluctuation_statistic(K.make_rank_kernel(), rng.uniform(size=(200, 1024)), rho)[0]
    assert large < small


def test_kac_statistic_reference_and_trend():
    rho = Mu0Spec("gaussian").density_grid(-8.0, 8.0, 1600)
    rng = np.random.default_rng(2)
    indep = M.kac_chaos_statistic(rng.normal(size=(4000, 2)), rho)
    assert indep < 0.3
    with pytest.raises(ValueError):
        M.kac_chaos_statistic(rng.normal(size=(10, 2)), rho)


def test_rate_fit_exact_data():
    Ns = [64, 128, 256, 512]
    r = M.rate_fit([(n, 3.0 / n, 0.0) for n in Ns])
    assert r.slope == pytest.approx(-1.0, abs=1e-12)
    r = M.rate_fit([(n, 2.0 / math.sqrt(n), 0.0) for n in Ns])
    assert r.slope == pytest.approx(-0.5, abs=1e-12)
    with pytest.raises(ValueError):
        M.rate_fit([(n, 1.0 / n, 0.0) for n in Ns[:3]])


def test_rate_fit_noisy_matches_direct_regression():
    rng = np.random.default_rng(4)
    Ns = np.array([64, 128, 256, 512, 1024, 2048, 4096])
    err = (1.0 / Ns) * (1 + 0.1 * rng.standard_normal(Ns.size))
    se = 0.1 * err
    r = M.rate_fit(list(zip(Ns, err, se)))
    # closed-form weighted least squares
    w = (err / se) ** 2
    x, y = np.log(Ns), np.log(err)
    xb, yb = np.average(x, weights=w), np.average(y, weights=w)
    slope = np.sum(w * (x - xb) * (y - yb)) / np.sum(w * (x - xb) ** 2)
    assert r.slope == pytest.approx(slope, abs=1e-12)
    assert r.slope_ci[0] <= -1.0 <= r.slope_ci[1]


def test_report_json_roundtrip():
    r = M.rate_fit([(n, 1.0 / n, 0.01 / n) for n in (8, 16, 32, 64)], {"metric": "x"})
    back = M.ConvergenceReport.from_json(r.to_json())
    assert back == r
