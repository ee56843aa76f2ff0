import math

import numpy as np
import pytest

from chaoslab.harness.acceptance import CONFIGS, pde_invariants, small_config
from chaoslab.harness.config import ExperimentConfig
from chaoslab.harness.experiments import lemma55_pair_quadrature, run_experiment, stage_seed
from chaoslab.harness.runner import metrics_csv
from chaoslab import kernels as K
from chaoslab.particles import Mu0Spec


def run(name, **over):
    data = small_config(name)
    for sec, vals in over.items():
        data[sec].update(vals)
    return run_experiment(ExperimentConfig.from_dict(data))


@pytest.fixture(scope="module")
def small_results():
    fast = ["strong_rate", "rank_burgers", "moderate", "entropy_suite", "zvonkin", "picard", "tv_marginal"]
    return {n: run(n) for n in fast}


def test_all_values_finite(small_results):
    for name, r in small_results.items():
        assert r.experiment == name and r.rows
        assert all(math.isfinite(row.value) and row.std_error >= 0 for row in r.rows), name


def test_sweeps_cover_each_N(small_results):
    for name in ("strong_rate", "rank_burgers", "moderate", "tv_marginal"):
        Ns = small_config(name)["sweep"]["Ns"]
        main = {"strong_rate": "strong_error", "rank_burgers": "cdf_sup_error",
                "moderate": "strong_error", "tv_marginal": "tv"}[name]
        assert small_results[name].series(main)[0] == Ns
        assert set(small_results[name].seeds) == {f"N={n}" for n in Ns}


def test_moderate_eps_shrinks(small_results):
    eps = small_results["moderate"].series("eps")[1]
    assert eps[1] < eps[0]


def test_entropy_suite_has_no_violations(small_results):
    r = small_results["entropy_suite"]
    for m in ("pinsker_violations", "weighted_pinsker_violations", "bb4_violations"):
        assert r.value(m) == 0


def test_zvonkin_gradient_decays(small_results):
    r = small_results["zvonkin"]
    g = [r.value(f"grad_sup_lambda_{lam}") for lam in (1, 10, 100, 1000)]
    assert np.all(np.diff(g) < 0)


def test_picard_contracts(small_results):
    gam = small_results["picard"].series("gamma")[1]
    assert np.all(np.diff(gam) < 0)


def test_stage_seeds_distinct():
    seeds = {stage_seed(123, s) for s in range(100)}
    assert len(seeds) == 100 and all(0 <= s < 2**64 for s in seeds)
    assert stage_seed(123, 0) != stage_seed(124, 0)


def test_rerun_is_byte_identical():
    cfg = ExperimentConfig.from_dict(small_config("strong_rate"))
    a = metrics_csv(run_experiment(cfg))
    cfg.threads = 2
    assert metrics_csv(run_experiment(cfg)) == a


def test_lemma55_quadrature_zero_kernel():
    assert lemma55_pair_quadrature(K.make_zero_kernel(1), Mu0Spec("uniform"), 0.01, cells=1024) == pytest.approx(1.0)


def test_lemma55_small_runs():
    r = run("lemma55")
    assert r.value("exp_moment") >= 1.0 - 1e-12
    assert r.value("threshold") == pytest.approx(1 / (16 * math.e**2))


def test_pde_invariants():
    inv = pde_invariants()
    assert inv["mass_drift"] <= 1e-10
    assert inv["max_ratio"] <= 1.0 + 1e-12
    assert inv["cdf_min_increment"] >= -1e-12


def test_every_config_registered():
    for name, data in CONFIGS.items():
        assert ExperimentConfig.from_dict(data).experiment == name
