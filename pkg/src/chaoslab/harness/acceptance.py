"""Acceptance suite: one check per criterion, each with its measured value and tolerance."""

from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import kernels as K
from .. import pde as P
from ..grid import GridField
from .config import ExperimentConfig
from .experiments import ExperimentResult, cdf_grid, run_experiment, _mu0
from .runner import metrics_csv

SQRT2 = math.sqrt(2.0)
GAUSS = {"name": "gaussian", "mean": 0.0, "std": 1.0}

CONFIGS = {
    "strong_rate": {
        "experiment": "strong_rate", "seed": 20240601,
        "kernel": {"type": "smooth_sin"}, "drift": {"type": "linear"}, "mu0": dict(GAUSS),
        "sim": {"T": 1.0, "dt": 1e-3, "sigma": 1.0, "replicas": 200},
        "sweep": {"Ns": [64, 128, 256, 512, 1024, 2048, 4096]},
    },
    "rank_burgers": {
        "experiment": "rank_burgers", "seed": 20240602,
        "kernel": {"type": "rank"}, "drift": {"type": "linear"}, "mu0": dict(GAUSS),
        "sim": {"T": 0.5, "dt": 1e-3, "sigma": SQRT2, "replicas": 50},
        "sweep": {"Ns": [128, 512, 2048]},
    },
    "moderate": {
        "experiment": "moderate", "seed": 20240603,
        "kernel": {"type": "mollified", "c": 1.0, "power": 0.5}, "drift": {"type": "tanh", "scale": 0.5},
        "mu0": dict(GAUSS),
        "sim": {"T": 1.0, "dt": 1e-3, "sigma": 1.0, "replicas": 20},
        "sweep": {"Ns": [256, 1024, 4096]},
    },
    "lemma55": {
        "experiment": "lemma55", "seed": 20240604,
        "kernel": {"type": "rank"}, "mu0": {"name": "uniform", "low": 0.0, "high": 1.0},
        "sim": {"N": 1000, "replicas": 10000},
    },
    "entropy_suite": {"experiment": "entropy_suite", "seed": 20240605, "suite": {"trials": 10000}},
    "tv_marginal": {
        "experiment": "tv_marginal", "seed": 20240606,
        "kernel": {"type": "rank"}, "drift": {"type": "linear"}, "mu0": dict(GAUSS),
        "sim": {"T": 0.5, "dt": 1e-3, "sigma": SQRT2, "replicas": 500},
        "sweep": {"Ns": [64, 128, 256, 512, 1024, 2048]},
    },
    "mixedlp_suite": {"experiment": "mixedlp_suite", "seed": 20240607, "suite": {"trials": 1000}},
    "zvonkin": {
        "experiment": "zvonkin", "seed": 20240609,
        "zvonkin": {"lambdas": [1, 10, 100, 1000], "a": 0.5, "dx": 0.05},
    },
    "picard": {
        "experiment": "picard", "seed": 20240610,
        "drift": {"type": "linear"}, "pde": {"T": 0.25, "dx": 0.04, "iterations": 6},
    },
}


def small_config(name: str) -> dict:
    """Reduced copy of a criterion config, used for the determinism reruns."""
    c = copy.deepcopy(CONFIGS[name])
    if "sweep" in c:
        c["sweep"]["Ns"] = c["sweep"]["Ns"][:2] if name != "moderate" else [16, 32]
        c["sim"].update(replicas=3, T=0.05)
    elif name == "lemma55":
        c["sim"].update(N=50, replicas=200)
    elif "suite" in c:
        c["suite"]["trials"] = 20
    return c


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: str
    tolerance: str
    seconds: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.number:>2} {self.name}: {self.measured} | required {self.tolerance} ({self.seconds:.1f}s)"


def _run(name: str, threads: int = 1) -> ExperimentResult:
    cfg = ExperimentConfig.from_dict(CONFIGS[name])
    cfg.threads = threads
    return run_experiment(cfg)


def _decreasing(vals) -> bool:
    return bool(np.all(np.diff(vals) < 0))


def _fmt(vals) -> str:
    return "[" + ", ".join(f"{v:.4g}" for v in vals) + "]"


def c1_strong_rate(threads=1):
    r = _run("strong_rate", threads)
    s = r.report.slope
    lo, hi = r.report.slope_ci
    return -1.25 <= s <= -0.75, f"slope={s:.3f} (95% CI [{lo:.3f}, {hi:.3f}])", "slope in [-1.25, -0.75]"


def c2_rank_burgers(threads=1):
    r = _run("rank_burgers", threads)
    _, errs, _ = r.series("cdf_sup_error")
    gap, dx = r.value("pde_vs_cole_hopf"), r.value("pde_dx")
    ok = _decreasing(errs) and gap <= 2 * dx
    return ok, f"sup errors {_fmt(errs)}, |pde-cole_hopf|={gap:.3g}", f"strictly decreasing, gap <= {2 * dx:.3g}"


def c3_moderate(threads=1):
    r = _run("moderate", threads)
    _, errs, _ = r.series("strong_error")
    return _decreasing(errs), f"strong errors {_fmt(errs)}", "strictly decreasing in N"


def c4_lemma55(threads=1):
    r = _run("lemma55", threads)
    N = CONFIGS["lemma55"]["sim"]["N"]
    est = next(x for x in r.rows if x.metric == "exp_moment" and x.N == N)
    gap = r.value("quadrature_gap_in_se")
    ok = est.value <= 6 + 2 * est.std_error and gap <= 3
    return (ok, f"estimate={est.value:.6f} (SE {est.std_error:.2g}), N=2 gap={gap:.2f} SE",
            "estimate <= 6 + 2 SE, N=2 gap <= 3 SE")


def c5_entropy(threads=1):
    r = _run("entropy_suite", threads)
    v = {x.metric[:-len("_violations")]: int(x.value) for x in r.rows if x.metric.endswith("_violations")}
    return all(n == 0 for n in v.values()), ", ".join(f"{k}={n}" for k, n in v.items()), "zero violations"


def c6_tv_marginal(threads=1):
    r = _run("tv_marginal", threads)
    s = r.report.slope
    _, floors, _ = r.series("tv_noise_floor")
    return (-0.75 <= s <= -0.25, f"slope={s:.3f} (bins={int(r.value('bins'))}, noise floor {_fmt(floors)})",
            "slope in [-0.75, -0.25]")


def c7_mixedlp(threads=1):
    r = _run("mixedlp_suite", threads)
    v = {x.metric: x.value for x in r.rows}
    s2, s4 = v["semigroup_slope_p2"], v["semigroup_slope_p4"]
    checks = [
        v["holder_violations"] == 0, v["young_violations"] == 0,
        v["separable_max_rel_err"] <= 1e-6,
        v["refinement_p3_ratio_study"] < 1.05, v["refinement_p6_ratio_study"] > 1.2,
        abs(s2 + 0.25) <= 0.1, abs(s4 + 0.125) <= 0.1,
    ]
    measured = (f"holder={int(v['holder_violations'])}, young={int(v['young_violations'])}, "
                f"separable={v['separable_max_rel_err']:.2g}, ratio p3={v['refinement_p3_ratio_study']:.4f}, "
                f"ratio p6={v['refinement_p6_ratio_study']:.4f}, slopes p2={s2:.4f} p4={s4:.4f}")
    tol = "0/0 violations, sep <= 1e-6, p3 < 1.05, p6 > 1.2, slopes within 0.1 of -0.25/-0.125"
    return all(checks), measured, tol


def pde_invariants() -> dict:
    """Mass drift, maximum principle and CDF monotonicity for the uniform-bump Burgers run."""
    T = 1.0
    rho0 = GridField.from_function(lambda x: np.where(np.abs(x) <= 1.0, 0.5, 0.0), [-10.0], [10.0], 1000)
    F = K.make_linear_drift()
    out = {"mass_drift": 0.0, "max_ratio": 0.0}
    for limiter in (False, True):
        scheme = P.PdeScheme(rho0.spacing[0], P.suggest_dt(rho0, F, 1.0), T, "periodic", limiter)
        path = P.solve_nonlinear_fp(rho0, F, 1.0, scheme, times=np.linspace(0.0, T, 11))
        mass = np.array([f.mass() for f in path.fields])
        peak = np.array([f.values.max() for f in path.fields])
        out["mass_drift"] = max(out["mass_drift"], float(np.max(np.abs(mass - mass[0]))) / T)
        out["max_ratio"] = max(out["max_ratio"], float(peak.max() / peak[0]))
    mu0 = _mu0(ExperimentConfig.from_dict(CONFIGS["rank_burgers"]))
    V0 = cdf_grid(mu0, 10.0, 1000)
    scheme = P.PdeScheme(V0.spacing[0], 0.4 * V0.spacing[0] ** 2, 0.5, "zero_flux", False)
    VT = P.solve_burgers_cdf(V0, lambda v: v, scheme, times=[0.0, 0.25, 0.5])
    out["cdf_min_increment"] = min(float(np.min(np.diff(f.values))) for f in VT.fields)
    return out


def c8_pde_invariants(threads=1):
    v = pde_invariants()
    ok = v["mass_drift"] <= 1e-10 and v["max_ratio"] <= 1 + 1e-8 and v["cdf_min_increment"] >= -1e-10
    return (ok, f"mass drift={v['mass_drift']:.2g}/unit time, max ratio={v['max_ratio']:.12f}, "
            f"min CDF increment={v['cdf_min_increment']:.2g}",
            "mass <= 1e-10, ratio <= 1+1e-8, increment >= -1e-10")


def c9_zvonkin(threads=1):
    r = _run("zvonkin", threads)
    lams = CONFIGS["zvonkin"]["zvonkin"]["lambdas"]
    g = [r.value(f"grad_sup_lambda_{lam:g}") for lam in lams]
    gaps = [r.value(f"oracle_gap_lambda_{lam:g}") for lam in lams]
    dx = r.value("dx")
    ok = bool(np.all(np.diff(g) <= 0)) and g[-1] <= 0.5 and max(gaps) <= 5 * dx**2
    return (ok, f"grad_sup {_fmt(g)}, max oracle gap={max(gaps):.3g}",
            f"nonincreasing, last <= 0.5, gap <= {5 * dx**2:.3g}")


def c10_picard(threads=1):
    r = _run("picard", threads)
    _, gam, _ = r.series("gamma")
    final, dx = r.value("final_vs_nonlinear"), r.value("dx")
    ok = _decreasing(gam[1:]) and final <= 2 * dx
    return ok, f"gamma {_fmt(gam)}, final gap={final:.3g}", f"strictly decreasing from n=2, gap <= {2 * dx:.3g}"


def determinism_check(names=None, threads=(1, 2)) -> dict:
    """CSV bodies of reduced criterion configs, run twice per thread count."""
    names = list(names or CONFIGS)
    out = {}
    for name in names:
        bodies = []
        for th in threads:
            for _ in range(2):
                cfg = ExperimentConfig.from_dict(small_config(name))
                cfg.threads = th
                bodies.append(metrics_csv(run_experiment(cfg)))
        out[name] = all(b == bodies[0] for b in bodies)
    return out


def c11_determinism(threads=1):
    same = determinism_check(threads=(1, max(2, threads)))
    bad = [k for k, v in same.items() if not v]
    return not bad, f"{len(same) - len(bad)}/{len(same)} configs byte-identical" + (f" (differ: {bad})" if bad else ""), \
        "all byte-identical across reruns and thread counts"


CRITERIA: list[tuple[int, str, Callable, bool]] = [
    # (number, name, check, large sweep)
    (1, "strong rate, smooth kernel", c1_strong_rate, True),
    (2, "rank-based Burgers", c2_rank_burgers, True),
    (3, "moderate interaction", c3_moderate, True),
    (4, "exponential moment bound", c4_lemma55, False),
    (5, "entropy inequalities", c5_entropy, False),
    (6, "TV marginal rate", c6_tv_marginal, True),
    (7, "mixed Lebesgue suite", c7_mixedlp, False),
    (8, "PDE invariants", c8_pde_invariants, False),
    (9, "Zvonkin lambda decay", c9_zvonkin, False),
    (10, "Picard contraction", c10_picard, False),
    (11, "determinism", c11_determinism, False),
]


def run_criterion(number: int, threads: int = 1) -> CriterionResult:
    num, name, check, _ = next(c for c in CRITERIA if c[0] == number)
    start = time.perf_counter()
    passed, measured, tol = check(threads)
    return CriterionResult(num, name, bool(passed), measured, tol, time.perf_counter() - start)


def verify(suite: str = "fast", threads: int = 1, echo: Callable[[str], None] = print) -> list[CriterionResult]:
    """Run the acceptance suite; "fast" skips the large-N sweeps (criteria 1, 2, 3, 6)."""
    if suite not in ("fast", "full"):
        raise ValueError(f"unknown suite '{suite}' (expected fast or full)")
    results = []
    for num, _, _, large in CRITERIA:
        if suite == "fast" and large:
            echo(f"[SKIP] {num:>2} (large-N sweep, run the full suite)")
            continue
        res = run_criterion(num, threads)
        echo(res.line())
        results.append(res)
    return results
