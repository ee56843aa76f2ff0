"""Distances, discrete entropy inequalities and convergence-rate extraction."""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .grid import GridField
from .kernels import InteractionKernel, measure_convolve

MAX_BINS = 128


# -- measures -------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteMeasure:
    atoms: tuple
    weights: np.ndarray

    def __post_init__(self):
        atoms = tuple(self.atoms)
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size != len(atoms):
            raise ValueError("need one weight per atom")
        if len(set(atoms)) != len(atoms):
            raise ValueError("duplicate atoms")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must be nonnegative and sum to 1 (sum {w.sum():.15g})")
        w.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_weights(cls, weights) -> "DiscreteMeasure":
        w = np.asarray(weights, dtype=float)
        return cls(tuple(range(w.size)), w / w.sum())

    def aligned(self, other: "DiscreteMeasure") -> tuple[np.ndarray, np.ndarray]:
        """Weight vectors of both measures over the union of atoms."""
        atoms = list(self.atoms) + [a for a in other.atoms if a not in set(self.atoms)]
        pos = {a: i for i, a in enumerate(atoms)}
        p, q = np.zeros(len(atoms)), np.zeros(len(atoms))
        p[[pos[a] for a in self.atoms]] = self.weights
        q[[pos[a] for a in other.atoms]] = other.weights
        return p, q


@dataclass(frozen=True)
class EmpiricalSample:
    """Equal-weight sample; points of shape (n,) in 1D or (n, d)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.size == 0:
            raise ValueError("empirical sample is empty")
        if not np.all(np.isfinite(pts)):
            raise ValueError("empirical sample has non-finite points")
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def weight(self) -> float:
        return 1.0 / self.count


def _sample(a) -> EmpiricalSample:
    return a if isinstance(a, EmpiricalSample) else EmpiricalSample(a)


# -- distances ------------------------------------------------------------------


def wasserstein1_1d(a, b) -> float:
    """W1 between 1D empirical measures.

    Equal counts use the sorted pairing; unequal counts use the exact
    quantile-function integral instead of resampling.
    """
    a, b = _sample(a), _sample(b)
    x, y = np.ravel(a.points), np.ravel(b.points)
    if x.size == y.size:
        return float(np.mean(np.abs(np.sort(x) - np.sort(y))))
    return float(stats.wasserstein_distance(x, y))


def freedman_diaconis_bins(x: np.ndarray, cap: int = MAX_BINS) -> int:
    x = np.ravel(x)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    span = x.max() - x.min()
    if iqr <= 0 or span <= 0:
        return 1
    width = 2 * iqr * x.size ** (-1 / 3)
    return int(min(cap, max(1, math.ceil(span / width))))


def grid_bin_masses(rho: GridField, edges: np.ndarray) -> np.ndarray:
    """Mass of a 1D density in each bin (piecewise-constant cells), plus the mass outside."""
    x0 = rho.origin[0]
    h = rho.spacing[0]
    cum = np.concatenate([[0.0], np.cumsum(rho.values) * h])
    nodes = x0 + h * np.arange(cum.size)
    F = np.interp(edges, nodes, cum)
    inside = np.diff(F)
    return np.concatenate([inside, [cum[-1] - inside.sum()]])


def _sample_masses(x: np.ndarray, edges: np.ndarray) -> np.ndarray:
    counts, _ = np.histogram(x, bins=edges)
    p = counts / x.size
    return np.concatenate([p, [1.0 - p.sum()]])


def tv_histogram(a, b, bins=None) -> float:
    """Full variation sum_i |p_i - q_i| between binned laws, in [0, 2].

    ``b`` may be a sample or a 1D density GridField; mass falling outside the
    bin range is compared as one extra bin.
    """
    x = np.ravel(_sample(a).points)
    if isinstance(b, GridField):
        if bins is None:
            bins = freedman_diaconis_bins(x)
        edges = np.linspace(b.lower[0], b.upper[0], int(bins) + 1) if np.ndim(bins) == 0 else np.asarray(bins)
        p, q = _sample_masses(x, edges), grid_bin_masses(b, edges)
    else:
        y = np.ravel(_sample(b).points)
        if bins is None:
            bins = freedman_diaconis_bins(np.concatenate([x, y]))
        if np.ndim(bins) == 0:
            lo, hi = min(x.min(), y.min()), max(x.max(), y.max())
            edges = np.linspace(lo, hi if hi > lo else lo + 1.0, int(bins) + 1)
        else:
            edges = np.asarray(bins)
        p, q = _sample_masses(x, edges), _sample_masses(y, edges)
    return float(min(2.0, np.abs(p - q).sum()))


def kac_chaos_statistic(ensembles: np.ndarray, reference: GridField, bins: int | None = None,
                        min_replicas: int = 100) -> float:
    """2D-histogram TV between Law(X^1_T, X^2_T) over replicas and rho_T (x) rho_T.

    ``ensembles`` has shape (R, N) or (R, N, 1).
    """
    ens = np.asarray(ensembles, dtype=float)
    if ens.ndim == 3:
        ens = ens[..., 0]
    R = ens.shape[0]
    if R < min_replicas:
        raise ValueError(f"Kac statistic needs at least {min_replicas} replicas, got {R}")
    if ens.shape[1] < 2:
        raise ValueError("Kac statistic needs N >= 2")
    pairs = ens[:, :2]
    if bins is None:
        bins = max(2, int(round(math.sqrt(R / 10))))
        bins = min(bins, MAX_BINS)
    edges = np.linspace(reference.lower[0], reference.upper[0], bins + 1)
    q1 = grid_bin_masses(reference, edges)
    counts, _, _ = np.histogram2d(pairs[:, 0], pairs[:, 1], bins=[edges, edges])
    p = counts / R
    q = np.outer(q1[:-1], q1[:-1])
    return float(np.abs(p - q).sum() + abs((1 - p.sum()) - (1 - q.sum())))


# -- entropy --------------------------------------------------------------------


def _weights(m) -> np.ndarray:
    return m.weights if isinstance(m, DiscreteMeasure) else np.asarray(m, dtype=float)


def _pair(mu, nu) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(mu, DiscreteMeasure) and isinstance(nu, DiscreteMeasure):
        return mu.aligned(nu)
    p, q = _weights(mu), _weights(nu)
    if p.shape != q.shape:
        raise ValueError("measures live on different atom sets")
    return p, q


def relative_entropy_discrete(mu, nu) -> float:
    """H(mu | nu) = sum mu log(mu / nu); +inf when mu is not absolutely continuous."""
    p, q = _pair(mu, nu)
    p, q = np.ravel(p), np.ravel(q)
    pos = p > 0
    if np.any(q[pos] == 0):
        return math.inf
    return float(max(0.0, np.sum(p[pos] * np.log(p[pos] / q[pos]))))


def total_variation(mu, nu) -> float:
    p, q = _pair(mu, nu)
    return float(np.abs(p - q).sum())


def pinsker_check(mu, nu, slack: float = 1e-12) -> tuple[float, float, bool]:
    lhs = total_variation(mu, nu) ** 2
    rhs = 2 * relative_entropy_discrete(mu, nu)
    return lhs, rhs, lhs <= rhs + slack


def weighted_pinsker_check(mu, nu, f, slack: float = 1e-12) -> tuple[float, float, bool]:
    p, q = _pair(mu, nu)
    f = np.asarray(f, dtype=float)
    lhs = float(np.dot(p - q, f)) ** 2
    rhs = 2 * (1 + math.log(float(np.dot(q, np.exp(f**2))))) * relative_entropy_discrete(p, q)
    return lhs, rhs, lhs <= rhs + slack


def variational_lower_bound(mu, nu, psi) -> float:
    """int psi dmu - log int e^psi dnu, a lower bound for H(mu | nu)."""
    p, q = _pair(mu, nu)
    psi = np.asarray(psi, dtype=float)
    return float(np.dot(p, psi) - np.log(np.dot(q, np.exp(psi))))


def is_symmetric(tensor: np.ndarray, tol: float = 1e-14) -> bool:
    """Invariance of a law on E^N under every permutation of the coordinates.

    Adjacent transpositions generate the symmetric group, so they suffice.
    """
    t = np.asarray(tensor)
    return all(np.max(np.abs(t - np.swapaxes(t, i, i + 1))) <= tol for i in range(t.ndim - 1))


def symmetrize(tensor: np.ndarray) -> np.ndarray:
    t = np.asarray(tensor, dtype=float)
    perms = list(itertools.permutations(range(t.ndim)))
    return sum(np.transpose(t, p) for p in perms) / len(perms)


def product_tensor(mu, n: int) -> np.ndarray:
    w = _weights(mu)
    out = np.ones(())
    for _ in range(n):
        out = np.multiply.outer(out, w)
    return out


def marginal(tensor: np.ndarray, k: int) -> np.ndarray:
    t = np.asarray(tensor)
    return t.sum(axis=tuple(range(k, t.ndim))) if k < t.ndim else t


def marginal_entropy_bound_check(muN: np.ndarray, mu, k: int, slack: float = 1e-10) -> tuple[float, float, bool]:
    """H(mu^{N,k} | mu^{(x)k}) <= (2k/N) H(mu^N | mu^{(x)N}) by exhaustive summation.

    ``muN`` is a probability tensor of shape (|E|,) * N.
    """
    t = np.asarray(muN, dtype=float)
    N = t.ndim
    E = _weights(mu).size
    if E > 4 or N > 5:
        raise ValueError("exhaustive regime is limited to |E| <= 4 and N <= 5")
    if t.shape != (E,) * N:
        raise ValueError(f"muN has shape {t.shape}, expected {(E,) * N}")
    if not 1 <= k <= N:
        raise ValueError("need 1 <= k <= N")
    if not is_symmetric(t, tol=1e-12):
        raise ValueError("muN is not symmetric")
    lhs = relative_entropy_discrete(marginal(t, k), product_tensor(mu, k))
    rhs = 2 * k / N * relative_entropy_discrete(t, product_tensor(mu, N))
    return lhs, rhs, lhs <= rhs + slack


def random_measure(rng: np.random.Generator, n: int, sparsity: float = 0.0) -> np.ndarray:
    """Dirichlet-type random weights with an optional fraction of zeros."""
    w = rng.exponential(size=n) ** rng.uniform(0.5, 3.0)
    if sparsity > 0:
        w[rng.uniform(size=n) < sparsity] = 0.0
    if w.sum() == 0:
        w[rng.integers(n)] = 1.0
    return w / w.sum()


# -- exponential moment statistic ----------------------------------------------


@dataclass
class MomentEstimate:
    estimate: float
    std_error: float
    threshold: float
    lam: float
    warnings: list = field(default_factory=list)


def lemma55_threshold(kernel: InteractionKernel) -> float:
    if not kernel.is_bounded or kernel.sup_norm is None:
        raise ValueError("the exponential-moment bound needs a bounded kernel with known sup norm")
    if kernel.sup_norm == 0:
        return math.inf
    return 1.0 / (16 * math.e**2 * kernel.sup_norm**2)


def exp_moment_lemma55(kernel: InteractionKernel, mu0, N: int, lam: float, reps: int, seed: int = 0,
                       density_cells: int = 1 << 16, chunk: int = 500) -> MomentEstimate:
    """Monte Carlo estimate of E exp(lam N |(phibar * eta_xi)(xi_1)|^2) for iid xi ~ mu0.

    phibar(x, y) = phi(x, y) - (phi * mu0)(x); the centring term is a
    measure convolution against mu0's density on a fine grid.
    """
    from .particles import sample_initial_batch

    thr = lemma55_threshold(kernel)
    notes = []
    if lam > thr * (1 + 1e-12):
        msg = f"lambda={lam:.4g} exceeds the bounded-moment threshold {thr:.4g}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    if mu0.d != 1:
        raise ValueError("exponential-moment estimator is implemented for 1D laws")
    lo, hi = _support_box(mu0)
    rho = mu0.density_grid(lo, hi, density_cells)
    vals = np.empty(reps)
    for start in range(0, reps, chunk):
        ids = np.arange(start, min(reps, start + chunk))
        xi = sample_initial_batch(mu0, N, seed, ids)
        s = kernel.self_convolve(0.0, xi)[:, 0, 0]
        c = measure_convolve(kernel, 0.0, xi[:, 0, :], rho)[:, 0]
        vals[ids] = np.exp(lam * N * (s - c) ** 2)
    se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
    return MomentEstimate(float(vals.mean()), se, thr, lam, notes)


def _support_box(mu0) -> tuple[float, float]:
    p = mu0.params
    if mu0.name == "uniform":
        return float(p.get("low", 0.0)), float(p.get("high", 1.0))
    if mu0.name == "gaussian":
        m, s = float(p.get("mean", 0.0)), float(p.get("std", 1.0))
        return m - 12 * s, m + 12 * s
    m1, m2, s = float(p.get("m1", -1.0)), float(p.get("m2", 1.0)), float(p.get("std", 0.5))
    return min(m1, m2) - 12 * s, max(m1, m2) + 12 * s


def fluctuation_statistic(kernel: InteractionKernel, ensembles: np.ndarray, density: GridField) -> tuple[float, float]:
    """Replica mean and standard error of |(phi * eta)(X^1) - (phi * rho)(X^1)|^2."""
    ens = np.asarray(ensembles, dtype=float)
    if ens.ndim == 2:
        ens = ens[..., None]
    s = kernel.self_convolve(0.0, ens)[:, 0, :]
    c = measure_convolve(kernel, 0.0, ens[:, 0, :], density)
    v = np.sum((s - c) ** 2, axis=-1)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0


# -- strong error and rates -----------------------------------------------------


def strong_error_path(particle, limit=None, gamma: float = 1.0) -> np.ndarray | float:
    """(sup_t |X^{N,1}_t - X_t|)^{2 gamma} per replica.

    Accepts a CoupledPath or two arrays of shape (..., K, d).
    """
    if limit is None:
        particle, limit = particle.particle, particle.limit
    a, b = np.asarray(particle, dtype=float), np.asarray(limit, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"paths are on different grids: {a.shape} vs {b.shape}")
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    sup = np.max(np.linalg.norm(a - b, axis=-1), axis=-1)
    out = sup ** (2 * gamma)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ConvergenceReport:
    Ns: list
    errors: list
    std_errors: list
    slope: float
    intercept: float
    slope_ci: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.Ns, self.Ns[1:])):
            raise ValueError("Ns must be strictly increasing")
        if any(not e > 0 for e in self.errors):
            raise ValueError("errors must be positive")

    def to_json(self) -> str:
        d = asdict(self)
        d["slope_ci"] = list(self.slope_ci)
        return json.dumps(d, indent=2, sort_keys=True, default=float)

    @classmethod
    def from_json(cls, text: str) -> "ConvergenceReport":
        d = json.loads(text)
        d["slope_ci"] = tuple(d["slope_ci"])
        return cls(**d)


def rate_fit(rows: Sequence[tuple[float, float, float]], metadata: dict | None = None) -> ConvergenceReport:
    """Weighted least squares of log(error) on log(N) with a 95% t-band.

    Weights are err^2 / se^2 (delta method for the log); when any standard
    error is zero the fit is unweighted.
    """
    rows = sorted(rows, key=lambda r: r[0])
    Ns = np.array([r[0] for r in rows], dtype=float)
    err = np.array([r[1] for r in rows], dtype=float)
    se = np.array([r[2] for r in rows], dtype=float)
    if np.unique(Ns).size < 4:
        raise ValueError("rate fit needs at least 4 distinct N values")
    if np.any(err <= 0):
        raise ValueError("errors must be positive for a log-log fit")
    x, y = np.log(Ns), np.log(err)
    w = np.ones_like(x) if np.any(se <= 0) else (err / se) ** 2
    X = np.column_stack([np.ones_like(x), x])
    XtW = X.T * w
    cov_unscaled = np.linalg.inv(XtW @ X)
    beta = cov_unscaled @ (XtW @ y)
    resid = y - X @ beta
    dof = x.size - 2
    s2 = float(np.sum(w * resid**2) / dof)
    half = stats.t.ppf(0.975, dof) * math.sqrt(s2 * cov_unscaled[1, 1])
    slope = float(beta[1])
    return ConvergenceReport(
        Ns=[int(n) if float(n).is_integer() else float(n) for n in Ns],
        errors=err.tolist(),
        std_errors=se.tolist(),
        slope=slope,
        intercept=float(beta[0]),
        slope_ci=(slope - half, slope + half),
        metadata=dict(metadata or {}),
    )
