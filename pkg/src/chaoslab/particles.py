"""Euler-Maruyama simulation of interacting particle systems and their limits.

Every Gaussian increment is a pure function of (seed, replica, step, stream):
a Philox block keyed by (seed, replica) is positioned at a counter derived
from the step index, and stream ``i`` reads the raw words at fixed offsets
``i*d .. i*d + d - 1``. Replaying, splitting replicas across workers or
changing N therefore never changes the draws of a given particle.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri

from .grid import DensityPath, GridField
from .kernels import (DriftEnvelope, InteractionKernel, MollifierFamily, make_mollified_kernel,
                      measure_convolve)

_MASK64 = (1 << 64) - 1
PURPOSE_NOISE = 0
PURPOSE_INITIAL = 1
PURPOSE_MIXTURE = 2

DEFAULT_PAIR_BUDGET = 1e11


class BudgetExceededError(RuntimeError):
    """Projected pairwise kernel work exceeds the configured budget."""


def _uniforms(seed: int, replica: int, step: int, purpose: int, count: int) -> np.ndarray:
    bg = np.random.Philox(key=[int(seed) & _MASK64, int(replica) & _MASK64], counter=[0, int(step), int(purpose), 0])
    raw = bg.random_raw(count)
    return ((raw >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class BrownianDriver:
    """Counter-based source of Brownian increments for one replica."""

    seed: int
    dt: float
    replica: int = 0

    def normals(self, step: int, n_streams: int, d: int, streams=None) -> np.ndarray:
        """Standard normals of shape (len(streams), d) for the given step."""
        if streams is None:
            u = _uniforms(self.seed, self.replica, step, PURPOSE_NOISE, n_streams * d)
            return ndtri(u).reshape(n_streams, d)
        streams = np.asarray(streams, dtype=np.int64)
        top = int(streams.max()) + 1 if streams.size else 0
        u = _uniforms(self.seed, self.replica, step, PURPOSE_NOISE, top * d).reshape(top, d)
        return ndtri(u[streams])

    def increments(self, step: int, n_streams: int, d: int, streams=None) -> np.ndarray:
        return math.sqrt(self.dt) * self.normals(step, n_streams, d, streams)


def batch_increments(seed: int, replicas: Sequence[int], step: int, n: int, d: int, dt: float) -> np.ndarray:
    """Increments for several replicas at one step: shape (R, n, d)."""
    out = np.empty((len(replicas), n, d))
    scale = math.sqrt(dt)
    for k, r in enumerate(replicas):
        out[k] = ndtri(_uniforms(seed, r, step, PURPOSE_NOISE, n * d)).reshape(n, d)
    return out * scale


# -- initial laws ---------------------------------------------------------------


@dataclass(frozen=True)
class Mu0Spec:
    """Named initial density: gaussian(mean, std), uniform(low, high), bimodal(m1, m2, std, weight)."""

    name: str
    params: dict = field(default_factory=dict)
    d: int = 1

    def __post_init__(self):
        if self.name not in ("gaussian", "uniform", "bimodal"):
            raise ValueError(f"unknown initial law '{self.name}'")
        if self.name == "bimodal" and self.d != 1:
            raise ValueError("bimodal initial law is 1D only")

    def _p(self, key, default):
        return float(self.params.get(key, default))

    def pdf(self, x) -> np.ndarray:
        """Density at points x of shape (..., d) (or (...) in 1D)."""
        x = np.asarray(x, dtype=float)
        if self.d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if self.name == "gaussian":
            m, s = self._p("mean", 0.0), self._p("std", 1.0)
            z = (x - m) / s
            return np.prod(np.exp(-0.5 * z**2) / (s * math.sqrt(2 * math.pi)), axis=-1)
        if self.name == "uniform":
            lo, hi = self._p("low", 0.0), self._p("high", 1.0)
            inside = np.all((x >= lo) & (x <= hi), axis=-1)
            return np.where(inside, (hi - lo) ** (-self.d), 0.0)
        m1, m2, s, w = self._p("m1", -1.0), self._p("m2", 1.0), self._p("std", 0.5), self._p("weight", 0.5)
        g = lambda m: np.exp(-0.5 * ((x[..., 0] - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        return w * g(m1) + (1 - w) * g(m2)

    def from_uniforms(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Map iid uniforms (..., d) to samples; ``v`` selects bimodal components."""
        if self.name == "gaussian":
            return self._p("mean", 0.0) + self._p("std", 1.0) * ndtri(u)
        if self.name == "uniform":
            lo, hi = self._p("low", 0.0), self._p("high", 1.0)
            return lo + (hi - lo) * u
        m1, m2, s, w = self._p("m1", -1.0), self._p("m2", 1.0), self._p("std", 0.5), self._p("weight", 0.5)
        return np.where(v < w, m1, m2) + s * ndtri(u)

    def shifted(self, shift: float) -> "Mu0Spec":
        p = dict(self.params)
        if self.name == "gaussian":
            p["mean"] = self._p("mean", 0.0) + shift
        elif self.name == "uniform":
            p["low"], p["high"] = self._p("low", 0.0) + shift, self._p("high", 1.0) + shift
        else:
            p["m1"], p["m2"] = self._p("m1", -1.0) + shift, self._p("m2", 1.0) + shift
        return Mu0Spec(self.name, p, self.d)

    def density_grid(self, lower: float, upper: float, n: int) -> GridField:
        """1D density on a grid, renormalized so the midpoint mass is exactly 1."""
        if self.d != 1:
            raise ValueError("density_grid is 1D only")
        g = GridField.from_function(self.pdf, lower, upper, n, time_label=0.0)
        return g.with_values(g.values / g.mass(), time_label=0.0)


def _sample_block(spec: Mu0Spec, n: int, seed: int, replica: int, correlation: str,
                  w: float, shift: float) -> np.ndarray:
    d = spec.d
    raw = _uniforms(seed, replica, 0, PURPOSE_INITIAL, 2 * n * d).reshape(n, d, 2)
    u, v = raw[..., 0], raw[..., 1]
    if correlation == "iid":
        return spec.from_uniforms(u, v)
    if correlation == "exchangeable_mixture":
        pick = _uniforms(seed, replica, 0, PURPOSE_MIXTURE, 1)[0]
        comp = spec if pick < w else spec.shifted(shift)
        return comp.from_uniforms(u, v)
    raise ValueError(f"unknown correlation '{correlation}'")


@dataclass(frozen=True)
class ParticleEnsemble:
    """Positions of N particles in R^d at one time point."""

    positions: np.ndarray
    time: float = 0.0
    step: int = 0
    seed: int | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if pos.ndim != 2 or pos.shape[0] < 1 or pos.shape[1] < 1:
            raise ValueError(f"positions must be an (N, d) array with N, d >= 1, got {pos.shape}")
        bad = ~np.all(np.isfinite(pos), axis=1)
        if np.any(bad):
            raise FloatingPointError(f"particle {int(np.argmax(bad))} has a non-finite coordinate")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]


def sample_initial(mu0: Mu0Spec, N: int, seed: int, correlation: str = "iid", *, replica: int = 0,
                   w: float = 0.5, shift: float = 0.1) -> ParticleEnsemble:
    """Draw an initial configuration.

    ``"iid"`` gives mu0^{(x)N}; ``"exchangeable_mixture"`` draws the whole
    vector from mu0^{(x)N} with probability ``w`` and from the product of the
    ``shift``-translated law otherwise.
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"mixture weight must lie in [0, 1], got {w}")
    pos = _sample_block(mu0, N, seed, replica, correlation, w, shift)
    return ParticleEnsemble(pos, 0.0, 0, seed)


def sample_initial_batch(mu0: Mu0Spec, N: int, seed: int, replicas: Sequence[int],
                         correlation: str = "iid", w: float = 0.5, shift: float = 0.1) -> np.ndarray:
    return np.stack([_sample_block(mu0, N, seed, r, correlation, w, shift) for r in replicas])


def initial_relative_entropy(mu0: Mu0Spec, N: int, w: float, shift: float, nodes: int = 40) -> float:
    """H(mu^N_0 | m^{(x)N}) for the exchangeable Gaussian mixture, m its one-particle marginal.

    Tensor Gauss-Hermite quadrature; intended for N <= 4.
    """
    if mu0.name != "gaussian" or mu0.d != 1:
        raise ValueError("closed-form mixture entropy is implemented for 1D gaussian mu0 only")
    if w in (0.0, 1.0) or shift == 0.0:
        return 0.0
    if N > 4:
        raise ValueError("tensor quadrature is limited to N <= 4")
    m, s = float(mu0.params.get("mean", 0.0)), float(mu0.params.get("std", 1.0))
    z, wz = np.polynomial.hermite.hermgauss(nodes)
    wz = wz / math.sqrt(math.pi)

    def logpdf(x, mean):
        return -0.5 * ((x - mean) / s) ** 2 - math.log(s * math.sqrt(2 * math.pi))

    def expectation(mean):
        pts = np.stack(np.meshgrid(*([mean + math.sqrt(2) * s * z] * N), indexing="ij"), -1).reshape(-1, N)
        wts = np.prod(np.stack(np.meshgrid(*([wz] * N), indexing="ij"), -1).reshape(-1, N), axis=1)
        la = logpdf(pts, m).sum(axis=1)
        lb = logpdf(pts, m + shift).sum(axis=1)
        log_joint = np.logaddexp(math.log(w) + la, math.log1p(-w) + lb)
        log_marg = np.logaddexp(math.log(w) + logpdf(pts, m), math.log1p(-w) + logpdf(pts, m + shift)).sum(axis=1)
        return float(wts @ (log_joint - log_marg))

    return w * expectation(m) + (1 - w) * expectation(m + shift)


# -- stepping -------------------------------------------------------------------


SigmaLike = float | Callable[[float, np.ndarray], np.ndarray]


def _apply_sigma(sigma: SigmaLike, t: float, x: np.ndarray, dw: np.ndarray) -> np.ndarray:
    if not callable(sigma):
        return float(sigma) * dw
    s = np.asarray(sigma(t, x), dtype=float)
    if s.ndim == x.ndim - 1:
        return s[..., None] * dw
    return np.einsum("...ij,...j->...i", s, dw)


def em_step(ensemble: ParticleEnsemble, drift_field: Callable, sigma: SigmaLike, dt: float,
            driver: BrownianDriver, step: int | None = None, streams=None) -> ParticleEnsemble:
    """One explicit Euler-Maruyama step for every particle.

    ``drift_field(t, positions, ensemble)`` returns the (N, d) drift evaluated
    on the pre-step ensemble. Particle ``i`` uses Brownian stream ``streams[i]``
    (default ``i``).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    k = ensemble.step if step is None else step
    x = ensemble.positions
    t = ensemble.time
    b = np.asarray(drift_field(t, x, ensemble), dtype=float).reshape(x.shape)
    bad = ~np.all(np.isfinite(b), axis=1)
    if np.any(bad):
        raise FloatingPointError(f"non-finite drift for particle {int(np.argmax(bad))} at step {k}")
    dw = math.sqrt(dt) * driver.normals(k, ensemble.N, ensemble.d, streams)
    new = x + b * dt + _apply_sigma(sigma, t, x, dw)
    bad = ~np.all(np.isfinite(new), axis=1)
    if np.any(bad):
        raise FloatingPointError(f"non-finite update for particle {int(np.argmax(bad))} at step {k}")
    return ParticleEnsemble(new, t + dt, k + 1, ensemble.seed)


@dataclass(frozen=True)
class SimConfig:
    """Particle-simulation parameters. ``sigma`` is a scalar or sigma(t, x)."""

    N: int
    d: int = 1
    T: float = 1.0
    dt: float = 1e-3
    sigma: SigmaLike = 1.0
    kappa0: float = 1.0
    replicas: int = 1
    seed: int = 0
    snapshot_every: int | None = None
    pair_budget: float = DEFAULT_PAIR_BUDGET
    threads: int = 1

    def __post_init__(self):
        if self.N < 1 or self.d < 1:
            raise ValueError(f"need N >= 1 and d >= 1, got N={self.N}, d={self.d}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.T < self.dt:
            raise ValueError(f"horizon T={self.T} is shorter than dt={self.dt}")
        if self.replicas < 1:
            raise ValueError(f"replicas must be >= 1, got {self.replicas}")
        if self.kappa0 < 1:
            raise ValueError("kappa0 must be >= 1")
        self.check_ellipticity()

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.T / self.dt - 1e-9))

    def check_ellipticity(self, probes: int = 256) -> None:
        """kappa0^-1 |xi| <= |sigma xi| <= kappa0 |xi| on random probes."""
        k0 = self.kappa0
        if not callable(self.sigma):
            s = abs(float(self.sigma))
            if not (1 / k0 - 1e-12 <= s <= k0 + 1e-12):
                raise ValueError(f"sigma={s} violates ellipticity with kappa0={k0}")
            return
        rng = np.random.default_rng(12345)
        x = rng.normal(scale=3.0, size=(probes, self.d))
        t = rng.uniform(0, self.T, size=probes)
        for ti, xi in zip(t, x):
            s = np.asarray(self.sigma(ti, xi[None, :]), dtype=float)
            mat = s.reshape(self.d, self.d) if s.size == self.d**2 and self.d > 1 else float(s.ravel()[0]) * np.eye(self.d)
            sv = np.linalg.svd(mat, compute_uv=False)
            if sv.min() < 1 / k0 - 1e-12 or sv.max() > k0 + 1e-12:
                raise ValueError(f"sigma violates ellipticity with kappa0={k0} at x={xi}")

    def snapshot_steps(self) -> np.ndarray:
        n = self.n_steps
        every = self.snapshot_every or n
        steps = list(range(0, n + 1, every))
        if steps[-1] != n:
            steps.append(n)
        return np.array(steps)


@dataclass
class ParticlePath:
    """Snapshots of a batch of replicas: positions has shape (R, K, N, d)."""

    times: np.ndarray
    positions: np.ndarray
    seed: int
    replicas: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def ensemble(self, replica: int = 0, k: int = -1) -> ParticleEnsemble:
        return ParticleEnsemble(self.positions[replica, k], float(self.times[k]), seed=self.seed)

    def columns(self) -> np.ndarray:
        """Columnar layout: rows (replica, time index, particle index, coordinates...)."""
        R, K, N, d = self.positions.shape
        r, k, i = np.meshgrid(self.replicas, np.arange(K), np.arange(N), indexing="ij")
        return np.column_stack([r.ravel(), k.ravel(), i.ravel(), self.positions.reshape(-1, d)])


def _check_budget(config: SimConfig, kernel: InteractionKernel) -> float:
    projected = config.replicas * config.n_steps * kernel.cost_per_step(config.N)
    if projected > config.pair_budget:
        raise BudgetExceededError(
            f"projected {projected:.3e} pair evaluations exceed the budget {config.pair_budget:.3e}"
        )
    return projected


def _resolve_initial(initial, config: SimConfig, replicas: np.ndarray) -> np.ndarray:
    if isinstance(initial, Mu0Spec):
        return sample_initial_batch(initial, config.N, config.seed, replicas)
    x0 = np.asarray(initial, dtype=float)
    if x0.ndim == 1:
        x0 = x0[:, None]
    if x0.ndim == 2:
        x0 = np.broadcast_to(x0, (len(replicas),) + x0.shape)
    else:
        x0 = x0[replicas - replicas[0]] if x0.shape[0] != len(replicas) else x0
    if x0.shape[1:] != (config.N, config.d):
        raise ValueError(f"initial positions have shape {x0.shape[1:]}, expected {(config.N, config.d)}")
    return np.array(x0, dtype=float)


def _near_singular(kernel: InteractionKernel, X: np.ndarray, tol: float) -> int:
    """Count distinct particle pairs closer than ``tol`` to the kernel's singular set."""
    count = 0
    n = X.shape[1]
    for Xr in X:
        diff = np.abs(Xr[:, None, :] - Xr[None, :, :])
        if kernel.name == "axis":
            close = np.any(diff < tol, axis=-1)
        else:
            close = np.linalg.norm(diff, axis=-1) < tol
        count += (int(close.sum()) - n) // 2
    return count


def _run_chunks(fn, replicas: np.ndarray, threads: int):
    if threads <= 1 or len(replicas) <= 1:
        return [fn(replicas)]
    chunks = [c for c in np.array_split(replicas, min(threads, len(replicas))) if c.size]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def simulate_particle_system(config: SimConfig, kernel: InteractionKernel, F: DriftEnvelope,
                             initial, *, replica_start: int = 0, streams=None,
                             singular_tol: float = 1e-8) -> ParticlePath:
    """Run dX^i = F(t, X^i, (phi_t * eta)(X^i)) dt + sigma dW^i for all replicas.

    ``initial`` is a Mu0Spec (sampled iid per replica) or explicit positions.
    ``streams[i]`` is the Brownian stream used by particle ``i``.
    """
    _check_budget(config, kernel)
    replicas = np.arange(replica_start, replica_start + config.replicas)
    x0_all = _resolve_initial(initial, config, replicas)
    snaps = config.snapshot_steps()
    track_singular = kernel.singular_exponents is not None and config.N > 1
    n, d, dt = config.N, config.d, config.dt
    if streams is not None:
        streams = np.asarray(streams, dtype=np.int64)

    def run(chunk):
        X = x0_all[chunk - replicas[0]].copy()
        out = np.empty((len(chunk), len(snaps), n, d))
        out[:, 0] = X
        near = 0
        j = 1
        for k in range(config.n_steps):
            t = k * dt
            if track_singular:
                near += _near_singular(kernel, X, singular_tol)
            b = F(t, X, kernel.self_convolve(t, X))
            dw = batch_increments(config.seed, chunk, k, n, d, dt)
            if streams is not None:
                dw = dw[:, streams]
            X = X + b * dt + _apply_sigma(config.sigma, t, X, dw)
            if not np.all(np.isfinite(X)):
                r, i = np.argwhere(~np.all(np.isfinite(X), axis=-1))[0]
                raise FloatingPointError(f"non-finite update for particle {i} (replica {chunk[r]}) at step {k}")
            if j < len(snaps) and snaps[j] == k + 1:
                out[:, j] = X
                j += 1
        return out, near

    results = _run_chunks(run, replicas, config.threads)
    pos = np.concatenate([r[0] for r in results])
    diag = {"near_singular_pairs": sum(r[1] for r in results)} if track_singular else {}
    return ParticlePath(snaps * dt, pos, config.seed, replicas, diag)


def simulate_moderate_system(config: SimConfig, mollifier: MollifierFamily, eps_schedule: Callable[[int], float],
                             F: DriftEnvelope, initial, **kwargs) -> ParticlePath:
    """Moderately interacting system: kernel phi_{eps_N}(x - y) with eps_N from the schedule."""
    if F.bound is None:
        raise ValueError("moderate interaction requires a bounded outer drift F")
    eps = eps_schedule(config.N)
    kernel = make_mollified_kernel(mollifier, eps)
    path = simulate_particle_system(config, kernel, F, initial, **kwargs)
    path.diagnostics["eps"] = eps
    return path


@dataclass
class CoupledPath:
    """Particle 1 of the N-system and its synchronously coupled limit copy.

    ``particle`` and ``limit`` have shape (R, K, d); ``final_ensembles`` is
    (R, N, d) at the horizon.
    """

    times: np.ndarray
    particle: np.ndarray
    limit: np.ndarray
    final_ensembles: np.ndarray
    replicas: np.ndarray


def simulate_coupled_limit(config: SimConfig, kernel: InteractionKernel, F: DriftEnvelope,
                           limit_density: DensityPath, mode: str = "mckean", initial=None,
                           *, replica_start: int = 0) -> CoupledPath:
    """Step the N-particle system and the limit process with identical increments.

    In ``"mckean"`` mode the limit drift is F(t, X, (phi_t * mu_t)(X)) with
    mu_t from ``limit_density``; in ``"density"`` mode it is F(t, X, rho_t(X)).
    The limit copy starts at particle 1's initial point and reads stream 0.
    """
    if mode not in ("mckean", "density"):
        raise ValueError(f"unknown coupling mode '{mode}'")
    if config.d != 1 and mode == "density":
        raise ValueError("density mode is implemented for d = 1")
    _check_budget(config, kernel)
    replicas = np.arange(replica_start, replica_start + config.replicas)
    x0_all = _resolve_initial(initial, config, replicas)
    snaps = config.snapshot_steps()
    n, d, dt = config.N, config.d, config.dt
    t_end = config.n_steps * dt
    if limit_density.times[0] > 1e-12 or limit_density.times[-1] < t_end - dt - 1e-9:
        raise ValueError("limit density does not cover the simulation horizon")

    def limit_drift(t, Y):
        rho = limit_density.at(t)
        if mode == "mckean":
            r = measure_convolve(kernel, t, Y, rho)
        else:
            r = rho.interp(Y[:, 0])[:, None]
        return F(t, Y, r)

    def run(chunk):
        X = x0_all[chunk - replicas[0]].copy()
        Y = X[:, 0, :].copy()
        P = np.empty((len(chunk), len(snaps), d))
        L = np.empty_like(P)
        P[:, 0], L[:, 0] = X[:, 0], Y
        j = 1
        for k in range(config.n_steps):
            t = k * dt
            b = F(t, X, kernel.self_convolve(t, X))
            bl = limit_drift(t, Y)
            dw = batch_increments(config.seed, chunk, k, n, d, dt)
            X = X + b * dt + _apply_sigma(config.sigma, t, X, dw)
            Y = Y + bl * dt + _apply_sigma(config.sigma, t, Y, dw[:, 0, :])
            if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
                raise FloatingPointError(f"non-finite coupled update at step {k}")
            if j < len(snaps) and snaps[j] == k + 1:
                P[:, j], L[:, j] = X[:, 0], Y
                j += 1
        return P, L, X

    results = _run_chunks(run, replicas, config.threads)
    return CoupledPath(
        times=snaps * dt,
        particle=np.concatenate([r[0] for r in results]),
        limit=np.concatenate([r[1] for r in results]),
        final_ensembles=np.concatenate([r[2] for r in results]),
        replicas=replicas,
    )
