"""One-dimensional reference PDE solvers.

Fokker-Planck equations are written in the forward (probabilistic) form
matching the particle dynamics dX = b dt + sigma dW:

    d_t rho = d_xx(a rho) - d_x(b rho),    a = sigma^2 / 2,

and are discretized with an explicit conservative finite-volume scheme:
central differences on ``a rho`` and a Rusanov (local Lax-Friedrichs)
transport flux, which is monotone under the CFL bound checked below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_banded
from scipy.ndimage import convolve1d
from scipy.special import roots_hermite, roots_legendre

from .grid import DensityPath, GridField
from .kernels import DriftEnvelope, InteractionKernel, measure_convolve

NEGATIVE_TOL = 1e-12


class CflError(ValueError):
    """Time step violates the explicit stability bound."""


class NegativeDensityError(FloatingPointError):
    """A density update went below -1e-12."""


class PicardDivergenceError(RuntimeError):
    def __init__(self, message: str, log: "PicardLog"):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class PdeScheme:
    """Discretization parameters. ``dt_pde`` is an upper bound on the step."""

    dx: float
    dt_pde: float
    horizon: float
    boundary: str = "periodic"
    limiter_on: bool = False

    def __post_init__(self):
        if self.dx <= 0 or self.dt_pde <= 0:
            raise ValueError("dx and dt_pde must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.boundary not in ("periodic", "zero_flux"):
            raise ValueError(f"unknown boundary '{self.boundary}'")

    def check_cfl(self, a_max: float, alpha: float = 0.0, dt: float | None = None) -> None:
        dt = self.dt_pde if dt is None else dt
        if a_max > 0 and dt > self.dx**2 / (2 * a_max) * (1 + 1e-12):
            raise CflError(f"dt={dt:.3e} exceeds the diffusive bound dx^2/(2 a_max)={self.dx**2 / (2 * a_max):.3e}")
        load = dt * (2 * a_max / self.dx**2 + alpha / self.dx)
        if load > 1 + 1e-12:
            raise CflError(f"dt={dt:.3e} violates dt (2a/dx^2 + alpha/dx) <= 1 (value {load:.4f})")


def step_times(horizon: float, dt_max: float, times: Sequence[float] | None) -> tuple[np.ndarray, np.ndarray]:
    """Step grid hitting every requested snapshot time; returns (grid, snapshot indices)."""
    if times is None:
        times = [0.0, horizon]
    times = np.unique(np.asarray(times, dtype=float))
    if times[0] < 0 or times[-1] > horizon * (1 + 1e-12) + 1e-15:
        raise ValueError(f"snapshot times must lie in [0, {horizon}]")
    if times[0] > 0:
        times = np.concatenate([[0.0], times])
    grid = [0.0]
    idx = [0]
    for t0, t1 in zip(times[:-1], times[1:]):
        n = max(1, math.ceil((t1 - t0) / dt_max - 1e-9))
        grid.extend(t0 + (t1 - t0) * np.arange(1, n + 1) / n)
        grid[-1] = t1
        idx.append(len(grid) - 1)
    return np.array(grid), np.array(idx)


def _diffusion_values(a, x: np.ndarray) -> np.ndarray:
    if callable(a):
        return np.broadcast_to(np.asarray(a(x), dtype=float), x.shape).copy()
    return np.full(x.shape, float(a))


def _minmod(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    return np.where(p * q > 0, np.sign(p) * np.minimum(np.abs(p), np.abs(q)), 0.0)


class _FiniteVolume:
    """Explicit flux-form update for d_t rho = d_xx(a rho) - d_x(b rho)."""

    def __init__(self, x: np.ndarray, a_vals: np.ndarray, scheme: PdeScheme):
        self.x = x
        self.a = a_vals
        self.scheme = scheme
        self.dx = scheme.dx
        self.periodic = scheme.boundary == "periodic"

    def _neighbor(self, v):
        return np.roll(v, -1) if self.periodic else np.concatenate([v[1:], v[-1:]])

    def _slopes(self, rho):
        if self.periodic:
            return _minmod(rho - np.roll(rho, 1), np.roll(rho, -1) - rho)
        s = np.zeros_like(rho)
        s[1:-1] = _minmod(rho[1:-1] - rho[:-2], rho[2:] - rho[1:-1])
        return s

    def rhs(self, rho: np.ndarray, b: np.ndarray, alpha: float) -> np.ndarray:
        """-(H_{i+1/2} - H_{i-1/2}) / dx with H the face flux at i+1/2."""
        if self.scheme.limiter_on:
            s = self._slopes(rho)
            left = rho + 0.5 * s
            right = self._neighbor(rho - 0.5 * s)
        else:
            left, right = rho, self._neighbor(rho)
        flux = 0.5 * (b * left + self._neighbor(b) * right) - 0.5 * alpha * (right - left)
        ar = self.a * rho
        flux = flux - (self._neighbor(ar) - ar) / self.dx
        if not self.periodic:
            flux[-1] = 0.0
            prev = np.concatenate([[0.0], flux[:-1]])
        else:
            prev = np.roll(flux, 1)
        return -(flux - prev) / self.dx


@dataclass
class _FpRun:
    grid_times: np.ndarray
    history: np.ndarray
    snap_idx: np.ndarray


def _run_fp(rho0: GridField, a, scheme: PdeScheme, drift: Callable, times) -> _FpRun:
    """March the FV scheme; ``drift(k, t, rho)`` returns (b values, alpha)."""
    if rho0.ndim != 1:
        raise ValueError("reference Fokker-Planck solves are 1D")
    if abs(rho0.spacing[0] - scheme.dx) > 1e-12 * scheme.dx:
        raise ValueError(f"scheme dx={scheme.dx} does not match grid spacing {rho0.spacing[0]}")
    x = rho0.axis(0)
    a_vals = _diffusion_values(a, x)
    a_max = float(np.max(np.abs(a_vals)))
    grid, snap_idx = step_times(scheme.horizon, scheme.dt_pde, times)
    fv = _FiniteVolume(x, a_vals, scheme)
    rho = np.array(rho0.values, dtype=float)
    b, alpha = drift(0, 0.0, rho)
    scheme.check_cfl(a_max, alpha)
    hist = np.empty((grid.size, rho.size))
    hist[0] = rho
    for k in range(grid.size - 1):
        t, dt = grid[k], grid[k + 1] - grid[k]
        if k > 0:
            b, alpha = drift(k, t, rho)
        scheme.check_cfl(a_max, alpha, dt)
        if scheme.limiter_on:
            stage = rho + dt * fv.rhs(rho, b, alpha)
            b1, alpha1 = drift(k, t + dt, stage) if drift.__dict__.get("nonlinear", True) else (b, alpha)
            rho = 0.5 * rho + 0.5 * (stage + dt * fv.rhs(stage, b1, max(alpha, alpha1)))
        else:
            rho = rho + dt * fv.rhs(rho, b, alpha)
        lo = float(rho.min())
        if lo < -NEGATIVE_TOL:
            raise NegativeDensityError(f"density reached {lo:.3e} at step {k + 1} (t={grid[k + 1]:.6g})")
        if not np.all(np.isfinite(rho)):
            raise FloatingPointError(f"non-finite density at step {k + 1}")
        hist[k + 1] = rho
    return _FpRun(grid, hist, snap_idx)


def _to_path(rho0: GridField, run: _FpRun) -> DensityPath:
    fields = [rho0.with_values(run.history[i], time_label=float(run.grid_times[i])) for i in run.snap_idx]
    return DensityPath(run.grid_times[run.snap_idx], fields)


def _nonlinear_drift(F: DriftEnvelope, x: np.ndarray, kernel: InteractionKernel | None, grid: GridField):
    lip = F.lipschitz_r if F.lipschitz_r is not None else 0.0
    X = x[:, None]

    def drift(k, t, rho):
        if kernel is None:
            r = rho[:, None]
            b = F(t, X, r)[:, 0]
            alpha = float(np.max(np.abs(b) + lip * np.abs(rho)))
        else:
            r = measure_convolve(kernel, t, X, grid.with_values(np.maximum(rho, 0.0)), check=False)
            b = F(t, X, r)[:, 0]
            alpha = float(np.max(np.abs(b)))
        return b, alpha

    return drift


def solve_nonlinear_fp(rho0: GridField, F: DriftEnvelope, a, scheme: PdeScheme,
                       times: Sequence[float] | None = None, kernel: InteractionKernel | None = None) -> DensityPath:
    """Solve d_t rho = d_xx(a rho) - d_x(b rho).

    Without ``kernel`` the drift is density dependent, b = F(t, x, rho(x)).
    With ``kernel`` it is the McKean-Vlasov drift b = F(t, x, (phi * rho)(x)).
    Snapshots are returned exactly at ``times`` (default: 0 and the horizon).
    """
    drift = _nonlinear_drift(F, rho0.axis(0), kernel, rho0)
    return _to_path(rho0, _run_fp(rho0, a, scheme, drift, times))


def solve_linear_fp(rho0: GridField, b: Callable[[float, np.ndarray], np.ndarray], a, scheme: PdeScheme,
                    times: Sequence[float] | None = None) -> DensityPath:
    """Linear Fokker-Planck equation with a given drift field b(t, x)."""
    x = rho0.axis(0)

    def drift(k, t, rho):
        bv = np.broadcast_to(np.asarray(b(t, x), dtype=float), x.shape)
        return bv, float(np.max(np.abs(bv)))

    drift.nonlinear = False
    return _to_path(rho0, _run_fp(rho0, a, scheme, drift, times))


# -- Picard iteration -----------------------------------------------------------


@dataclass
class PicardLog:
    """Gamma_n(t) = ||rho^n_t - rho^{n-1}_t||_inf + ||rho^n_t - rho^{n-1}_t||_1 per iterate."""

    times: np.ndarray
    gamma_t: list = field(default_factory=list)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([g.max() for g in self.gamma_t])

    def strictly_decreasing_from(self, n0: int = 2) -> bool:
        g = self.gammas[n0 - 1:]
        return bool(np.all(np.diff(g) < 0))


def picard_density_iteration(rho0: GridField, F: DriftEnvelope, a, scheme: PdeScheme, n_iters: int,
                             kernel: InteractionKernel | None = None,
                             times: Sequence[float] | None = None) -> tuple[DensityPath, PicardLog]:
    """Picard scheme: iterate n solves the linear equation with drift frozen at iterate n-1.

    Iterate 0 is the time-constant law rho^0_t = rho0. The frozen linear
    problem reuses the nonlinear solver's step grid and flux viscosity, so the
    fixed point coincides with :func:`solve_nonlinear_fp`.
    """
    if n_iters < 1:
        raise ValueError("n_iters must be >= 1")
    x = rho0.axis(0)
    base = _nonlinear_drift(F, x, kernel, rho0)
    grid_times, snap_idx = step_times(scheme.horizon, scheme.dt_pde, times)
    prev = np.broadcast_to(np.asarray(rho0.values, dtype=float), (grid_times.size, x.size))
    log = PicardLog(grid_times)
    run = None
    rising = 0
    for n in range(1, n_iters + 1):
        frozen = prev

        def drift(k, t, rho, frozen=frozen):
            return base(k, t, frozen[k])

        drift.nonlinear = False
        run = _run_fp(rho0, a, scheme, drift, times)
        diff = run.history - frozen
        gamma = np.max(np.abs(diff), axis=1) + np.sum(np.abs(diff), axis=1) * scheme.dx
        log.gamma_t.append(gamma)
        g = log.gammas
        if n >= 2 and g[-1] > g[-2]:
            rising += 1
            if rising >= 3:
                raise PicardDivergenceError(f"Gamma increased for 3 consecutive iterates (n={n})", log)
        else:
            rising = 0
        prev = run.history
    return _to_path(rho0, run), log


# -- Burgers CDF and Cole-Hopf --------------------------------------------------


def _primitive(g: Callable, nodes: int = 8) -> Callable[[np.ndarray], np.ndarray]:
    s, w = roots_legendre(nodes)
    s, w = 0.5 * (s + 1), 0.5 * w

    def G(v):
        v = np.asarray(v, dtype=float)
        return v * np.tensordot(np.asarray(g(v[..., None] * s), dtype=float), w, axes=([-1], [0]))

    return G


def solve_burgers_cdf(V0: GridField, g: Callable, scheme: PdeScheme,
                      times: Sequence[float] | None = None) -> DensityPath:
    """Solve d_t V = d_xx V - d_x G(V), G(V) = int_0^V g, for a CDF V.

    This is the integrated form of the density equation for dX = g(V(X)) dt + sqrt(2) dW.
    The end values of V0 are held as Dirichlet data.
    """
    v = np.array(V0.values, dtype=float)
    if V0.ndim != 1:
        raise ValueError("Burgers CDF solve is 1D")
    if np.any(np.diff(v) < -1e-12):
        raise ValueError("V0 must be nondecreasing")
    if v.min() < -1e-12 or v.max() > 1 + 1e-12:
        raise ValueError("V0 must take values in [0, 1]")
    dx = scheme.dx
    G = _primitive(g)
    lo, hi = v[0], v[-1]
    grid, snap_idx = step_times(scheme.horizon, scheme.dt_pde, times)
    probe = np.linspace(lo, hi, 257)
    alpha = float(np.max(np.abs(g(probe)))) if hi > lo else float(abs(g(np.array([lo]))[0]))
    scheme.check_cfl(1.0, alpha)
    hist = np.empty((grid.size, v.size))
    hist[0] = v
    for k in range(grid.size - 1):
        dt = grid[k + 1] - grid[k]
        ext = np.concatenate([[lo], v, [hi]])
        Gx = G(ext)
        flux = 0.5 * (Gx[:-1] + Gx[1:]) - 0.5 * alpha * (ext[1:] - ext[:-1]) - (ext[1:] - ext[:-1]) / dx
        v = v - dt / dx * (flux[1:] - flux[:-1])
        hist[k + 1] = v
    bad = np.min(np.diff(hist, axis=1)) if v.size > 1 else 0.0
    if bad < -1e-10:
        raise FloatingPointError(f"CDF lost monotonicity (min increment {bad:.3e})")
    if hist.min() < -1e-10 or hist.max() > 1 + 1e-10:
        raise FloatingPointError("CDF left [0, 1]")
    fields = [V0.with_values(hist[i], time_label=float(grid[i])) for i in snap_idx]
    return DensityPath(grid[snap_idx], fields)


class QuadratureError(RuntimeError):
    pass


def cole_hopf_exact(V0: GridField, t: float, tol: float = 1e-8, max_nodes: int = 2048,
                    x: np.ndarray | None = None) -> GridField:
    """Exact solution of d_t V = d_xx V - V d_x V through the Hopf-Cole transform.

    With theta_0 = exp(-U_0 / 2), U_0' = V_0, one has
    V(t, x) = (2 / sqrt t) E[Z theta_0(x - 2 sqrt t Z)] / E[theta_0(x - 2 sqrt t Z)]
    for Z with density proportional to exp(-z^2), evaluated by Gauss-Hermite
    quadrature with node doubling until successive results agree to ``tol``.
    V_0 is the piecewise-linear interpolant of the grid values, extended by
    constants outside the grid.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return V0.with_values(V0.values, time_label=0.0)
    xc = V0.axis(0)
    v = np.asarray(V0.values, dtype=float)
    xq = xc if x is None else np.asarray(x, dtype=float)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(xc))])

    def U0(y):
        seg = np.clip(np.searchsorted(xc, y) - 1, 0, xc.size - 2)
        yy = np.clip(y, xc[0], xc[-1])
        vy = np.interp(yy, xc, v)
        inner = cum[seg] + 0.5 * (v[seg] + vy) * (yy - xc[seg])
        return inner + np.where(y < xc[0], v[0] * (y - xc[0]), 0.0) + np.where(y > xc[-1], v[-1] * (y - xc[-1]), 0.0)

    def evaluate(n):
        z, w = roots_hermite(n)
        keep = w > 0
        z, w = z[keep], w[keep]
        y = xq[:, None] - 2 * math.sqrt(t) * z[None, :]
        logt = -0.5 * U0(y) + np.log(w)[None, :]
        shift = logt.max(axis=1, keepdims=True)
        e = np.exp(logt - shift)
        return (2 / math.sqrt(t)) * (e @ z) / e.sum(axis=1)

    n = 64
    prev = evaluate(n)
    while n < max_nodes:
        n *= 2
        cur = evaluate(n)
        if np.max(np.abs(cur - prev)) < tol:
            if x is None:
                return V0.with_values(cur, time_label=t)
            return GridField((float(xq[0] - 0.5 * V0.spacing[0]),), V0.spacing, cur, t)
        prev = cur
    raise QuadratureError(f"Hopf integral did not converge to {tol:g} with {n} Gauss-Hermite nodes")


# -- heat semigroup -------------------------------------------------------------


def gaussian_weights(t: float, dx: float, width: float = 8.0) -> np.ndarray:
    """Sampled N(0, t) kernel on the lattice dx*Z, truncated at ``width`` std and summing to 1."""
    half = max(1, math.ceil(width * math.sqrt(t) / dx))
    k = np.arange(-half, half + 1) * dx
    w = np.exp(-0.5 * k**2 / t)
    return w / w.sum()


def heat_semigroup_apply(f: GridField, t: float) -> GridField:
    """P_t f = g_t * f, one separable discrete convolution per axis."""
    if t <= 0:
        raise ValueError(f"heat semigroup needs t > 0, got {t}")
    out = np.asarray(f.values, dtype=float)
    for ax, h in enumerate(f.spacing):
        out = convolve1d(out, gaussian_weights(t, h), axis=ax, mode="nearest")
    return f.with_values(out, time_label=f.time_label)


# -- Zvonkin backward equation --------------------------------------------------


@dataclass
class ZvonkinResult:
    u: DensityPath
    grad_sup: float
    lam: float

    def map_bounds(self) -> tuple[float, float]:
        """(sup |1 + u'|, sup |1 / (1 + u')|) for the map x -> x + u(t, x)."""
        du = np.stack([np.diff(f.values) / f.spacing[0] for f in self.u.fields])
        return float(np.max(np.abs(1 + du))), float(np.max(np.abs(1 / (1 + du))))


def solve_zvonkin_backward(b: GridField, a, lam: float, scheme: PdeScheme, snapshots: int = 11) -> ZvonkinResult:
    """Solve d_t u + a u'' + b u' - lam u + b = 0 on [0, T], u(T) = 0.

    In reversed time s = T - t this is u_s = a u'' + b u' - lam u + b from
    u = 0. Crank-Nicolson in time (two backward-Euler start-up steps),
    central differences in space, zero-gradient boundaries.
    ``grad_sup`` is sup over time and faces of |u'|.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if b.ndim != 1:
        raise ValueError("Zvonkin study is 1D")
    dx = b.spacing[0]
    x = b.axis(0)
    bv = np.asarray(b.values, dtype=float)
    av = _diffusion_values(a, x)
    if np.any(av <= 0):
        raise ValueError("diffusion coefficient must be positive")
    peclet = float(np.max(np.abs(bv) * dx / (2 * av)))
    if peclet > 1:
        raise ValueError(f"cell Peclet number {peclet:.3f} > 1; refine dx for a stable central scheme")
    n = x.size
    lower = av / dx**2 - bv / (2 * dx)
    upper = av / dx**2 + bv / (2 * dx)
    diag = -2 * av / dx**2 - lam
    diag = diag.copy()
    diag[0] += lower[0]
    diag[-1] += upper[-1]

    def apply(u):
        out = diag * u
        out[1:] += lower[1:] * u[:-1]
        out[:-1] += upper[:-1] * u[1:]
        return out

    def banded(theta, dt):
        ab = np.zeros((3, n))
        ab[0, 1:] = -theta * dt * upper[:-1]
        ab[1] = 1 - theta * dt * diag
        ab[2, :-1] = -theta * dt * lower[1:]
        return ab

    T = scheme.horizon
    steps = max(2, math.ceil(T / scheme.dt_pde - 1e-9))
    dt = T / steps
    keep = set(np.linspace(0, steps, min(snapshots, steps + 1)).round().astype(int).tolist())
    mats = {1.0: banded(1.0, dt), 0.5: banded(0.5, dt)}
    u = np.zeros(n)
    grad = 0.0
    saved = {0: u.copy()}
    for k in range(steps):
        theta = 1.0 if k < 2 else 0.5
        rhs = u + (1 - theta) * dt * apply(u) + dt * bv
        u = solve_banded((1, 1), mats[theta], rhs)
        if not np.all(np.isfinite(u)):
            raise FloatingPointError(f"Zvonkin solve became non-finite at step {k + 1}")
        grad = max(grad, float(np.max(np.abs(np.diff(u)))) / dx)
        if k + 1 in keep:
            saved[k + 1] = u.copy()
    # time label t = T - s
    order = sorted(saved, reverse=True)
    fields = [b.with_values(saved[s], time_label=T - s * dt) for s in order]
    return ZvonkinResult(DensityPath(np.array([T - s * dt for s in order]), fields), grad, float(lam))


def zvonkin_lambda_sweep(b: GridField, a, lambdas: Sequence[float], scheme: PdeScheme) -> np.ndarray:
    """grad_sup for each lambda in ``lambdas``."""
    return np.array([solve_zvonkin_backward(b, a, lam, scheme).grad_sup for lam in lambdas])


def suggest_dt(rho0: GridField, F: DriftEnvelope, a, kernel: InteractionKernel | None = None,
               safety: float = 0.5) -> float:
    """Step size satisfying the CFL bound with the initial flux speed doubled as margin."""
    x = rho0.axis(0)
    _, alpha = _nonlinear_drift(F, x, kernel, rho0)(0, 0.0, np.asarray(rho0.values, dtype=float))
    a_max = float(np.max(np.abs(_diffusion_values(a, x))))
    dx = rho0.spacing[0]
    return safety / (2 * a_max / dx**2 + 2 * alpha / dx + 1e-300)
