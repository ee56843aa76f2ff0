"""Interaction kernels, outer drifts and the convolutions that assemble particle drifts.

Conventions
-----------
* Points carry a trailing coordinate axis: a single point in R^d is an array
  of shape ``(d,)``, a batch is ``(..., d)``.
* Kernel values carry a trailing channel axis of size ``m`` (``m = 1`` for
  every built-in).
* ``kernel(t, x, x) == 0`` for every kernel. Wherever a built-in formula is
  undefined (singular set of power/axis kernels) the value is also 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import GridField

MEASURE_MASS_TOL = 1e-3
_PAIR_CHUNK = 4_000_000


def _as_points(x, d: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if d is not None and x.shape[-1] != d:
        raise ValueError(f"expected points in R^{d}, got trailing axis {x.shape[-1]}")
    return x


@dataclass(frozen=True)
class InteractionKernel:
    """Evaluatable interaction phi(t, x, y) with its metadata.

    ``func`` receives broadcastable arrays ``x`` and ``y`` of shape (..., d)
    and returns (..., m). The diagonal is zeroed by ``__call__`` regardless of
    what ``func`` does there.

    ``fast_weighted`` optionally computes ``sum_k w_k phi(t, x_i, y_k)`` for
    query points ``x`` (M, d) and weighted atoms ``y`` (K, d), ``w`` (K,) in
    better than O(M K); ``fast_self`` does the same for a batch of particle
    clouds ``X`` (B, N, d) queried at their own positions with weights 1/N.
    """

    name: str
    func: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    is_bounded: bool
    sup_norm: float | None = None
    singular_exponents: tuple[float, ...] | None = None
    d: int | None = None
    m: int = 1
    params: dict = field(default_factory=dict)
    fast_weighted: Callable | None = field(default=None, repr=False)
    fast_self: Callable | None = field(default=None, repr=False)
    pair_cost: Callable[[int], float] | None = field(default=None, repr=False)

    @property
    def diag_zero(self) -> bool:
        return True

    def __call__(self, t: float, x, y) -> np.ndarray:
        x = _as_points(x, self.d)
        y = _as_points(y, self.d)
        out = np.asarray(self.func(t, x, y), dtype=float)
        same = np.all(x == y, axis=-1)
        if np.any(same):
            out = np.where(same[..., None], 0.0, out)
        return out

    def cost_per_step(self, n: int) -> float:
        """Projected pair evaluations needed to assemble one drift for n particles."""
        if self.pair_cost is not None:
            return float(self.pair_cost(n))
        return float(n) * n * self.m

    def weighted_sum(self, t: float, x, y, w) -> np.ndarray:
        """sum_k w_k phi(t, x_i, y_k) for every query point x_i; returns (M, m)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        w = np.asarray(w, dtype=float).ravel()
        if self.fast_weighted is not None:
            return self.fast_weighted(t, x, y, w)
        out = np.zeros((x.shape[0], self.m))
        rows = max(1, _PAIR_CHUNK // max(1, y.shape[0]))
        for s in range(0, x.shape[0], rows):
            vals = self(t, x[s : s + rows, None, :], y[None, :, :])
            out[s : s + rows] = np.einsum("mkc,k->mc", vals, w)
        return out

    def self_convolve(self, t: float, X: np.ndarray) -> np.ndarray:
        """(phi_t * eta)(X^i) for each cloud in a batch X of shape (B, N, d)."""
        X = np.asarray(X, dtype=float)
        if self.fast_self is not None:
            return self.fast_self(t, X)
        B, N, _ = X.shape
        w = np.full(N, 1.0 / N)
        return np.stack([self.weighted_sum(t, X[b], X[b], w) for b in range(B)])


def make_kernel(func, *, name="custom", is_bounded=False, sup_norm=None, d=None, m=1,
                singular_exponents=None) -> InteractionKernel:
    """Wrap a user callable phi(t, x, y) -> (..., m) as a kernel."""
    return InteractionKernel(name=name, func=func, is_bounded=is_bounded, sup_norm=sup_norm,
                             d=d, m=m, singular_exponents=singular_exponents)


# -- built-in kernels ---------------------------------------------------------


def _strict_below_weights(x, y, w):
    """sum of w_k over y_k < x_i (1D)."""
    order = np.argsort(y, kind="stable")
    ys = y[order]
    cw = np.concatenate([[0.0], np.cumsum(w[order])])
    return cw[np.searchsorted(ys, x, side="left")]


def _rank_self(t, X):
    # counts of strictly smaller particles, ties resolved to the first occurrence
    B, N, _ = X.shape
    x = X[..., 0]
    order = np.argsort(x, axis=1, kind="stable")
    s = np.take_along_axis(x, order, axis=1)
    idx = np.broadcast_to(np.arange(N), (B, N))
    new = np.ones((B, N), dtype=bool)
    new[:, 1:] = s[:, 1:] != s[:, :-1]
    first = np.maximum.accumulate(np.where(new, idx, 0), axis=1)
    counts = np.empty((B, N))
    np.put_along_axis(counts, order, first.astype(float), axis=1)
    return (counts / N)[..., None]


def make_rank_kernel(d: int = 1) -> InteractionKernel:
    """phi(x, y) = 1 if x - y > 0 else 0 (rank-based interaction, 1D only)."""
    if d != 1:
        raise ValueError(f"the rank kernel is defined for d = 1 only, got d = {d}")

    def func(t, x, y):
        return (x[..., :1] - y[..., :1] > 0).astype(float)

    def weighted(t, x, y, w):
        return _strict_below_weights(x[:, 0], y[:, 0], w)[:, None]

    return InteractionKernel("rank", func, is_bounded=True, sup_norm=1.0, d=1,
                             fast_weighted=weighted, fast_self=_rank_self,
                             pair_cost=lambda n: n * max(1.0, math.log2(max(n, 2))))


def _const(c):
    if callable(c):
        return c
    value = float(c)
    return lambda t, x, y: np.full(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), value)


def make_power_kernel(c=1.0, alpha: float = 0.5, d: int = 2) -> InteractionKernel:
    """phi(x, y) = c(t, x, y) / |x - y|^alpha, zero on the diagonal (d >= 2)."""
    if d == 1:
        raise ValueError("power kernel needs d >= 2; use make_axis_kernel for d = 1")
    if d < 1:
        raise ValueError(f"invalid dimension {d}")
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    cf = _const(c)

    def func(t, x, y):
        r = np.linalg.norm(x - y, axis=-1)
        with np.errstate(divide="ignore"):
            val = np.where(r > 0, cf(t, x, y) / np.where(r > 0, r, 1.0) ** alpha, 0.0)
        return val[..., None]

    return InteractionKernel("power", func, is_bounded=False, singular_exponents=(float(alpha),),
                             d=d, params={"alpha": float(alpha)})


def make_axis_kernel(alphas, c=1.0) -> InteractionKernel:
    """phi(x, y) = c(t, x, y) / prod_i |x_i - y_i|^alpha_i, zero where any x_i = y_i."""
    alphas = tuple(float(a) for a in np.atleast_1d(alphas))
    if not all(0 < a < 0.5 for a in alphas):
        raise ValueError(f"each exponent must lie in (0, 1/2), got {alphas}")
    if sum(alphas) >= 1:
        raise ValueError(f"exponents must sum to less than 1, got {sum(alphas):g}")
    cf = _const(c)
    a = np.asarray(alphas)

    def func(t, x, y):
        diff = np.abs(x - y)
        ok = np.all(diff > 0, axis=-1)
        denom = np.prod(np.where(diff > 0, diff, 1.0) ** a, axis=-1)
        return np.where(ok, cf(t, x, y) / denom, 0.0)[..., None]

    return InteractionKernel("axis", func, is_bounded=False, singular_exponents=alphas,
                             d=len(alphas), params={"alphas": alphas})


def make_sin_kernel(scale: float = 1.0) -> InteractionKernel:
    """Smooth bounded kernel phi(x, y) = scale * sin(x - y) in 1D."""
    scale = float(scale)

    def func(t, x, y):
        return scale * np.sin(x[..., :1] - y[..., :1])

    def weighted(t, x, y, w):
        cs, sn = w @ np.cos(y[:, 0]), w @ np.sin(y[:, 0])
        return (scale * (np.sin(x[:, 0]) * cs - np.cos(x[:, 0]) * sn))[:, None]

    def self_conv(t, X):
        s, c = np.sin(X[..., 0]), np.cos(X[..., 0])
        mc = c.mean(axis=1, keepdims=True)
        ms = s.mean(axis=1, keepdims=True)
        return (scale * (s * mc - c * ms))[..., None]

    return InteractionKernel("smooth_sin", func, is_bounded=True, sup_norm=abs(scale), d=1,
                             params={"scale": scale}, fast_weighted=weighted, fast_self=self_conv,
                             pair_cost=lambda n: float(n))


def make_zero_kernel(d: int | None = None, m: int = 1) -> InteractionKernel:
    def func(t, x, y):
        return np.zeros(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]) + (m,))

    def weighted(t, x, y, w):
        return np.zeros((x.shape[0], m))

    def self_conv(t, X):
        return np.zeros(X.shape[:-1] + (m,))

    return InteractionKernel("zero", func, is_bounded=True, sup_norm=0.0, d=d, m=m,
                             fast_weighted=weighted, fast_self=self_conv, pair_cost=lambda n: 0.0)


# -- mollifiers ---------------------------------------------------------------


@dataclass(frozen=True)
class MollifierFamily:
    """Probability density supported in the unit ball and its rescalings."""

    name: str
    base: Callable[[np.ndarray], np.ndarray]
    d: int
    sup_norm: float

    def eval_at_eps(self, eps: float, x) -> np.ndarray:
        if not 0 < eps:
            raise ValueError(f"eps must be positive, got {eps}")
        x = np.asarray(x, dtype=float)
        return eps ** (-self.d) * self.base(x / eps)


def make_box_mollifier() -> MollifierFamily:
    """phi(x) = 1/2 on [-1, 1], 0 outside (1D, scalar offsets)."""

    def base(x):
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x) <= 1.0, 0.5, 0.0)

    return MollifierFamily("box", base, d=1, sup_norm=0.5)


def _box_window_weights(x, y, w, eps):
    order = np.argsort(y, kind="stable")
    ys = y[order]
    cw = np.concatenate([[0.0], np.cumsum(w[order])])
    inside = cw[np.searchsorted(ys, x + eps, side="right")] - cw[np.searchsorted(ys, x - eps, side="left")]
    same = cw[np.searchsorted(ys, x, side="right")] - cw[np.searchsorted(ys, x, side="left")]
    return inside - same


def make_mollified_kernel(mollifier: MollifierFamily, eps: float) -> InteractionKernel:
    """phi(x, y) = phi_eps(x - y) with the diagonal set to zero."""
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    eps = float(eps)
    d = mollifier.d

    def func(t, x, y):
        diff = x - y
        arg = diff[..., 0] if d == 1 else diff
        return mollifier.eval_at_eps(eps, arg)[..., None]

    fast_weighted = fast_self = cost = None
    if mollifier.name == "box":
        h = 1.0 / (2.0 * eps)

        def fast_weighted(t, x, y, w):
            return (h * _box_window_weights(x[:, 0], y[:, 0], w, eps))[:, None]

        def fast_self(t, X):
            B, N, _ = X.shape
            w = np.full(N, 1.0 / N)
            return np.stack([fast_weighted(t, X[b], X[b], w) for b in range(B)])

        def cost(n):
            return n * max(1.0, math.log2(max(n, 2)))

    return InteractionKernel("mollified", func, is_bounded=True, sup_norm=mollifier.sup_norm * eps ** (-d),
                             d=d, params={"eps": eps, "mollifier": mollifier.name},
                             fast_weighted=fast_weighted, fast_self=fast_self, pair_cost=cost)


def eps_log_schedule(c: float = 1.0, power: float = 0.5) -> Callable[[int], float]:
    """eps_N = c / (ln N)^power."""

    def schedule(n: int) -> float:
        return c / math.log(n) ** power

    return schedule


# -- outer drift ----------------------------------------------------------------


@dataclass(frozen=True)
class DriftEnvelope:
    """Outer drift F(t, x, r) with Lipschitz constant in r and growth majorant.

    ``func`` maps x (..., d) and r (..., m) to (..., d). ``growth`` is h(t, x)
    (None means h = 0). ``bound`` is a uniform bound on |F| when one exists.
    """

    name: str
    func: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    lipschitz_r: float
    growth: Callable | None = None
    bound: float | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, t, x, r) -> np.ndarray:
        return np.asarray(self.func(t, np.asarray(x, dtype=float), np.asarray(r, dtype=float)), dtype=float)

    def h(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.growth is None:
            return np.zeros(x.shape[:-1])
        return np.asarray(self.growth(t, x), dtype=float)


def make_linear_drift(scale: float = 1.0) -> DriftEnvelope:
    """F(t, x, r) = scale * r (needs m = d)."""
    scale = float(scale)
    return DriftEnvelope("linear", lambda t, x, r: scale * r, lipschitz_r=abs(scale),
                         params={"scale": scale})


def make_zero_drift() -> DriftEnvelope:
    return DriftEnvelope("zero", lambda t, x, r: np.zeros(np.broadcast_shapes(x.shape, r.shape)),
                         lipschitz_r=0.0, bound=0.0)


def make_tanh_drift(scale: float = 0.5) -> DriftEnvelope:
    """F(t, x, r) = scale * tanh(r); bounded by |scale|, Lipschitz |scale|."""
    scale = float(scale)
    return DriftEnvelope("tanh", lambda t, x, r: scale * np.tanh(r), lipschitz_r=abs(scale),
                         bound=abs(scale), params={"scale": scale})


def make_constant_drift(c) -> DriftEnvelope:
    """F(t, x, r) = c regardless of r."""
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return DriftEnvelope("constant", lambda t, x, r: np.broadcast_to(c, x.shape).copy(), lipschitz_r=0.0,
                         growth=lambda t, x: np.full(x.shape[:-1], float(np.linalg.norm(c))),
                         bound=float(np.linalg.norm(c)), params={"c": c.tolist()})


# -- convolutions ---------------------------------------------------------------


def _query(x, d: int):
    """Flatten query points to (M, d); returns the leading shape to restore."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        if d != 1:
            raise ValueError(f"scalar query needs d = 1, got d = {d}")
        return x.reshape(1, 1), ()
    if x.shape[-1] != d:
        raise ValueError(f"query points must have trailing axis {d}, got shape {x.shape}")
    return x.reshape(-1, d), x.shape[:-1]


def empirical_convolve(kernel: InteractionKernel, t: float, x, ensemble) -> np.ndarray:
    """(phi_t * eta)(x) = (1/N) sum_j phi(t, x, X^j) for the ensemble's empirical measure.

    ``ensemble`` is a ParticleEnsemble or an (N, d) array. Query points follow
    the (..., d) convention (a scalar is accepted in 1D); the result has shape
    ``x.shape[:-1] + (m,)``.
    """
    pos = np.asarray(getattr(ensemble, "positions", ensemble), dtype=float)
    if pos.ndim == 1:
        pos = pos[:, None]
    if pos.shape[0] == 0:
        raise ValueError("ensemble is empty")
    bad = ~np.all(np.isfinite(pos), axis=-1)
    if np.any(bad):
        raise FloatingPointError(f"particle {int(np.argmax(bad))} has a non-finite coordinate")
    xq, lead = _query(x, pos.shape[-1])
    n = pos.shape[0]
    out = kernel.weighted_sum(t, xq, pos, np.full(n, 1.0 / n))
    return out.reshape(lead + (kernel.m,))


def measure_convolve(kernel: InteractionKernel, t: float, x, density: GridField,
                     check: bool = True) -> np.ndarray:
    """Midpoint-rule approximation of int phi(t, x, y) rho(y) dy on the density grid."""
    if check:
        if np.min(density.values) < -1e-12:
            raise ValueError("density must be nonnegative")
        mass = density.mass()
        if abs(mass - 1.0) > MEASURE_MASS_TOL:
            raise ValueError(f"density mass {mass:.6f} deviates from 1 by more than {MEASURE_MASS_TOL:g}")
    xq, lead = _query(x, density.ndim)
    w = density.values.ravel() * density.cell_volume
    keep = w != 0
    out = kernel.weighted_sum(t, xq, density.centers()[keep], w[keep])
    return out.reshape(lead + (kernel.m,))


def assemble_drift(F: DriftEnvelope, kernel: InteractionKernel, t: float, x, ensemble) -> np.ndarray:
    """b(t, x, eta) = F(t, x, (phi_t * eta)(x))."""
    pos = np.asarray(getattr(ensemble, "positions", ensemble), dtype=float)
    d = pos.shape[-1] if pos.ndim > 1 else 1
    xq, lead = _query(x, d)
    r = empirical_convolve(kernel, t, xq, ensemble)
    return F(t, xq, r).reshape(lead + (d,))


def kernel_from_config(spec: dict, d: int = 1) -> InteractionKernel:
    """Build a kernel from a config table with key ``type`` and its parameters."""
    name = spec.get("type", spec.get("kernel", spec.get("name")))
    if name == "rank":
        return make_rank_kernel(d)
    if name == "power":
        return make_power_kernel(spec.get("c", 1.0), float(spec.get("alpha", 0.5)), d)
    if name == "axis":
        return make_axis_kernel(spec.get("alphas", [0.25] * d), spec.get("c", 1.0))
    if name == "mollified":
        if "eps" not in spec:
            raise ValueError("mollified kernel needs key 'eps'")
        return make_mollified_kernel(make_box_mollifier(), float(spec["eps"]))
    if name == "smooth_sin":
        return make_sin_kernel(float(spec.get("sup_norm", spec.get("scale", 1.0))))
    if name == "zero":
        return make_zero_kernel(d)
    raise ValueError(f"unknown kernel '{name}'")


def drift_from_config(spec: dict) -> DriftEnvelope:
    name = spec.get("type", spec.get("F", spec.get("name")))
    if name in ("linear", "identity"):
        return make_linear_drift(float(spec.get("scale", 1.0)))
    if name == "tanh":
        return make_tanh_drift(float(spec.get("scale", 0.5)))
    if name == "zero":
        return make_zero_drift()
    if name == "constant":
        return make_constant_drift(spec.get("c", 0.0))
    raise ValueError(f"unknown drift '{name}'")
