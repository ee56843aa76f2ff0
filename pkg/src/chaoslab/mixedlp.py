"""Mixed and localized L^p norms on uniform grids.

Axes are 0-based. A :class:`PermOrder` lists axes from the innermost
integral to the outermost one; the exponent vector ``p`` is read outermost
first, so ``p[0]`` goes with the outermost axis. With the default order
(innermost = last axis) ``p[k]`` pairs with axis ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .grid import GridField
from .pde import heat_semigroup_apply

INF = math.inf


def _recip(p: float) -> float:
    return 0.0 if math.isinf(p) else 1.0 / p


@dataclass(frozen=True)
class MultiIndex:
    """Spatial exponents p in (0, inf]^d with an optional time exponent q."""

    p: tuple[float, ...]
    q: float | None = None

    def __post_init__(self):
        p = tuple(float(v) for v in np.atleast_1d(self.p))
        if not p or any(not v > 0 for v in p):
            raise ValueError(f"all exponents must be positive, got {p}")
        if self.q is not None and not self.q > 0:
            raise ValueError(f"time exponent must be positive, got {self.q}")
        object.__setattr__(self, "p", p)

    @classmethod
    def uniform(cls, p: float, d: int, q: float | None = None) -> "MultiIndex":
        return cls((p,) * d, q)

    @property
    def d(self) -> int:
        return len(self.p)

    @property
    def recip(self) -> np.ndarray:
        return np.array([_recip(v) for v in self.p])

    @property
    def recip_sum(self) -> float:
        return float(self.recip.sum())


@dataclass(frozen=True)
class PermOrder:
    """Integration order, innermost axis first."""

    order: tuple[int, ...]

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        if sorted(order) != list(range(len(order))):
            raise ValueError(f"order must be a permutation of 0..{len(order) - 1}, got {order}")
        object.__setattr__(self, "order", order)

    @classmethod
    def default(cls, d: int) -> "PermOrder":
        return cls(tuple(reversed(range(d))))

    @property
    def d(self) -> int:
        return len(self.order)


def _as_index(p, d: int) -> MultiIndex:
    if isinstance(p, MultiIndex):
        idx = p
    elif np.ndim(p) == 0:
        idx = MultiIndex.uniform(float(p), d)
    else:
        idx = MultiIndex(tuple(p))
    if idx.d != d:
        raise ValueError(f"exponent vector has length {idx.d}, field has {d} axes")
    return idx


def mixed_norm(f: GridField, p, perm: PermOrder | None = None) -> float:
    """Iterated L^p norm with midpoint quadrature; infinite exponents are grid suprema."""
    d = f.ndim
    idx = _as_index(p, d)
    perm = PermOrder.default(d) if perm is None else perm
    if perm.d != d:
        raise ValueError("permutation and field dimension differ")
    arr = np.abs(np.asarray(f.values, dtype=float))
    for j, ax in enumerate(perm.order):
        pe = idx.p[d - 1 - j]
        if math.isinf(pe):
            arr = arr.max(axis=ax, keepdims=True)
        else:
            # scale by the running maximum so large exponents do not overflow
            top = arr.max(axis=ax, keepdims=True)
            safe = np.where(top > 0, top, 1.0)
            arr = top * (np.sum((arr / safe) ** pe, axis=ax, keepdims=True) * f.spacing[ax]) ** (1.0 / pe)
    return float(arr.reshape(()))


def index_check(q: float, p, which: str) -> bool:
    """Membership of (q, p) in the index sets Io, I1, I2 (all inequalities strict)."""
    idx = p if isinstance(p, MultiIndex) else MultiIndex(tuple(np.atleast_1d(p)))
    s = idx.recip_sum + 2 * _recip(q)
    ps = np.array(idx.p)
    if which == "Io":
        return bool(q > 2 and np.all(ps > 2) and s < 1)
    if which == "I1":
        return bool(q > 1 and np.all(ps > 1) and s < 1)
    if which == "I2":
        return bool(q > 1 and np.all(ps > 1) and s < 2)
    raise ValueError(f"unknown index set '{which}'")


# -- localization ---------------------------------------------------------------


def smooth_cutoff(x: np.ndarray) -> np.ndarray:
    """C-infinity radial profile equal to 1 on |x| <= 1 and 0 on |x| >= 2.

    ``x`` has shape (..., d).
    """
    s = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)

    def psi(u):
        out = np.zeros_like(u)
        pos = u > 0
        out[pos] = np.exp(-1.0 / u[pos])
        return out

    a, b = psi(2.0 - s), psi(s - 1.0)
    return a / (a + b)


@dataclass(frozen=True)
class LocalizationConfig:
    """Cutoff radius, lattice of centres (K, d) and the cutoff profile chi."""

    r: float
    centers: np.ndarray
    chi: Callable[[np.ndarray], np.ndarray] = field(default=smooth_cutoff)

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("cutoff radius must be positive")
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        object.__setattr__(self, "centers", c)

    @classmethod
    def lattice(cls, r: float, lower, upper, chi=smooth_cutoff) -> "LocalizationConfig":
        """Uniform lattice with spacing r covering the box [lower, upper]."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        axes = []
        for lo, hi in zip(lower, upper):
            k0, k1 = math.floor(lo / r), math.ceil(hi / r)
            axes.append(np.arange(k0, k1 + 1) * r)
        mesh = np.meshgrid(*axes, indexing="ij")
        return cls(r, np.stack([m.ravel() for m in mesh], axis=-1), chi)

    def cutoff(self, z: np.ndarray, pts: np.ndarray) -> np.ndarray:
        return self.chi((pts - z) / self.r)


def _points(f: GridField) -> np.ndarray:
    return f.centers().reshape(f.shape + (f.ndim,))


def check_covering(f: GridField, loc: LocalizationConfig) -> None:
    """Every point where f is nonzero must lie within r of some lattice centre."""
    pts = f.centers()[np.asarray(f.values).ravel() != 0]
    if pts.size == 0:
        return
    dist, _ = cKDTree(loc.centers).query(pts)
    worst = float(dist.max())
    if worst > loc.r * (1 + 1e-12):
        raise ValueError(f"lattice does not cover supp f: a support point is {worst:.4g} > r={loc.r} from every centre")


def localized_mixed_norm(f: GridField, p, perm: PermOrder | None = None,
                         loc: LocalizationConfig | None = None) -> float:
    """max over lattice centres z of ||chi((. - z)/r) f||; defaults to r=1 lattice over the grid."""
    if loc is None:
        loc = LocalizationConfig.lattice(1.0, f.lower, f.upper)
    check_covering(f, loc)
    pts = _points(f)
    best = 0.0
    for z in loc.centers:
        weight = loc.cutoff(z, pts)
        if not np.any(weight):
            continue
        best = max(best, mixed_norm(f.with_values(weight * f.values), p, perm))
    return best


def embedding_constant(f: GridField, p_big, p_small, perm: PermOrder | None = None,
                       loc: LocalizationConfig | None = None) -> float:
    """Constant C with |||f|||_{p_small} <= C |||f|||_{p_big} for p_small <= p_big.

    Hoelder with exponent 1/s = 1/p_small - 1/p_big against the indicator
    of each cutoff's support; the maximum over centres is returned.
    """
    d = f.ndim
    pb, ps = _as_index(p_big, d), _as_index(p_small, d)
    if np.any(np.array(ps.p) > np.array(pb.p)):
        raise ValueError("embedding needs p_small <= p_big componentwise")
    s = tuple(INF if abs(a - b) < 1e-15 else 1.0 / (a - b) for a, b in zip(ps.recip, pb.recip))
    if loc is None:
        loc = LocalizationConfig.lattice(1.0, f.lower, f.upper)
    pts = _points(f)
    const = 0.0
    for z in loc.centers:
        support = (loc.cutoff(z, pts) > 0).astype(float)
        if support.any():
            const = max(const, mixed_norm(f.with_values(support), s, perm))
    return const


def embedding_check(f: GridField, p_big, p_small, perm=None, loc=None) -> tuple[float, float, bool]:
    lhs = localized_mixed_norm(f, p_small, perm, loc)
    rhs = embedding_constant(f, p_big, p_small, perm, loc) * localized_mixed_norm(f, p_big, perm, loc)
    return lhs, rhs, lhs <= rhs * (1 + 1e-8)


# -- inequality checkers --------------------------------------------------------


def _relation(lhs: np.ndarray, rhs: np.ndarray, what: str) -> None:
    if np.any(np.abs(lhs - rhs) > 1e-12):
        raise ValueError(f"exponents violate {what}: {lhs} vs {rhs}")


def holder_check(f: GridField, g: GridField, p, r, q, perm: PermOrder | None = None) -> tuple[float, float, bool]:
    """||f g||_q <= ||f||_p ||g||_r for 1/p + 1/r = 1/q."""
    d = f.ndim
    p, r, q = (_as_index(v, d) for v in (p, r, q))
    _relation(p.recip + r.recip, q.recip, "1/p + 1/r = 1/q")
    lhs = mixed_norm(f.with_values(f.values * g.values), q, perm)
    rhs = mixed_norm(f, p, perm) * mixed_norm(g, r, perm)
    return lhs, rhs, lhs <= rhs * (1 + 1e-8)


def periodic_convolve(f: GridField, g: GridField) -> GridField:
    """(f * g)(x) = sum_y f(x - y) g(y) dV on the periodic grid of f."""
    if f.shape != g.shape:
        raise ValueError("periodic convolution needs fields on a common grid")
    axes = tuple(range(f.ndim))
    conv = np.fft.irfftn(np.fft.rfftn(f.values) * np.fft.rfftn(g.values), s=f.shape, axes=axes)
    return f.with_values(conv * f.cell_volume)


def young_check(f: GridField, g: GridField, p, r, q, perm: PermOrder | None = None) -> tuple[float, float, bool]:
    """||f * g||_q <= ||f||_p ||g||_r for 1/p + 1/r = 1 + 1/q, exponents >= 1."""
    d = f.ndim
    p, r, q = (_as_index(v, d) for v in (p, r, q))
    if min(p.p + r.p + q.p) < 1:
        raise ValueError("Young's inequality needs exponents >= 1")
    _relation(p.recip + r.recip, 1 + q.recip, "1/p + 1/r = 1 + 1/q")
    lhs = mixed_norm(periodic_convolve(f, g), q, perm)
    rhs = mixed_norm(f, p, perm) * mixed_norm(g, r, perm)
    return lhs, rhs, lhs <= rhs * (1 + 1e-6)


# -- stored examples ------------------------------------------------------------


def permutation_witness(n: int = 256, shear_var: float = 0.05, p=(1.0, 4.0)) -> tuple[GridField, float, float]:
    """Sheared 2D Gaussian whose mixed norm depends on the integration order."""
    L = 6.0
    f = GridField.from_function(
        lambda x, y: np.exp(-0.5 * x**2 - (y - x) ** 2 / (2 * shear_var)), [-L, -L], [L, L], n
    )
    return f, mixed_norm(f, p, PermOrder((1, 0))), mixed_norm(f, p, PermOrder((0, 1)))


def truncated_power(dx: float, alpha: float = 0.5, radius: float = 1.0, half_width: float = 2.0) -> GridField:
    """|x|^{-alpha} 1_{|x| <= radius} in d=2, sampled at cell centres of [-w, w]^2."""
    n = int(round(2 * half_width / dx))
    return GridField.from_function(
        lambda x, y: np.where(np.hypot(x, y) <= radius, np.hypot(x, y) ** -alpha, 0.0),
        [-half_width, -half_width], [half_width, half_width], n,
    )


def refinement_study(p: float, dxs: Sequence[float] = (1 / 64, 1 / 128, 1 / 256), alpha: float = 0.5,
                     r: float = 1.0) -> np.ndarray:
    """Localized norm of the truncated power singularity at each grid size."""
    out = []
    for dx in dxs:
        f = truncated_power(dx, alpha)
        loc = LocalizationConfig.lattice(r, f.lower, f.upper)
        out.append(localized_mixed_norm(f, (p, p), None, loc))
    return np.array(out)


def semigroup_decay_fit(p, ts: Sequence[float] = (0.01, 0.02, 0.04, 0.08, 0.16), L: float = 8.0,
                        n: int = 1600) -> float:
    """Fitted exponent of log ||P_t f_t||_inf against log t.

    ``f_t`` is a box of half-width sqrt(t) per axis, scaled to unit L^p norm;
    this scale-matched family saturates the bound t^{-|1/p|/2}.
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    d = p.size
    sups = []
    for t in ts:
        h = math.sqrt(t)
        f = GridField.from_function(
            (lambda *xs: np.prod([np.abs(x) <= h for x in xs], axis=0).astype(float)),
            [-L] * d, [L] * d, n if d == 1 else n // 8,
        )
        f = f.with_values(f.values / mixed_norm(f, tuple(p)))
        sups.append(float(np.max(heat_semigroup_apply(f, t).values)))
    slope = np.polyfit(np.log(ts), np.log(sups), 1)[0]
    return float(slope)
