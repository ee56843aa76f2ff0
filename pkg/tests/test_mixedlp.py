import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoslab import mixedlp as L
from chaoslab.grid import GridField


def box2(n=64, a=2.0):
    return GridField.from_function(lambda x, y: ((np.abs(x) <= 0.5) & (np.abs(y) <= 0.5)).astype(float),
                                   [-a, -a], [a, a], n)


@pytest.mark.parametrize("p", [(1, 1), (2, 3), (1.5, 7), (math.inf, 2)])
@pytest.mark.parametrize("perm", [(0, 1), (1, 0)])
def test_unit_box_has_unit_norm(p, perm):
    assert L.mixed_norm(box2(), p, L.PermOrder(perm)) == pytest.approx(1.0, rel=1e-12)


def test_separable_factorization_respects_order():
    g = lambda x: np.exp(-x**2)
    h = lambda y: 1 / (1 + y**2)
    f = GridField.from_function(lambda x, y: g(x) * h(y), [-8, -8], [8, 8], 400)
    x = f.axis(0)
    dx = f.spacing[0]
    norm = lambda v, p: (np.sum(np.abs(v) ** p) * dx) ** (1 / p)
    p = (1.5, 3.0)
    assert L.mixed_norm(f, p) == pytest.approx(norm(g(x), 1.5) * norm(h(x), 3.0), rel=1e-12)
    assert L.mixed_norm(f, p, L.PermOrder((0, 1))) == pytest.approx(norm(g(x), 3.0) * norm(h(x), 1.5), rel=1e-12)


def test_gaussian_l2_matches_closed_form():
    f = GridField.from_function(lambda x, y: np.exp(-(x**2 + y**2) / 2) / (2 * math.pi), [-8, -8], [8, 8], 400)
    assert L.mixed_norm(f, (2, 2)) == pytest.approx(math.sqrt(1 / (4 * math.pi)), rel=1e-8)


def test_large_exponents_do_not_overflow():
    f = GridField.from_function(lambda x, y: 1e3 + 0 * x * y, [0, 0], [1, 1], 16)
    assert L.mixed_norm(f, (400, 400)) == pytest.approx(1e3, rel=1e-12)


def test_index_sets():
    assert L.index_check(8, (8, 8), "Io")
    assert not L.index_check(4, (4, 4), "Io") and L.index_check(4, (4, 4), "I2")
    assert not L.index_check(2, (100, 100), "Io")
    with pytest.raises(ValueError):
        L.index_check(4, (4, 4), "I9")
    with pytest.raises(ValueError):
        L.MultiIndex((0.0, 1.0))


def test_perm_order_validation():
    assert L.PermOrder.default(3).order == (2, 1, 0)
    with pytest.raises(ValueError):
        L.PermOrder((0, 0))


def test_smooth_cutoff_profile():
    x = np.array([[0.0, 0.0], [0.7, 0.7], [1.5, 0.0], [2.0, 0.0], [3.0, 1.0]])
    c = L.smooth_cutoff(x)
    assert c[0] == 1.0 and c[1] == 1.0 and 0 < c[2] < 1 and c[3] == 0.0 and c[4] == 0.0


def test_localized_norm_examples():
    f = GridField.from_function(lambda x, y: np.where(x**2 + y**2 < 0.8, 1 + x, 0.0), [-3, -3], [3, 3], 120)
    loc = L.LocalizationConfig(1.0, np.array([[0.0, 0.0]]))
    assert L.localized_mixed_norm(f, (2, 3), None, loc) == pytest.approx(L.mixed_norm(f, (2, 3)), rel=1e-12)
    zero = f.with_values(np.zeros(f.shape))
    assert L.localized_mixed_norm(zero, (2, 2)) == 0.0


def test_covering_is_checked():
    f = GridField.from_function(lambda x, y: 1 + 0 * x, [-3, -3], [3, 3], 30)
    with pytest.raises(ValueError):
        L.localized_mixed_norm(f, (2, 2), None, L.LocalizationConfig(1.0, np.array([[0.0, 0.0]])))


def test_holder_equality_and_cauchy_schwarz(rng):
    f = GridField((0.0, 0.0), (0.1, 0.2), rng.random((12, 9)))
    one = f.with_values(np.ones(f.shape))
    lhs, rhs, ok = L.holder_check(f, one, (2, 3), (math.inf, math.inf), (2, 3))
    assert ok and lhs == pytest.approx(rhs, rel=1e-12)
    lhs, rhs, ok = L.holder_check(f, f, (4, 4), (4, 4), (2, 2))
    assert ok and lhs == pytest.approx(rhs, rel=1e-12)
    with pytest.raises(ValueError):
        L.holder_check(f, f, (2, 2), (2, 2), (2, 2))


def test_young_delta_and_gaussian():
    n, a = 128, 8.0
    h = 2 * a / n
    f = GridField.from_function(lambda x, y: np.exp(-(x**2 + y**2)), [-a, -a], [a, a], n)
    delta = np.zeros(f.shape)
    delta[0, 0] = 1 / h**2
    lhs, rhs, ok = L.young_check(f, f.with_values(delta), (2, 2), (1, 1), (2, 2))
    assert ok and lhs == pytest.approx(rhs, rel=1e-10)
    s = 0.5
    g = GridField.from_function(lambda x, y: np.exp(-(x**2 + y**2) / (2 * s)) / (2 * math.pi * s), [-a, -a], [a, a], n)
    lhs, rhs, ok = L.young_check(g, g, (2, 2), (2, 2), (math.inf, math.inf))
    assert ok
    assert lhs == pytest.approx(1 / (2 * math.pi * 2 * s), rel=1e-6)
    assert rhs == pytest.approx(1 / (4 * math.pi * s), rel=1e-6)


recip = st.floats(0.0, 1.0)


@given(st.integers(0, 10**6), recip, recip, recip, recip)
def test_holder_random(seed, a1, a2, b1, b2):
    rng = np.random.default_rng(seed)
    f = GridField((0.0, 0.0), (0.3, 0.1), rng.random((6, 7)) * rng.integers(1, 5))
    g = f.with_values(rng.random((6, 7)))
    p = tuple(math.inf if v == 0 else 1 / v for v in (a1 * 0.5, a2 * 0.5))
    r = tuple(math.inf if v == 0 else 1 / v for v in (b1 * 0.5, b2 * 0.5))
    qr = (a1 * 0.5 + b1 * 0.5, a2 * 0.5 + b2 * 0.5)
    q = tuple(math.inf if v == 0 else 1 / v for v in qr)
    assert L.holder_check(f, g, p, r, q)[2]


@given(st.integers(0, 10**6), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_young_random(seed, u1, u2, w):
    rng = np.random.default_rng(seed)
    f = GridField((0.0, 0.0), (0.25, 0.5), rng.random((8, 6)))
    g = f.with_values(rng.random((8, 6)))
    # 1/p + 1/r = 1 + 1/q with 1/q = w * min(1/p, 1/r) style choice
    rp = (0.5 + 0.5 * u1, 0.5 + 0.5 * u2)
    rq = (w * rp[0] * 0.5, w * rp[1] * 0.5)
    rr = (1 + rq[0] - rp[0], 1 + rq[1] - rp[1])
    inv = lambda v: math.inf if v == 0 else 1 / v
    assert L.young_check(f, g, tuple(map(inv, rp)), tuple(map(inv, rr)), tuple(map(inv, rq)))[2]


@given(st.integers(0, 10**6), st.floats(-5, 5).filter(lambda c: abs(c) > 1e-3), st.floats(1, 6), st.floats(1, 6))
def test_norm_homogeneity_and_monotonicity(seed, c, p1, p2):
    rng = np.random.default_rng(seed)
    f = GridField((0.0, 0.0), (0.5, 0.5), rng.normal(size=(5, 5)))
    n = L.mixed_norm(f, (p1, p2))
    assert L.mixed_norm(f.with_values(c * f.values), (p1, p2)) == pytest.approx(abs(c) * n, rel=1e-10)
    bigger = f.with_values(np.abs(f.values) + rng.random((5, 5)))
    assert L.mixed_norm(bigger, (p1, p2)) >= n * (1 - 1e-12)


def test_embedding_check_holds():
    f = GridField.from_function(lambda x, y: np.exp(-(x**2 + 2 * y**2)), [-3, -3], [3, 3], 60)
    lhs, rhs, ok = L.embedding_check(f, (6, 4), (2, 2))
    assert ok and lhs <= rhs
    with pytest.raises(ValueError):
        L.embedding_constant(f, (2, 2), (4, 4))


def test_permutation_witness_order_matters():
    _, n1, n2 = L.permutation_witness()
    assert abs(n1 - n2) / min(n1, n2) > 0.01


def test_refinement_study():
    p3 = L.refinement_study(3)
    p6 = L.refinement_study(6)
    assert p3[-1] / p3[0] < 1.05
    assert p6[-1] / p6[0] > 1.2
    assert np.all(np.diff(p6) > 0)


@pytest.mark.parametrize("p", [2, 4])
def test_semigroup_decay_exponent(p):
    assert L.semigroup_decay_fit(p) == pytest.approx(-1 / (2 * p), abs=0.1)
