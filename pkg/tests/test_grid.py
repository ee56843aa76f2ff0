import numpy as np
import pytest
from hypothesis import given, strategies as st

from chaoslab.grid import DensityPath, GridField, fields_from_csv, fields_to_csv, format_value


def test_format_value():
    assert format_value(0.0) == "0"
    assert format_value(0.25) == "0.25"
    assert "e-05" in format_value(1.5e-5)
    assert format_value(-2e-7) == "-2e-07"
    assert format_value(1e-4) == "0.0001"
    assert float(format_value(1 / 3)) == pytest.approx(1 / 3, rel=1e-14)


def test_gridfield_validation():
    with pytest.raises(ValueError):
        GridField((0.0,), (0.0,), np.ones(3))
    with pytest.raises(ValueError):
        GridField((0.0,), (1.0,), np.array([1.0, np.nan]))
    with pytest.raises(ValueError):
        GridField((0.0, 0.0), (1.0,), np.ones((2, 2)))


def test_from_function_and_mass():
    g = GridField.from_function(lambda x: np.ones_like(x), [0.0], [2.0], 8)
    assert g.spacing == (0.25,)
    np.testing.assert_allclose(g.axis(0)[:2], [0.125, 0.375])
    assert g.mass() == pytest.approx(2.0)
    h = GridField.from_function(lambda x, y: x + 0 * y, [0.0, 0.0], [1.0, 2.0], [2, 4])
    assert h.shape == (2, 4) and h.centers().shape == (8, 2)
    with pytest.raises(ValueError, match="mass"):
        g.check_density()


def test_interp_is_zero_outside():
    g = GridField.from_function(lambda x: x, [0.0], [1.0], 10)
    assert g.interp(np.array([-1.0, 2.0])).tolist() == [0.0, 0.0]
    assert g.interp(0.5) == pytest.approx(0.5)


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=12), st.floats(0.01, 10))
def test_csv_roundtrip_exact(vals, h):
    f = GridField((-1.5,), (h,), np.array(vals), time_label=0.5)
    g = GridField((0.0, 1.0), (1.0, 0.5), np.arange(6.0).reshape(2, 3))
    back = fields_from_csv(fields_to_csv([f, g]))
    assert np.array_equal(back[0].values, f.values) and back[0].spacing == f.spacing
    assert back[0].time_label == 0.5 and back[1].time_label is None
    assert np.array_equal(back[1].values, g.values)


def test_csv_rejects_bad_header():
    with pytest.raises(ValueError):
        fields_from_csv("a,b\n")


def test_density_path_interpolates_in_time():
    g0 = GridField((0.0,), (1.0,), np.array([1.0, 0.0]))
    g1 = g0.with_values([0.0, 1.0])
    p = DensityPath(np.array([0.0, 1.0]), [g0, g1])
    np.testing.assert_allclose(p.at(0.25).values, [0.75, 0.25])
    assert p.at(1.0) is g1
    with pytest.raises(ValueError, match="no density snapshot"):
        p.at(1.5)
    with pytest.raises(ValueError):
        DensityPath(np.array([1.0, 0.0]), [g0, g1])
