import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from infomenu import densities as D
from infomenu.errors import DomainError

ALL = [D.uniform(), D.triangular(), D.tilted(0.1), D.tilted(-1.5), D.spike(),
       D.tabulated([0, 0.3, 1], [1, 2, 0.5])]


@pytest.mark.parametrize("f", ALL, ids=lambda f: f.name)
def test_density_invariants(f):
    assert D.check_density(f) == []


@pytest.mark.parametrize("f", ALL, ids=lambda f: f.name)
def test_cdf_is_integral_of_pdf(f):
    for x in (0.1, 0.37, 0.5, 0.91):
        pts = [k for k in f.kinks if k < x]
        val, _ = integrate.quad(f.pdf, 0, x, points=pts or None, limit=200)
        assert float(f.cdf(x)) == pytest.approx(val, abs=1e-10)


def test_triangular_closed_forms():
    f = D.triangular()
    assert float(f.pdf(0.5)) == pytest.approx(2.0)
    assert float(f.cdf(0.25)) == pytest.approx(0.125)
    assert float(f.ppf(0.125)) == pytest.approx(0.25)


def test_tilted_slope_bound():
    with pytest.raises(DomainError):
        D.tilted(2.5)
    assert not D.tilted(0.1).symmetric
    assert D.tilted(0.0).symmetric


def test_tabulated_validation():
    with pytest.raises(DomainError):
        D.tabulated([0.1, 1.0], [1, 1])
    with pytest.raises(DomainError):
        D.tabulated([0, 1], [1, -1])
    with pytest.raises(DomainError):
        D.tabulated([0, 1], [0, 0])
    f = D.tabulated([0, 0.5, 1], [1, 3, 1])
    assert f.symmetric and f.kinks == (0.5,)


@given(st.floats(0.0, 1.0))
def test_piecewise_linear_integral(x):
    pl = D.PiecewiseLinear([0, 0.2, 0.7, 1], [0.5, 2.0, -1.0, 0.0])
    val, _ = integrate.quad(pl, 0, x, points=[0.2, 0.7], limit=100) if x > 0 else (0.0, 0)
    assert float(pl.integral(x)) == pytest.approx(val, abs=1e-12)


@given(st.floats(0.0, 1.0), st.floats(-2.0, 2.0))
def test_tilted_quantile_inverts_cdf(u, slope):
    f = D.tilted(slope)
    assert float(f.cdf(f.ppf(u))) == pytest.approx(u, abs=1e-12)


@pytest.mark.parametrize("slope", [2.0, -2.0, 1e-200])
def test_tilted_quantile_endpoints(slope):
    f = D.tilted(slope)
    assert np.allclose(f.ppf(np.array([0.0, 1.0])), [0.0, 1.0])
