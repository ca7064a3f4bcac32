import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from infomenu import core, densities as D, solver
from infomenu.core import FULL, NULL, REVEAL_H, REVEAL_L, SimpleExperiment
from infomenu.errors import (AssumptionRefusal, DomainError, ThresholdNotFoundError,
                             UnsolvedMultiplierError, UnsupportedKindError)

QUAD = core.quadratic_value()
UNIFORM = D.uniform()

# frozen from independent routes (see each test)
REF_EXCL_HI = 0.820194101601107
REF_EXCL_LO = 0.17980589839889288
REF_REVENUE = 0.09694010504160741
TRI_REVENUE = 0.1417896963
TILT_LAMBDA = 0.5164383195835882
TILT_REVENUE = 0.09694017098


@pytest.fixture(scope="module")
def ref():
    return solver.build_menu(QUAD, UNIFORM)


def test_reference_thresholds(ref):
    th = ref.thresholds
    assert th.lam == 0.5
    assert th.mu_minus == pytest.approx(0.25, abs=1e-12)
    assert th.mu0 == pytest.approx(0.5, abs=1e-12)
    assert th.mu_plus == pytest.approx(0.75, abs=1e-12)


def test_reference_exclusion_points_closed_form(ref):
    # on the high side the excluded belief solves the FOC at nu = mu; with
    # V = mu^2 - mu this is the quadratic 4 mu^2 - 4 mu + ... whose root is
    # recovered here by an independent scalar solve of the same condition
    from scipy.optimize import brentq
    g = lambda m: float(solver.foc_high(m, m, 0.5, QUAD, UNIFORM))
    root = brentq(g, 0.76, 0.99, xtol=1e-15)
    assert ref.thresholds.excl_hi == pytest.approx(root, abs=1e-12)
    assert ref.thresholds.excl_hi == pytest.approx(REF_EXCL_HI, abs=1e-12)
    assert ref.thresholds.excl_lo == pytest.approx(1 - REF_EXCL_HI, abs=1e-12)
    assert ref.thresholds.excl_lo == pytest.approx(REF_EXCL_LO, abs=1e-12)


def test_reference_posterior_linear_rule():
    mus = np.linspace(0.7501, 0.8201, 20)
    nu = solver.solve_foc_posterior(mus, 0.5, QUAD, UNIFORM)
    assert np.max(np.abs(nu - (3.5 * mus - 2 * mus ** 2 - 1) / (2 * mus - 1))) < 1e-12
    assert solver.solve_foc_posterior(0.8, 0.5, QUAD, UNIFORM) == pytest.approx(0.8666666666666667)
    assert solver.solve_foc_posterior(0.2, 0.5, QUAD, UNIFORM) == pytest.approx(0.1333333333333333)


def test_reference_revenue_two_routes(ref):
    # Simpson over the price schedule versus the virtual-surplus integral
    assert ref.revenue == pytest.approx(REF_REVENUE, abs=1e-10)
    assert ref.revenue_virtual == pytest.approx(ref.revenue, abs=1e-9)
    assert abs(ref.constraint_residual) < 1e-12


def test_reference_revenue_by_quad(ref):
    val, _ = integrate.quad(lambda m: float(ref.price_at(m)[0]), 0, 1,
                            points=[REF_EXCL_LO, 0.25, 0.5, 0.75, REF_EXCL_HI], limit=200)
    assert val == pytest.approx(ref.revenue, abs=1e-9)


def test_menu_columns_consistent(ref):
    dv = core.delta_V(ref.mu, SimpleExperiment(FULL), QUAD)
    full = ref.orientation == FULL
    assert np.allclose(ref.gross_utility[full], QUAD(ref.mu[full]) + dv[full])
    assert np.all(ref.price >= -1e-15)
    assert np.all(ref.surplus >= -1e-15)
    assert set(ref.orientation) == {NULL, REVEAL_H, FULL, REVEAL_L}
    # revealed-state pattern: reveal-h below mu0, reveal-l above
    assert np.all(ref.mu[ref.orientation == REVEAL_H] < 0.5)
    assert np.all(ref.mu[ref.orientation == REVEAL_L] > 0.5)


def test_full_region_price_flat(ref):
    # in the full-revelation band the price is constant (surplus grows with the gain)
    band = (ref.mu > 0.26) & (ref.mu < 0.74)
    p = ref.price[band]
    assert np.ptp(p[ref.mu[band] < 0.5]) < 1e-12
    assert np.ptp(p[ref.mu[band] > 0.5]) < 1e-12


@given(st.floats(0.7501, 0.8199), st.floats(0.30, 0.70))
def test_foc_residual_high_side(mu, lam):
    th = solver.solve_thresholds(UNIFORM, lam)
    if not th.mu_plus < mu < 0.99:
        return
    nu = solver.solve_foc_posterior(mu, lam, QUAD, UNIFORM)
    if mu < nu < 1:
        assert abs(float(solver.foc_high(mu, nu, lam, QUAD, UNIFORM))) < 1e-8


@given(st.floats(0.01, 0.99))
def test_foc_residual_triangular(mu):
    f = D.triangular()
    th = solver.solve_thresholds(f, 0.5)
    nu = solver.solve_foc_posterior(mu, 0.5, QUAD, f)
    if mu > th.mu_plus and mu < nu < 1:
        assert abs(float(solver.foc_high(mu, nu, 0.5, QUAD, f))) < 1e-8
    if mu < th.mu_minus and 0 < nu < mu:
        assert abs(float(solver.foc_low(mu, nu, 0.5, QUAD, f))) < 1e-8


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.sampled_from([REVEAL_H, REVEAL_L]))
def test_noise_posterior_roundtrip(mu, x, orientation):
    side = "h" if orientation == REVEAL_H else "l"
    e = SimpleExperiment(orientation, x)
    probs = core.signal_probabilities(e, mu)
    if probs[1] <= 1e-9 or not 1e-6 < mu < 1 - 1e-6:
        return
    nu = core.posterior(e, 1, mu)
    back = solver.noise_from_posterior(mu, nu, orientation)
    assert core.simple_delta_v(mu, side, back, QUAD) == pytest.approx(
        core.simple_delta_v(mu, side, x, QUAD), abs=1e-9)


def test_envelope_identity(ref):
    # s(mu) equals the integral of d(delta V)/d mu along the contract curve
    th = ref.thresholds

    def integrand(m):
        is_l, noise, _ = solver._contracts(np.array([m]), th, QUAD, UNIFORM)
        return float(solver._dv_mu(np.array([m]), is_l, noise, QUAD)[0])

    for m in (0.1, 0.2, 0.3, 0.6, 0.78, 0.81, 0.9):
        pts = [p for p in (REF_EXCL_LO, 0.25, 0.5, 0.75) if p < m]
        val, _ = integrate.quad(integrand, 0, m, points=pts or None, limit=200)
        want = 0.0 if m > th.excl_hi else val
        assert float(ref.surplus_at(m)[0]) == pytest.approx(want, abs=1e-4)


def test_envelope_derivative(ref):
    # finite-difference slope of the surplus column equals d(delta V)/d mu
    is_l = ref.is_l
    dmu = solver._dv_mu(ref.mu, is_l, ref.noise, QUAD)
    mid = (ref.mu[1:] + ref.mu[:-1]) / 2
    fd = np.diff(ref.surplus) / np.diff(ref.mu)
    avg = (dmu[1:] + dmu[:-1]) / 2
    served = (mid > REF_EXCL_LO + 0.01) & (mid < REF_EXCL_HI - 0.01)
    assert np.max(np.abs(fd[served] - avg[served])) < 1e-4


@pytest.mark.parametrize("f", [UNIFORM, D.triangular(), D.tilted(0.1)], ids=lambda f: f.name)
def test_grid_refinement_revenue(f):
    revs = [solver.build_menu(QUAD, f, grid=n).revenue for n in (1001, 2001, 4001)]
    assert abs(revs[1] - revs[0]) / revs[1] < 1e-6
    assert abs(revs[2] - revs[1]) / revs[2] < 1e-6


def test_triangular_golden():
    f = D.triangular()
    m = solver.build_menu(QUAD, f)
    th = m.thresholds
    assert th.mu_minus == pytest.approx(np.sqrt(3) / 6, abs=1e-10)
    assert th.mu_plus == pytest.approx(1 - np.sqrt(3) / 6, abs=1e-10)
    assert th.excl_lo == pytest.approx(0.214827, abs=1e-6)
    assert m.revenue == pytest.approx(TRI_REVENUE, abs=1e-9)
    assert m.revenue_virtual == pytest.approx(m.revenue, abs=1e-8)


def test_tilted_multiplier():
    f = D.tilted(0.1)
    trace = []
    lam = solver.solve_lambda(QUAD, f, trace=trace)
    assert lam == pytest.approx(TILT_LAMBDA, abs=1e-9)
    assert abs(solver.constraint_residual(QUAD, f, lam)) < 1e-8
    assert len(trace) > 2
    m = solver.build_menu(QUAD, f)
    assert m.revenue == pytest.approx(TILT_REVENUE, abs=1e-9)
    assert m.revenue_virtual == pytest.approx(m.revenue, abs=1e-8)


def test_multiplier_outside_bracket():
    with pytest.raises(UnsolvedMultiplierError) as exc:
        solver.solve_lambda(QUAD, D.tilted(0.1), bracket=(0.05, 0.3))
    assert exc.value.trace


def test_thresholds_reject_bad_lambda():
    with pytest.raises(DomainError):
        solver.solve_thresholds(UNIFORM, 1.0)


def test_threshold_not_found():
    # a quantile inconsistent with the CDF leaves the low equation without a root
    f = D.BeliefDensity(lambda m: 0.0 * np.asarray(m), lambda m: np.clip(m, 0, 1),
                        lambda u: 0.2 + 0.0 * np.asarray(u))
    with pytest.raises(ThresholdNotFoundError) as exc:
        solver.solve_thresholds(f, 0.5)
    assert exc.value.bracket == (0.0, 0.2)


def test_refusal_and_override():
    f = D.spike()
    with pytest.raises(AssumptionRefusal) as exc:
        solver.build_menu(QUAD, f)
    assert exc.value.reports[0].condition == "likelihood-ratio"
    with pytest.warns(UserWarning):
        m = solver.build_menu(QUAD, f, override=True)
    assert any(not r.passed for r in m.assumption_reports)


def test_action_table_refused():
    with pytest.raises(UnsupportedKindError, match="twice continuously differentiable"):
        solver.build_menu(core.value_from_actions(core.four_action_table()), UNIFORM)


def test_flat_price_quadratic():
    fp = solver.flat_price_optimum(QUAD, UNIFORM)
    assert fp.price == pytest.approx(1 / 6, abs=1e-6)
    assert fp.revenue == pytest.approx(1 / (6 * np.sqrt(3)), abs=1e-9)
    lo, hi = fp.served
    assert lo == pytest.approx(0.5 - np.sqrt(3) / 6, abs=1e-6)
    assert hi == pytest.approx(0.5 + np.sqrt(3) / 6, abs=1e-6)


def test_flat_price_grid_search_crosscheck():
    # brute-force price grid against the optimiser
    gain = lambda m: m - m ** 2
    ps = np.linspace(0.0, 0.25, 20001)
    served = np.sqrt(np.maximum(1 - 4 * ps, 0))
    assert np.max(ps * served) == pytest.approx(solver.flat_price_optimum(QUAD, UNIFORM).revenue, abs=1e-8)
    assert gain(0.5) == 0.25


def test_flat_price_linear_v_is_zero():
    fp = solver.flat_price_optimum(core.polynomial_value([0.0, 1.0]), UNIFORM)
    assert fp.revenue == 0.0 and fp.served is None


def test_flat_price_four_action():
    fp = solver.flat_price_optimum(core.value_from_actions(core.four_action_table()), UNIFORM)
    assert fp.price == pytest.approx(1 / 6, abs=1e-6)
    assert fp.revenue == pytest.approx(1 / 9, abs=1e-8)


def test_menu_beats_flat_price(ref):
    assert ref.revenue >= solver.flat_price_optimum(QUAD, UNIFORM).revenue - 1e-9


def test_segment_breaks_from_orientation_only(ref):
    rows = solver.segment_breaks(ref.mu, ref.orientation, UNIFORM.kinks)
    assert np.allclose(ref.mu[rows], [0.0, REF_EXCL_LO, 0.25, 0.75, REF_EXCL_HI, 1.0], atol=1e-12)
    assert solver.revenue(ref.mu, ref.price, UNIFORM, ref.orientation) == ref.revenue


def test_contract_at_and_price_at(ref):
    o, x, nu = ref.contract_at([0.1, 0.2, 0.4, 0.8, 0.9])
    assert list(o) == [NULL, REVEAL_H, FULL, REVEAL_L, NULL]
    assert nu[3] == pytest.approx(0.8666666666666667)
    p = ref.price_at(ref.mu[::50])
    assert np.allclose(p, ref.price[::50], atol=1e-12)
