import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from infomenu import comparative as C, core, densities as D
from infomenu.core import FULL, NULL, REVEAL_H, REVEAL_L, SimpleExperiment
from infomenu.errors import DomainError, InfeasibleFamilyError

QUAD = core.quadratic_value()
FAMILY = C.DispersionFamily(D.uniform())


def test_family_parameters():
    assert FAMILY.pivot == pytest.approx(0.25, abs=1e-12)
    assert FAMILY.t_max == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.2, 0.4, 1.0])
def test_rotation_is_a_symmetric_density(t):
    f = FAMILY.member(t)
    assert D.check_density(f) == []
    assert float(f.cdf(0.5)) == pytest.approx(0.5, abs=1e-14)
    # mass below the pivot grows by t times the tilt's area on (0, pivot)
    assert float(f.cdf(FAMILY.pivot)) == pytest.approx(0.25 + t * 0.125, abs=1e-14)


def test_rotation_moves_mass_outward():
    f = FAMILY.member(0.4)
    m = np.array([0.0, 0.05, 0.25, 0.4, 0.5, 0.9])
    # 1 + t (c - h) / w with c = w = 1/4 and h = min(mu, 1 - mu)
    assert np.allclose(f.pdf(m), 1 + 0.4 * (0.25 - np.minimum(m, 1 - m)) / 0.25)


def test_infeasible_t():
    with pytest.raises(InfeasibleFamilyError) as exc:
        FAMILY.member(1.5)
    assert exc.value.t_max == pytest.approx(1.0)
    with pytest.raises(DomainError):
        C.rotation_density(D.tilted(0.1), 0.1)


def test_rotation_triangular_base():
    fam = C.DispersionFamily(D.triangular())
    assert fam.pivot == pytest.approx(np.sqrt(3) / 6, abs=1e-10)
    f = fam.member(0.5 * fam.t_max)
    assert D.check_density(f) == []


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_larger_t_is_more_dispersed(t1, t2):
    lo, hi = sorted((t1, t2))
    assert C.is_more_dispersed(FAMILY.member(hi), FAMILY.member(lo))


def test_dispersion_order_detects_reverse():
    r = C.dispersion_order(FAMILY.member(0.1), FAMILY.member(0.4))
    assert not r.more_dispersed and r.worst > 0 and r.location is not None


def test_dispersion_cutoff_and_density_variant():
    r = C.dispersion_order(FAMILY.member(0.4), D.uniform())
    assert r.cutoff == pytest.approx(0.25, abs=1e-12)
    assert r.density_cutoff is None
    assert C.density_cutoff(D.triangular()) is not None


def test_blackwell_compare():
    h3, h5 = SimpleExperiment(REVEAL_H, 0.3), SimpleExperiment(REVEAL_H, 0.5)
    assert C.blackwell_compare(h5, h3) == "dominates"
    assert C.blackwell_compare(h3, h5) == "dominated"
    assert C.blackwell_compare(h3, SimpleExperiment(REVEAL_L, 0.3)) == "incomparable"
    assert C.blackwell_compare(SimpleExperiment.full(), h3) == "dominates"
    assert C.blackwell_compare(SimpleExperiment.null(), h3) == "dominated"
    assert C.blackwell_compare(SimpleExperiment(REVEAL_L, 1.0), SimpleExperiment.full()) == "equal"


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.01, 0.99))
def test_blackwell_dominance_means_higher_value(x1, x2, mu):
    # a dominating experiment is worth weakly more for every convex V
    e1, e2 = SimpleExperiment(REVEAL_L, x1), SimpleExperiment(REVEAL_L, x2)
    if C.blackwell_compare(e1, e2) in ("dominates", "equal"):
        for V in (QUAD, core.value_from_actions(core.four_action_table())):
            assert core.delta_V(mu, e1, V) >= core.delta_V(mu, e2, V) - 1e-12


@pytest.fixture(scope="module")
def sweep():
    return C.solve_family(FAMILY, [0.0, 0.1, 0.2, 0.3, 0.4], QUAD)


def test_sweep_thresholds(sweep):
    assert not sweep.failed
    th = {t: sweep.menus[t].thresholds for t in sweep.ts}
    assert th[0.4].mu_minus == pytest.approx(0.22009, abs=1e-5)
    assert th[0.0].excl_lo == pytest.approx(0.17980589839889288, abs=1e-10)
    assert th[0.4].excl_lo == pytest.approx(0.1602, abs=1e-4)
    assert C.thresholds_monotone(sweep).passed


def test_sweep_reports(sweep):
    probes = [0.1, 0.15, 0.2, 0.8, 0.85, 0.9]
    assert C.blackwell_monotone(sweep, probes).passed
    assert C.surplus_monotone(sweep, probes).passed
    s = {t: float(sweep.menus[t].surplus_at(0.2)[0]) for t in (0.0, 0.4)}
    assert s[0.0] == pytest.approx(0.0016, abs=1e-4)
    assert s[0.4] == pytest.approx(0.0080, abs=1e-4)
    o, x, _ = sweep.menus[0.4].contract_at(0.2)
    assert o[0] == REVEAL_H and x[0] == pytest.approx(0.758, abs=1e-3)


def test_monotone_report_flags_reversal(sweep):
    backwards = C.SweepResult(sweep.ts[::-1], sweep.menus)
    assert not C.thresholds_monotone(backwards).passed
    assert not C.surplus_monotone(backwards, [0.2]).passed
    assert not C.blackwell_monotone(backwards, [0.2]).passed


def test_dispersion_chain():
    report, rows = C.dispersion_chain(FAMILY, [0.0, 0.1, 0.2, 0.3, 0.4])
    assert report.passed and len(rows) == 4
