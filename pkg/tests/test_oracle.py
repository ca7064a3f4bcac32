import itertools
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from infomenu import _fallback, core, densities as D, kernels, oracle, solver
from infomenu.core import FULL, NULL, REVEAL_H, REVEAL_L, SimpleExperiment
from infomenu.errors import BudgetExceededError, DomainError

QUAD = core.quadratic_value()

try:
    from infomenu import _kernels
except ImportError:  # extension not built
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


def lp_prices(gains, assign, weights):
    """Revenue-maximal IC/IR prices by linear programming (independent of the kernels)."""
    n = len(assign)
    A, b = [], []
    for i in range(n):
        row = np.zeros(n)
        row[i] = 1.0
        A.append(row)
        b.append(gains[i, assign[i]])
        for j in range(n):
            if i != j:
                row = np.zeros(n)
                row[i], row[j] = 1.0, -1.0
                A.append(row)
                b.append(gains[i, assign[i]] - gains[i, assign[j]])
    res = linprog(-np.asarray(weights), A_ub=np.array(A), b_ub=np.array(b),
                  bounds=[(0, None)] * n, method="highs")
    return (res.x, -res.fun) if res.status == 0 else (None, None)


@st.composite
def gain_problems(draw, max_n=5, max_k=4):
    n = draw(st.integers(1, max_n))
    k = draw(st.integers(1, max_k))
    g = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=n * k, max_size=n * k))).reshape(n, k)
    g[:, 0] = 0.0  # entry 0 plays the null experiment
    a = np.array(draw(st.lists(st.integers(0, k - 1), min_size=n, max_size=n)), dtype=np.int64)
    w = np.array(draw(st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n)))
    return g, a, w / w.sum()


@given(gain_problems())
def test_prices_match_linear_program(problem):
    g, a, w = problem
    p, ok = _fallback.assignment_prices(g, a)
    x, rev = lp_prices(g, a, w)
    assert ok == (x is not None)
    if ok:
        assert float(np.asarray(p) @ w) == pytest.approx(rev, abs=1e-9)
        assert np.allclose(p, x, atol=1e-9) or float(np.asarray(p) @ w) >= rev - 1e-9


@needs_ext
@given(gain_problems())
def test_backends_agree_on_prices(problem):
    g, a, w = problem
    pf, okf = _kernels.assignment_prices(g, a)
    ps, oks = _fallback.assignment_prices(g, a)
    assert okf == oks
    assert np.allclose(pf, ps, rtol=0, atol=1e-13)


@needs_ext
@given(gain_problems(), st.integers(0, 4))
def test_backends_agree_on_moves(problem, i):
    g, a, w = problem
    i = i % a.size
    rf = np.asarray(_kernels.move_revenues(g, w, a, i))
    rs = np.asarray(_fallback.move_revenues(g, w, a, i))
    assert np.array_equal(np.isfinite(rf), np.isfinite(rs))
    fin = np.isfinite(rf)
    assert np.allclose(rf[fin], rs[fin], rtol=0, atol=1e-13)


@needs_ext
@given(gain_problems(max_n=4, max_k=3))
def test_backends_agree_on_enumeration(problem):
    g, _, w = problem
    af, rf = _kernels.enumerate_best(g, w)
    as_, rs = _fallback.enumerate_best(g, w, chunk=7)
    assert rf == pytest.approx(rs, abs=1e-12)
    assert np.array_equal(af, as_)


@given(gain_problems(max_n=4, max_k=3))
def test_enumeration_is_global_optimum(problem):
    g, _, w = problem
    a, rev = _fallback.enumerate_best(g, w)
    best = max(_fallback.assignment_prices(g, np.array(c))[0] @ w
               for c in itertools.product(range(g.shape[1]), repeat=g.shape[0])
               if _fallback.assignment_prices(g, np.array(c))[1])
    assert rev == pytest.approx(best, abs=1e-12)


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    assert kernels.implementation("python") is _fallback


def test_two_type_toy_exact():
    mus, w = np.array([0.3, 0.7]), np.array([0.5, 0.5])
    inst = oracle.DiscreteInstance(mus, w, tuple(oracle.simple_catalog(0.25)), QUAD)
    mech = oracle.brute_force_optimal(inst)
    assert mech.certified and mech.mode == "exhaustive"
    # independent: every assignment priced by linear programming
    best = max(r for c in itertools.product(range(len(inst.catalog)), repeat=2)
               for _, r in [lp_prices(inst.gains, c, w)] if r is not None)
    assert mech.revenue == pytest.approx(best, abs=1e-10)
    assert oracle.milp_optimal(inst).revenue == pytest.approx(best, abs=1e-9)
    # one type on each side of 1/2 buys full revelation at its full gain
    assert mech.revenue == pytest.approx(0.21, abs=1e-12)


def test_null_catalog_revenue_zero():
    inst = oracle.DiscreteInstance(*oracle.uniform_types(5), (SimpleExperiment.null(),), QUAD)
    mech = oracle.brute_force_optimal(inst)
    assert mech.revenue == 0.0
    assert inst.full_index == inst.null_index


def test_instance_validation():
    with pytest.raises(DomainError):
        oracle.DiscreteInstance(np.array([0.2]), np.array([0.5]), (SimpleExperiment.null(),), QUAD)
    with pytest.raises(DomainError):
        oracle.DiscreteInstance(np.array([0.2]), np.array([1.0]), (SimpleExperiment.full(),), QUAD)
    with pytest.raises(DomainError):
        oracle.DiscreteInstance(np.array([1.2]), np.array([1.0]), (SimpleExperiment.null(),), QUAD)


def test_catalog_sizes_and_dedupe():
    assert len(oracle.simple_catalog(0.1)) == 20
    assert len(oracle.three_signal_catalog(0.125)) == 147
    dup = [SimpleExperiment(REVEAL_L, 1.0), SimpleExperiment.full(),
           SimpleExperiment(REVEAL_H, 0.0), SimpleExperiment.null()]
    assert len(oracle.dedupe(dup)) == 2


def test_budget_exceeded_without_fallback():
    inst = oracle.DiscreteInstance(*oracle.uniform_types(9), tuple(oracle.simple_catalog(0.1)), QUAD)
    with pytest.raises(BudgetExceededError):
        oracle.brute_force_optimal(inst, budget=1000, fallback=False)


def test_local_search_seeded_determinism():
    inst = oracle.DiscreteInstance(*oracle.uniform_types(9), tuple(oracle.simple_catalog(0.25)), QUAD)
    a = oracle.brute_force_optimal(inst, budget=10, restarts=6, seed=3)
    b = oracle.brute_force_optimal(inst, budget=10, restarts=6, seed=3)
    assert a.assignment == b.assignment and a.revenue == b.revenue
    assert not a.certified
    exact = oracle.milp_optimal(inst)
    assert a.revenue <= exact.revenue + 1e-9


def test_milp_matches_enumeration():
    inst = oracle.DiscreteInstance(*oracle.uniform_types(5), tuple(oracle.simple_catalog(0.25)), QUAD)
    ex = oracle.brute_force_optimal(inst)
    assert oracle.milp_optimal(inst).revenue == pytest.approx(ex.revenue, abs=1e-9)


@pytest.fixture(scope="module")
def ref():
    return solver.build_menu(QUAD, D.uniform())


def test_verify_menu_passes(ref):
    r = oracle.verify_menu(ref, n=501)
    assert r.passed and r.worst < 1e-7
    assert r.n_contracts == 501 + ref.mu.size


def test_verify_detects_perturbed_price(ref):
    price = ref.price.copy()
    k = int(np.searchsorted(ref.mu, 0.4))
    price[k] += 0.01
    is_l = ref.mu >= 0.5
    r = oracle.verify_contract_arrays(ref.mu, is_l, ref.noise, price, QUAD)
    assert not r.passed
    assert r.worst == pytest.approx(0.01, abs=1e-9)
    assert r.kind == "IC" and r.mu == pytest.approx(ref.mu[k])


def test_verify_empty_menu_passes():
    r = oracle.verify_contract_arrays(np.array([]), np.array([], bool), np.array([]), np.array([]), QUAD)
    assert r.passed


def test_mechanism_audit_and_dispatch():
    inst = oracle.DiscreteInstance(*oracle.uniform_types(4), tuple(oracle.simple_catalog(0.25)), QUAD)
    mech = oracle.brute_force_optimal(inst)
    assert oracle.verify_ic_ir(inst, mech).passed
    d = mech.as_dict(inst)
    assert d["types"] == inst.mus.tolist() and len(d["experiments"]) == 4


def test_revealed_state_pattern():
    ok = oracle.revealed_state_pattern([0.2, 0.4, 0.6], [REVEAL_H, FULL, REVEAL_L], 0.5)
    assert ok.passed
    bad = oracle.revealed_state_pattern([0.2, 0.6], [REVEAL_L, REVEAL_L], 0.5)
    assert not bad.passed and bad.violations[0]["mu"] == 0.2
    odd = core.GeneralExperiment(np.array([[0.6, 0.3], [0.4, 0.7]]))
    assert not oracle.revealed_state_pattern([0.3], [odd], 0.5).applicable


def test_menu_pattern(ref):
    assert oracle.menu_pattern(ref).passed


def test_three_signal_extension_small():
    inst = oracle.DiscreteInstance(*oracle.uniform_types(3), tuple(oracle.simple_catalog(0.25)), QUAD)
    r = oracle.three_signal_no_improvement(inst, step=0.25, exact=True)
    assert r.passed and r.gain < 1e-6 and r.extra_experiments > 0


def test_repriced_restriction_feasible(ref):
    inst = oracle.DiscreteInstance(*oracle.uniform_types(21), tuple(oracle.simple_catalog(0.1)), QUAD)
    mech, continuum = oracle.repriced_restriction(ref, inst)
    assert mech.certified
    assert mech.revenue == pytest.approx(0.10986146233451517, abs=1e-10)
    assert continuum == pytest.approx(0.1018433463552434, abs=1e-10)
    # continuum prices are IC among the finite types too, so repricing can only help
    assert mech.revenue >= continuum - 1e-12


def test_python_backend_forced_by_environment():
    import subprocess
    import sys
    code = ("from infomenu import kernels, core, oracle;"
            "inst = oracle.DiscreteInstance(*oracle.uniform_types(4), tuple(oracle.simple_catalog(0.25)),"
            " core.quadratic_value());"
            "print(kernels.BACKEND, repr(oracle.brute_force_optimal(inst).revenue))")
    env = dict(os.environ, INFOMENU_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    backend, rev = out.stdout.split()
    assert backend == "python"
    inst = oracle.DiscreteInstance(*oracle.uniform_types(4), tuple(oracle.simple_catalog(0.25)), QUAD)
    assert float(rev) == pytest.approx(oracle.brute_force_optimal(inst).revenue, abs=1e-13)
