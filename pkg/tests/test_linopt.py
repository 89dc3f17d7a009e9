import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from ergocert import linopt
from ergocert.linopt import LinearFeasibilityProblem, LPStatus

from networks import random_metzler


def _highs(p: LinearFeasibilityProblem, c=None):
    A_eq, b_eq, A_ub, b_ub = p.matrices()
    bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi)
              for lo, hi in zip(p.lower, p.upper)]
    return linprog(np.zeros(p.n) if c is None else c, A_ub=A_ub if len(b_ub) else None,
                   b_ub=b_ub if len(b_ub) else None, A_eq=A_eq if len(b_eq) else None,
                   b_eq=b_eq if len(b_eq) else None, bounds=bounds, method="highs")


def test_trivial_feasible_box():
    p = LinearFeasibilityProblem(2, lower=np.zeros(2), upper=np.ones(2))
    p.add_eq([1, 1], 1.5)
    res = linopt.solve_feasibility(p)
    assert res.feasible
    assert p.within_tolerance(res.x)


def test_contradictory_constraints_are_infeasible():
    p = LinearFeasibilityProblem(1, lower=[0.0])
    p.add_ub([1.0], -1.0)
    assert linopt.solve_feasibility(p).status is LPStatus.INFEASIBLE


def test_free_variables_and_equalities():
    # x - y = 3, x + y = 1 has the unique solution (2, -1)
    p = LinearFeasibilityProblem(2)
    p.add_eq([1, -1], 3)
    p.add_eq([1, 1], 1)
    res = linopt.solve_feasibility(p)
    assert res.feasible
    np.testing.assert_allclose(res.x, [2, -1], atol=1e-9)


def test_minimize_matches_closed_form():
    # min x + 2y s.t. x + y >= 1, x, y >= 0 -> 1 at (1, 0)
    p = LinearFeasibilityProblem(2, lower=np.zeros(2))
    p.add_lb([1, 1], 1)
    res = linopt.minimize(p, [1, 2])
    assert res.objective == pytest.approx(1.0)
    np.testing.assert_allclose(res.x, [1, 0], atol=1e-9)


def test_maximize_bounded_box():
    p = LinearFeasibilityProblem(3, lower=np.zeros(3), upper=[1, 2, 3])
    res = linopt.maximize(p, [1, 1, 1])
    assert res.objective == pytest.approx(6.0)


def test_degenerate_problem_terminates():
    # classic cycling example for textbook pivoting rules
    p = LinearFeasibilityProblem(4, lower=np.zeros(4))
    p.add_ub([0.5, -5.5, -2.5, 9], 0)
    p.add_ub([0.5, -1.5, -0.5, 1], 0)
    p.add_ub([1, 0, 0, 0], 1)
    res = linopt.maximize(p, [10, -57, -9, -24])
    assert res.feasible
    assert res.objective == pytest.approx(1.0)


def test_rejects_nonfinite_coefficients():
    p = LinearFeasibilityProblem(1)
    p.add_eq([np.nan], 0)
    with pytest.raises(ValueError):
        linopt.solve_feasibility(p)


def test_random_lp_against_highs():
    rng = np.random.default_rng(11)
    agree = 0
    for _ in range(30):
        n, m = 20, 40
        p = LinearFeasibilityProblem(n, lower=np.zeros(n), upper=np.full(n, 5.0))
        for _ in range(m):
            p.add_ub(rng.normal(size=n), rng.normal())
        for _ in range(3):
            p.add_eq(rng.normal(size=n), rng.normal())
        c = rng.normal(size=n)
        ours = linopt.minimize(p, c)
        ref = _highs(p, c)
        assert ours.feasible == (ref.status == 0)
        if ours.feasible:
            assert p.within_tolerance(ours.x)
            assert ours.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)
        agree += 1
    assert agree == 30


def _vertex_optimum(A_ub, b_ub, c):
    """Brute force over all bases of ``A x <= b, 0 <= x <= 1``."""
    n = A_ub.shape[1]
    G = np.vstack([A_ub, -np.eye(n), np.eye(n)])
    h = np.concatenate([b_ub, np.zeros(n), np.ones(n)])
    best = None
    for rows in itertools.combinations(range(len(h)), n):
        sub = G[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, h[list(rows)])
        if np.all(G @ x <= h + 1e-9):
            val = float(c @ x)
            best = val if best is None else min(best, val)
    return best


def test_small_lp_against_vertex_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(4):
        n = 7
        A = rng.normal(size=(3, n))
        b = rng.uniform(0.5, 2.0, 3)
        c = rng.normal(size=n)
        p = LinearFeasibilityProblem(n, lower=np.zeros(n), upper=np.ones(n))
        for row, rhs in zip(A, b):
            p.add_ub(row, rhs)
        res = linopt.minimize(p, c)
        assert res.objective == pytest.approx(_vertex_optimum(A, b, c), abs=1e-8)


def test_hurwitz_trivial_cases():
    assert linopt.is_hurwitz_metzler(np.array([[-1.0]])).hurwitz
    assert not linopt.is_hurwitz_metzler(np.array([[0.0]])).hurwitz
    res = linopt.is_hurwitz_metzler(np.array([[-2.0, 1.0], [1.0, -2.0]]))
    assert res.hurwitz and np.all(res.v >= 1) and np.all(res.v @ [[-2, 1], [1, -2]] <= -1 + 1e-9)


def test_hurwitz_rejects_non_metzler():
    with pytest.raises(linopt.NotMetzlerError):
        linopt.is_hurwitz_metzler(np.array([[-1.0, -1.0], [0.0, -1.0]]))


def test_pf_eigenvalue_known_values():
    # [[-2, 3], [3, -2]] has eigenvalues 1 and -5
    assert linopt.pf_eigenvalue(np.array([[-2.0, 3.0], [3.0, -2.0]])) == pytest.approx(1.0, abs=1e-8)
    assert linopt.pf_eigenvalue(np.array([[-3.0]])) == pytest.approx(-3.0, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(1, 6))
def test_pf_eigenvalue_matches_numpy(seed, d):
    M = random_metzler(np.random.default_rng(seed), d)
    lam = linopt.pf_eigenvalue(M)
    assert lam == pytest.approx(float(np.linalg.eigvals(M).real.max()), abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(1, 6))
def test_hurwitz_lp_agrees_with_spectrum(seed, d):
    M = random_metzler(np.random.default_rng(seed), d)
    lam = float(np.linalg.eigvals(M).real.max())
    if abs(lam) < 1e-6:
        return
    res = linopt.is_hurwitz_metzler(M)
    assert res.hurwitz == (lam < 0)
    if res.hurwitz:
        assert np.all(res.v >= 1 - 1e-9)
        assert np.all(res.v @ M <= -1 + 1e-7)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), d=st.integers(1, 6))
def test_hurwitz_metzler_has_nonpositive_inverse(seed, d):
    M = random_metzler(np.random.default_rng(seed), d)
    lam = float(np.linalg.eigvals(M).real.max())
    if lam < -1e-3:
        assert linopt.inverse_nonpositivity_check(M)
        np.testing.assert_allclose(linopt.gauss_inverse(M), np.linalg.inv(M), atol=1e-8)


def test_gauss_inverse_singular():
    with pytest.raises(linopt.SingularMatrixError):
        linopt.gauss_inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_m_matrix_pivot_test():
    assert linopt.is_nonsingular_m_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    assert not linopt.is_nonsingular_m_matrix(np.array([[1.0, -2.0], [-2.0, 1.0]]))
