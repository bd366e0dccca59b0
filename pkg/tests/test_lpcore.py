import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hetsleep.lpcore import (LinearProgram, LpStatus, farkas_certificate_value,
                             lagrangian_dual_value, solve)


def brute_force_vertex_optimum(lp: LinearProgram) -> float | None:
    """Enumerate candidate basic points of the inequality system.

    All constraints (rows and finite bounds) are collected as a'x <= b; every
    subset of n of them is solved as equalities and feasible solutions are
    compared. Valid for bounded feasible problems; returns None if no feasible
    candidate vertex exists.
    """
    n = lp.n_vars
    rows = [(lp.a_ub[i], lp.b_ub[i]) for i in range(lp.b_ub.size)]
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lp.upper[j]):
            rows.append((e.copy(), lp.upper[j]))
        if np.isfinite(lp.lower[j]):
            rows.append((-e, -lp.lower[j]))
    eqs = [(lp.a_eq[i], lp.b_eq[i]) for i in range(lp.b_eq.size)]

    best = None
    for combo in itertools.combinations(range(len(rows)), n - len(eqs)):
        a = np.array([rows[i][0] for i in combo] + [e[0] for e in eqs])
        b = np.array([rows[i][1] for i in combo] + [e[1] for e in eqs])
        if a.shape[0] != n or abs(np.linalg.det(a)) < 1e-9:
            continue
        x = np.linalg.solve(a, b)
        ok = all(r @ x <= v + 1e-7 for r, v in rows)
        ok = ok and all(abs(r @ x - v) <= 1e-7 for r, v in eqs)
        if not ok:
            continue
        val = float(lp.c @ x)
        if best is None or (val > best if lp.maximize else val < best):
            best = val
    return best


def random_bounded_lp(rng: np.random.Generator, n_max: int = 6) -> LinearProgram:
    """Random LP with a bounding box, so an optimum exists iff feasible."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, 9))
    c = rng.normal(size=n)
    a_ub = rng.normal(size=(m, n))
    b_ub = rng.normal(size=m) + 1.0
    upper = rng.uniform(0.5, 5.0, size=n)
    return LinearProgram(c=c, a_ub=a_ub, b_ub=b_ub, upper=upper,
                         maximize=bool(rng.random() < 0.5))


class TestKnownSolutions:
    def test_min_with_lower_constraint(self):
        sol = solve(LinearProgram(c=[1.0], a_ub=[[-1.0]], b_ub=[-3.0]))
        assert sol.status is LpStatus.OPTIMAL
        assert sol.value == pytest.approx(3.0)
        assert sol.x[0] == pytest.approx(3.0)

    def test_max_simplex_face_dual(self):
        sol = solve(LinearProgram(c=[1.0, 1.0], a_ub=[[1.0, 1.0]], b_ub=[1.0],
                                  maximize=True))
        assert sol.status is LpStatus.OPTIMAL
        assert sol.value == pytest.approx(1.0)
        assert sol.duals_ub[0] == pytest.approx(1.0)

    def test_unbounded(self):
        assert solve(LinearProgram(c=[-1.0])).status is LpStatus.UNBOUNDED

    def test_infeasible_with_certificate(self):
        lp = LinearProgram(c=[0.0], a_ub=[[1.0], [-1.0]], b_ub=[1.0, -2.0])
        sol = solve(lp)
        assert sol.status is LpStatus.INFEASIBLE
        assert farkas_certificate_value(lp, sol.farkas_ub, sol.farkas_eq) > 0
        assert (sol.farkas_ub >= -1e-12).all()

    def test_equality_and_free_variable(self):
        sol = solve(LinearProgram(c=[1.0, 2.0], a_eq=[[1.0, 1.0]], b_eq=[4.0],
                                  lower=[0.0, -10.0], upper=[np.inf, 10.0]))
        assert sol.status is LpStatus.OPTIMAL
        assert sol.value == pytest.approx(-6.0)
        np.testing.assert_allclose(sol.x, [14.0, -10.0], atol=1e-9)


class TestVertexEnumerationOracle:
    def test_fifty_random_lps(self):
        rng = np.random.default_rng(314)
        solved = 0
        while solved < 50:
            lp = random_bounded_lp(rng)
            expected = brute_force_vertex_optimum(lp)
            sol = solve(lp)
            if expected is None:
                assert sol.status is LpStatus.INFEASIBLE
                continue
            assert sol.status is LpStatus.OPTIMAL
            assert sol.value == pytest.approx(expected, rel=1e-7, abs=1e-7)
            solved += 1


class TestDuals:
    def test_strong_duality_random(self):
        rng = np.random.default_rng(2718)
        checked = 0
        while checked < 60:
            lp = random_bounded_lp(rng)
            sol = solve(lp)
            if sol.status is not LpStatus.OPTIMAL:
                continue
            v_min = -sol.value if lp.maximize else sol.value
            dv = lagrangian_dual_value(lp, sol.duals_ub, sol.duals_eq)
            assert dv == pytest.approx(v_min, rel=1e-6, abs=1e-6)
            assert (sol.duals_ub >= 0).all()
            checked += 1

    def test_complementary_slackness(self):
        rng = np.random.default_rng(5)
        checked = 0
        while checked < 40:
            lp = random_bounded_lp(rng)
            sol = solve(lp)
            if sol.status is not LpStatus.OPTIMAL:
                continue
            slack = lp.b_ub - lp.a_ub @ sol.x
            assert (slack >= -1e-8 * (1 + np.abs(lp.b_ub))).all()
            # positive multiplier => tight constraint
            for i in range(lp.b_ub.size):
                if sol.duals_ub[i] > 1e-6 * (1 + abs(sol.value)):
                    assert slack[i] == pytest.approx(0.0, abs=1e-6)
            checked += 1

    def test_farkas_on_random_infeasible(self):
        rng = np.random.default_rng(99)
        found = 0
        while found < 20:
            n = int(rng.integers(1, 5))
            a = rng.normal(size=(1, n))
            # x must satisfy a x <= -1 and a x >= 1 simultaneously
            lp = LinearProgram(c=np.zeros(n), a_ub=np.vstack([a, -a]),
                               b_ub=[-1.0, -1.0],
                               lower=np.full(n, -10.0), upper=np.full(n, 10.0))
            sol = solve(lp)
            assert sol.status is LpStatus.INFEASIBLE
            assert farkas_certificate_value(lp, sol.farkas_ub, sol.farkas_eq) > 0
            found += 1


class TestDeterminism:
    def test_identical_inputs_identical_outputs(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            lp = random_bounded_lp(rng)
            a = solve(lp)
            b = solve(lp)
            assert a.status == b.status
            if a.status is LpStatus.OPTIMAL:
                np.testing.assert_array_equal(a.x, b.x)
                np.testing.assert_array_equal(a.duals_ub, b.duals_ub)
                assert a.iterations == b.iterations


class TestScaleRobustness:
    def test_mixed_row_scales(self):
        # Columns mixing unit and 1e8-scale rows stop at true optimality.
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = 6
            rates = rng.uniform(1e6, 1e8, size=n)
            c = rng.uniform(1.0, 40.0, size=n)
            demand = rng.uniform(1e6, 5e6)
            lp = LinearProgram(c=c, a_ub=[(-rates).tolist(), np.ones(n).tolist()],
                               b_ub=[-demand, 1.0])
            sol = solve(lp)
            assert sol.status is LpStatus.OPTIMAL
            # best single variable wins: min over j of c_j * demand / rates_j
            expected = (c * demand / rates).min()
            assert sol.value == pytest.approx(expected, rel=1e-9)


@settings(max_examples=120, deadline=None)
@given(st.integers(min_value=0, max_value=10 ** 9))
def test_property_strong_duality(seed):
    rng = np.random.default_rng(seed)
    lp = random_bounded_lp(rng)
    sol = solve(lp)
    if sol.status is LpStatus.OPTIMAL:
        v_min = -sol.value if lp.maximize else sol.value
        dv = lagrangian_dual_value(lp, sol.duals_ub, sol.duals_eq)
        assert dv == pytest.approx(v_min, rel=1e-6, abs=1e-6)
    elif sol.status is LpStatus.INFEASIBLE:
        assert farkas_certificate_value(lp, sol.farkas_ub, sol.farkas_eq) > 0
