import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from harq_fso.barrier import find_strictly_feasible, kkt_residual, solve_convex_subproblem
from harq_fso.errors import SolverError


class Projection:
    """min |x - c|^2  s.t.  a.x <= b, x >= 0."""

    def __init__(self, c, a, b):
        self.c = np.asarray(c, float)
        self.a = np.asarray(a, float)
        self.b = float(b)
        self.n = self.c.size

    def objective(self, x):
        d = x - self.c
        return float(d @ d), 2 * d, 2 * np.eye(self.n)

    def constraints(self, x):
        f = np.concatenate([[self.a @ x - self.b], -x])
        jac = np.vstack([self.a, -np.eye(self.n)])
        return f, jac, np.zeros((self.n + 1, self.n, self.n))


class Disc:
    """min x0 + x1  s.t.  |x|^2 <= r^2."""

    def __init__(self, r):
        self.r = r
        self.n = 2

    def objective(self, x):
        return float(x.sum()), np.ones(2), np.zeros((2, 2))

    def constraints(self, x):
        return np.array([x @ x - self.r**2]), 2 * x[None, :], 2 * np.eye(2)[None, :, :]


def test_projection_onto_halfspace():
    prob = Projection([2.0, 1.0], [1.0, 1.0], 1.0)
    res = solve_convex_subproblem(prob, [0.1, 0.1])
    np.testing.assert_allclose(res.x, [1.0, 0.0], atol=1e-7)
    assert res.objective == pytest.approx(2.0, abs=1e-7)
    assert res.kkt_residual <= 1e-9
    # multiplier of the halfspace: grad = 2 (x - c) = (-2, -2)
    assert res.duals[0] == pytest.approx(2.0, rel=1e-5)


def test_nonlinear_constraint():
    res = solve_convex_subproblem(Disc(2.0), [0.0, 0.0])
    np.testing.assert_allclose(res.x, [-np.sqrt(2.0), -np.sqrt(2.0)], atol=1e-7)
    assert res.duals[0] == pytest.approx(1 / (2 * np.sqrt(2.0)), rel=1e-5)


def test_phase_one_repairs_infeasible_start():
    prob = Projection([0.2, 0.3], [1.0, 1.0], 1.0)
    x = find_strictly_feasible(prob, [5.0, 5.0])
    assert np.max(prob.constraints(x)[0]) < 0
    res = solve_convex_subproblem(prob, [5.0, 5.0])
    np.testing.assert_allclose(res.x, [0.2, 0.3], atol=1e-7)


def test_infeasible_problem_raises():
    prob = Projection([1.0, 1.0], [1.0, 1.0], -1.0)
    with pytest.raises(SolverError) as info:
        solve_convex_subproblem(prob, [0.5, 0.5])
    assert "certificate" in info.value.diagnostics


def test_start_outside_domain_raises():
    class Log:
        n = 1

        def constraints(self, x):
            return np.array([-np.log(x[0]) if x[0] > 0 else np.nan]), np.zeros((1, 1)), np.zeros((1, 1, 1))

    with pytest.raises(SolverError):
        find_strictly_feasible(Log(), [-1.0])


def test_kkt_residual_zero_at_solution():
    prob = Projection([2.0, 1.0], [1.0, 1.0], 1.0)
    assert kkt_residual(prob, np.array([1.0, 0.0]), np.array([2.0, 0.0, 0.0])) == pytest.approx(0.0, abs=1e-15)
    assert kkt_residual(prob, np.array([1.0, 0.0]), np.zeros(3)) > 0.1


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.2, 3))
@example(1.4901554828365043e-08, -1.0, 1.0)
def test_projection_matches_closed_form(c0, c1, b):
    # projection onto {x >= 0, x0 + x1 <= b} computed by enumerating faces
    c = np.array([c0, c1])
    cands = [np.maximum(c, 0.0)]
    shift = c - (c.sum() - b) / 2
    cands.append(shift)
    cands += [np.array([min(max(c0, 0), b), 0.0]), np.array([0.0, min(max(c1, 0), b)]), np.zeros(2)]
    feas = [p for p in cands if np.all(p >= -1e-12) and p.sum() <= b + 1e-12]
    best = min(feas, key=lambda p: np.sum((p - c) ** 2))
    res = solve_convex_subproblem(Projection(c, [1.0, 1.0], b), [b / 4, b / 4])
    assert res.objective == pytest.approx(np.sum((best - c) ** 2), abs=1e-7)
