"""Dense log-barrier interior-point solver for small smooth convex problems.

A problem supplies

    objective(x)   -> (f0, grad f0, hess f0)
    constraints(x) -> (f, jac, hess)    with f_i(x) <= 0 required,
                                          jac (m, n), hess (m, n, n)

Points outside the functions' domain should produce non-finite values; the
line search treats them like constraint violations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError

ARMIJO = 1e-4
BACKTRACK = 0.5
MU = 10.0
EPS = np.finfo(float).eps


@dataclass
class BarrierResult:
    x: np.ndarray
    objective: float
    duals: np.ndarray
    kkt_residual: float
    newton_steps: int
    outer_steps: int


def _barrier_terms(problem, x, t):
    f0, g0, h0 = problem.objective(x)
    f, jac, hess = problem.constraints(x)
    if not (np.all(np.isfinite(f)) and np.all(f < 0) and np.isfinite(f0)):
        return None
    inv = -1.0 / f
    val = t * f0 - np.sum(np.log(-f))
    grad = t * g0 + jac.T @ inv
    H = t * h0 + (jac.T * inv**2) @ jac + np.einsum("i,ijk->jk", inv, hess)
    return val, grad, H


def _barrier_value(problem, x, t):
    f0, _, _ = problem.objective(x)
    f, _, _ = problem.constraints(x)
    if not (np.all(np.isfinite(f)) and np.all(f < 0) and np.isfinite(f0)):
        return np.inf
    return t * f0 - np.sum(np.log(-f))


def _center(problem, x, t, max_steps, stop=None):
    """Newton's method on t f0 + phi; returns (x, steps)."""
    steps = 0
    blind = 0
    for _ in range(max_steps):
        terms = _barrier_terms(problem, x, t)
        if terms is None:
            raise SolverError("iterate left the strictly feasible region", t=t, x=x.tolist())
        val, grad, H = terms
        try:
            dx = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            dx = -np.linalg.lstsq(H, grad, rcond=None)[0]
        decrement = -float(grad @ dx)
        if not np.isfinite(decrement):
            raise SolverError("non-finite Newton step", t=t)
        if decrement / 2.0 <= 1e-12:
            break
        # below this the barrier value cannot resolve progress; a couple of
        # full Newton steps (quadratic regime) still sharpen the gradient
        if decrement / 2.0 <= 64.0 * EPS * abs(val):
            trial = x + dx
            if blind >= 2 or not np.isfinite(_barrier_value(problem, trial, t)):
                break
            blind += 1
            x = trial
            steps += 1
            continue
        step = 1.0
        slope = float(grad @ dx)
        while True:
            trial = x + step * dx
            tv = _barrier_value(problem, trial, t)
            if tv <= val + ARMIJO * step * slope:
                break
            step *= BACKTRACK
            if step < 1e-16:
                # no further progress at this precision
                return x, steps
        x = trial
        steps += 1
        if stop is not None and stop(x):
            return x, steps
    return x, steps


def kkt_residual(problem, x, duals) -> float:
    """max of scaled stationarity, complementarity and primal infeasibility."""
    _, g0, _ = problem.objective(x)
    f, jac, _ = problem.constraints(x)
    if not np.all(np.isfinite(f)):
        return np.inf
    stationarity = np.max(np.abs(g0 + jac.T @ duals)) / (1.0 + np.max(np.abs(g0)))
    complementarity = np.max(np.abs(duals * f)) if f.size else 0.0
    primal = max(0.0, float(np.max(f))) if f.size else 0.0
    return float(max(stationarity, complementarity, primal))


class _PhaseOne:
    """min s  s.t.  f_i(x) - s <= 0, on variables (x, s)."""

    def __init__(self, problem):
        self.problem = problem
        self.n = problem.n + 1

    def objective(self, z):
        g = np.zeros(self.n)
        g[-1] = 1.0
        return z[-1], g, np.zeros((self.n, self.n))

    def constraints(self, z):
        f, jac, hess = self.problem.constraints(z[:-1])
        m = f.size
        J = np.zeros((m, self.n))
        J[:, :-1] = jac
        J[:, -1] = -1.0
        H = np.zeros((m, self.n, self.n))
        H[:, :-1, :-1] = hess
        return f - z[-1], J, H


def find_strictly_feasible(problem, x0, margin=0.0, max_newton=200):
    """Phase I: return x with max_i f_i(x) < -margin or raise SolverError."""
    x0 = np.asarray(x0, dtype=float)
    f, _, _ = problem.constraints(x0)
    if not np.all(np.isfinite(f)):
        raise SolverError("phase I start lies outside the constraint domain", x0=x0.tolist())
    if np.max(f) < -margin:
        return x0
    aux = _PhaseOne(problem)
    z = np.append(x0, np.max(f) + 1.0)
    t = 1.0
    done = lambda zz: zz[-1] < -margin  # noqa: E731
    for _ in range(60):
        z, _ = _center(aux, z, t, max_newton, stop=done)
        if done(z):
            return z[:-1]
        if (f.size + 1) / t < 1e-12:
            break
        t *= MU
    raise SolverError("constraints appear infeasible", certificate=float(z[-1]))


def _polish_on(problem, x, duals, active, steps):
    n = problem.n
    lam = np.where(active, duals, 0.0)
    best = (kkt_residual(problem, x, lam), x, lam)
    for _ in range(steps):
        _, g0, h0 = problem.objective(x)
        f, jac, hess = problem.constraints(x)
        A = jac[active]
        la = lam[active]
        H = h0 + np.einsum("i,ijk->jk", lam, hess)
        k = A.shape[0]
        K = np.zeros((n + k, n + k))
        K[:n, :n] = H
        K[:n, n:] = A.T
        K[n:, :n] = A
        rhs = -np.concatenate([g0 + A.T @ la, f[active]])
        try:
            d = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            d = np.linalg.lstsq(K, rhs, rcond=None)[0]
        new_lam = lam.copy()
        new_lam[active] = la + d[n:]
        if not np.all(np.isfinite(d)):
            break
        # degenerate constraints carry zero multipliers; round-off may flip their sign
        floor = -1e-12 * (1.0 + np.abs(new_lam).max())
        wrong = active & (new_lam < floor)
        if wrong.any():
            # the constraint wants to separate: release it and redo the step
            active = active & ~wrong
            lam = np.where(active, lam, 0.0)
            continue
        x = x + d[:n]
        lam = np.maximum(new_lam, 0.0)
        res = kkt_residual(problem, x, lam)
        if not np.isfinite(res):
            break
        if res < best[0]:
            best = (res, x, lam)
    return best


def _polish(problem, x, duals, gaps=(1e-5, 1e-3, 1e-1), steps=8):
    """Newton on the KKT equations of the (near-)active set.

    Barrier central points carry complementarity 1/t and gradient round-off of
    order eps / min|f|, so the last digits are recovered by treating nearly
    active constraints as equalities.  Constraints active with a zero
    multiplier approach the boundary only like t^{-1/2}, hence the wider gaps.
    """
    f, _, _ = problem.constraints(x)
    scale = 1.0 + np.abs(f).max()
    best = (kkt_residual(problem, x, duals), x, duals)
    seen = set()
    for gap in gaps:
        active = -f <= gap * scale
        key = active.tobytes()
        if key in seen:
            continue
        seen.add(key)
        cand = _polish_on(problem, x, duals, active, steps)
        if cand[0] < best[0]:
            best = cand
    return best


def solve_convex_subproblem(problem, x0, tol: float = 1e-9, max_newton: int = 200,
                            max_outer: int = 60) -> BarrierResult:
    """Minimize problem.objective subject to problem.constraints <= 0.

    Barrier weight starts at t = m (duality-gap bound 1) and grows by MU until
    m / t < tol.  The start is repaired with a phase-I solve when it is not
    strictly feasible.  The last central point is refined on its active set
    when needed; SolverError is raised if the KKT residual still exceeds
    ``tol``.
    """
    x = find_strictly_feasible(problem, np.asarray(x0, dtype=float))
    m = problem.constraints(x)[0].size
    t = float(m)
    total = 0
    outer = 0
    for outer in range(1, max_outer + 1):
        x, steps = _center(problem, x, t, max_newton)
        total += steps
        if m / t < tol:
            break
        t *= MU
    f, _, _ = problem.constraints(x)
    duals = -1.0 / (t * f)
    res = kkt_residual(problem, x, duals)
    if not res <= tol:
        pres, px, pduals = _polish(problem, x, duals)
        if pres < res:
            res, x, duals = pres, px, pduals
    if not res <= tol:
        raise SolverError("barrier method did not reach the KKT tolerance",
                          kkt_residual=res, tol=tol, newton_steps=total)
    return BarrierResult(x=x, objective=float(problem.objective(x)[0]), duals=duals,
                         kkt_residual=res, newton_steps=total, outer_steps=outer)
