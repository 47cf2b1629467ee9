"""Per-round power allocation minimizing the high-SNR outage after J rounds.

Both schemes minimize the asymptotic outage of the last round subject to

    P_1 + sum_{j>=2} P_j * Pout_{j-1}(P_1..P_{j-1}) <= P0,   0 <= P_j <= Pmax,

with the asymptotic outages inside the budget.

CC works in squared powers Pt_j = P_j^2 with auxiliary t_j bounding each
budget term; the concave sqrt(Pt_1) and log(Pt_j) pieces are replaced by
tangents (which lie above them, so every surrogate-feasible point is
feasible) and the convex surrogate is re-solved until the iterates settle.

IR becomes convex in u_j = ln P_j: the objective is linear and the budget a
sum of exponentials of affine forms.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .barrier import solve_convex_subproblem
from .channel import ChannelModel, table1_channel
from .errors import DomainError, FeasibilityError, SolverError
from .harq_analysis import (
    DEFAULT_C, HarqConfig, PowerAllocation, Scheme, asymptotic_coefficients, per_round_outage, throughput,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptConfig:
    P0: float = 0.2
    Pmax: float = 0.35
    J: int = 4
    R: float = 2.0
    scheme: Scheme = Scheme.CC
    channel: ChannelModel = field(default_factory=lambda: table1_channel().with_average_snr_db(60.0))
    c: float = DEFAULT_C
    large_xi2_snr: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.P0 > 0 and self.Pmax > 0):
            raise DomainError(f"P0 and Pmax must be positive, got {self.P0}, {self.Pmax}")
        if int(self.J) != self.J or self.J < 1:
            raise DomainError(f"J must be a positive integer, got {self.J}")

    def harq(self) -> HarqConfig:
        return HarqConfig(scheme=self.scheme, J=self.J, R=self.R, c=self.c, large_xi2_snr=self.large_xi2_snr)

    @property
    def budget_unreachable(self) -> bool:
        return self.P0 > self.J * self.Pmax


@dataclass(frozen=True)
class ScaSettings:
    epsilon: float = 1e-5
    delta_max: int = 50
    inner_tolerance: float = 1e-9

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("epsilon must be positive")
        if self.delta_max < 1:
            raise DomainError("delta_max must be at least 1")


@dataclass
class OptResult:
    P_star: PowerAllocation
    objective: float
    outer_iterations: int
    converged: bool
    constraint_slack: float
    trajectory: list = field(default_factory=list)


# -- asymptotic budget ---------------------------------------------------------

def cc_budget(P, psi: float, k: float) -> float:
    """P_1 + sum_{j>=2} P_j psi / (sum_{i<j} P_i^2)^{k/2}."""
    p = np.asarray(P, dtype=float)
    energy = np.cumsum(p * p)[:-1]
    with np.errstate(divide="ignore"):
        return float(p[0] + np.sum(p[1:] * psi * energy ** (-0.5 * k)))


def ir_budget(P, theta: Sequence[float], k: float) -> float:
    """P_1 + sum_{j>=2} P_j theta_{j-1} / (prod_{i<j} P_i)^{k/(j-1)}."""
    p = np.asarray(P, dtype=float)
    total = p[0]
    with np.errstate(divide="ignore"):
        ln_prod = np.cumsum(np.log(p))
    for j in range(2, p.size + 1):
        total += p[j - 1] * theta[j - 2] * math.exp(-k * ln_prod[j - 2] / (j - 1))
    return float(total)


def budget(P, cfg: OptConfig) -> float:
    """Asymptotic average power of allocation P under ``cfg``."""
    co = asymptotic_coefficients(cfg.harq(), cfg.channel, cfg.J)
    if cfg.scheme is Scheme.CC:
        return cc_budget(P, co.psi_R, co.k)
    return ir_budget(P, co.theta_Rj, co.k)


def objective_value(P, cfg: OptConfig) -> float:
    """Unclamped asymptotic outage after len(P) rounds."""
    p = np.asarray(P, dtype=float)
    co = asymptotic_coefficients(cfg.harq(), cfg.channel, p.size)
    if cfg.scheme is Scheme.CC:
        return co.psi_R * float(np.sum(p * p)) ** (-0.5 * co.k)
    with np.errstate(divide="ignore"):
        return co.theta_Rj[p.size - 1] * math.exp(-co.k * float(np.sum(np.log(p))) / p.size)


def equal_split(cfg: OptConfig) -> np.ndarray:
    return np.full(cfg.J, min(cfg.P0 / cfg.J, cfg.Pmax))


def _strictly_feasible(P, cfg, margin):
    return np.all(P > 0) and np.all(P < cfg.Pmax) and budget(P, cfg) < cfg.P0 * (1.0 - margin)


def initial_allocation(cfg: OptConfig, start=None, margin: float = 1e-3) -> np.ndarray:
    """Strictly feasible starting powers.

    Tries the given start (default: equal split), then uniform down-scaling,
    then geometric shrinking of rounds 2..J.  Uniform scaling alone fails
    whenever k > 1, because every budget term then grows as the powers shrink.
    """
    base = equal_split(cfg) if start is None else np.asarray(start, dtype=float).copy()
    if base.size != cfg.J:
        raise DomainError(f"initial allocation has {base.size} rounds, expected {cfg.J}")
    base = np.clip(base, 0.0, cfg.Pmax * (1.0 - 1e-9))
    if base[0] <= 0:
        base[0] = min(cfg.P0, cfg.Pmax) / cfg.J
    base[base <= 0] = 1e-6 * base[0]
    for n in range(40):
        trial = base * 0.5**n
        if _strictly_feasible(trial, cfg, margin):
            return trial
    # exponents chosen so every budget term vanishes as lam -> 0
    k = asymptotic_coefficients(cfg.harq(), cfg.channel, cfg.J).k
    expo = np.zeros(cfg.J)
    for j in range(1, cfg.J):
        expo[j] = 1.0 + k * expo[1:j].sum() / j
    head = base.copy()
    head[0] = min(base[0], 0.5 * cfg.P0)
    for n in range(1, 200):
        lam = 0.5**n
        trial = head * lam**expo
        if np.all(trial[1:] > 1e-300) and _strictly_feasible(trial, cfg, margin):
            return trial
    raise FeasibilityError("could not restore a strictly feasible starting allocation",
                           P0=cfg.P0, Pmax=cfg.Pmax, start=base.tolist())


def _trivial_result(cfg: OptConfig):
    if cfg.J == 1:
        p = np.array([min(cfg.P0, cfg.Pmax)])
    elif budget(np.full(cfg.J, cfg.Pmax), cfg) <= cfg.P0:
        # full peak power in every round already fits the budget
        p = np.full(cfg.J, cfg.Pmax)
    else:
        return None
    obj = objective_value(p, cfg)
    slack = cfg.P0 - budget(p, cfg)
    return OptResult(PowerAllocation(tuple(p), cfg.Pmax), obj, 0, True, slack, [obj])


# -- HARQ-CC -------------------------------------------------------------------

# rounds whose squared power falls below this fraction of Pmax^2 are frozen at zero
FREEZE_FRACTION = 1e-9


def sqrt_surrogate(x, x0):
    """Tangent of sqrt at x0 (an upper bound of sqrt)."""
    r = math.sqrt(x0)
    return r + 0.5 * (x - x0) / r


def log_surrogate(x, x0):
    """Tangent of log at x0 (an upper bound of log)."""
    return math.log(x0) + (x - x0) / x0


class CcSubproblem:
    """Convex surrogate in (Pt_1..Pt_J, t_2..t_J) around the expansion point ``point``.

    Rounds with ``free[j] == False`` are held at zero power and carry neither a
    Pt nor a t variable.  The tangent of sqrt(Pt_j) is infinitely steep at 0,
    so once SCA drives a round onto its zero bound it never leaves it.
    """

    def __init__(self, point, psi, k, P0, Pmax, free=None):
        point = np.asarray(point, dtype=float)
        self.J = point.size
        self.free = np.ones(self.J, dtype=bool) if free is None else np.asarray(free, dtype=bool).copy()
        if not self.free[0]:
            raise DomainError("round 1 cannot be frozen")
        if np.any(point[self.free] <= 0):
            raise DomainError(f"expansion point must be strictly positive, got {point}")
        self.point = np.where(self.free, point, 0.0)
        self.idx = np.flatnonzero(self.free)
        self.tidx = self.idx[self.idx >= 1]
        self.nf = self.idx.size
        self.n = self.nf + self.tidx.size
        self.psi = psi
        self.k = k
        self.P0 = P0
        self.Pmax2 = Pmax * Pmax

    def pack(self, pt, t):
        """Full-length (Pt, t_2..t_J) -> variable vector."""
        return np.concatenate([np.asarray(pt, dtype=float)[self.idx], np.asarray(t, dtype=float)[self.tidx - 1]])

    def split(self, x):
        """Variable vector -> full-length Pt (J) and t (J-1), zeros at frozen rounds."""
        pt = np.zeros(self.J)
        pt[self.idx] = x[: self.nf]
        t = np.zeros(self.J - 1)
        t[self.tidx - 1] = x[self.nf:]
        return pt, t

    def objective(self, x):
        nf = self.nf
        S = np.sum(x[:nf])
        g = np.zeros(self.n)
        H = np.zeros((self.n, self.n))
        if S <= 0:
            return np.inf, g, H
        g[:nf] = -0.5 * self.k / S
        H[:nf, :nf] = 0.5 * self.k / S**2
        return -0.5 * self.k * math.log(S), g, H

    def constraints(self, x):
        nf, n, k = self.nf, self.n, self.k
        pt = x[:nf]
        t = x[nf:]
        x0 = self.point[self.idx]
        nt = t.size
        m = 1 + nt + 2 * nf
        f = np.empty(m)
        jac = np.zeros((m, n))
        hess = np.zeros((m, n, n))
        # linearized budget
        r0 = math.sqrt(x0[0])
        f[0] = r0 + 0.5 * (pt[0] - x0[0]) / r0 + np.sum(t) - self.P0
        jac[0, 0] = 0.5 / r0
        jac[0, nf:] = 1.0
        # per-round bounds on t_j; free position a >= 1 pairs with t index a - 1
        cums = np.cumsum(pt)
        ln_psi = math.log(self.psi)
        for a in range(1, nf):
            row = a
            tj = t[a - 1]
            S = cums[a - 1]
            if tj <= 0 or S <= 0:
                f[row] = np.inf
                continue
            lin = math.log(x0[a]) + (pt[a] - x0[a]) / x0[a]
            f[row] = ln_psi + 0.5 * lin - math.log(tj) - 0.5 * k * math.log(S)
            jac[row, a] += 0.5 / x0[a]
            jac[row, nf + a - 1] = -1.0 / tj
            jac[row, :a] -= 0.5 * k / S
            hess[row, nf + a - 1, nf + a - 1] = 1.0 / tj**2
            hess[row, :a, :a] = 0.5 * k / S**2
        base = 1 + nt
        for i in range(nf):
            f[base + i] = -pt[i]
            jac[base + i, i] = -1.0
            f[base + nf + i] = pt[i] - self.Pmax2
            jac[base + nf + i, i] = 1.0
        return f, jac, hess


def build_cc_subproblem(point, cfg: OptConfig, free=None) -> CcSubproblem:
    co = asymptotic_coefficients(cfg.harq(), cfg.channel, cfg.J)
    return CcSubproblem(point, co.psi_R, co.k, cfg.P0, cfg.Pmax, free)


def _slack_t(P, psi, k, P0):
    """Auxiliary t_j sitting strictly above each budget term."""
    p = np.asarray(P, dtype=float)
    need = p[1:] * psi * np.cumsum(p * p)[:-1] ** (-0.5 * k)
    spare = P0 - p[0] - need.sum()
    return need + 0.5 * spare / need.size


def _sca_run(cfg: OptConfig, co, P, free, sca: ScaSettings) -> OptResult:
    free = np.asarray(free, dtype=bool) & (P * P > FREEZE_FRACTION * cfg.Pmax**2)
    free[0] = True
    pt = np.where(free, P * P, 0.0)
    t = np.zeros(cfg.J - 1)
    head = np.flatnonzero(free)
    if head.size > 1:
        t[head[1:] - 1] = _slack_t(pt[head] ** 0.5, co.psi_R, co.k, cfg.P0)
    trajectory = [objective_value(np.sqrt(pt), cfg)]
    converged = False
    delta = 0
    while delta < sca.delta_max:
        delta += 1
        sub = CcSubproblem(pt, co.psi_R, co.k, cfg.P0, cfg.Pmax, free)
        try:
            res = solve_convex_subproblem(sub, sub.pack(pt, t), tol=sca.inner_tolerance)
        except SolverError as exc:
            raise SolverError(f"SCA iteration {delta} failed: {exc}", iteration=delta) from exc
        new_pt, t = sub.split(res.x)
        new_pt = np.clip(new_pt, 0.0, cfg.Pmax**2)
        step = float(np.sum((new_pt - pt) ** 2))
        pt = new_pt
        trajectory.append(objective_value(np.sqrt(pt), cfg))
        if step <= sca.epsilon:
            converged = True
            break
        dead = free & (pt <= FREEZE_FRACTION * cfg.Pmax**2)
        dead[0] = False
        if dead.any():
            free &= ~dead
            pt[dead] = 0.0
            t[dead[1:]] = 0.0
    P = np.sqrt(pt)
    return OptResult(
        P_star=PowerAllocation(tuple(P), cfg.Pmax),
        objective=objective_value(P, cfg),
        outer_iterations=delta,
        converged=converged,
        constraint_slack=cfg.P0 - budget(P, cfg),
        trajectory=trajectory,
    )


def _prefix_start(cfg: OptConfig, rounds: int):
    sub = replace(cfg, J=rounds)
    P = np.zeros(cfg.J)
    P[:rounds] = initial_allocation(sub)
    free = np.zeros(cfg.J, dtype=bool)
    free[:rounds] = True
    return P, free


def optimize_cc(cfg: OptConfig, sca: ScaSettings = ScaSettings(), initial=None) -> OptResult:
    """Successive convex approximation for the CC allocation.

    SCA only finds stationary points, and rounds it drives to zero stay there.
    Without an explicit ``initial`` it is therefore started from the equal
    split over each prefix of rounds 1..J' (later rounds idle) and the best
    end point is kept; ties favour more active rounds.
    """
    cfg = replace(cfg, scheme=Scheme.CC)
    trivial = _trivial_result(cfg)
    if trivial is not None:
        return trivial
    co = asymptotic_coefficients(cfg.harq(), cfg.channel, cfg.J)
    if initial is not None:
        start = initial.as_array() if isinstance(initial, PowerAllocation) else initial
        P = initial_allocation(cfg, start)
        return _sca_run(cfg, co, P, np.ones(cfg.J, dtype=bool), sca)
    best = None
    failure = None
    for rounds in range(cfg.J, 0, -1):
        P, free = _prefix_start(cfg, rounds)
        try:
            res = _sca_run(cfg, co, P, free, sca)
        except SolverError as exc:
            log.info("SCA start with %d active rounds failed: %s", rounds, exc)
            failure = exc
            continue
        if best is None or res.objective < best.objective * (1.0 - 1e-12):
            best = res
    if best is None:
        raise failure
    return best


# -- HARQ-IR -------------------------------------------------------------------

class IrProblem:
    """Convex form of the IR allocation in u_j = ln P_j."""

    def __init__(self, theta, k, P0, Pmax, J):
        self.theta = np.asarray(theta, dtype=float)
        self.k = k
        self.P0 = P0
        self.ln_pmax = math.log(Pmax)
        self.J = J
        self.n = J
        # row j-1 holds the affine exponent of budget term j; column J is the offset
        A = np.zeros((J, J + 1))
        A[0, 0] = 1.0
        for j in range(2, J + 1):
            A[j - 1, j - 1] = 1.0
            A[j - 1, : j - 1] = -k / (j - 1)
            A[j - 1, J] = math.log(self.theta[j - 2])
        self.A = A

    def objective(self, u):
        g = np.full(self.n, -self.k / self.J)
        return float(g @ u), g, np.zeros((self.n, self.n))

    def constraints(self, u):
        J = self.J
        m = 1 + J
        f = np.empty(m)
        jac = np.zeros((m, J))
        hess = np.zeros((m, J, J))
        expo = self.A[:, :J] @ u + self.A[:, J]
        with np.errstate(over="ignore"):
            terms = np.exp(expo)
        f[0] = terms.sum() - self.P0
        jac[0] = terms @ self.A[:, :J]
        hess[0] = (self.A[:, :J].T * terms) @ self.A[:, :J]
        f[1:] = u - self.ln_pmax
        jac[1:] = np.eye(J)
        return f, jac, hess


def optimize_ir(cfg: OptConfig, tol: float = 1e-9, initial=None) -> OptResult:
    """Single convex solve for the IR allocation."""
    cfg = replace(cfg, scheme=Scheme.IR)
    trivial = _trivial_result(cfg)
    if trivial is not None:
        return trivial
    co = asymptotic_coefficients(cfg.harq(), cfg.channel, cfg.J)
    if isinstance(initial, PowerAllocation):
        initial = initial.as_array()
    P = initial_allocation(cfg, initial)
    start_obj = objective_value(P, cfg)
    prob = IrProblem(co.theta_Rj, co.k, cfg.P0, cfg.Pmax, cfg.J)
    res = solve_convex_subproblem(prob, np.log(P), tol=tol)
    P = np.minimum(np.exp(res.x), cfg.Pmax)
    obj = objective_value(P, cfg)
    return OptResult(
        P_star=PowerAllocation(tuple(P), cfg.Pmax),
        objective=obj,
        outer_iterations=1,
        converged=True,
        constraint_slack=cfg.P0 - budget(P, cfg),
        trajectory=[start_obj, obj],
    )


def optimize(cfg: OptConfig, sca: ScaSettings = ScaSettings(), initial=None) -> OptResult:
    if cfg.scheme is Scheme.CC:
        return optimize_cc(cfg, sca, initial)
    return optimize_ir(cfg, sca.inner_tolerance, initial)


# -- throughput ----------------------------------------------------------------

DEFAULT_RATE_GRID = tuple(round(0.1 * i, 10) for i in range(1, 61))


@dataclass
class ThroughputPoint:
    R: float
    omega_optimized: float
    omega_equal_split: float
    result: OptResult


@dataclass
class ThroughputResult:
    R_star: float
    result: OptResult
    omega_star: float
    points: list


def exact_throughput(P, cfg: OptConfig) -> float:
    """Throughput from the closed-form per-round outages at allocation P."""
    outs = per_round_outage(P, cfg.harq(), cfg.channel).per_round
    return throughput(cfg.R, outs)


def optimize_throughput(template: OptConfig, R_grid: Sequence[float] = DEFAULT_RATE_GRID,
                        sca: ScaSettings = ScaSettings()) -> ThroughputResult:
    """Linear search over the rate: optimize powers at each R, keep the best throughput.

    Grid points whose optimization fails are skipped with a warning; ties go to
    the smaller rate.
    """
    if len(R_grid) == 0:
        raise DomainError("empty rate grid")
    points = []
    errors = []
    for R in R_grid:
        cfg = replace(template, R=float(R))
        try:
            res = optimize(cfg, sca)
        except (SolverError, DomainError) as exc:
            log.warning("rate %g skipped: %s", R, exc)
            errors.append(exc)
            continue
        points.append(ThroughputPoint(
            R=float(R),
            omega_optimized=exact_throughput(res.P_star.as_array(), cfg),
            omega_equal_split=exact_throughput(equal_split(cfg), cfg),
            result=res,
        ))
    if not points:
        raise SolverError("every rate in the grid failed", failures=len(errors))
    best = points[0]
    for pt in points[1:]:
        if pt.omega_optimized > best.omega_optimized:
            best = pt
    return ThroughputResult(R_star=best.R, result=best.result, omega_star=best.omega_optimized, points=points)
