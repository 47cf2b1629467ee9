"""Outage, mutual information, average power and throughput for HARQ-CC / HARQ-IR.

Every packet sees one fade h for all of its rounds, so after j rounds with
powers P_1..P_j the outage events reduce to a threshold on the normalized
fade u = h / (A0 h_l):

* CC:  u <= sqrt((2^{2R} - 1) / (c gbar sum P_i^2))
* IR:  u <= (c gbar)^{-1/2} ((2^{2R} - 1) / prod P_i^2)^{1/(2j)}

The IR threshold comes from dropping the cross terms of prod(1 + c gamma_i),
so the IR closed form upper-bounds the true IR outage.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channel import ChannelModel, average_snr
from .errors import DomainError
from .special_functions import DEFAULT_SERIES, SeriesControl, gg_pe_fade_cdf, guard_parameters, leading_outage_term, ln_gamma

log = logging.getLogger(__name__)

DEFAULT_C = 1.0 / (2.0 * math.pi * math.e)


class Scheme(str, enum.Enum):
    CC = "CC"
    IR = "IR"


class OutageMethod(str, enum.Enum):
    EXACT = "exact"
    ASYMPTOTIC = "asymptotic"
    MONTE_CARLO = "monte_carlo"


@dataclass(frozen=True)
class HarqConfig:
    """HARQ protocol settings.

    ``large_xi2_snr`` selects the average-SNR convention used inside the
    outage thresholds: True (default) takes gbar = A0^2 h_l^2 / sigma_n^2, which
    makes the closed forms exact for the simulated channel; False keeps the
    xi2 / (xi2 + 1) factor.
    """

    scheme: Scheme = Scheme.CC
    J: int = 4
    R: float = 2.0
    c: float = DEFAULT_C
    large_xi2_snr: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if int(self.J) != self.J or self.J < 1:
            raise DomainError(f"J must be a positive integer, got {self.J}")
        if not self.R > 0:
            raise DomainError(f"R must be positive, got {self.R}")
        if not 0 < self.c <= 1:
            raise DomainError(f"c must lie in (0, 1], got {self.c}")


@dataclass(frozen=True)
class PowerAllocation:
    P: tuple
    P_max: float = math.inf

    def __post_init__(self):
        P = tuple(float(p) for p in self.P)
        object.__setattr__(self, "P", P)
        if not P:
            raise DomainError("a power allocation needs at least one round")
        for p in P:
            if not 0 <= p <= self.P_max:
                raise DomainError(f"power {p} outside [0, {self.P_max}]")

    def __len__(self):
        return len(self.P)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.P, dtype=float)


@dataclass(frozen=True)
class AsymptoticCoefficients:
    """High-SNR outage constants.

    ``C`` is the dominant-ladder constant; it is only used (and only positive)
    when xi2 > q.  ``psi_R`` / ``theta_Rj`` are the numerators of the CC / IR
    asymptotic outages, ``k`` the diversity exponent min(xi2, alpha, beta).
    """

    q: float
    C: float
    V_R: float
    U_Rj: tuple
    psi_R: float
    theta_Rj: tuple
    k: float
    pointing_limited: bool


@dataclass(frozen=True)
class OutageResult:
    per_round: tuple
    method: OutageMethod
    scheme: Scheme = Scheme.CC
    stderr: tuple = field(default=())


def _powers(P) -> np.ndarray:
    arr = P.as_array() if isinstance(P, PowerAllocation) else np.asarray(P, dtype=float).ravel()
    if arr.size == 0:
        raise DomainError("empty power vector")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise DomainError(f"powers must be finite and non-negative, got {arr}")
    return arr


def rate_threshold(R: float) -> float:
    """2^{2R} - 1."""
    return math.expm1(2.0 * R * math.log(2.0))


def gamma_bar(cfg: HarqConfig, model: ChannelModel) -> float:
    return average_snr(model, large_xi2=cfg.large_xi2_snr)


def mutual_info_cc(gammas, c: float = DEFAULT_C):
    """Accumulated CC mutual information (1/2j) log2(1 + c sum gamma_i)."""
    g = np.asarray(gammas, dtype=float)
    j = g.shape[-1]
    out = np.log2(1.0 + c * g.sum(axis=-1)) / (2.0 * j)
    return float(out) if out.ndim == 0 else out


def mutual_info_ir(gammas, c: float = DEFAULT_C):
    """Accumulated IR mutual information (1/2j) sum log2(1 + c gamma_i)."""
    g = np.asarray(gammas, dtype=float)
    j = g.shape[-1]
    out = np.log2(1.0 + c * g).sum(axis=-1) / (2.0 * j)
    return float(out) if out.ndim == 0 else out


def cc_fade_threshold(P, cfg: HarqConfig, model: ChannelModel) -> float:
    p = _powers(P)
    energy = float(np.sum(p * p))
    if energy == 0.0:
        return math.inf
    return math.sqrt(rate_threshold(cfg.R) / (cfg.c * gamma_bar(cfg, model) * energy))


def ir_fade_threshold(P, cfg: HarqConfig, model: ChannelModel) -> float:
    p = _powers(P)
    if np.any(p == 0.0):
        return math.inf
    j = p.size
    ln_u = (math.log(rate_threshold(cfg.R)) - 2.0 * float(np.sum(np.log(p)))) / (2.0 * j)
    ln_u -= 0.5 * math.log(cfg.c * gamma_bar(cfg, model))
    return math.exp(ln_u)


def _fade_cdf(u, model, ctrl):
    if math.isinf(u):
        return 1.0
    return gg_pe_fade_cdf(u, model.alpha, model.beta, model.xi2, ctrl)


def outage_cc_exact(P, cfg: HarqConfig, model: ChannelModel, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """Closed-form CC outage after len(P) rounds."""
    u = cc_fade_threshold(P, cfg, model)
    if math.isinf(u):
        log.warning("all-zero powers: CC outage is certain")
    return _fade_cdf(u, model, ctrl)


def outage_ir_exact(P, cfg: HarqConfig, model: ChannelModel, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """Closed-form (upper-bounding) IR outage after len(P) rounds."""
    u = ir_fade_threshold(P, cfg, model)
    if math.isinf(u):
        log.warning("a zero power makes the IR product threshold diverge: outage is certain")
    return _fade_cdf(u, model, ctrl)


def asymptotic_coefficients(cfg: HarqConfig, model: ChannelModel, J: int | None = None) -> AsymptoticCoefficients:
    J = cfg.J if J is None else int(J)
    alpha, beta, xi2 = guard_parameters(model.alpha, model.beta, model.xi2)
    q = min(alpha, beta)
    lead, k = leading_outage_term(alpha, beta, xi2)
    damp = 1.0 - q / xi2
    C = math.copysign(1.0, damp) * math.exp(
        ln_gamma(abs(beta - alpha)) - math.log(abs(damp)) - ln_gamma(q + 1.0) - ln_gamma(max(alpha, beta))
    )
    ln_scale = math.log(alpha * alpha * beta * beta / (cfg.c * gamma_bar(cfg, model)))
    ln_thr = math.log(rate_threshold(cfg.R))
    ln_V = ln_scale + ln_thr
    psi = lead * math.exp(0.5 * k * ln_V)
    ln_U = [j * ln_scale + ln_thr for j in range(1, J + 1)]
    U = tuple(math.exp(v) for v in ln_U)
    theta = tuple(lead * math.exp(k * v / (2.0 * j)) for j, v in enumerate(ln_U, start=1))
    return AsymptoticCoefficients(
        q=q, C=C, V_R=math.exp(ln_V), U_Rj=U, psi_R=psi, theta_Rj=theta, k=k,
        pointing_limited=xi2 < q,
    )


def _clamp(x, clamp):
    return min(1.0, max(0.0, x)) if clamp else x


def outage_cc_asymptotic(P, cfg: HarqConfig, model: ChannelModel, *, clamp: bool = True,
                         coeffs: AsymptoticCoefficients | None = None) -> float:
    """High-SNR CC outage psi_R / (sum P_i^2)^{k/2}; ``clamp=False`` returns the raw value."""
    p = _powers(P)
    co = coeffs or asymptotic_coefficients(cfg, model, p.size)
    energy = float(np.sum(p * p))
    if energy == 0.0:
        return 1.0 if clamp else math.inf
    return _clamp(co.psi_R * energy ** (-0.5 * co.k), clamp)


def outage_ir_asymptotic(P, cfg: HarqConfig, model: ChannelModel, *, clamp: bool = True,
                         coeffs: AsymptoticCoefficients | None = None) -> float:
    """High-SNR IR outage theta_{R,j} / (prod P_i)^{k/j}."""
    p = _powers(P)
    j = p.size
    co = coeffs
    if co is None or len(co.theta_Rj) < j:
        co = asymptotic_coefficients(cfg, model, j)
    if np.any(p == 0.0):
        return 1.0 if clamp else math.inf
    ln_val = math.log(co.theta_Rj[j - 1]) - co.k * float(np.sum(np.log(p))) / j
    return _clamp(math.exp(ln_val), clamp)


def outage(P, cfg: HarqConfig, model: ChannelModel, method=OutageMethod.EXACT, **kw) -> float:
    """Dispatch on ``cfg.scheme`` and ``method`` (exact or asymptotic)."""
    method = OutageMethod(method)
    if method is OutageMethod.EXACT:
        fn = outage_cc_exact if cfg.scheme is Scheme.CC else outage_ir_exact
    elif method is OutageMethod.ASYMPTOTIC:
        fn = outage_cc_asymptotic if cfg.scheme is Scheme.CC else outage_ir_asymptotic
    else:
        raise DomainError("Monte Carlo outage lives in harq_fso.monte_carlo")
    return fn(P, cfg, model, **kw)


def per_round_outage(P, cfg: HarqConfig, model: ChannelModel, method=OutageMethod.EXACT, **kw) -> OutageResult:
    """Outage after each round 1..len(P)."""
    p = _powers(P)
    values = tuple(outage(p[:j], cfg, model, method, **kw) for j in range(1, p.size + 1))
    return OutageResult(per_round=values, method=OutageMethod(method), scheme=cfg.scheme)


def average_power(P, outage_prefix: Sequence[float]) -> float:
    """P_1 + sum_{j>=2} P_j Pout_{j-1}."""
    p = _powers(P)
    out = np.asarray(outage_prefix, dtype=float).ravel()
    if out.size < p.size - 1:
        raise DomainError(f"need {p.size - 1} outage values, got {out.size}")
    return float(p[0] + np.dot(p[1:], out[: p.size - 1]))


def throughput(R: float, outages: Sequence[float]) -> float:
    """Delivered bits per channel use R (1 - Pout_J) / (1 + sum_{j<J} Pout_j)."""
    out = np.asarray(outages, dtype=float).ravel()
    if out.size == 0:
        raise DomainError("need at least one outage value")
    if np.any((out < 0) | (out > 1)):
        raise DomainError(f"outages must lie in [0, 1], got {out}")
    return float(R * (1.0 - out[-1]) / (1.0 + out[:-1].sum()))
