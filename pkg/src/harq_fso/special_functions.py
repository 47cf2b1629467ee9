"""Log-gamma, truncated pFq series and the Gamma-Gamma/pointing-error fade CDF.

The fade CDF is the Meijer-G expression

    F(u) = xi2 / (Gamma(a) Gamma(b)) * G^{3,1}_{2,4}[a b u | 1, xi2 + 1; xi2, a, b, 0]

for the normalized fade ``u = h / (A0 h_l)``.  It is evaluated through its
residue expansion (one pole at ``s = xi2`` plus the two pole ladders of
``Gamma(a - s)`` and ``Gamma(b - s)``), which gives three terms with leading
powers ``z**xi2``, ``z**a`` and ``z**b`` where ``z = a b u``; the latter two
carry a 2F3 factor in ``+z`` (no sign alternation, since p - m - n = -2).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import loggamma

from .errors import ConvergenceError, DomainError

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps

COLLISION_GUARD = 1e-6
COLLISION_SHIFT = 1e-5

# Above this argument the 2F3 terms peak near exp(2 sqrt(z)) and the
# three-term sum loses every significant digit; go straight to the contour.
_SERIES_Z_LIMIT = 50.0
# Largest tolerated absolute rounding error of the three-term sum.
_SERIES_ABS_ERROR = 1e-13


@dataclass(frozen=True)
class SeriesControl:
    rel_tolerance: float = 1e-12
    max_terms: int = 500

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise DomainError(f"rel_tolerance must be positive, got {self.rel_tolerance}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise DomainError(f"max_terms must be a positive integer, got {self.max_terms}")


DEFAULT_SERIES = SeriesControl()


_EULER_GAMMA = 0.5772156649015329
# zeta(k) - 1 for k = 2..27
_ZETA_MINUS_ONE = (
    0.6449340668482264, 0.2020569031595943, 0.08232323371113819, 0.03692775514336993,
    0.01734306198444914, 0.008349277381922827, 0.00407735619794434, 0.0020083928260822143,
    0.0009945751278180853, 0.0004941886041194645, 0.0002460865533080483, 0.00012271334757848915,
    6.124813505870483e-05, 3.058823630702049e-05, 1.528225940865187e-05, 7.637197637899763e-06,
    3.81729326499984e-06, 1.908212716553939e-06, 9.539620338727962e-07, 4.769329867878064e-07,
    2.38450502727733e-07, 1.1921992596531106e-07, 5.960818905125948e-08, 2.980350351465228e-08,
    1.4901554828365043e-08, 7.45071178983543e-09,
)


def _ln_gamma_two_plus(eps: float) -> float:
    # ln Gamma(2 + eps) = (1 - gamma) eps + sum_k (-1)^k (zeta(k) - 1) eps^k / k, |eps| <= 1/2
    acc = 0.0
    power = -eps
    for k, zm1 in enumerate(_ZETA_MINUS_ONE, start=2):
        power *= -eps
        acc += zm1 * power / k
    return (1.0 - _EULER_GAMMA) * eps + acc


def ln_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0.

    Power series about the zeros at x = 1 and x = 2 keep the relative error
    small where ln Gamma vanishes; math.lgamma elsewhere.
    """
    x = float(x)
    if not x > 0 or math.isinf(x):
        raise DomainError(f"ln_gamma requires a finite positive argument, got {x}")
    if 0.5 <= x < 1.5:
        eps = x - 1.0
        return _ln_gamma_two_plus(eps) - math.log1p(eps)
    if 1.5 <= x <= 2.5:
        return _ln_gamma_two_plus(x - 2.0)
    return math.lgamma(x)


def _sin_pi(x: float) -> float:
    # argument reduction keeps sin(pi x) accurate away from the origin
    r = math.fmod(x, 2.0)
    if r > 1.0:
        r -= 2.0
    elif r < -1.0:
        r += 2.0
    if r > 0.5:
        r = 1.0 - r
    elif r < -0.5:
        r = -1.0 - r
    return math.sin(math.pi * r)


def signed_ln_gamma(x: float) -> tuple[float, float]:
    """Return ``(sign, ln|Gamma(x)|)`` for any real x that is not a pole."""
    x = float(x)
    if x > 0:
        return 1.0, ln_gamma(x)
    s = _sin_pi(x)
    if s == 0.0:
        raise DomainError(f"Gamma has a pole at {x}")
    # reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x)
    return math.copysign(1.0, s), math.log(math.pi) - math.log(abs(s)) - ln_gamma(1.0 - x)


def _pfq_sum(a, b, z, ctrl):
    """Sum the pFq series; returns (value, sum of |terms|, terms used)."""
    for bj in b:
        if bj <= 0 and float(bj).is_integer():
            raise DomainError(f"lower parameter {bj} is a non-positive integer")
    term = 1.0
    total = 1.0
    abs_total = 1.0
    for k in range(int(ctrl.max_terms)):
        num = z / (k + 1.0)
        for ai in a:
            num *= ai + k
        den = 1.0
        for bj in b:
            den *= bj + k
        ratio = num / den
        nxt = term * ratio
        total += nxt
        abs_total += abs(nxt)
        if nxt == 0.0:
            return total, abs_total, k + 2
        if not math.isfinite(total):
            raise ConvergenceError("pFq series overflowed", total, nxt)
        if abs(nxt) <= ctrl.rel_tolerance * abs(total) and abs(ratio) < 1.0:
            return total, abs_total, k + 2
        term = nxt
    raise ConvergenceError(
        f"pFq series did not converge in {ctrl.max_terms} terms", total, term
    )


def hyp_pfq(a: Sequence[float], b: Sequence[float], z: float, ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """Generalized hypergeometric series pFq(a; b; z), truncated per ``ctrl``.

    Raises ConvergenceError when ``ctrl.max_terms`` terms are not enough.
    """
    value, _, _ = _pfq_sum([float(v) for v in a], [float(v) for v in b], float(z), ctrl)
    return value


def _near_integer(x: float) -> bool:
    return abs(x - round(x)) < COLLISION_GUARD


def guard_parameters(alpha: float, beta: float, xi2: float) -> tuple[float, float, float]:
    """Shift colliding parameters off the singular set of the residue expansion.

    Singular when alpha - beta, alpha - xi2 or beta - xi2 is an integer (poles
    of the two ladders or of the pointing pole coincide).  The offending
    parameter is moved by +COLLISION_SHIFT and a warning is logged.
    """
    # a shift can land another difference on an integer; a few rounds settle it
    for _ in range(8):
        if _near_integer(alpha - beta):
            log.warning("alpha=%r and beta=%r collide; shifting beta by %g", alpha, beta, COLLISION_SHIFT)
            beta += COLLISION_SHIFT
            continue
        if _near_integer(xi2 - alpha) or _near_integer(xi2 - beta):
            log.warning("xi2=%r collides with alpha=%r/beta=%r; shifting xi2 by %g",
                        xi2, alpha, beta, COLLISION_SHIFT)
            xi2 += COLLISION_SHIFT
            continue
        return alpha, beta, xi2
    raise DomainError(f"parameter collision persists after guard: alpha={alpha}, beta={beta}, xi2={xi2}")


def _check_params(alpha, beta, xi2):
    for name, v in (("alpha", alpha), ("beta", beta), ("xi2", xi2)):
        if not (v > 0 and math.isfinite(v)):
            raise DomainError(f"{name} must be finite and positive, got {v}")


def _ladder_term(lead, other, xi2, z, ctrl):
    """Residue sum over the poles of Gamma(lead - s); returns (value, abs bound)."""
    # Gamma(other - lead) / ((1 - lead/xi2) Gamma(lead + 1) Gamma(other)) * z**lead * 2F3(...)
    sg, lg = signed_ln_gamma(other - lead)
    damp = 1.0 - lead / xi2
    ln_coef = lg - math.log(abs(damp)) - ln_gamma(lead + 1.0) - ln_gamma(other) + lead * math.log(z)
    sign = sg * math.copysign(1.0, damp)
    series, abs_series, _ = _pfq_sum(
        [lead, lead - xi2], [1.0 + lead - xi2, 1.0 + lead - other, 1.0 + lead], z, ctrl
    )
    scale = math.exp(ln_coef)
    return sign * scale * series, scale * abs_series


def _pointing_term(alpha, beta, xi2, z):
    sa, la = signed_ln_gamma(alpha - xi2)
    sb, lb = signed_ln_gamma(beta - xi2)
    ln_mag = la + lb - ln_gamma(alpha) - ln_gamma(beta) + xi2 * math.log(z)
    return sa * sb * math.exp(ln_mag)


def fade_cdf_series(z: float, alpha: float, beta: float, xi2: float,
                    ctrl: SeriesControl = DEFAULT_SERIES) -> tuple[float, float]:
    """Three-term expansion at Meijer-G argument ``z``; returns (value, rounding error bound).

    Parameters must already be collision-free (see ``guard_parameters``).
    """
    t_xi = _pointing_term(alpha, beta, xi2, z)
    t_a, abs_a = _ladder_term(alpha, beta, xi2, z, ctrl)
    t_b, abs_b = _ladder_term(beta, alpha, xi2, z, ctrl)
    value = t_xi + t_a + t_b
    err = 64.0 * _EPS * (abs(t_xi) + abs_a + abs_b)
    return value, err


def fade_cdf_contour(z: float, alpha: float, beta: float, xi2: float) -> float:
    """Meijer-G CDF by numerical integration of its Mellin-Barnes integral.

    The integrand Gamma(a-s) Gamma(b-s) z**s / (s (xi2 - s)) is integrated along
    Re(s) = min(a, b, xi2)/2, which separates the pole at s = 0 from the
    right-hand pole ladders.  Accurate to ~1e-14 absolute for any z > 0;
    used where the series cancels catastrophically.
    """
    c = 0.5 * min(alpha, beta, xi2)
    lz = math.log(z)
    ln_pre = math.log(xi2) - ln_gamma(alpha) - ln_gamma(beta)

    def integrand(t):
        s = complex(c, t)
        val = loggamma(alpha - s) + loggamma(beta - s) + s * lz - np.log(s) - np.log(xi2 - s) + ln_pre
        return math.exp(val.real) * math.cos(val.imag)

    # full_output silences quad's roundoff warning near the 1e-15 floor
    value = quad(integrand, 0.0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=500, full_output=1)[0]
    return value / math.pi


def gg_pe_fade_cdf(u: float, alpha: float, beta: float, xi2: float,
                   ctrl: SeriesControl = DEFAULT_SERIES) -> float:
    """CDF of the normalized composite fade u = h / (A0 h_l).

    Gamma-Gamma turbulence (unit mean, shapes ``alpha``, ``beta``) times a
    pointing loss with ``Pr{h_g/A0 <= x} = x**xi2``.  Uses the residue series
    and falls back to the contour integral once the series' estimated
    rounding error exceeds 1e-13.  Result is clamped to [0, 1].
    """
    u = float(u)
    if not u >= 0 or math.isnan(u):
        raise DomainError(f"u must be non-negative, got {u}")
    _check_params(alpha, beta, xi2)
    if u == 0.0:
        return 0.0
    if math.isinf(u):
        return 1.0
    alpha, beta, xi2 = guard_parameters(float(alpha), float(beta), float(xi2))
    z = alpha * beta * u
    value = None
    if z <= _SERIES_Z_LIMIT:
        try:
            value, err = fade_cdf_series(z, alpha, beta, xi2, ctrl)
            if err > _SERIES_ABS_ERROR:
                value = None
        except (ConvergenceError, OverflowError):
            value = None
    if value is None:
        value = fade_cdf_contour(z, alpha, beta, xi2)
    return min(1.0, max(0.0, value))


def leading_outage_term(alpha: float, beta: float, xi2: float) -> tuple[float, float]:
    """Dominant small-z behaviour of the fade CDF: returns (coefficient, exponent).

    F(u) ~ coefficient * (alpha beta u)**exponent as u -> 0, with exponent
    min(xi2, alpha, beta).
    """
    _check_params(alpha, beta, xi2)
    alpha, beta, xi2 = guard_parameters(float(alpha), float(beta), float(xi2))
    q = min(alpha, beta)
    if xi2 < q:
        sa, la = signed_ln_gamma(alpha - xi2)
        sb, lb = signed_ln_gamma(beta - xi2)
        return sa * sb * math.exp(la + lb - ln_gamma(alpha) - ln_gamma(beta)), xi2
    big = alpha * beta / q
    ln_c = ln_gamma(abs(beta - alpha)) - math.log(1.0 - q / xi2) - ln_gamma(q + 1.0) - ln_gamma(big)
    return math.exp(ln_c), q
