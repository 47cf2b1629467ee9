"""FSO channel: Gamma-Gamma turbulence, pointing loss, path loss and SNR.

The composite fade is h = h_l * h_s * h_g with

* h_l  deterministic path-loss gain,
* h_s  unit-mean Gamma-Gamma scintillation X * Y, X ~ Gamma(alpha, 1/alpha),
  Y ~ Gamma(beta, 1/beta),
* h_g  pointing loss with Pr{h_g <= x} = (x / A0)**xi2 on (0, A0].

One fade is drawn per packet and held over all of its HARQ rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class TurbulenceParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise DomainError(f"turbulence parameters must be positive, got alpha={self.alpha}, beta={self.beta}")


MODERATE_TURBULENCE = TurbulenceParams(alpha=2.296, beta=1.822)
STRONG_TURBULENCE = TurbulenceParams(alpha=2.064, beta=1.342)


@dataclass(frozen=True)
class PointingParams:
    """Pointing-error statistics.

    ``xi2`` is the squared ratio of equivalent beam radius to jitter standard
    deviation, ``A0`` the fraction of power collected at the detector centre.
    ``r`` and ``sigma_s`` are kept for bookkeeping only; converting them to
    ``xi2`` needs the beam waist, which is not part of this model.
    """

    xi2: float = 16.0
    A0: float = 1.0
    r: Optional[float] = None
    sigma_s: Optional[float] = None

    def __post_init__(self):
        if not self.xi2 > 0:
            raise DomainError(f"xi2 must be positive, got {self.xi2}")
        if not 0 < self.A0 <= 1:
            raise DomainError(f"A0 must lie in (0, 1], got {self.A0}")


@dataclass(frozen=True)
class LinkParams:
    h_l: float = 1.0
    sigma_n: float = 1e-7
    responsivity: float = 1.0
    d_a: Optional[float] = None
    length_km: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.h_l <= 1:
            raise DomainError(f"h_l must lie in (0, 1], got {self.h_l}")
        if not self.sigma_n > 0:
            raise DomainError(f"sigma_n must be positive, got {self.sigma_n}")
        if not self.responsivity > 0:
            raise DomainError(f"responsivity must be positive, got {self.responsivity}")

    @classmethod
    def from_attenuation(cls, d_a: float, length_km: float, sigma_n: float = 1e-7) -> "LinkParams":
        return cls(h_l=path_loss_gain(d_a, length_km), sigma_n=sigma_n, d_a=d_a, length_km=length_km)


@dataclass(frozen=True)
class ChannelModel:
    turbulence: TurbulenceParams = MODERATE_TURBULENCE
    pointing: PointingParams = field(default_factory=PointingParams)
    link: LinkParams = field(default_factory=LinkParams)

    @property
    def alpha(self) -> float:
        return self.turbulence.alpha

    @property
    def beta(self) -> float:
        return self.turbulence.beta

    @property
    def xi2(self) -> float:
        return self.pointing.xi2

    def with_average_snr_db(self, gamma_bar_db: float, large_xi2: bool = True) -> "ChannelModel":
        """Copy of the model whose noise level yields the requested average SNR.

        The sweep moves sigma_n and keeps A0 and h_l fixed.
        """
        target = 10.0 ** (gamma_bar_db / 10.0)
        gain2 = (self.link.responsivity * self.pointing.A0 * self.link.h_l) ** 2
        if not large_xi2:
            gain2 *= self.xi2 / (self.xi2 + 1.0)
        sigma_n = math.sqrt(gain2 / target)
        return replace(self, link=replace(self.link, sigma_n=sigma_n))


def table1_channel(turbulence: TurbulenceParams = MODERATE_TURBULENCE, A0: float = 1.0) -> ChannelModel:
    """Reference link: 1 km at 0.1/km attenuation, xi = 4, sigma_n = 1e-7 A."""
    return ChannelModel(
        turbulence=turbulence,
        pointing=PointingParams(xi2=16.0, A0=A0, r=0.10, sigma_s=0.30),
        link=LinkParams.from_attenuation(0.1, 1.0, sigma_n=1e-7),
    )


def path_loss_gain(d_a: float, length_km: float) -> float:
    """Beer-Lambert gain exp(-d_a * length_km)."""
    if d_a < 0 or length_km < 0:
        raise DomainError(f"attenuation and length must be non-negative, got {d_a}, {length_km}")
    return math.exp(-d_a * length_km)


def average_snr(model: ChannelModel, large_xi2: bool = False) -> float:
    """Average electrical SNR A0^2 h_l^2 xi2 / (sigma_n^2 (xi2 + 1)).

    ``large_xi2`` drops the xi2 / (xi2 + 1) factor.
    """
    num = (model.link.responsivity * model.pointing.A0 * model.link.h_l / model.link.sigma_n) ** 2
    if large_xi2:
        return num
    return num * model.xi2 / (model.xi2 + 1.0)


def instantaneous_snr(P, h, sigma_n: float, responsivity: float = 1.0):
    """R^2 P^2 h^2 / sigma_n^2; broadcasts over arrays."""
    return (responsivity * np.asarray(P, dtype=float) * np.asarray(h, dtype=float) / sigma_n) ** 2


def sample_fade_components(rng: np.random.Generator, model: ChannelModel, size) -> tuple[np.ndarray, np.ndarray]:
    """Draw (h_s, h_g): unit-mean scintillation and pointing loss."""
    a, b = model.alpha, model.beta
    x = rng.gamma(a, 1.0 / a, size)
    y = rng.gamma(b, 1.0 / b, size)
    # 1 - U lies in (0, 1], so h_g never hits zero
    v = 1.0 - rng.random(size)
    return x * y, model.pointing.A0 * v ** (1.0 / model.xi2)


def sample_fades(rng: np.random.Generator, model: ChannelModel, size) -> np.ndarray:
    """Draw ``size`` independent composite fades h = h_l h_s h_g."""
    h_s, h_g = sample_fade_components(rng, model, size)
    return model.link.h_l * h_s * h_g


def sample_fade(rng: np.random.Generator, model: ChannelModel) -> float:
    """Single composite fade; see ``sample_fades``."""
    return float(sample_fades(rng, model, 1)[0])
