"""JSON run configuration with Table I defaults.

Unknown keys are rejected so that typos surface as configuration errors
instead of silently falling back to defaults.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import ChannelModel, LinkParams, PointingParams, TurbulenceParams, path_loss_gain
from .errors import ConfigError, HarqFsoError
from .harq_analysis import DEFAULT_C, HarqConfig, Scheme
from .monte_carlo import SimSettings
from .power_optimizer import OptConfig, ScaSettings

SCHEMA_VERSION = 1

TURBULENCE_PRESETS = {
    "moderate": (2.296, 1.822),
    "strong": (2.064, 1.342),
}

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "channel": {
        "turbulence": "moderate",
        "alpha": None,
        "beta": None,
        "xi2": 16.0,
        "A0": 1.0,
        "d_a": 0.1,
        "length_km": 1.0,
        "sigma_n": 1e-7,
        "large_xi2_snr": True,
    },
    "harq": {
        "scheme": "CC",
        "J": 4,
        "R": 2.0,
        "c": DEFAULT_C,
    },
    "power": {
        "P0": 0.2,
        "Pmax": 0.35,
        "allocation": "peak",
        "P": None,
    },
    "gamma_bar_db": 60.0,
    "sweep": {"gamma_bar_db": [20.0, 80.0, 5.0]},
    "rate_grid": [0.1, 6.0, 0.1],
    "sca": {"epsilon": 1e-5, "delta_max": 50, "inner_tolerance": 1e-9},
    "simulation": {"enabled": False, "num_packets": 1_000_000, "seed": 0, "parallel_chunks": 1},
    "validate": {"psi_scale": 1.0, "u_points": 50, "fade_samples": 1_000_000},
    "output": {"format": "csv"},
}

ALLOCATIONS = ("peak", "equal", "optimized", "explicit")


def _merge(base, override, path=""):
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(where, "unknown key")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(where, "expected an object")
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = value
    return out


def _number(raw, name, *, positive=False, nonneg=False, integer=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ConfigError(name, f"expected a number, got {raw!r}")
    if not math.isfinite(raw):
        raise ConfigError(name, "must be finite")
    if integer and int(raw) != raw:
        raise ConfigError(name, f"expected an integer, got {raw!r}")
    if positive and not raw > 0:
        raise ConfigError(name, f"must be positive, got {raw!r}")
    if nonneg and raw < 0:
        raise ConfigError(name, f"must be non-negative, got {raw!r}")
    return int(raw) if integer else float(raw)


def _range(raw, name):
    if isinstance(raw, (list, tuple)) and len(raw) == 3:
        start, stop, step = (_number(v, name) for v in raw)
        if not step > 0:
            raise ConfigError(name, "step must be positive")
        if stop < start:
            raise ConfigError(name, "stop must not be below start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 10) for i in range(count))
    raise ConfigError(name, "expected [start, stop, step]")


@dataclass
class RunConfig:
    raw: dict
    channel: ChannelModel
    harq: HarqConfig
    P0: float
    Pmax: float
    allocation: str
    explicit_P: tuple | None
    gamma_bar_db: float
    sweep_db: tuple
    rate_grid: tuple
    sca: ScaSettings
    simulate: bool
    sim: SimSettings
    psi_scale: float
    u_points: int
    fade_samples: int
    large_xi2_snr: bool = True
    fmt: str = "csv"
    extra: dict = field(default_factory=dict)

    def channel_at(self, gamma_bar_db: float) -> ChannelModel:
        return self.channel.with_average_snr_db(gamma_bar_db, large_xi2=self.large_xi2_snr)

    def opt_config(self, scheme=None, R=None, gamma_bar_db=None) -> OptConfig:
        return OptConfig(
            P0=self.P0, Pmax=self.Pmax, J=self.harq.J,
            R=self.harq.R if R is None else R,
            scheme=self.harq.scheme if scheme is None else Scheme(scheme),
            channel=self.channel_at(self.gamma_bar_db if gamma_bar_db is None else gamma_bar_db),
            c=self.harq.c, large_xi2_snr=self.large_xi2_snr,
        )


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    cfg = _merge(DEFAULTS, data)
    version = cfg["schema_version"]
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"unsupported version {version!r}, expected {SCHEMA_VERSION}")

    ch = cfg["channel"]
    preset = ch["turbulence"]
    if preset is not None and preset not in TURBULENCE_PRESETS:
        raise ConfigError("channel.turbulence", f"expected one of {sorted(TURBULENCE_PRESETS)} or null")
    alpha, beta = TURBULENCE_PRESETS.get(preset, (None, None))
    if ch["alpha"] is not None:
        alpha = _number(ch["alpha"], "channel.alpha", positive=True)
    if ch["beta"] is not None:
        beta = _number(ch["beta"], "channel.beta", positive=True)
    if alpha is None:
        raise ConfigError("channel.alpha", "required when no turbulence preset is given")
    if beta is None:
        raise ConfigError("channel.beta", "required when no turbulence preset is given")
    xi2 = _number(ch["xi2"], "channel.xi2", positive=True)
    A0 = _number(ch["A0"], "channel.A0", positive=True)
    if A0 > 1:
        raise ConfigError("channel.A0", "must lie in (0, 1]")
    d_a = _number(ch["d_a"], "channel.d_a", nonneg=True)
    length = _number(ch["length_km"], "channel.length_km", nonneg=True)
    sigma_n = _number(ch["sigma_n"], "channel.sigma_n", positive=True)
    if not isinstance(ch["large_xi2_snr"], bool):
        raise ConfigError("channel.large_xi2_snr", "expected true or false")
    model = ChannelModel(
        turbulence=TurbulenceParams(alpha, beta),
        pointing=PointingParams(xi2=xi2, A0=A0),
        link=LinkParams(h_l=path_loss_gain(d_a, length), sigma_n=sigma_n, d_a=d_a, length_km=length),
    )

    hq = cfg["harq"]
    scheme = hq["scheme"]
    if scheme not in ("CC", "IR"):
        raise ConfigError("harq.scheme", "expected 'CC' or 'IR'")
    J = _number(hq["J"], "harq.J", positive=True, integer=True)
    R = _number(hq["R"], "harq.R", positive=True)
    c = _number(hq["c"], "harq.c", positive=True)
    if c > 1:
        raise ConfigError("harq.c", "must lie in (0, 1]")
    harq = HarqConfig(scheme=scheme, J=J, R=R, c=c, large_xi2_snr=ch["large_xi2_snr"])

    pw = cfg["power"]
    P0 = _number(pw["P0"], "power.P0", positive=True)
    Pmax = _number(pw["Pmax"], "power.Pmax", positive=True)
    allocation = pw["allocation"]
    if allocation not in ALLOCATIONS:
        raise ConfigError("power.allocation", f"expected one of {list(ALLOCATIONS)}")
    explicit = None
    if allocation == "explicit":
        if not isinstance(pw["P"], list) or len(pw["P"]) != J:
            raise ConfigError("power.P", f"expected a list of {J} powers")
        explicit = tuple(_number(v, "power.P", nonneg=True) for v in pw["P"])
        if max(explicit) > Pmax:
            raise ConfigError("power.P", "powers must not exceed power.Pmax")

    gbar = _number(cfg["gamma_bar_db"], "gamma_bar_db")
    sweep = cfg["sweep"]
    sweep_db = _range(sweep["gamma_bar_db"], "sweep.gamma_bar_db")
    if isinstance(cfg["rate_grid"], list) and len(cfg["rate_grid"]) != 3:
        raise ConfigError("rate_grid", "expected [start, stop, step]")
    rates = _range(cfg["rate_grid"], "rate_grid")
    if rates[0] <= 0:
        raise ConfigError("rate_grid", "rates must be positive")

    sc = cfg["sca"]
    try:
        sca = ScaSettings(
            epsilon=_number(sc["epsilon"], "sca.epsilon", positive=True),
            delta_max=_number(sc["delta_max"], "sca.delta_max", positive=True, integer=True),
            inner_tolerance=_number(sc["inner_tolerance"], "sca.inner_tolerance", positive=True),
        )
    except HarqFsoError as exc:
        raise ConfigError("sca", str(exc)) from exc

    sm = cfg["simulation"]
    if not isinstance(sm["enabled"], bool):
        raise ConfigError("simulation.enabled", "expected true or false")
    seed = _number(sm["seed"], "simulation.seed", nonneg=True, integer=True)
    if seed >= 2**64:
        raise ConfigError("simulation.seed", "must fit in 64 bits")
    sim = SimSettings(
        num_packets=_number(sm["num_packets"], "simulation.num_packets", positive=True, integer=True),
        seed=seed,
        parallel_chunks=_number(sm["parallel_chunks"], "simulation.parallel_chunks", positive=True, integer=True),
    )

    va = cfg["validate"]
    fmt = cfg["output"]["format"]
    if fmt not in ("csv", "json"):
        raise ConfigError("output.format", "expected 'csv' or 'json'")

    return RunConfig(
        raw=cfg, channel=model, harq=harq, P0=P0, Pmax=Pmax, allocation=allocation,
        explicit_P=explicit, gamma_bar_db=gbar, sweep_db=sweep_db, rate_grid=rates, sca=sca,
        simulate=sm["enabled"], sim=sim,
        psi_scale=_number(va["psi_scale"], "validate.psi_scale", positive=True),
        u_points=_number(va["u_points"], "validate.u_points", positive=True, integer=True),
        fade_samples=_number(va["fade_samples"], "validate.fade_samples", positive=True, integer=True),
        large_xi2_snr=ch["large_xi2_snr"], fmt=fmt,
    )


def load(path=None) -> RunConfig:
    """Read a JSON config file; ``None`` yields the defaults."""
    if path is None:
        return from_dict({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return from_dict(data)


def allocation_powers(run: RunConfig, J: int | None = None) -> np.ndarray:
    """Per-round powers for the analytic/MC curves (non-optimized modes)."""
    J = run.harq.J if J is None else J
    if run.allocation == "explicit":
        return np.asarray(run.explicit_P[:J], dtype=float)
    if run.allocation == "equal":
        return np.full(J, min(run.P0 / J, run.Pmax))
    return np.full(J, run.Pmax)
