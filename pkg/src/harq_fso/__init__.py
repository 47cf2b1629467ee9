"""HARQ-CC / HARQ-IR over Gamma-Gamma FSO links with pointing errors."""

from .channel import (
    MODERATE_TURBULENCE, STRONG_TURBULENCE, ChannelModel, LinkParams, PointingParams, TurbulenceParams,
    average_snr, instantaneous_snr, path_loss_gain, sample_fade, sample_fades, table1_channel,
)
from .errors import ConfigError, ConvergenceError, DomainError, FeasibilityError, HarqFsoError, SolverError
from .harq_analysis import (
    DEFAULT_C, AsymptoticCoefficients, HarqConfig, OutageMethod, OutageResult, PowerAllocation, Scheme,
    asymptotic_coefficients, average_power, mutual_info_cc, mutual_info_ir, outage, outage_cc_asymptotic,
    outage_cc_exact, outage_ir_asymptotic, outage_ir_exact, per_round_outage, throughput,
)
from .monte_carlo import SimReport, SimSettings, gg_pe_cdf_quadrature, simulate_harq
from .power_optimizer import (
    OptConfig, OptResult, ScaSettings, build_cc_subproblem, optimize, optimize_cc, optimize_ir, optimize_throughput,
)
from .special_functions import SeriesControl, gg_pe_fade_cdf, hyp_pfq, ln_gamma

__version__ = "0.1.0"
