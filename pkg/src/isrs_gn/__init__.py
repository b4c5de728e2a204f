"""Nonlinear interference and SNR of ultra-wideband WDM links with inter-channel
stimulated Raman scattering: closed-form and numerical GN-model engines, a
split-step reference solver and a mesh-network lightpath evaluator."""
from __future__ import annotations

__version__ = "0.1.0"

from .closed_form import (Channel, ClosedFormConfig, EtaBreakdown, closed_form_spectrum, coherence_epsilon,
                          eta_spm_cf, eta_total, eta_xpm_pair_cf, eta_xpm_total_cf, snr)
from .integral import (IntegralResult, LinkKernel, QuadratureConfig, QuadratureError, eta_full_integral,
                       eta_spm_integral, eta_xpm_pair_integral, inner_link_integral)
from .kernels import BACKEND as KERNEL_BACKEND
from .raman import (PowerProfile, SpectralLoad, delta_rho_db, effective_length, profile_general, profile_uniform,
                    validity_check)
from .units import FiberSpec, dbm_to_watt, table1_fiber, watt_to_dbm

__all__ = [
    "Channel", "ClosedFormConfig", "EtaBreakdown", "FiberSpec", "IntegralResult", "KERNEL_BACKEND", "LinkKernel",
    "PowerProfile", "QuadratureConfig", "QuadratureError", "SpectralLoad", "closed_form_spectrum",
    "coherence_epsilon", "dbm_to_watt", "delta_rho_db", "effective_length", "eta_full_integral", "eta_spm_cf",
    "eta_spm_integral", "eta_total", "eta_xpm_pair_cf", "eta_xpm_pair_integral", "eta_xpm_total_cf",
    "inner_link_integral", "profile_general", "profile_uniform", "snr", "table1_fiber", "validity_check",
    "watt_to_dbm",
]
