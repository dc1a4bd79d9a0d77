"""condcav: photon creation in a cavity with a laser-modulated conducting film.

Natural units (c = 1, lengths in metres) everywhere except the CLI boundary.
"""

from .constants import C_LIGHT
from .coupling import (
    CouplingTable,
    QuadratureError,
    ResonanceHit,
    ResonanceReport,
    coupling_coeffs,
    inner_product,
    scan_resonances,
)
from .direct import (
    FastState,
    PhiModeReport,
    StepSizeError,
    extract_slow,
    integrate_full,
    phi_mode_check,
    wronskian_invariant,
)
from .drive import (
    DriveProfile,
    ResolutionError,
    conductivity_at,
    fourier_numeric,
    fourier_ramp,
    linear_ramp,
    profile_from_csv,
    raised_cosine,
    sampled_profile,
)
from .msa import (
    AmplitudeState,
    PhotonRecord,
    ResonanceConditionError,
    detuned_parametric,
    fit_exponential_rate,
    msa_general,
    msa_parametric,
    photon_number,
    rate_ratio,
)
from .spectrum import (
    CavityConfig,
    ConvergenceError,
    ModeIndex,
    ModeSpectrum,
    PerturbativeValidityWarning,
    PhiMode,
    PsiMode,
    build_spectrum,
    epsilon_for_mode,
    solve_branch,
    solve_k,
)

__version__ = "0.1.0"

__all__ = [
    "C_LIGHT",
    "CavityConfig",
    "ModeIndex",
    "ModeSpectrum",
    "PsiMode",
    "PhiMode",
    "ConvergenceError",
    "PerturbativeValidityWarning",
    "solve_k",
    "solve_branch",
    "epsilon_for_mode",
    "build_spectrum",
    "DriveProfile",
    "ResolutionError",
    "fourier_ramp",
    "fourier_numeric",
    "linear_ramp",
    "raised_cosine",
    "sampled_profile",
    "profile_from_csv",
    "conductivity_at",
    "CouplingTable",
    "QuadratureError",
    "ResonanceHit",
    "ResonanceReport",
    "inner_product",
    "coupling_coeffs",
    "scan_resonances",
    "AmplitudeState",
    "PhotonRecord",
    "ResonanceConditionError",
    "msa_parametric",
    "msa_general",
    "detuned_parametric",
    "photon_number",
    "fit_exponential_rate",
    "rate_ratio",
    "FastState",
    "StepSizeError",
    "integrate_full",
    "extract_slow",
    "wronskian_invariant",
    "phi_mode_check",
    "PhiModeReport",
]
