"""Unit conventions.

All library internals use natural units c = 1 with lengths in metres:
wavenumbers, angular frequencies and the film conductivity potential V are
all measured in 1/m, and "time" is c*t, also in metres.  Only the CLI and the
CSV serializers convert to laboratory seconds / Hz.
"""

import math

C_LIGHT = 2.998e8  # m/s, used for all seconds <-> metres conversions


def seconds_to_metres(t_seconds: float) -> float:
    return t_seconds * C_LIGHT


def metres_to_seconds(t_metres: float) -> float:
    return t_metres / C_LIGHT


def angular_wavenumber_to_hz(omega_per_m: float) -> float:
    """Frequency in Hz of a mode with angular wavenumber omega (1/m)."""
    return omega_per_m * C_LIGHT / (2.0 * math.pi)
