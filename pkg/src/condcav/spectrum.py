"""Mode spectrum of a rectangular cavity split by a thin conducting film.

A massless scalar field lives in a perfectly conducting box of dimensions
L_x x L_y x L_z.  An infinitesimally thin film at the midplane x = L_x/2 is
modelled by a delta potential of strength V >= 0 (units 1/m, natural units
c = 1).  The field is continuous at the film while its x-derivative jumps by
-V times the field value, which splits the eigenmodes into two families:

* ``phi`` family, sin(2*pi*m_x*x/L_x) longitudinally: these have a node at
  the film, never feel it, and their frequencies

      w^2 = pi^2 [ (2 m_x/L_x)^2 + (m_y/L_y)^2 + (m_z/L_z)^2 ]

  are independent of V.

* ``psi`` family, sin(k x) longitudinally (mirrored about the midplane),
  with k the m-th positive root of the transcendental condition

      2 k cot(k L_x / 2) = -V.

A note on the eigenvalue condition: the "inverse tangent" sometimes written
for this relation is the *reciprocal* of the tangent (the cotangent), not the
arctangent.  Only the cotangent reading reproduces both physical limits,

    V -> 0     (transparent film)    k -> (2m-1) pi / L_x   odd box modes,
    V -> inf   (perfect conductor)   k -> 2m pi / L_x       half-cavity modes,

the second limit being degenerate with the phi family.  The arctangent
reading satisfies neither limit and is rejected here.

Root m lives in the bracket ((2m-1) pi/L_x, 2m pi/L_x] and moves monotonically
to the right as V grows.  Linearising the condition around (V_0, k_m^0) for a
conductivity swing up to V_max gives the dimensionless modulation amplitude

    epsilon_m = (V_max - V_0) / [ L_x (k_m^0)^2 + V_0 (1 + V_0 L_x / 4) ],

valid while V_0 L_x >> V_max / V_0 > 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "CavityConfig",
    "ModeIndex",
    "PsiMode",
    "PhiMode",
    "ModeSpectrum",
    "BranchRoot",
    "ConvergenceError",
    "PerturbativeValidityWarning",
    "solve_k",
    "solve_branch",
    "epsilon_for_mode",
    "build_spectrum",
]

REL_TOL = 1e-12        # relative tolerance on k
RESIDUAL_TOL = 1e-8    # relative residual of the eigenvalue condition
ENDPOINT_CLAMP = 1e-13  # clamp roots this close (relative) to the branch end


class ConvergenceError(RuntimeError):
    """Root refinement failed; carries the last bracket and residual."""

    def __init__(self, message, bracket=None, residual=None):
        super().__init__(message)
        self.bracket = bracket
        self.residual = residual


class PerturbativeValidityWarning(UserWarning):
    """V_0*L_x is not large against V_max/V_0; linearised drive is suspect."""


@dataclass(frozen=True)
class CavityConfig:
    """Cavity geometry (metres) and film conductivity range (1/m)."""

    L_x: float
    L_y: float
    L_z: float
    V_0: float
    V_max: float

    def __post_init__(self):
        for name in ("L_x", "L_y", "L_z"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.V_0 <= self.V_max:
            raise ValueError(
                f"need 0 < V_0 <= V_max, got V_0={self.V_0}, V_max={self.V_max}"
            )

    @property
    def validity_ratio(self) -> float:
        """(V_0 L_x) / (V_max / V_0); the linearised spectrum wants this >> 1."""
        return self.V_0 * self.L_x / (self.V_max / self.V_0)

    def check_perturbative(self) -> bool:
        """True when V_0*L_x > V_max/V_0; warns otherwise."""
        ok = self.validity_ratio > 1.0
        if not ok:
            warnings.warn(
                "conductivity swing too large for the linearised spectrum: "
                f"V_0*L_x = {self.V_0 * self.L_x:.3g} <= "
                f"V_max/V_0 = {self.V_max / self.V_0:.3g}",
                PerturbativeValidityWarning,
                stacklevel=2,
            )
        return ok


@dataclass(frozen=True, order=True)
class ModeIndex:
    """Mode labels: branch index along x, half-wave counts along y, z."""

    m_x: int
    m_y: int
    m_z: int

    def __post_init__(self):
        if min(self.m_x, self.m_y, self.m_z) < 1:
            raise ValueError(f"mode indices must be >= 1, got {self}")

    def as_tuple(self):
        return (self.m_x, self.m_y, self.m_z)


class BranchRoot(NamedTuple):
    k: float
    residual: float
    iterations: int
    clamped: bool


def _branch_bracket(L_x: float, m: int):
    """theta = k*L_x/2 bracket for branch m: ((m-1/2)pi, m*pi]."""
    return (m - 0.5) * math.pi, m * math.pi


def _eigencondition_scaled(theta: float, V: float, L_x: float) -> float:
    """sin-scaled eigenvalue condition, regular across the whole branch.

    Multiplying 2k cot(theta) + V by sin(theta) (k = 2 theta/L_x) removes the
    pole at theta = m*pi without adding roots inside the open branch.
    """
    return (4.0 * theta / L_x) * math.cos(theta) + V * math.sin(theta)


def _eigencondition_scaled_deriv(theta: float, V: float, L_x: float) -> float:
    return (4.0 / L_x) * (math.cos(theta) - theta * math.sin(theta)) + V * math.cos(theta)


def solve_branch(
    V: float,
    L_x: float,
    m: int,
    rel_tol: float = REL_TOL,
    residual_tol: float = RESIDUAL_TOL,
    max_iter: int = 200,
) -> BranchRoot:
    """Root of 2k cot(k L_x/2) = -V on branch m, with solve diagnostics.

    Bracketed bisection on the sin-scaled condition, polished with safeguarded
    Newton steps.  The bracket is known analytically per branch so bisection
    cannot escape.  Roots closer than ENDPOINT_CLAMP (relative) to the
    perfect-conductor end 2m*pi/L_x are clamped there and flagged; the raw
    residual is meaningless that close to the cotangent pole.
    """
    if V < 0.0:
        raise ValueError(f"conductivity potential must be >= 0, got V={V}")
    if L_x <= 0.0:
        raise ValueError(f"L_x must be positive, got {L_x}")
    if m < 1:
        raise ValueError(f"branch index must be >= 1, got {m}")

    th_lo, th_hi = _branch_bracket(L_x, m)
    if V == 0.0:
        # exact transparent-film limit; the root sits on the left endpoint
        return BranchRoot(k=2.0 * th_lo / L_x, residual=0.0, iterations=0, clamped=False)

    sign = 1.0 if m % 2 == 1 else -1.0  # makes F(th_lo) = +V, F(th_hi) < 0

    def f(th):
        return sign * _eigencondition_scaled(th, V, L_x)

    def fprime(th):
        return sign * _eigencondition_scaled_deriv(th, V, L_x)

    a, b = th_lo, th_hi
    iterations = 0
    while (b - a) > rel_tol * b and iterations < max_iter:
        iterations += 1
        mid = 0.5 * (a + b)
        if f(mid) > 0.0:
            a = mid
        else:
            b = mid
    if (b - a) > rel_tol * b:
        raise ConvergenceError(
            f"branch {m} root did not converge after {iterations} iterations",
            bracket=(2 * a / L_x, 2 * b / L_x),
            residual=f(0.5 * (a + b)),
        )

    theta = 0.5 * (a + b)
    # one Newton polish inside the converged bracket; landing on the branch
    # endpoint (within rounding) is legitimate and handled by the clamp below
    dyn = fprime(theta)
    if dyn != 0.0:
        newton = theta - f(theta) / dyn
        if a < newton <= b:
            theta = newton
    if (th_hi - theta) < ENDPOINT_CLAMP * th_hi:
        return BranchRoot(k=2.0 * th_hi / L_x, residual=math.nan,
                          iterations=iterations, clamped=True)

    k = 2.0 * theta / L_x
    # Relative residual of the sin-scaled condition.  The raw form
    # 2k*cot(theta) + V is amplified by ~V^2/k near the pole and cannot reach
    # any fixed relative tolerance in double precision at large V; the scaled
    # form stays conditioned like the root itself.
    residual = abs(_eigencondition_scaled(theta, V, L_x)) / (
        theta * max(V, 4.0 * theta / L_x)
    )
    if residual > residual_tol:
        raise ConvergenceError(
            f"branch {m} scaled residual {residual:.3e} exceeds {residual_tol:.1e}",
            bracket=(2 * a / L_x, 2 * b / L_x),
            residual=residual,
        )
    return BranchRoot(k=k, residual=residual, iterations=iterations, clamped=False)


def solve_k(V: float, L_x: float, m: int) -> float:
    """Longitudinal wavenumber of psi branch m at film conductivity V."""
    return solve_branch(V, L_x, m).k


def epsilon_for_mode(cfg: CavityConfig, k0: float) -> float:
    """Linearised modulation amplitude of a branch root for the swing V_0 -> V_max.

    Warns (PerturbativeValidityWarning) when the swing is too large for the
    linearisation, i.e. when V_0*L_x <= V_max/V_0.
    """
    if k0 <= 0.0:
        raise ValueError(f"k0 must be positive, got {k0}")
    cfg.check_perturbative()
    denom = cfg.L_x * k0 * k0 + cfg.V_0 * (1.0 + cfg.V_0 * cfg.L_x / 4.0)
    return (cfg.V_max - cfg.V_0) / denom


def transverse_wavenumber_sq(cfg: CavityConfig, m_y: int, m_z: int) -> float:
    return (math.pi * m_y / cfg.L_y) ** 2 + (math.pi * m_z / cfg.L_z) ** 2


@dataclass(frozen=True)
class PsiMode:
    """One drive-coupled mode: root, modulation amplitude, frequencies."""

    index: ModeIndex
    k0: float           # branch root at V_0
    epsilon: float      # linearised modulation amplitude
    omega_bar: float    # bare frequency at V_0
    omega_tilde: float  # renormalised frequency, from k0*(1 + epsilon*f0)
    clamped: bool = False


@dataclass(frozen=True)
class PhiMode:
    """One film-node mode; inert under the drive, listed for reporting."""

    index: ModeIndex
    w: float


@dataclass(frozen=True)
class ModeSpectrum:
    """Immutable table of psi and phi modes up to a cut, plus the drive DC level."""

    cfg: CavityConfig
    f0: float
    psi: tuple
    phi: tuple

    def psi_mode(self, index) -> PsiMode:
        key = index.as_tuple() if isinstance(index, ModeIndex) else tuple(index)
        for mode in self.psi:
            if mode.index.as_tuple() == key:
                return mode
        raise KeyError(f"psi mode {key} not in spectrum (cut too small?)")

    def position(self, index) -> int:
        key = index.as_tuple() if isinstance(index, ModeIndex) else tuple(index)
        for i, mode in enumerate(self.psi):
            if mode.index.as_tuple() == key:
                return i
        raise KeyError(f"psi mode {key} not in spectrum")

    # column views over self.psi in declared (lexicographic) order
    def k0s(self) -> np.ndarray:
        return np.array([m.k0 for m in self.psi])

    def epsilons(self) -> np.ndarray:
        return np.array([m.epsilon for m in self.psi])

    def omega_bars(self) -> np.ndarray:
        return np.array([m.omega_bar for m in self.psi])

    def omega_tildes(self) -> np.ndarray:
        return np.array([m.omega_tilde for m in self.psi])


def build_spectrum(cfg: CavityConfig, drive_f0: float, mode_cut=(5, 3, 3)) -> ModeSpectrum:
    """Tabulate psi modes (k0, epsilon, omega_bar, omega_tilde) and phi modes.

    ``drive_f0`` is the DC Fourier level of the periodic drive; it only enters
    the renormalised frequency omega_tilde through k0*(1 + epsilon*f0).
    """
    cut_x, cut_y, cut_z = mode_cut
    if min(cut_x, cut_y, cut_z) < 1:
        raise ValueError(f"mode cut must be >= 1 in each direction, got {mode_cut}")

    with warnings.catch_warnings():
        # one validity warning per spectrum, not one per mode
        warnings.simplefilter("once", PerturbativeValidityWarning)
        branch_data = []
        for m_x in range(1, cut_x + 1):
            root = solve_branch(cfg.V_0, cfg.L_x, m_x)
            eps = epsilon_for_mode(cfg, root.k)
            branch_data.append((root, eps))

    psi = []
    phi = []
    for m_x in range(1, cut_x + 1):
        root, eps = branch_data[m_x - 1]
        k_tilde = root.k * (1.0 + eps * drive_f0)
        for m_y in range(1, cut_y + 1):
            for m_z in range(1, cut_z + 1):
                idx = ModeIndex(m_x, m_y, m_z)
                kp2 = transverse_wavenumber_sq(cfg, m_y, m_z)
                omega_bar = math.sqrt(root.k ** 2 + kp2)
                omega_tilde = math.sqrt(k_tilde ** 2 + kp2)
                psi.append(PsiMode(idx, root.k, eps, omega_bar, omega_tilde, root.clamped))
                w = math.pi * math.sqrt(
                    (2.0 * m_x / cfg.L_x) ** 2
                    + (m_y / cfg.L_y) ** 2
                    + (m_z / cfg.L_z) ** 2
                )
                phi.append(PhiMode(idx, w))

    return ModeSpectrum(cfg=cfg, f0=drive_f0, psi=tuple(psi), phi=tuple(phi))
