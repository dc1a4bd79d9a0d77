"""Mode inner products, intermode coupling coefficients, resonance scan.

The extended longitudinal profiles on [0, L_x] are

    Phi_m(x) = sqrt(2/L_x) sin(2 pi m x / L_x)                (node at L_x/2)
    Psi_m(x) = sqrt(2/L_x) sin(k_m x)            x <= L_x/2
             = -sqrt(2/L_x) sin(k_m (x - L_x))   x >= L_x/2

with transverse factors orthonormal sines, so every 3-d inner product reduces
to a 1-d x-integral times Kronecker deltas in (m_y, m_z).  Psi and its
k-derivatives are even about the midplane while Phi is odd, which folds the
x-integral onto twice the [0, L_x/2] half for like-parity pairs and kills
mixed pairs identically.

Orthogonality facts checked by the test suite: (Phi_m, Phi_n) = delta,
(Phi_m, Psi_n) = 0, (Psi_m, Psi_n) = [1 - sin(k_m L_x)/(k_m L_x)] delta,
(Phi_m, dPsi_n/dk) = (Phi_m, d2Psi_n/dk2) = 0.

Coupling coefficients (normalised overlaps with the k-derivatives),

    gA[m, n] = (dPsi_m/dk_m,   Psi_n) / (Psi_n, Psi_n)
    gB[m, n] = (d2Psi_m/dk_m2, Psi_n) / (Psi_n, Psi_n)

are evaluated at the resting conductivity V_0 and vanish across different
transverse indices.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spectrum import ModeIndex, ModeSpectrum, solve_k

__all__ = [
    "QuadratureError",
    "CouplingTable",
    "ResonanceHit",
    "ResonanceReport",
    "inner_product",
    "coupling_coeffs",
    "scan_resonances",
]

PSI_KINDS = ("psi", "dpsi_dk", "d2psi_dk2")
KINDS = ("phi",) + PSI_KINDS


class QuadratureError(RuntimeError):
    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


@lru_cache(maxsize=8)
def _gl_nodes(n):
    return np.polynomial.legendre.leggauss(n)


def _gl_panels(func, a, b, n_panels, order=32):
    x0, w0 = _gl_nodes(order)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    w = (half[:, None] * w0[None, :]).ravel()
    return float(np.dot(w, func(x)))


def adaptive_quadrature(func, a, b, initial_panels=2, tol=1e-12, max_doublings=12):
    """Gauss-Legendre with panel doubling until successive estimates settle."""
    panels = max(1, initial_panels)
    prev = _gl_panels(func, a, b, panels)
    for _ in range(max_doublings):
        panels *= 2
        cur = _gl_panels(func, a, b, panels)
        if abs(cur - prev) < tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise QuadratureError(
        f"quadrature did not settle below {tol:g} after {panels} panels",
        estimate=prev,
    )


def _longitudinal(kind, x, k, L_x):
    """Longitudinal factor of the extended profiles, vectorised over x."""
    amp = math.sqrt(2.0 / L_x)
    if kind == "phi":
        return amp * np.sin(k * x)  # k = 2 pi m / L_x, smooth through midplane
    left = x <= L_x / 2
    xs = np.where(left, x, x - L_x)
    sign = np.where(left, 1.0, -1.0)
    if kind == "psi":
        return sign * amp * np.sin(k * xs)
    if kind == "dpsi_dk":
        return sign * amp * xs * np.cos(k * xs)
    if kind == "d2psi_dk2":
        return -sign * amp * xs * xs * np.sin(k * xs)
    raise ValueError(f"unknown kind {kind!r}")


@lru_cache(maxsize=512)
def _psi_root(V, L_x, m_x):
    return solve_k(V, L_x, m_x)


def _wavenumber(kind, mode: ModeIndex, V, L_x):
    if kind == "phi":
        return 2.0 * math.pi * mode.m_x / L_x
    return _psi_root(V, L_x, mode.m_x)


def inner_product(cfg, kind_a, mode_a, kind_b, mode_b, V,
                  use_symmetry=True, tol=1e-12):
    """Inner product of two extended modes over the cavity volume.

    ``kind_a`` in {phi, psi, dpsi_dk, d2psi_dk2}, ``kind_b`` in {phi, psi}.
    Transverse sines integrate to Kronecker deltas; the x-integral is done by
    adaptive Gauss-Legendre.  With ``use_symmetry`` like-parity pairs are
    folded onto twice the [0, L_x/2] half-interval and mixed-parity pairs
    return 0 without quadrature; otherwise both halves are integrated
    (split at the midplane seam where Psi has a kink).
    """
    if kind_a not in KINDS or kind_b not in ("phi", "psi"):
        raise ValueError(f"unsupported kind pair ({kind_a!r}, {kind_b!r})")
    mode_a = mode_a if isinstance(mode_a, ModeIndex) else ModeIndex(*mode_a)
    mode_b = mode_b if isinstance(mode_b, ModeIndex) else ModeIndex(*mode_b)
    if (mode_a.m_y, mode_a.m_z) != (mode_b.m_y, mode_b.m_z):
        return 0.0

    L_x = cfg.L_x
    k_a = _wavenumber(kind_a, mode_a, V, L_x)
    k_b = _wavenumber(kind_b, mode_b, V, L_x)

    def integrand(x):
        return _longitudinal(kind_a, x, k_a, L_x) * _longitudinal(kind_b, x, k_b, L_x)

    # enough panels to resolve the combined oscillation from the start
    oscillations = (k_a + k_b) * L_x / (2 * math.pi)
    panels = max(2, int(math.ceil(oscillations / 2)))

    odd_a = kind_a == "phi"
    odd_b = kind_b == "phi"
    if use_symmetry:
        if odd_a != odd_b:
            return 0.0
        return 2.0 * adaptive_quadrature(integrand, 0.0, L_x / 2, panels, tol)
    left = adaptive_quadrature(integrand, 0.0, L_x / 2, panels, tol)
    right = adaptive_quadrature(integrand, L_x / 2, L_x, panels, tol)
    return left + right


def psi_norm(k, L_x):
    """(Psi, Psi) closed form: 1 - sin(k L_x)/(k L_x)."""
    return 1.0 - math.sin(k * L_x) / (k * L_x)


@dataclass(frozen=True)
class CouplingTable:
    """Dense gA/gB matrices over the retained psi modes (row = source mode m,
    column = target mode n) plus per-mode norms at V_0."""

    modes: tuple
    gA: np.ndarray
    gB: np.ndarray
    norms: np.ndarray

    def of(self, mode_m, mode_n):
        key_m = mode_m.as_tuple() if isinstance(mode_m, ModeIndex) else tuple(mode_m)
        key_n = mode_n.as_tuple() if isinstance(mode_n, ModeIndex) else tuple(mode_n)
        tuples = [m.as_tuple() for m in self.modes]
        i, j = tuples.index(key_m), tuples.index(key_n)
        return self.gA[i, j], self.gB[i, j]


def coupling_coeffs(spectrum: ModeSpectrum, tol=1e-12) -> CouplingTable:
    """Coupling coefficient table at the resting conductivity V_0.

    The longitudinal integrals depend only on the branch pair, so they are
    computed once per (m_x, n_x) and broadcast over equal transverse indices.
    """
    cfg = spectrum.cfg
    L_x = cfg.L_x
    branches = sorted({m.index.m_x for m in spectrum.psi})
    ks = {b: spectrum.psi_mode(next(m.index for m in spectrum.psi
                                     if m.index.m_x == b)).k0
          for b in branches}

    def half_integral(kind, k_m, k_n):
        def integrand(x):
            amp = 2.0 / L_x
            if kind == "dpsi_dk":
                return amp * x * np.cos(k_m * x) * np.sin(k_n * x)
            return -amp * x * x * np.sin(k_m * x) * np.sin(k_n * x)
        panels = max(2, int(math.ceil((k_m + k_n) * L_x / (4 * math.pi))))
        return 2.0 * adaptive_quadrature(integrand, 0.0, L_x / 2, panels, tol)

    gA_long = {}
    gB_long = {}
    for bm in branches:
        for bn in branches:
            k_m, k_n = ks[bm], ks[bn]
            norm_n = psi_norm(k_n, L_x)
            gA_long[bm, bn] = half_integral("dpsi_dk", k_m, k_n) / norm_n
            gB_long[bm, bn] = half_integral("d2psi_dk2", k_m, k_n) / norm_n

    n = len(spectrum.psi)
    gA = np.zeros((n, n))
    gB = np.zeros((n, n))
    norms = np.array([psi_norm(m.k0, L_x) for m in spectrum.psi])
    for i, mi in enumerate(spectrum.psi):
        for j, mj in enumerate(spectrum.psi):
            if (mi.index.m_y, mi.index.m_z) != (mj.index.m_y, mj.index.m_z):
                continue
            gA[i, j] = gA_long[mi.index.m_x, mj.index.m_x]
            gB[i, j] = gB_long[mi.index.m_x, mj.index.m_x]
    return CouplingTable(modes=tuple(m.index for m in spectrum.psi),
                         gA=gA, gB=gB, norms=norms)


@dataclass(frozen=True)
class ResonanceHit:
    kind: str                    # "parametric" | "coupling"
    j: int
    mode_n: ModeIndex
    mode_m: ModeIndex | None     # second mode for coupling hits
    mismatch: float              # |j*Omega - condition frequency|
    coupled: bool | None = None  # coupling hits: transverse indices equal?
    decoupled_valid: bool | None = None  # parametric hits only


@dataclass(frozen=True)
class ResonanceReport:
    Omega: float
    J_max: int
    hits: tuple

    def parametric(self):
        return [h for h in self.hits if h.kind == "parametric"]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "j", "n_mx", "n_my", "n_mz",
                             "m_mx", "m_my", "m_mz", "mismatch_per_m"])
            for h in self.hits:
                m = h.mode_m.as_tuple() if h.mode_m else ("", "", "")
                writer.writerow([h.kind, h.j, *h.mode_n.as_tuple(), *m,
                                 f"{h.mismatch:.12e}"])


def scan_resonances(spectrum: ModeSpectrum, Omega: float, J_max: int,
                    tol=None) -> ResonanceReport:
    """Scan drive harmonics against the parametric and mode-coupling conditions.

    Hits are reported when |j*Omega - 2*omega_tilde_n| (parametric) or
    |j*Omega - |omega_tilde_n +/- omega_tilde_m|| (coupling, any pair) falls
    below ``tol``.  The default tolerance is the per-target detuning budget
    eps_n * omega_tilde_n / 10.  Coupling hits across different transverse
    indices are flagged ``coupled=False``: the frequency match exists but the
    coupling coefficient is identically zero.  Each parametric hit also
    records whether the mode is dynamically decoupled, i.e. no harmonic j'
    matches |omega_tilde_n +/- omega_tilde_m| for any same-transverse partner
    m, so the single-mode hyperbolic solution applies.
    """
    if Omega <= 0 or J_max < 1:
        raise ValueError("need Omega > 0 and J_max >= 1")
    if tol is not None and not np.isfinite(tol):
        raise ValueError("tolerance must be finite")

    def tol_for(mode):
        if tol is not None:
            return tol
        return mode.epsilon * mode.omega_tilde / 10.0

    psi = spectrum.psi
    hits = []
    for n_mode in psi:
        t_n = tol_for(n_mode)
        for j in range(1, J_max + 1):
            mismatch = abs(j * Omega - 2.0 * n_mode.omega_tilde)
            if mismatch < t_n:
                valid = not _has_coupling_channel(psi, n_mode, Omega, J_max, tol_for)
                hits.append(ResonanceHit("parametric", j, n_mode.index, None,
                                         mismatch, decoupled_valid=valid))
    for n_mode, m_mode in itertools.combinations(psi, 2):
        t_nm = min(tol_for(n_mode), tol_for(m_mode))
        same_transverse = (n_mode.index.m_y, n_mode.index.m_z) == (
            m_mode.index.m_y, m_mode.index.m_z)
        for j in range(1, J_max + 1):
            for target in (abs(n_mode.omega_tilde - m_mode.omega_tilde),
                           n_mode.omega_tilde + m_mode.omega_tilde):
                mismatch = abs(j * Omega - target)
                if mismatch < t_nm:
                    hits.append(ResonanceHit("coupling", j, n_mode.index,
                                             m_mode.index, mismatch,
                                             coupled=same_transverse))
    return ResonanceReport(Omega=Omega, J_max=J_max, hits=tuple(hits))


def _has_coupling_channel(psi, n_mode, Omega, J_max, tol_for):
    """True when some harmonic matches a sum/difference with a partner mode
    that actually couples (equal transverse indices)."""
    for m_mode in psi:
        if m_mode.index == n_mode.index:
            continue
        if (m_mode.index.m_y, m_mode.index.m_z) != (n_mode.index.m_y,
                                                    n_mode.index.m_z):
            continue
        t_nm = min(tol_for(n_mode), tol_for(m_mode))
        for jp in range(1, J_max + 1):
            for target in (abs(n_mode.omega_tilde - m_mode.omega_tilde),
                           n_mode.omega_tilde + m_mode.omega_tilde):
                if abs(jp * Omega - target) < t_nm:
                    return True
    return False
