"""Periodic excitation/relaxation profile of the film and its Fourier data.

The film conductivity follows V(t) = V_0 + (V_max - V_0) f(t) with f periodic
(period T, natural units: metres of light travel), f(0) = 0 and peak value 1
reached at the excitation time tau_e.  Everything downstream works from the
harmonic decomposition

    f(t) = f_0 + sum_j f_j cos(j*Omega*t + c_j),      Omega = 2 pi / T,

with f_j >= 0 and the phase folded into c_j in (-pi, pi].  For the linear
excitation/relaxation ramp the coefficients are closed-form:

    l_j = f_j cos c_j = [cos(2 pi j r) - 1] / [2 pi^2 j^2 r (1 - r)]
    h_j = -f_j sin c_j = sin(2 pi j r)     / [2 pi^2 j^2 r (1 - r)]

with r = tau_e / T, giving f_j = |sin(pi j r) / (pi j r)| / [pi j (1 - r)]:
roughly 1/(pi j) for j << T/(pi tau_e) and an envelope T/(tau_e j^2 pi^2)
beyond.  Arbitrary sampled profiles get their coefficients by trapezoid
quadrature of the Fourier integrals.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .spectrum import ModeSpectrum, solve_k

__all__ = [
    "DriveProfile",
    "ResolutionError",
    "fourier_ramp",
    "fourier_numeric",
    "linear_ramp",
    "raised_cosine",
    "sampled_profile",
    "profile_from_csv",
    "conductivity_at",
]


class ResolutionError(ValueError):
    """Sampled profile too coarse for the requested number of harmonics."""


@dataclass(frozen=True)
class DriveProfile:
    """Periodic drive f(t) plus its truncated Fourier representation.

    ``eval_f`` evaluates the exact shape (ramp formula, sample interpolation,
    or the partial sum itself for purely harmonic profiles); ``fourier_eval``
    and its derivatives always use the truncated series, which is what the
    evolution modules consume.
    """

    T: float
    tau_e: float
    shape: str              # "linear_ramp" | "raised_cosine" | "sampled" | "harmonic"
    f0: float
    f_j: np.ndarray         # amplitudes, harmonic j = 1 .. J_max
    c_j: np.ndarray         # phases in (-pi, pi]
    samples: tuple | None = None   # (t, f) arrays for sampled shapes
    smooth_width: float = 0.0      # C^1 corner-rounding window for the ramp

    def __post_init__(self):
        if not 0.0 < self.tau_e < self.T:
            raise ValueError(f"need 0 < tau_e < T, got tau_e={self.tau_e}, T={self.T}")
        if len(self.f_j) != len(self.c_j):
            raise ValueError("f_j and c_j must have equal length")
        if np.any(self.f_j < 0):
            raise ValueError("harmonic amplitudes must be >= 0 (fold sign into c_j)")

    @property
    def Omega(self) -> float:
        return 2.0 * math.pi / self.T

    @property
    def J_max(self) -> int:
        return len(self.f_j)

    def eval_f(self, t):
        """Exact periodic profile value(s) in [0, 1]."""
        t = np.asarray(t, dtype=float)
        tm = np.mod(t, self.T)
        if self.shape == "linear_ramp":
            up = tm / self.tau_e
            down = (self.T - tm) / (self.T - self.tau_e)
            f = np.where(tm <= self.tau_e, up, down)
            if self.smooth_width > 0.0:
                f = self._smooth(tm, f)
            return f if f.ndim else float(f)
        if self.shape == "raised_cosine":
            out = 0.5 * (1.0 - np.cos(self.Omega * tm))
            return out if out.ndim else float(out)
        if self.shape == "sampled":
            ts, fs = self.samples
            out = np.interp(tm, ts, fs)
            return out if out.ndim else float(out)
        # purely harmonic profile: the series is the exact shape
        return self.fourier_eval(t)

    def _smooth(self, tm, f):
        """Parabolic C^1 blend across the ramp corners at 0/T and tau_e."""
        w = self.smooth_width
        s_up = 1.0 / self.tau_e
        s_down = -1.0 / (self.T - self.tau_e)
        f = np.array(f, dtype=float, copy=True)
        for t0, s1, s2, v0 in (
            (self.tau_e, s_up, s_down, 1.0),          # peak corner
            (0.0, s_down, s_up, 0.0),                  # base corner (periodic)
            (self.T, s_down, s_up, 0.0),
        ):
            d = tm - t0
            inside = np.abs(d) <= w / 2
            a = (s2 - s1) / (2 * w)
            b = 0.5 * (s1 + s2)
            c = v0 - (s1 - s2) * w / 8
            f = np.where(inside, a * d * d + b * d + c, f)
        return f

    def fourier_eval(self, t):
        t = np.asarray(t, dtype=float)
        j = np.arange(1, self.J_max + 1)
        phase = np.multiply.outer(t, j * self.Omega) + self.c_j
        return self.f0 + np.cos(phase) @ self.f_j

    def fourier_dot(self, t):
        t = np.asarray(t, dtype=float)
        j = np.arange(1, self.J_max + 1)
        phase = np.multiply.outer(t, j * self.Omega) + self.c_j
        return -np.sin(phase) @ (self.f_j * j * self.Omega)

    def fourier_ddot(self, t):
        t = np.asarray(t, dtype=float)
        j = np.arange(1, self.J_max + 1)
        phase = np.multiply.outer(t, j * self.Omega) + self.c_j
        return -np.cos(phase) @ (self.f_j * (j * self.Omega) ** 2)

    def single_harmonic(self, j: int) -> "DriveProfile":
        """Profile with only the DC level and harmonic j retained."""
        if not 1 <= j <= self.J_max:
            raise ValueError(f"harmonic {j} not in table (J_max={self.J_max})")
        f_j = np.zeros(j)
        c_j = np.zeros(j)
        f_j[j - 1] = self.f_j[j - 1]
        c_j[j - 1] = self.c_j[j - 1]
        return replace(self, shape="harmonic", f_j=f_j, c_j=c_j, samples=None)

    def parseval_gap(self, n_quad: int = 40001) -> float:
        """|f_0^2 + 1/2 sum f_j^2  -  <f^2>| with <f^2> by quadrature.

        Nonzero contributions: series truncation at J_max plus quadrature
        error of the mean-square integral.
        """
        t = np.linspace(0.0, self.T, n_quad)
        mean_sq = np.trapezoid(np.asarray(self.eval_f(t)) ** 2, t) / self.T
        series = self.f0**2 + 0.5 * float(np.sum(self.f_j**2))
        return abs(series - mean_sq)


def fourier_ramp(T: float, tau_e: float, J_max: int):
    """Closed-form Fourier data (f0, f_j, c_j) of the linear ramp profile."""
    if not 0.0 < tau_e < T:
        raise ValueError(f"need 0 < tau_e < T, got tau_e={tau_e}, T={T}")
    r = tau_e / T
    j = np.arange(1, J_max + 1)
    x = 2.0 * math.pi * j * r
    denom = 2.0 * math.pi**2 * j**2 * r * (1.0 - r)
    l_j = (np.cos(x) - 1.0) / denom
    h_j = np.sin(x) / denom
    f_j = np.hypot(l_j, h_j)
    c_j = np.where(f_j > 0.0, np.arctan2(-h_j, l_j), 0.0)
    return 0.5, f_j, c_j


def fourier_numeric(t, f, T: float, J_max: int):
    """Fourier data (f0, f_j, c_j) of one sampled period by trapezoid quadrature.

    Requires at least 8 samples per period of the highest retained harmonic.
    """
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    if t.ndim != 1 or t.shape != f.shape or len(t) < 2:
        raise ValueError("need matching 1-d sample arrays")
    if abs(t[0]) > 1e-9 * T or abs(t[-1] - T) > 1e-9 * T:
        raise ValueError("samples must cover exactly one period [0, T]")
    if len(t) < 8 * J_max:
        raise ResolutionError(
            f"{len(t)} samples resolve at most {len(t) // 8} harmonics, "
            f"{J_max} requested"
        )
    omega = 2.0 * math.pi / T
    f0 = np.trapezoid(f, t) / T
    j = np.arange(1, J_max + 1)
    phases = np.multiply.outer(j * omega, t)          # (J, n)
    l_j = 2.0 / T * np.trapezoid(f * np.cos(phases), t, axis=1)
    h_j = 2.0 / T * np.trapezoid(f * np.sin(phases), t, axis=1)
    f_j = np.hypot(l_j, h_j)
    c_j = np.where(f_j > 0.0, np.arctan2(-h_j, l_j), 0.0)
    return float(f0), f_j, c_j


def linear_ramp(T: float, tau_e: float, J_max: int, smooth: bool = False) -> DriveProfile:
    """Linear excitation ramp to 1 at tau_e, linear relaxation back over T.

    With ``smooth`` the corners are rounded by a parabolic C^1 window of
    width tau_e/10 (the raw ramp has a distributional second derivative) and
    the Fourier data is computed numerically from the smoothed shape; the
    smoothed profile starts at f(0) = w/(8*tau_e) instead of exactly 0.
    """
    if smooth:
        width = tau_e / 10.0
        probe = DriveProfile(T, tau_e, "linear_ramp", 0.5, np.zeros(0), np.zeros(0),
                             smooth_width=width)
        n = max(20001, 64 * J_max + 1)
        ts = np.linspace(0.0, T, n)
        f0, f_j, c_j = fourier_numeric(ts, np.asarray(probe.eval_f(ts)), T, J_max)
        return DriveProfile(T, tau_e, "linear_ramp", f0, f_j, c_j, smooth_width=width)
    f0, f_j, c_j = fourier_ramp(T, tau_e, J_max)
    return DriveProfile(T, tau_e, "linear_ramp", f0, f_j, c_j)


def raised_cosine(T: float) -> DriveProfile:
    """Single-harmonic profile (1 - cos(Omega t))/2: f0 = f_1 = 1/2, c_1 = pi."""
    return DriveProfile(T, T / 2.0, "raised_cosine", 0.5,
                        np.array([0.5]), np.array([math.pi]))


def sampled_profile(t, f, J_max: int) -> DriveProfile:
    """Profile from one period of (t, f) samples, linearly interpolated."""
    t = np.asarray(t, dtype=float)
    f = np.asarray(f, dtype=float)
    T = float(t[-1])
    f0, f_j, c_j = fourier_numeric(t, f, T, J_max)
    tau_e = float(t[np.argmax(f)])
    return DriveProfile(T, tau_e, "sampled", f0, f_j, c_j, samples=(t, f))


def profile_from_csv(path, J_max: int) -> DriveProfile:
    """Sampled profile from a two-column CSV (t_seconds, f) with a header row.

    Times are converted to natural units (metres) on ingestion.
    """
    from .constants import seconds_to_metres

    ts, fs = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)  # header
        for row in reader:
            if not row:
                continue
            ts.append(seconds_to_metres(float(row[0])))
            fs.append(float(row[1]))
    return sampled_profile(np.array(ts), np.array(fs), J_max)


def conductivity_at(spectrum: ModeSpectrum, profile: DriveProfile, t: float,
                    exact: bool = False):
    """Instantaneous V(t) and the linearised branch roots k_n(t).

    Returns (V, k_linear) or (V, k_linear, k_exact) with ``exact``; the
    linearised roots are k_n^0 (1 + eps_n f(t)), the exact ones re-solve the
    eigenvalue condition at V(t) for each retained branch.
    """
    cfg = spectrum.cfg
    f = float(np.asarray(profile.eval_f(t)))
    V = cfg.V_0 + (cfg.V_max - cfg.V_0) * f
    k_lin = spectrum.k0s() * (1.0 + spectrum.epsilons() * f)
    if not exact:
        return V, k_lin
    branches = sorted({m.index.m_x for m in spectrum.psi})
    roots = {m: solve_k(V, cfg.L_x, m) for m in branches}
    k_exact = np.array([roots[m.index.m_x] for m in spectrum.psi])
    return V, k_lin, k_exact
