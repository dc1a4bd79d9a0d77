"""Direct integration of the fast coupled-mode equations.

Expanding the evolving mode function over the instantaneous profiles
Psi_m(x, t) with coefficients P_m(t) turns the wave equation into

    P_n'' + omega_n^2(t) P_n = - sum_m [ (2 P_m' kdot_m + P_m kddot_m) gA[m, n]
                                         + P_m kdot_m^2 gB[m, n] ],

with omega_n^2(t) = k_n^2(t) + transverse^2 and k_n(t) = k_n^0 (1 + eps_n f).
This is the slow-flow module's independent oracle: no secular approximation,
just a classic fixed-step 4th-order integrator on the fast timescale.

The drive enters through the *truncated Fourier representation* of f: kdot
and kddot are analytic derivatives of the retained cosines.  The raw ramp's
second derivative is distributional at its corners, so differentiating the
partial sum (rather than the shape) is what makes the coefficients of the
equation well defined; the truncation order is a convergence knob.

Seeds: trajectory s starts as the pure mode s, i.e. P_m(0) = delta_{sm} /
sqrt(2 w_m), P_m'(0) = -i sqrt(w_m / 2) delta_{sm}.  A Klein-Gordon-style
diagnostic Q_s = i sum_n N_n(k_n(t)) (P* P' - P P'*) is carried per seed;
secular drift of Q measures integrator error (an O(eps) bounded wiggle from
the time-dependent norms is expected and harmless).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT
from .coupling import CouplingTable, inner_product, psi_norm
from .drive import DriveProfile
from .msa import AmplitudeState
from .spectrum import ModeSpectrum, solve_k

__all__ = [
    "StepSizeError",
    "FastState",
    "integrate_full",
    "extract_slow",
    "wronskian_invariant",
    "phi_mode_check",
    "PhiModeReport",
]


class StepSizeError(RuntimeError):
    """Halving the step changed the result beyond the audit tolerance."""


@dataclass(frozen=True)
class FastState:
    """Recorded fast trajectory: P, dP/dt of shape (n_t, n_modes, n_seeds)."""

    t: np.ndarray
    P: np.ndarray
    Pdot: np.ndarray
    modes: tuple
    seeds: tuple
    spectrum: ModeSpectrum
    drive: DriveProfile
    dt: float
    variant: str

    def to_csv(self, path, c_light=C_LIGHT):
        """Trajectory dump: t, mode, Re/Im of P and dP/dt, N (per mode)."""
        A = _slow_A(self)
        N = (2.0 * self.spectrum.omega_bars()[None, :, None]
             * np.abs(A) ** 2).sum(axis=2)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_seconds", "mx", "my", "mz", "seed_mx", "seed_my",
                             "seed_mz", "re_P", "im_P", "re_dPdt", "im_dPdt", "N"])
            for i, ti in enumerate(self.t):
                for j, mode in enumerate(self.modes):
                    for s, seed in enumerate(self.seeds):
                        writer.writerow([
                            f"{ti / c_light:.12e}", mode.m_x, mode.m_y, mode.m_z,
                            seed.m_x, seed.m_y, seed.m_z,
                            f"{self.P[i, j, s].real:.12e}",
                            f"{self.P[i, j, s].imag:.12e}",
                            f"{self.Pdot[i, j, s].real:.12e}",
                            f"{self.Pdot[i, j, s].imag:.12e}",
                            f"{N[i, j]:.12e}",
                        ])


def _scalar_drive(drive):
    """Specialised scalar-time evaluator of (f, fdot, fddot); the generic
    vectorised path costs too much inside the step loop."""
    live = [(float(drive.f_j[j]), float(drive.c_j[j]), (j + 1) * drive.Omega)
            for j in range(drive.J_max) if drive.f_j[j] > 0.0]
    f0 = drive.f0

    def terms(t):
        f, fd, fdd = f0, 0.0, 0.0
        for amp, phase, om in live:
            arg = om * t + phase
            c = math.cos(arg)
            s = math.sin(arg)
            f += amp * c
            fd -= amp * om * s
            fdd -= amp * om * om * c
        return f, fd, fdd

    return terms


def integrate_full(spectrum: ModeSpectrum, coupling_table: CouplingTable | None,
                   drive: DriveProfile, t_end: float, dt: float | None = None,
                   seeds=None, variant: str = "full", exact_k: bool = False,
                   record_every: int | None = None, audit: bool = False,
                   audit_tol: float = 0.01) -> FastState:
    """Fixed-step RK4 trajectory of the fast mode equations up to t_end.

    variant "full" keeps omega^2(t) = k(t)^2 + transverse^2 with the
    quadratic modulation term and the kdot^2 gB coupling; "first_order"
    drops both, leaving the linearised equation the slow flow is built from.
    ``exact_k`` re-solves the eigenvalue condition for k(t) at every stage
    instead of using the linearised roots (slow; for validation runs).
    ``coupling_table=None`` switches the intermode terms off entirely.
    With ``audit`` the run is repeated at dt/2 and a photon-number change
    beyond ``audit_tol`` raises StepSizeError.
    """
    psi = spectrum.psi
    n = len(psi)
    k0 = spectrum.k0s()
    eps = spectrum.epsilons()
    kperp2 = spectrum.omega_bars() ** 2 - k0**2
    om_bar = spectrum.omega_bars()

    if dt is None:
        om_max = float(np.max(spectrum.omega_tildes()))
        dt = 2.0 * math.pi / (40.0 * om_max)
    n_steps = max(1, int(math.ceil(t_end / dt)))
    dt = t_end / n_steps
    if record_every is None:
        record_every = max(1, n_steps // 2000)

    if seeds is None:
        seed_positions = list(range(n))
    else:
        seed_positions = [spectrum.position(s) for s in seeds]
    n_seeds = len(seed_positions)

    GA_T = coupling_table.gA.T.copy() if coupling_table is not None else None
    GB_T = coupling_table.gB.T.copy() if coupling_table is not None else None

    L_x = spectrum.cfg.L_x
    V0, Vmax = spectrum.cfg.V_0, spectrum.cfg.V_max
    branches = sorted({m.index.m_x for m in psi})
    branch_of = np.array([branches.index(m.index.m_x) for m in psi])

    drive_terms = _scalar_drive(drive)
    k0eps = k0 * eps
    om_tilde_sq = spectrum.omega_tildes() ** 2
    two_eps_k0sq = 2.0 * eps * k0**2
    f_dc = drive.f0

    def k_of(t, f):
        if exact_k:
            V = V0 + (Vmax - V0) * f
            roots = np.array([solve_k(V, L_x, b) for b in branches])
            return roots[branch_of]
        return k0 + k0eps * f

    def accel(t, P, D):
        f, fdot, fddot = drive_terms(t)
        kdot = k0eps * fdot
        kddot = k0eps * fddot
        if variant == "full":
            k = k_of(t, f)
            om2 = k * k + kperp2
        else:
            om2 = om_tilde_sq + two_eps_k0sq * (f - f_dc)
        out = -om2[:, None] * P
        if GA_T is not None:
            S_A = 2.0 * kdot[:, None] * D
            S_A += kddot[:, None] * P
            out -= GA_T @ S_A
            if variant == "full":
                out -= GB_T @ ((kdot * kdot)[:, None] * P)
        return out

    def run(step, n_sub):
        P = np.zeros((n, n_seeds), dtype=complex)
        D = np.zeros((n, n_seeds), dtype=complex)
        for s, pos in enumerate(seed_positions):
            P[pos, s] = 1.0 / math.sqrt(2.0 * om_bar[pos])
            D[pos, s] = -1j * math.sqrt(om_bar[pos] / 2.0)
        total = n_steps * n_sub
        rec_idx = [0]
        recs_P = [P.copy()]
        recs_D = [D.copy()]
        t = 0.0
        for i in range(total):
            k1d = accel(t, P, D)
            P2 = P + 0.5 * step * D
            D2 = D + 0.5 * step * k1d
            k2d = accel(t + 0.5 * step, P2, D2)
            P3 = P + 0.5 * step * D2
            D3 = D + 0.5 * step * k2d
            k3d = accel(t + 0.5 * step, P3, D3)
            P4 = P + step * D3
            D4 = D + step * k3d
            k4d = accel(t + step, P4, D4)
            P = P + (step / 6.0) * (D + 2 * D2 + 2 * D3 + D4)
            D = D + (step / 6.0) * (k1d + 2 * k2d + 2 * k3d + k4d)
            t += step
            if (i + 1) % (record_every * n_sub) == 0 or (i + 1) == total:
                rec_idx.append(i + 1)
                recs_P.append(P.copy())
                recs_D.append(D.copy())
        times = np.array(rec_idx) * step
        return times, np.array(recs_P), np.array(recs_D)

    times, P_rec, D_rec = run(dt, 1)
    state = FastState(t=times, P=P_rec, Pdot=D_rec,
                      modes=tuple(m.index for m in psi),
                      seeds=tuple(psi[p].index for p in seed_positions),
                      spectrum=spectrum, drive=drive, dt=dt, variant=variant)
    if audit:
        times2, P2_rec, D2_rec = run(dt / 2.0, 2)
        N1 = _photon_series(state)
        state2 = FastState(t=times2, P=P2_rec, Pdot=D2_rec, modes=state.modes,
                           seeds=state.seeds, spectrum=spectrum, drive=drive,
                           dt=dt / 2.0, variant=variant)
        N2 = _photon_series(state2)
        scale = max(float(N2.max()), 1e-30)
        drift = float(np.max(np.abs(N1 - N2))) / scale
        if drift > audit_tol:
            raise StepSizeError(
                f"photon number changed by {drift:.2%} when halving dt={dt:.3e}; "
                f"refine the step"
            )
    return state


def _slow_A(state: FastState):
    om_t = state.spectrum.omega_tildes()
    phase = np.exp(-1j * np.multiply.outer(state.t, om_t))
    return 0.5 * (state.P + state.Pdot / (1j * om_t[None, :, None])) \
        * phase[:, :, None]


def _photon_series(state: FastState):
    A = _slow_A(state)
    return (2.0 * state.spectrum.omega_bars()[None, :, None]
            * np.abs(A) ** 2).sum(axis=2)


def extract_slow(state: FastState, eps_ref: float | None = None) -> AmplitudeState:
    """Slow amplitudes from a fast trajectory.

    Inverts the zeroth-order decomposition P = A e^{+i w~ t} + B e^{-i w~ t}
    pointwise:  A = (P + P'/(i w~)) e^{-i w~ t} / 2 and conjugate for B.
    """
    spec = state.spectrum
    om_t = spec.omega_tildes()
    phase = np.exp(-1j * np.multiply.outer(state.t, om_t))[:, :, None]
    A = 0.5 * (state.P + state.Pdot / (1j * om_t[None, :, None])) * phase
    B = 0.5 * (state.P - state.Pdot / (1j * om_t[None, :, None])) / phase
    if eps_ref is None:
        # static cavities have eps = 0 everywhere; tau is then just t
        eps_ref = float(np.max(spec.epsilons())) or 1.0
    return AmplitudeState(
        tau=eps_ref * state.t,
        A=A,
        B=B,
        modes=state.modes,
        seeds=state.seeds,
        eps_ref=eps_ref,
        omega_bar=spec.omega_bars(),
        omega_tilde=spec.omega_tildes(),
        k0=spec.k0s(),
        eps=spec.epsilons(),
    )


def wronskian_invariant(state: FastState) -> np.ndarray:
    """Q_s(t) = i sum_n N_n(k_n(t)) (P* P' - P P'*), shape (n_t, n_seeds).

    Conserved by the exact evolution up to O(eps) bounded oscillation from
    the time-dependent norms; secular drift indicates integrator error.
    """
    spec = state.spectrum
    L_x = spec.cfg.L_x
    f = np.asarray(state.drive.fourier_eval(state.t))
    k = spec.k0s()[None, :] * (1.0 + spec.epsilons()[None, :] * f[:, None])
    norms = 1.0 - np.sin(k * L_x) / (k * L_x)
    cross = (np.conj(state.P) * state.Pdot
             - state.P * np.conj(state.Pdot))        # (n_t, n, s)
    q = 1j * (norms[:, :, None] * cross).sum(axis=1)
    return q.real


@dataclass(frozen=True)
class PhiModeReport:
    """Why the film-node family stays inert under the drive."""

    entries: tuple  # (ModeIndex, film_amplitude, delta_overlap, mixed_overlap)
    occupation_constant: bool = True

    def all_inert(self) -> bool:
        return all(abs(e[1]) < 1e-12 and abs(e[2]) < 1e-12
                   and abs(e[3]) < 1e-10 for e in self.entries)


def phi_mode_check(spectrum: ModeSpectrum) -> PhiModeReport:
    """Verify that every phi mode decouples from the film drive.

    The drive enters only through the delta potential at the midplane, where
    the phi profiles have an exact node: the drive matrix element
    Phi(L_x/2)^2 and the film cross element with any psi mode vanish, so a
    phi mode that starts empty stays empty.  The plain (Phi, Psi) overlap is
    also quadratured as the orthogonality cross-check.
    """
    cfg = spectrum.cfg
    L_x = cfg.L_x
    amp = math.sqrt(2.0 / L_x)
    entries = []
    for mode in spectrum.phi:
        film = amp * math.sin(math.pi * mode.index.m_x)  # profile at x = L_x/2
        delta_overlap = film * film
        mixed = inner_product(cfg, "phi", mode.index, "psi", mode.index,
                              cfg.V_0, use_symmetry=False)
        entries.append((mode.index, film, delta_overlap, mixed))
    return PhiModeReport(entries=tuple(entries))
