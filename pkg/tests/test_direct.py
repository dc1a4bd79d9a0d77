import math

import numpy as np
import pytest

from condcav.coupling import coupling_coeffs
from condcav.direct import (
    StepSizeError,
    extract_slow,
    integrate_full,
    phi_mode_check,
    wronskian_invariant,
)
from condcav.drive import linear_ramp, raised_cosine
from condcav.msa import msa_parametric, photon_number
from condcav.spectrum import CavityConfig, build_spectrum, solve_k

from test_msa import flat_cavity, resonant_setup


def static_setup(mode_cut=(2, 1, 1)):
    """No swing at all (V_max = V_0): the cavity is static, eps = 0."""
    cfg = CavityConfig(1.0, 100.0, 100.0, V_0=10.0, V_max=10.0)
    spec = build_spectrum(cfg, drive_f0=0.5, mode_cut=mode_cut)
    drive = raised_cosine(T=1.0)
    return cfg, spec, drive


class TestStaticCavity:
    def test_free_oscillation_closed_form(self):
        _, spec, drive = static_setup()
        table = coupling_coeffs(spec)
        state = integrate_full(spec, table, drive, t_end=20.0, seeds=[(1, 1, 1)])
        ob = spec.psi_mode((1, 1, 1)).omega_bar
        expect = np.exp(-1j * ob * state.t) / math.sqrt(2 * ob)
        i = spec.position((1, 1, 1))
        # default step is 40 per fastest period: RK4 phase error ~2e-5 here
        np.testing.assert_allclose(state.P[:, i, 0], expect, atol=5e-5)
        # the other mode stays empty
        j = spec.position((2, 1, 1))
        assert np.max(np.abs(state.P[:, j, 0])) < 1e-12

    def test_no_photons(self):
        _, spec, drive = static_setup()
        state = integrate_full(spec, None, drive, t_end=20.0, seeds=[(1, 1, 1)])
        record = photon_number(extract_slow(state))
        assert record.N.max() < 1e-12

    def test_extract_slow_static_values(self):
        _, spec, drive = static_setup()
        state = integrate_full(spec, None, drive, t_end=10.0, seeds=[(1, 1, 1)])
        slow = extract_slow(state)
        i = spec.position((1, 1, 1))
        ob = spec.psi_mode((1, 1, 1)).omega_bar
        # eps = 0: omega_tilde = omega_bar, A vanishes, B constant
        np.testing.assert_allclose(np.abs(slow.A[:, i, 0]), 0.0, atol=2e-5)
        np.testing.assert_allclose(slow.B[:, i, 0], 1 / math.sqrt(2 * ob), atol=2e-5)

    def test_fourth_order_convergence(self):
        _, spec, drive = static_setup(mode_cut=(1, 1, 1))
        ob = spec.psi_mode((1, 1, 1)).omega_bar

        def err(dt):
            state = integrate_full(spec, None, drive, t_end=8.0, dt=dt,
                                   record_every=10**9)
            expect = np.exp(-1j * ob * state.t[-1]) / math.sqrt(2 * ob)
            return abs(state.P[-1, 0, 0] - expect)

        e1, e2 = err(0.02), err(0.01)
        assert e1 / e2 == pytest.approx(16.0, rel=0.25)

    def test_wronskian_conserved(self):
        _, spec, drive = static_setup()
        table = coupling_coeffs(spec)
        state = integrate_full(spec, table, drive, t_end=30.0)
        q = wronskian_invariant(state)
        # starts at the mode norms; exact invariant here (eps = 0)
        np.testing.assert_allclose(q[0],
                                   [1 - math.sin(m.k0) / m.k0 for m in spec.psi],
                                   rtol=1e-12)
        drift = np.abs(q - q[0]) / np.abs(q[0])
        assert drift.max() < 1e-3

        fine = integrate_full(spec, table, drive, t_end=30.0, dt=state.dt / 2)
        qf = wronskian_invariant(fine)
        drift_f = np.abs(qf - qf[0]) / np.abs(qf[0])
        assert drift.max() / drift_f.max() > 8.0


class TestResonantOracle:
    def test_direct_matches_closed_form_quick(self):
        # moderate eps keeps the run short; agreement degrades like O(eps)
        cfg, spec, drive = resonant_setup(eps_target=1e-2, mode_cut=(3, 1, 1))
        d1 = drive.single_harmonic(1)
        table = coupling_coeffs(spec)
        eps = spec.psi_mode((1, 1, 1)).epsilon
        state = integrate_full(spec, table, d1, t_end=2.0 / eps)
        slow = extract_slow(state, eps_ref=eps)
        record = photon_number(slow)
        tau = slow.tau
        _, closed = msa_parametric(spec, d1, (1, 1, 1), 1, tau)
        i = spec.position((1, 1, 1))
        sel = tau >= 0.5
        rel = np.abs(record.N[sel, i] - closed.N[sel, 0]) / closed.N[sel, 0]
        assert rel.max() < 0.1

        # |A| envelope tracks the sinh form
        sel2 = tau >= 1.0
        envelope = np.abs(slow.A[:, i, 0])
        predicted = np.abs(closed.N[:, 0] / (2 * spec.psi_mode((1, 1, 1)).omega_bar)) ** 0.5
        rel_env = np.abs(envelope[sel2] - predicted[sel2]) / predicted[sel2]
        assert rel_env.max() < 0.05

    def test_first_order_variant_agrees(self):
        cfg, spec, drive = resonant_setup(eps_target=1e-2, mode_cut=(2, 1, 1))
        d1 = drive.single_harmonic(1)
        table = coupling_coeffs(spec)
        eps = spec.psi_mode((1, 1, 1)).epsilon
        full = integrate_full(spec, table, d1, t_end=1.5 / eps)
        first = integrate_full(spec, table, d1, t_end=1.5 / eps,
                               variant="first_order")
        N_full = photon_number(extract_slow(full, eps_ref=eps)).N
        N_first = photon_number(extract_slow(first, eps_ref=eps)).N
        i = spec.position((1, 1, 1))
        sel = full.t * eps >= 0.5
        rel = np.abs(N_full[sel, i] - N_first[sel, i]) / N_full[sel, i]
        assert rel.max() < 10 * eps

    def test_extraction_at_t0_matches_switch_on(self):
        cfg, spec, drive = resonant_setup(eps_target=1e-2, mode_cut=(2, 1, 1))
        d1 = drive.single_harmonic(1)
        state = integrate_full(spec, None, d1, t_end=0.5, seeds=[(1, 1, 1)])
        slow = extract_slow(state)
        mode = spec.psi_mode((1, 1, 1))
        i = spec.position((1, 1, 1))
        r = mode.omega_bar / mode.omega_tilde
        a0 = (1 - r) / (2 * math.sqrt(2 * mode.omega_bar))
        b0 = (1 + r) / (2 * math.sqrt(2 * mode.omega_bar))
        assert abs(slow.A[0, i, 0] - a0) < mode.epsilon**2
        assert abs(slow.B[0, i, 0] - b0) < mode.epsilon**2

    def test_off_resonant_drive_bounded(self):
        cfg, spec, _ = resonant_setup(eps_target=1e-2, mode_cut=(2, 1, 1))
        mode = spec.psi_mode((1, 1, 1))
        eps = mode.epsilon
        # detune by 10*eps relative: far outside the growth band
        delta = 10 * eps * 2 * mode.omega_tilde
        drive = raised_cosine(2 * math.pi / (2 * mode.omega_tilde + delta))
        state = integrate_full(spec, None, drive, t_end=3.0 / eps,
                               seeds=[(1, 1, 1)])
        record = photon_number(extract_slow(state, eps_ref=eps))
        assert record.N.max() < 100 * eps**2

    def test_wronskian_drift_small_on_resonant_run(self):
        cfg, spec, drive = resonant_setup(eps_target=1e-2, mode_cut=(2, 1, 1))
        d1 = drive.single_harmonic(1)
        table = coupling_coeffs(spec)
        state = integrate_full(spec, table, d1, t_end=1.0 / 1e-2)
        q = wronskian_invariant(state)
        # bounded O(eps) oscillation rides on the exact invariant
        drift = np.abs(q - q[0]) / np.abs(q[0])
        assert drift.max() < 10 * 1e-2


class TestOracleAgreementSmallEps:
    @pytest.mark.slow
    def test_eps_1e4_agreement(self):
        # the long-haul version of the resonant comparison: disagreement must
        # shrink like O(eps).  dt is set below the default 40/period because
        # the 50*eps budget at eps = 1e-4 is 0.5% and RK4 amplitude
        # dissipation over ~2.5M steps would otherwise eat most of it.
        cfg, spec, drive = resonant_setup(eps_target=1e-4, mode_cut=(2, 1, 1))
        d1 = drive.single_harmonic(1)
        table = coupling_coeffs(spec)
        mode = spec.psi_mode((1, 1, 1))
        eps = mode.epsilon
        om_max = float(np.max(spec.omega_tildes()))
        state = integrate_full(spec, table, d1, t_end=3.0 / eps,
                               dt=2 * math.pi / (50 * om_max))
        slow = extract_slow(state, eps_ref=eps)
        record = photon_number(slow)
        tau = slow.tau
        _, closed = msa_parametric(spec, d1, (1, 1, 1), 1, tau)
        i = spec.position((1, 1, 1))
        window = (tau >= 0.5) & (tau <= 3.0)
        rel = np.abs(record.N[window, i] - closed.N[window, 0]) / closed.N[window, 0]
        assert rel.max() < 0.05
        assert rel[-1] < 50 * eps


class TestTruncationAudit:
    def test_extra_branch_shell_changes_little(self):
        # adding one longitudinal shell must leave the resonant photon
        # number essentially unchanged (< 1%)
        cfg, spec2, drive = resonant_setup(eps_target=1e-2, mode_cut=(2, 1, 1))
        spec3 = build_spectrum(cfg, drive_f0=0.5, mode_cut=(3, 1, 1))
        d1 = drive.single_harmonic(1)
        eps = spec2.psi_mode((1, 1, 1)).epsilon
        results = []
        for spec in (spec2, spec3):
            table = coupling_coeffs(spec)
            state = integrate_full(spec, table, d1, t_end=2.0 / eps,
                                   seeds=[(1, 1, 1)], record_every=10**9)
            rec = photon_number(extract_slow(state, eps_ref=eps))
            results.append(rec.N[-1, spec.position((1, 1, 1))])
        assert abs(results[1] - results[0]) / results[0] < 0.01

    def test_difference_channel_direct_cross_check(self):
        # drive tuned to omega_2 - omega_1: amplitude beat, no net pumping;
        # the direct run is the oracle behind the slow-flow statement
        cfg, spec, _ = resonant_setup(eps_target=1e-2, mode_cut=(2, 1, 1))
        m1 = spec.psi_mode((1, 1, 1))
        m2 = spec.psi_mode((2, 1, 1))
        T = 2 * math.pi / (m2.omega_tilde - m1.omega_tilde)
        drive = linear_ramp(T, 0.05 * T, 2).single_harmonic(1)
        table = coupling_coeffs(spec)
        eps = m1.epsilon
        state = integrate_full(spec, table, drive, t_end=3.0 / eps)
        record = photon_number(extract_slow(state, eps_ref=eps))
        assert record.N.max() < 10 * eps**2


class TestStepAudit:
    def test_audit_passes_at_default_step(self):
        cfg, spec, drive = resonant_setup(eps_target=1e-2, mode_cut=(1, 1, 1))
        d1 = drive.single_harmonic(1)
        state = integrate_full(spec, None, d1, t_end=0.5 / 1e-2, audit=True)
        assert state.dt > 0

    def test_audit_rejects_coarse_step(self):
        cfg, spec, drive = resonant_setup(eps_target=1e-2, mode_cut=(1, 1, 1))
        d1 = drive.single_harmonic(1)
        om = spec.psi_mode((1, 1, 1)).omega_tilde
        with pytest.raises(StepSizeError):
            integrate_full(spec, None, d1, t_end=0.5 / 1e-2,
                           dt=2 * math.pi / (3.5 * om), audit=True)


class TestExactRoots:
    def test_exact_k_close_to_linearised(self):
        # moderate V_0*L_x: the linearised spectrum is accurate to O(eps^2)
        cfg, spec, drive = resonant_setup(eps_target=1e-2, mode_cut=(1, 1, 1))
        d1 = drive.single_harmonic(1)
        lin = integrate_full(spec, None, d1, t_end=10.0)
        exact = integrate_full(spec, None, d1, t_end=10.0, exact_k=True)
        # roots differ at O(eps^2 * V0*Lx/4); phase drift stays millimetric
        assert np.max(np.abs(lin.P - exact.P)) < 5e-3


class TestPhiModes:
    def test_all_inert(self):
        cfg = CavityConfig(0.5, 0.8, 1.1, V_0=300.0, V_max=330.0)
        spec = build_spectrum(cfg, drive_f0=0.5, mode_cut=(3, 2, 2))
        report = phi_mode_check(spec)
        assert report.all_inert()
        assert report.occupation_constant
        for index, film, delta_overlap, mixed in report.entries:
            assert abs(film) < 1e-12
            assert abs(delta_overlap) < 1e-12
            assert abs(mixed) < 1e-10


class TestTrajectoryCsv:
    def test_columns_and_rows(self, tmp_path):
        _, spec, drive = static_setup(mode_cut=(1, 1, 1))
        state = integrate_full(spec, None, drive, t_end=2.0, record_every=10**9)
        path = tmp_path / "trajectory.csv"
        state.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].split(",")[:4] == ["t_seconds", "mx", "my", "mz"]
        assert len(lines) == 1 + len(state.t) * 1 * 1
