import warnings

import numpy as np
import pytest

from thermodyne.filtering import (FilterCollapseError, FilterVariant,
                                  MeasurementRecord, StateClampWarning,
                                  clamp_state, coarse_grain_limit,
                                  coarse_grain_unravel, conditional_Yprime,
                                  generate_record, innovations, ks_gain,
                                  ks_step, read_record_csv, run_ks, run_zakai,
                                  unravel_step, write_record_csv, zakai_gain,
                                  zakai_step)
from thermodyne.generators import evolve_master, lindblad_schrodinger
from thermodyne.model import DetectorPreset, SystemModel, build_detector
from thermodyne.numerics import RngStream, trace_distance


def detector(nbar):
    return build_detector(DetectorPreset(kappa=1.0, nbar=nbar))


EXCITED = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
PLUS = 0.5 * np.array([[1.0, 1.0], [1.0, 1.0]], dtype=complex)


class TestFilterVariant:
    def test_round_trip(self):
        assert FilterVariant.from_string("paper") is FilterVariant.PAPER
        assert str(FilterVariant.CORRECTED) == "corrected"

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            FilterVariant.from_string("bogus")


class TestMeasurementRecord:
    def test_duration_and_times(self):
        rec = MeasurementRecord(dt=0.5, dY=[0.1, -0.2, 0.3])
        assert rec.duration == pytest.approx(1.5)
        np.testing.assert_allclose(rec.times, [0.5, 1.0, 1.5])

    def test_quadratic_variation(self):
        rng = RngStream(1, 0).generator()
        n_steps, nbar, dt = 4000, 1.0, 1e-3
        dY = np.sqrt((2 * nbar + 1) * dt) * rng.standard_normal(n_steps)
        rec = MeasurementRecord(dt=dt, dY=dY)
        qv = rec.quadratic_variation_rate()
        sigma = (2 * nbar + 1) * np.sqrt(2.0 / n_steps)
        assert abs(qv - (2 * nbar + 1)) < 4.0 * sigma

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            MeasurementRecord(dt=0.1, dY=[1.0, 2.0], dYp=[1.0])

    def test_csv_round_trip(self, tmp_path):
        rng = RngStream(2, 0).generator()
        rec = MeasurementRecord(dt=1e-3, dY=rng.standard_normal(50),
                                dYp=rng.standard_normal(50))
        path = tmp_path / "rec.csv"
        write_record_csv(rec, path)
        back = read_record_csv(path)
        assert back.dt == rec.dt
        np.testing.assert_array_equal(back.dY, rec.dY)
        np.testing.assert_array_equal(back.dYp, rec.dYp)
        # lossless means a second write is byte-identical
        path2 = tmp_path / "rec2.csv"
        write_record_csv(back, path2)
        assert path.read_bytes() == path2.read_bytes()

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,value\n0.1,0.2\n")
        with pytest.raises(ValueError, match="header"):
            read_record_csv(path)


class TestZakaiStep:
    def test_pure_drift_when_silent(self):
        h = np.diag([0.0, 1.5]).astype(complex)
        m = SystemModel(L=np.zeros((2, 2)), H=h, nbar=0.7)
        out = zakai_step(m, FilterVariant.CORRECTED, PLUS, 0.0, 1e-3)
        expected = PLUS + 1e-3 * (-1j) * (h @ PLUS - PLUS @ h)
        np.testing.assert_allclose(out, expected, atol=1e-15)

    def test_vacuum_variants_bit_identical(self):
        m = detector(0.0)
        a = zakai_step(m, FilterVariant.PAPER, PLUS, 0.02, 1e-3)
        b = zakai_step(m, FilterVariant.CORRECTED, PLUS, 0.02, 1e-3)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("nbar", [0.0, 1.0, 2.5])
    def test_trace_dynamics(self, nbar):
        # the gain traces to (2n+1) tr(c sigma) dY for the literal variant
        # and tr(c sigma) dY / (2n+1) for the corrected one
        m = detector(nbar)
        dy, dt = 0.03, 1e-3
        cbar = np.trace(m.quadrature @ PLUS).real
        for variant, scale in ((FilterVariant.PAPER, 2 * nbar + 1),
                               (FilterVariant.CORRECTED, 1 / (2 * nbar + 1))):
            out = zakai_step(m, variant, PLUS, dy, dt)
            dtr = np.trace(out).real - 1.0
            assert dtr == pytest.approx(scale * cbar * dy, abs=1e-12)

    def test_collapse_on_nonpositive_trace(self):
        m = detector(0.0)
        with pytest.raises(FilterCollapseError):
            zakai_step(m, FilterVariant.PAPER, -PLUS, 0.0, 1e-3)


class TestInnovations:
    def test_silent_coupling_passes_record_through(self):
        m = SystemModel(L=np.zeros((2, 2)), H=np.zeros((2, 2)), nbar=1.0)
        for v in FilterVariant:
            assert innovations(m, v, PLUS, 0.25, 1e-3) == pytest.approx(0.25)

    def test_vacuum_variants_agree(self):
        m = detector(0.0)
        a = innovations(m, FilterVariant.PAPER, PLUS, 0.1, 1e-3)
        b = innovations(m, FilterVariant.CORRECTED, PLUS, 0.1, 1e-3)
        assert a == b
        assert a == pytest.approx(0.1 - 1.0 * 1e-3)  # tr(sigma_x |+><+|) = 1

    def test_thermal_factors(self):
        m = detector(1.0)
        dy, dt = 0.1, 1e-3
        assert innovations(m, FilterVariant.PAPER, PLUS, dy, dt) == \
            pytest.approx(dy - 9.0 * dt)
        assert innovations(m, FilterVariant.CORRECTED, PLUS, dy, dt) == \
            pytest.approx(dy - dt)


class TestKsStep:
    def test_unitary_step_when_silent(self):
        h = np.diag([0.0, 2.0]).astype(complex)
        m = SystemModel(L=np.zeros((2, 2)), H=h, nbar=0.5)
        out = ks_step(m, FilterVariant.PAPER, PLUS, 0.0, 1e-3)
        expected = PLUS + 1e-3 * (-1j) * (h @ PLUS - PLUS @ h)
        np.testing.assert_allclose(out, expected / np.trace(expected).real,
                                   atol=1e-14)

    @pytest.mark.parametrize("variant", list(FilterVariant))
    def test_normalization_invariant(self, variant):
        m = detector(1.0)
        rng = RngStream(8, 0).generator()
        rho = PLUS
        for _ in range(200):
            dy = rng.normal(0.0, np.sqrt(3e-3))
            rho = ks_step(m, variant, rho, dy, 1e-3)
            assert abs(np.trace(rho).real - 1.0) <= 1e-10

    @pytest.mark.parametrize("nbar", [0.0, 1.0])
    def test_gain_is_traceless(self, nbar):
        # pre-renormalization trace drift per step is pure float noise
        m = detector(nbar)
        for v in FilterVariant:
            g = ks_gain(m, v, PLUS)
            assert abs(np.trace(g)) <= 1e-14
        assert abs(np.trace(lindblad_schrodinger(m, PLUS))) <= 1e-14

    def test_clamp_state_warns_and_projects(self):
        bad = np.diag([1.1, -0.1]).astype(complex)
        with pytest.warns(StateClampWarning):
            fixed, n_bad = clamp_state(bad)
        assert n_bad == 1
        assert np.linalg.eigvalsh(fixed).min() >= 0.0

    def test_mild_negativity_left_alone(self):
        mild = np.diag([1.0 + 1e-8, -1e-8]).astype(complex)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            out, n_bad = clamp_state(mild)
        assert n_bad == 0
        np.testing.assert_array_equal(out, mild)


class TestGenerateRecord:
    def test_pure_noise_quadratic_variation(self):
        nbar = 1.0
        m = SystemModel(L=np.zeros((2, 2)), H=np.zeros((2, 2)), nbar=nbar)
        rec, _ = generate_record(m, PLUS, 4.0, 1e-3,
                                 RngStream(3, 0).generator())
        qv = rec.quadratic_variation_rate()
        sigma = (2 * nbar + 1) * np.sqrt(2.0 / len(rec))
        assert abs(qv - (2 * nbar + 1)) < 4.0 * sigma

    def test_vacuum_regression_fixed_seed(self):
        rec, truth = generate_record(detector(0.0), EXCITED, 0.1, 1e-3,
                                     RngStream(314, 0).generator())
        np.testing.assert_allclose(
            rec.dY[:3], [-0.06825857, -0.00620987, -0.02840491], atol=1e-8)
        assert truth[-1].matrix[1, 1].real == \
            pytest.approx(0.7055528935712302, abs=1e-12)
        assert truth[-1].matrix[0, 1].real == \
            pytest.approx(-0.45543635847849223, abs=1e-12)

    def test_truth_states_are_normalized_and_tagged(self):
        _, truth = generate_record(detector(1.0), EXCITED, 0.05, 1e-3,
                                   RngStream(6, 0).generator())
        assert all(s.normalized for s in truth)
        assert all(s.variant is FilterVariant.CORRECTED for s in truth)
        for s in truth[::10]:
            assert np.trace(s.matrix).real == pytest.approx(1.0, abs=1e-10)

    def test_ensemble_mean_tracks_master(self):
        m = detector(1.0)
        n_traj, T, dt = 300, 1.0, 1e-3
        acc = np.zeros((2, 2), dtype=complex)
        finals = []
        for i in range(n_traj):
            _, truth = generate_record(m, EXCITED, T, dt,
                                       RngStream(40, i).generator())
            acc += truth[-1].matrix
            finals.append(truth[-1].matrix[1, 1].real)
        mean_pe = np.mean(finals)
        stderr = np.std(finals, ddof=1) / np.sqrt(n_traj)
        master_pe = evolve_master(m, EXCITED, T, dt)[-1][1][1, 1].real
        assert abs(mean_pe - master_pe) < 4.0 * stderr


class TestVacuumReduction:
    def test_variants_bit_identical_on_shared_record(self):
        m = detector(0.0)
        rec, _ = generate_record(m, EXCITED, 0.5, 1e-3,
                                 RngStream(77, 0).generator())
        ks_a = run_ks(m, FilterVariant.PAPER, EXCITED, rec)
        ks_b = run_ks(m, FilterVariant.CORRECTED, EXCITED, rec)
        for a, b in zip(ks_a, ks_b):
            assert np.array_equal(a, b)
        zak_a = run_zakai(m, FilterVariant.PAPER, EXCITED, rec)
        zak_b = run_zakai(m, FilterVariant.CORRECTED, EXCITED, rec)
        for a, b in zip(zak_a, zak_b):
            assert np.array_equal(a, b)

    def test_purity_loss_per_step_is_order_dt(self):
        # vacuum homodyne preserves purity in continuous time; a single
        # Euler-Maruyama step from a pure state loses at most O(dt)
        m = detector(0.0)
        dt = 1e-3
        rng = RngStream(78, 1).generator()
        rho = PLUS
        for _ in range(50):
            dy = np.trace(m.quadrature @ rho).real * dt \
                + np.sqrt(dt) * np.clip(rng.standard_normal(), -2, 2)
            out = ks_step(m, FilterVariant.CORRECTED, rho, dy, dt)
            assert np.trace(out @ out).real >= 1.0 - 5.0 * dt
            # stay on the pure manifold for the next iteration
            w, v = np.linalg.eigh(out)
            rho = np.outer(v[:, -1], v[:, -1].conj())

    def test_purity_floor_rises_under_refinement(self):
        # over a whole trajectory the Euler scheme's purity error random
        # walks at scale sqrt(dt T); refining dt must push the floor up
        m = detector(0.0)
        fine, _ = generate_record(m, EXCITED, 2.0, 0.25e-3,
                                  RngStream(78, 0).generator())
        floors = {}
        for fold in (4, 1):
            rec = MeasurementRecord(dt=0.25e-3 * fold,
                                    dY=fine.dY.reshape(-1, fold).sum(axis=1))
            ks = run_ks(m, FilterVariant.CORRECTED, EXCITED, rec)
            floors[fold] = min(np.trace(s @ s).real for s in ks)
        assert floors[1] > floors[4]
        assert floors[1] >= 1.0 - 10.0 * np.sqrt(0.25e-3 * 2.0)


class TestZakaiKsConsistency:
    def _consistency_error(self, m, rec):
        zak = run_zakai(m, FilterVariant.CORRECTED, EXCITED, rec)
        ks = run_ks(m, FilterVariant.CORRECTED, EXCITED, rec)
        dists = [trace_distance(z / np.trace(z).real, k)
                 for z, k in zip(zak[::50], ks[::50])]
        return max(dists)

    def test_halving_dt_roughly_halves_gap(self):
        m = detector(1.0)
        dt = 2e-3
        fine, _ = generate_record(m, EXCITED, 1.0, dt / 2,
                                  RngStream(90, 0).generator())
        coarse = MeasurementRecord(dt=dt, dY=fine.dY.reshape(-1, 2).sum(axis=1))
        err_coarse = self._consistency_error(m, coarse)
        err_fine = self._consistency_error(m, fine)
        assert err_coarse / err_fine == pytest.approx(2.0, rel=0.5)
        assert err_fine < err_coarse


class TestUnravelStep:
    def test_vacuum_ignores_second_quadrature(self):
        m = detector(0.0)
        xi = np.array([0.6, 0.8], dtype=complex)
        a = unravel_step(m, xi, 0.05, 0.7, 1e-3)
        b = unravel_step(m, xi, 0.05, -1.3, 1e-3)
        np.testing.assert_array_equal(a, b)
        # matches the explicit vacuum form xi + (L dY + K dt) xi
        K = -0.5 * np.array([[0, 0], [0, 1]], dtype=complex)
        expected = xi + (m.L * 0.05 + K * 1e-3) @ xi
        np.testing.assert_allclose(a, expected, atol=1e-15)

    def test_silent_coupling_preserves_norm(self):
        h = np.diag([0.0, 3.0]).astype(complex)
        m = SystemModel(L=np.zeros((2, 2)), H=h, nbar=1.0)
        xi = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
        dt = 1e-3
        for _ in range(100):
            xi = unravel_step(m, xi, 0.1, -0.2, dt)
        # Euler norm drift is bounded by (||H|| dt)^2 per step
        assert abs(np.linalg.norm(xi) - 1.0) <= 100 * (3.0 * dt) ** 2

    def test_rejects_nonfinite(self):
        m = detector(0.0)
        with pytest.raises(ValueError):
            unravel_step(m, np.array([np.nan, 0.0]), 0.0, 0.0, 1e-3)


class TestConditionalYprime:
    def test_vacuum_independent(self):
        rng = RngStream(4, 0).generator()
        draws = conditional_Yprime(np.full(50_000, 0.3), 0.0, 1e-2, rng)
        assert abs(draws.mean()) < 4.0 * np.sqrt(1e-2 / 50_000)
        assert draws.var() == pytest.approx(1e-2, rel=0.05)

    def test_thermal_conditioning(self):
        rng = RngStream(4, 1).generator()
        dy, nbar, dt = 0.12, 1.0, 1e-2
        draws = conditional_Yprime(np.full(50_000, dy), nbar, dt, rng)
        expected_mean = (2.0 * np.sqrt(2.0) / 3.0) * dy
        expected_var = dt / 3.0
        assert draws.mean() == pytest.approx(
            expected_mean, abs=4.0 * np.sqrt(expected_var / 50_000))
        assert draws.var() == pytest.approx(expected_var, rel=0.05)

    @pytest.mark.parametrize("nbar", [0.0, 0.5, 1.0, 3.7])
    def test_variance_determinant_identity(self, nbar):
        # conditional variance times marginal variance recovers det = 1
        marginal = 2.0 * nbar + 1.0
        conditional = 1.0 / (2.0 * nbar + 1.0)
        assert marginal * conditional == pytest.approx(1.0, abs=1e-12)


class TestCoarseGrain:
    def test_silent_coupling_is_deterministic(self):
        m = SystemModel(L=np.zeros((2, 2)), H=np.zeros((2, 2)), nbar=1.0)
        rec = MeasurementRecord(dt=1e-3, dY=np.full(100, 0.05))
        psi0 = np.array([1.0, 0.0], dtype=complex)
        avg = coarse_grain_unravel(m, rec, 4, RngStream(5, 0).generator(),
                                   psi0)
        zak = run_zakai(m, FilterVariant.CORRECTED, np.outer(psi0, psi0),
                        rec)
        for a, z in zip(avg, zak):
            assert trace_distance(a, z) <= 1e-10

    def test_vacuum_single_sample_matches_linear_filter(self):
        m = detector(0.0)
        rec, _ = generate_record(m, EXCITED, 1.0, 1e-3,
                                 RngStream(91, 0).generator())
        psi0 = np.array([0.0, 1.0], dtype=complex)
        avg = coarse_grain_unravel(m, rec, 1, RngStream(91, 1).generator(),
                                   psi0)
        zak = run_zakai(m, FilterVariant.CORRECTED, EXCITED, rec)
        dists = [trace_distance(a / np.trace(a).real, z / np.trace(z).real)
                 for a, z in zip(avg[::100], zak[::100])]
        assert max(dists) <= 0.05

    def test_limit_matches_brute_force_average(self):
        # independent check of the closed-form conditional average
        m = detector(1.0)
        rng = RngStream(92, 0).generator()
        rec = MeasurementRecord(dt=1e-2,
                                dY=np.sqrt(3e-2) * rng.standard_normal(5))
        psi0 = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
        exact = coarse_grain_limit(m, rec, np.outer(psi0, psi0.conj()))
        sampled = coarse_grain_unravel(m, rec, 40_000,
                                       RngStream(92, 1).generator(), psi0)
        assert np.max(np.abs(exact[-1] - sampled[-1])) < 0.02

    def test_sampling_noise_shrinks_with_msamples(self):
        m = detector(1.0)
        rec, _ = generate_record(m, PLUS, 0.5, 1e-3,
                                 RngStream(93, 0).generator())
        psi0 = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
        limit = coarse_grain_limit(m, rec, np.outer(psi0, psi0.conj()))

        def err(msamples, idx):
            avg = coarse_grain_unravel(m, rec, msamples,
                                       RngStream(93, idx).generator(), psi0)
            return max(
                trace_distance(a / np.trace(a).real, e / np.trace(e).real)
                for a, e in zip(avg[::50], limit[::50]))

        assert err(512, 1) < err(32, 2)
