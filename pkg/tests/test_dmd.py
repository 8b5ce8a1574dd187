"""Operator fit, eigenpairs, stabilization, forecasting, serialization."""

import numpy as np
import pytest

from wavedmd import (
    AugmentationSpec,
    DmdModel,
    StandardizationRecord,
    amplitudes,
    build_snapshots,
    eigendecompose,
    fit,
    fit_model,
    forecast,
    load_model,
    one_step_matrix_forecast,
    save_model,
    stabilize,
)
from wavedmd.augmentation import SnapshotPair
from wavedmd.dmd import continuous_frequencies, normalize_modes
from wavedmd.errors import DegenerateDataError
from wavedmd.timeseries import TimeSeries


def rotation(theta):
    return np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])


def pair_from(values):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    return SnapshotPair(
        X=values[:, :-1], Xp=values[:, 1:], n=values.shape[0], layout=("state",)
    )


def identity_record(n):
    return StandardizationRecord(mean=np.zeros(n), std=np.ones(n))


def model_from(values, dt=1.0):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n = values.shape[0]
    names = tuple(f"v{i}" for i in range(n))
    return fit_model(pair_from(values), dt, identity_record(n), names)


def trajectory(A, x0, steps):
    out = np.empty((len(x0), steps))
    x = np.asarray(x0, dtype=float)
    for k in range(steps):
        out[:, k] = x
        x = A @ x
    return out


class TestFit:
    def test_scalar_geometric(self):
        A = fit(pair_from([1.0, 2.0, 4.0, 8.0]), dt=1.0)
        np.testing.assert_allclose(A, [[2.0]], atol=1e-12)

    def test_rotation_recovery(self):
        R = rotation(0.1)
        data = trajectory(R, [1.0, 0.0], 33)
        A = fit(pair_from(data), dt=1.0)
        np.testing.assert_allclose(A, R, atol=1e-8)

    def test_random_operator_recovery_vs_normal_equations(self):
        rng = np.random.default_rng(17)
        X = rng.standard_normal((5, 40))
        M = rng.standard_normal((5, 5))
        Xp = M @ X
        A = fit(SnapshotPair(X=X, Xp=Xp, n=5, layout=("state",)), dt=1.0)
        np.testing.assert_allclose(A, M, atol=1e-8)
        oracle = Xp @ X.T @ np.linalg.inv(X @ X.T)
        np.testing.assert_allclose(A, oracle, atol=1e-8)

    def test_degenerate_data(self):
        with pytest.raises(DegenerateDataError):
            fit(pair_from(np.zeros(10)), dt=1.0)

    def test_minimizes_frobenius_residual(self):
        rng = np.random.default_rng(23)
        X = rng.standard_normal((4, 30))
        Xp = rng.standard_normal((4, 30))
        A = fit(SnapshotPair(X=X, Xp=Xp, n=4, layout=("state",)), dt=1.0)
        base = np.linalg.norm(Xp - A @ X)
        for _ in range(20):
            perturbed = A + 1e-4 * rng.standard_normal(A.shape)
            assert np.linalg.norm(Xp - perturbed @ X) >= base - 1e-12


class TestEigendecompose:
    def test_quarter_turn(self):
        lam, modes, omegas = eigendecompose(np.array([[0.0, 1.0], [-1.0, 0.0]]), dt=1.0)
        np.testing.assert_allclose(sorted(lam, key=np.imag), [-1j, 1j], atol=1e-12)
        np.testing.assert_allclose(
            sorted(omegas, key=np.imag), [-1j * np.pi / 2, 1j * np.pi / 2], atol=1e-12
        )

    def test_identity(self):
        lam, _, omegas = eigendecompose(np.eye(3), dt=0.37)
        np.testing.assert_allclose(lam, np.ones(3), atol=1e-14)
        np.testing.assert_allclose(omegas, np.zeros(3), atol=1e-14)

    def test_scalar_log(self):
        _, _, omegas = eigendecompose(np.array([[2.0]]), dt=0.5)
        assert omegas[0] == pytest.approx(np.log(2.0) / 0.5)

    def test_eigen_residual_and_norms(self):
        rng = np.random.default_rng(5)
        A = rng.standard_normal((8, 8))
        lam, modes, _ = eigendecompose(A, dt=1.0)
        scale = np.linalg.norm(A)
        for k in range(8):
            assert np.linalg.norm(A @ modes[:, k] - lam[k] * modes[:, k]) <= 1e-8 * scale
            assert np.linalg.norm(modes[:, k]) == pytest.approx(1.0, abs=1e-10)

    def test_phase_fixing(self):
        rng = np.random.default_rng(9)
        A = rng.standard_normal((6, 6))
        _, modes, _ = eigendecompose(A, dt=1.0)
        for k in range(6):
            pivot = modes[np.argmax(np.abs(modes[:, k])), k]
            assert np.imag(pivot) == pytest.approx(0.0, abs=1e-12)
            assert np.real(pivot) > 0

    def test_conjugate_closure(self):
        rng = np.random.default_rng(31)
        A = rng.standard_normal((7, 7))
        lam, _, _ = eigendecompose(A, dt=1.0)
        for v in lam:
            assert np.min(np.abs(lam - np.conj(v))) <= 1e-8

    def test_principal_branch(self):
        lam, _, omegas = eigendecompose(np.array([[-0.5]]), dt=0.25)
        # ln(-0.5) on the principal branch: Im in (-pi, pi].
        assert np.imag(omegas[0]) == pytest.approx(np.pi / 0.25)


class TestStabilize:
    def test_clamps_growing_mode(self):
        model = model_from([1.0, 2.0, 4.0, 8.0])
        assert np.real(model.omegas[0]) == pytest.approx(np.log(2.0))
        out = stabilize(model)
        assert np.real(out.omegas[0]) == 0.0
        assert abs(out.eigenvalues[0]) == pytest.approx(1.0, abs=1e-14)
        assert out.stabilized[0]

    def test_preserves_oscillation_frequency(self):
        A = 1.05 * rotation(0.2)
        model = model_from(trajectory(A, [1.0, 0.2], 40))
        assert np.all(np.real(model.omegas) > 0)
        out = stabilize(model)
        np.testing.assert_allclose(np.real(out.omegas), 0.0, atol=1e-15)
        np.testing.assert_allclose(
            np.sort(np.imag(out.omegas)), np.sort(np.imag(model.omegas)), atol=1e-12
        )
        np.testing.assert_array_equal(out.modes, model.modes)
        np.testing.assert_array_equal(out.amplitudes, model.amplitudes)

    def test_stable_model_unchanged(self):
        model = model_from(trajectory(0.9 * rotation(0.3), [1.0, 0.0], 30))
        out = stabilize(model)
        np.testing.assert_array_equal(out.omegas, model.omegas)
        assert not out.stabilized.any()

    def test_idempotent(self):
        model = model_from(trajectory(1.1 * rotation(0.15), [1.0, 0.4], 30))
        once = stabilize(model)
        twice = stabilize(once)
        np.testing.assert_array_equal(once.omegas, twice.omegas)
        np.testing.assert_array_equal(once.eigenvalues, twice.eigenvalues)
        np.testing.assert_array_equal(once.stabilized, twice.stabilized)


class TestAmplitudes:
    def test_identity_basis(self):
        model = model_from(trajectory(0.9 * rotation(0.3), [1.0, 0.0], 30))
        model_eye = DmdModel(
            eigenvalues=model.eigenvalues,
            modes=np.eye(2, dtype=complex),
            omegas=model.omegas,
            amplitudes=model.amplitudes,
            dt=1.0,
            n=2,
            names=("a", "b"),
            layout=("state",),
            standardization=identity_record(2),
            stabilized=np.zeros(2, dtype=bool),
            excluded=np.zeros(2, dtype=bool),
            x0=np.array([3.0, -1.0]),
        )
        np.testing.assert_allclose(amplitudes(model_eye, [3.0, -1.0]), [3.0, -1.0], atol=1e-14)

    def test_single_mode_coordinates(self):
        model = model_from(trajectory(0.95 * rotation(0.4), [1.0, 0.1], 40))
        b = amplitudes(model, np.real(model.modes[:, 0]) + 0.0)
        # x0 equal to a mode's real part excites the conjugate pair equally.
        assert np.abs(b[0]) > 1e-3
        recon = model.modes @ b
        np.testing.assert_allclose(recon, np.real(model.modes[:, 0]), atol=1e-8)

    def test_reconstruction_oracle(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((6, 6))
        model = model_from(trajectory(0.5 * A / np.abs(np.linalg.eigvals(A)).max(), rng.standard_normal(6), 50))
        x0 = rng.standard_normal(6)
        b = amplitudes(model, x0)
        direct = np.linalg.solve(model.modes, x0.astype(complex))
        np.testing.assert_allclose(b, direct, atol=1e-8)
        assert np.linalg.norm(model.modes @ b - x0) <= 1e-8


class TestForecast:
    def test_clamped_scalar(self):
        model = stabilize(model_from([1.0, 2.0, 4.0]))
        np.testing.assert_allclose(forecast(model, horizon=3), [[4.0, 4.0, 4.0]], atol=1e-10)

    def test_unclamped_scalar(self):
        model = model_from([1.0, 2.0, 4.0])
        np.testing.assert_allclose(forecast(model, horizon=3), [[8.0, 16.0, 32.0]], atol=1e-9)

    def test_zero_horizon(self):
        model = model_from([1.0, 2.0, 4.0])
        assert forecast(model, horizon=0).shape == (1, 0)

    def test_sinusoid_exact_continuation(self):
        # A pure tone with two phase-shifted channels is exactly representable
        # by one conjugate mode pair; oracle is the analytic continuation.
        spw = 32
        t = np.arange(0, 160)
        values = np.vstack(
            [np.sin(2 * np.pi * t / spw), np.sin(2 * np.pi * t / spw + 0.9)]
        )
        model = stabilize(model_from(values[:, :128], dt=1.0))
        pred = forecast(model, horizon=32)
        truth = values[:, 128:]
        err = np.sqrt(np.mean((pred - truth) ** 2, axis=1)) / truth.std(axis=1)
        assert err.max() <= 1e-6

    def test_realness_of_modal_sum(self):
        rng = np.random.default_rng(3)
        data = trajectory(0.95 * rotation(0.2), [1.0, 0.3], 50) + 0.0
        model = model_from(data)
        t = np.arange(1, 33) * model.dt
        active = ~model.excluded
        total = model.modes[:, active] @ (
            model.amplitudes[active, None] * np.exp(np.outer(model.omegas[active], t))
        )
        assert np.abs(np.imag(total)).max() <= 1e-8


class TestOneStepMatrixForecast:
    def test_scalar(self):
        np.testing.assert_allclose(
            one_step_matrix_forecast(np.array([[2.0]]), [1.0], 3), [[2.0, 4.0, 8.0]]
        )

    def test_rotation_closed_form(self):
        theta = 0.1
        out = one_step_matrix_forecast(rotation(theta), [1.0, 0.0], 5)
        j = np.arange(1, 6)
        np.testing.assert_allclose(out[0], np.cos(j * theta), atol=1e-10)
        np.testing.assert_allclose(out[1], np.sin(j * theta), atol=1e-10)

    def test_agreement_with_modal_path(self):
        rng = np.random.default_rng(41)
        for _ in range(5):
            V = rng.standard_normal((4, 4))
            lam = rng.uniform(0.5, 0.95, 4)
            A = V @ np.diag(lam) @ np.linalg.inv(V)
            data = trajectory(A, rng.standard_normal(4), 40)
            model = model_from(data)
            A_fit = fit(pair_from(data), dt=1.0)
            modal = forecast(model, horizon=30)
            iterated = one_step_matrix_forecast(A_fit, model.x0, 30)
            scale = np.abs(iterated).max()
            assert np.abs(modal - iterated).max() <= 1e-6 * max(scale, 1.0)

    def test_model_variant_matches_matrix(self):
        data = trajectory(0.9 * rotation(0.25), [1.0, 0.1], 40)
        model = model_from(data)
        A_fit = fit(pair_from(data), dt=1.0)
        np.testing.assert_allclose(
            one_step_matrix_forecast(model, model.x0, 10),
            one_step_matrix_forecast(A_fit, model.x0, 10),
            atol=1e-8,
        )


class TestLinearRecovery:
    def test_exact_recovery_of_stable_systems(self):
        rng = np.random.default_rng(2024)
        for _ in range(10):
            p = rng.integers(2, 9)
            Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
            A = float(rng.uniform(0.95, 1.0)) * Q
            data = trajectory(A, rng.standard_normal(p), 64)
            A_fit = fit(pair_from(data), dt=1.0)
            rel = np.linalg.norm(A_fit - A) / np.linalg.norm(A)
            assert rel <= 1e-8


class TestFrequencyRecovery:
    def test_two_tone_via_delay_embedding(self):
        # A scalar channel with two incommensurate tones needs four state
        # dimensions; three shifts provide them and the spectrum contains
        # both tones to machine precision (1e-6 rad/step).
        dt = 0.1
        w1 = 2 * np.pi / (32 * dt)
        w2 = w1 * (1 + np.sqrt(5)) / 2
        t = np.arange(400) * dt
        x = np.sin(w1 * t + 0.3) + 0.7 * np.sin(w2 * t + 1.1)
        ts = TimeSeries(x[None, :], dt, ("x",))
        for nts in (3, 6):
            spec = AugmentationSpec(0, nts)
            lead = spec.lead_required
            pair = build_snapshots(
                ts.slice_steps(lead, 300), ts.slice_steps(0, lead), spec
            )
            model = fit_model(pair, dt, identity_record(1), ("x",))
            im = np.imag(model.omegas[~model.excluded])
            for target in (w1, w2, -w1, -w2):
                assert np.min(np.abs(im - target)) * dt <= 1e-6

    def test_scalar_plain_model_cannot_hold_two_tones(self):
        dt = 0.1
        w1 = 2 * np.pi / (32 * dt)
        t = np.arange(400) * dt
        x = np.sin(w1 * t) + 0.7 * np.sin(w1 * t * 1.618 + 1.1)
        model = model_from(x[:300], dt=dt)
        assert model.dim == 1
        assert np.imag(model.eigenvalues[0]) == 0.0


class TestSerialization:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        data = trajectory(0.95 * rotation(0.3), [1.0, 0.5], 40)
        # Include an excluded zero mode by embedding in a rank-deficient space.
        lift = np.vstack([data, data[0] + data[1]])
        model = stabilize(
            fit_model(
                pair_from(lift), 0.1, identity_record(3), ("a", "b", "c"),
                steps_per_wave=16, train_end=40,
            )
        )
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        np.testing.assert_array_equal(back.eigenvalues, model.eigenvalues)
        np.testing.assert_array_equal(back.modes, model.modes)
        np.testing.assert_array_equal(back.omegas, model.omegas)
        np.testing.assert_array_equal(back.amplitudes, model.amplitudes)
        np.testing.assert_array_equal(back.x0, model.x0)
        np.testing.assert_array_equal(back.stabilized, model.stabilized)
        np.testing.assert_array_equal(back.excluded, model.excluded)
        assert back.names == model.names
        assert back.layout == model.layout
        assert back.dt == model.dt
        assert back.steps_per_wave == 16
        assert back.train_end == 40

    def test_zero_modes_excluded_and_finite_forecast(self):
        data = trajectory(0.9 * rotation(0.2), [1.0, 0.4], 30)
        lift = np.vstack([data, data[0] - 2 * data[1]])
        model = fit_model(pair_from(lift), 1.0, identity_record(3), ("a", "b", "c"))
        assert model.n_excluded == 1
        assert np.isneginf(np.real(model.omegas[model.excluded])).all()
        pred = forecast(model, horizon=20)
        assert np.all(np.isfinite(pred))
