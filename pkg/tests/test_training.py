import numpy as np
import pytest
from hypothesis import given, strategies as st

from distal.models import LookupTableModel, SplineAnnModel
from distal.splines import dense_basis, n_basis
from distal.training import (
    TrainConfig,
    adam_step,
    evaluate_mae,
    fresh_adam_state,
    loss_value_and_dloss,
    train_epochs,
)
from oracles import sequential_dense_spline


class TestLoss:
    @pytest.mark.parametrize(
        "kind,p,y,expected",
        [
            ("mae", 2.0, 2.0, (0.0, 0.0)),
            ("mae", 3.0, 1.0, (2.0, 1.0)),
            ("mae", 1.0, 3.0, (2.0, -1.0)),
            ("mse", 3.0, 1.0, (4.0, 4.0)),
            ("mse", 0.5, 0.5, (0.0, 0.0)),
        ],
    )
    def test_reference_values(self, kind, p, y, expected):
        value, dvalue = loss_value_and_dloss(kind, p, y)
        assert (float(value), float(dvalue)) == expected

    def test_sign_at_zero_residual(self):
        _, d = loss_value_and_dloss("mae", 1.25, 1.25)
        assert float(d) == 0.0

    def test_vectorized(self):
        v, d = loss_value_and_dloss("mae", np.array([1.0, 0.0]), np.array([0.0, 2.0]))
        np.testing.assert_array_equal(v, [1.0, 2.0])
        np.testing.assert_array_equal(d, [1.0, -1.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite input"):
            loss_value_and_dloss("mae", float("nan"), 0.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown loss kind"):
            loss_value_and_dloss("huber", 1.0, 0.0)


class TestAdam:
    @given(seed=st.integers(0, 2**32 - 1))
    def test_zero_gradient_zero_moments_bit_identity(self, seed):
        params = np.random.default_rng(seed).standard_normal(16)
        params[0] = -0.0  # signed zero must survive too
        before = params.copy()
        adam_step(fresh_adam_state(16), params, np.zeros(16))
        assert np.all(params == before)
        assert np.signbit(params[0])

    def test_first_step_magnitude_is_learning_rate(self):
        # bias correction makes m_hat = g and v_hat = g^2 on step one
        params = np.zeros(1)
        adam_step(fresh_adam_state(1, lr=0.001), params, np.ones(1))
        assert params[0] == pytest.approx(-0.001, rel=1e-6)

    def test_partial_zero_gradient_only_moves_touched(self):
        params = np.array([1.0, 2.0])
        adam_step(fresh_adam_state(2), params, np.array([0.5, 0.0]))
        assert params[0] != 1.0
        assert params[1] == 2.0

    def test_size_mismatch(self):
        with pytest.raises(ValueError, match="size mismatch"):
            adam_step(fresh_adam_state(2), np.zeros(3), np.zeros(3))

    def test_deterministic_trajectory(self):
        g = np.array([0.3, -0.7, 0.1])
        runs = []
        for _ in range(2):
            p = np.array([0.0, 1.0, -1.0])
            s = fresh_adam_state(3)
            for _ in range(25):
                adam_step(s, p, g)
            runs.append(p.copy())
        assert np.all(runs[0] == runs[1])


class TestTrainConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0, batch_size=1)
        with pytest.raises(ValueError):
            TrainConfig(epochs=1, batch_size=0)
        with pytest.raises(ValueError, match="unknown loss kind"):
            TrainConfig(epochs=1, batch_size=1, loss="hinge")


class TestTrainEpochs:
    def test_zero_loss_dataset_leaves_params_bit_identical(self):
        rng = np.random.default_rng(0)
        m = SplineAnnModel(2, 4)
        m.params[:] = rng.uniform(-0.05, 0.05, m.n_params)
        X = rng.uniform(size=(32, 2))
        Y = m.forward_batch(X)  # targets equal current predictions
        before = m.params.copy()
        train_epochs(m, X, Y, TrainConfig(epochs=3, batch_size=8, loss="mae"), fresh_adam_state(m.n_params))
        assert np.all(m.params == before)

    def test_single_point_touches_only_window(self):
        rng = np.random.default_rng(1)
        m = SplineAnnModel(2, 6)
        m.params[:] = rng.uniform(-0.05, 0.05, m.n_params)
        before = m.params.copy()
        x = rng.uniform(size=(1, 2))
        state = fresh_adam_state(m.n_params)
        train_epochs(m, x, np.array([0.9]), TrainConfig(epochs=1, batch_size=1), state)
        touched = np.flatnonzero(m.params != before)
        window = m.param_grad(x[0]).indices
        assert touched.size <= 4 * 2
        assert set(touched.tolist()) <= set(window.tolist())
        moments = np.flatnonzero(state.m != 0.0)
        assert set(moments.tolist()) <= set(window.tolist())

    def test_sparse_touch_on_confined_subregion(self):
        # data confined to a corner: parameters whose support never meets the
        # data stay bit-identical through a full training run
        rng = np.random.default_rng(2)
        m = SplineAnnModel(2, 10)
        m.params[:] = rng.uniform(-0.05, 0.05, m.n_params)
        before = m.params.copy()
        X = rng.uniform(0.0, 0.2, size=(64, 2))
        Y = rng.standard_normal(64)
        train_epochs(m, X, Y, TrainConfig(epochs=5, batch_size=16), fresh_adam_state(m.n_params))
        untouched_by_support = np.ones(m.n_params, dtype=bool)
        for x in X:
            untouched_by_support[m.param_grad(x).indices] = False
        assert np.all(m.params[untouched_by_support] == before[untouched_by_support])
        assert np.any(m.params != before)

    def test_sparse_touch_lookup(self):
        rng = np.random.default_rng(3)
        m = LookupTableModel(2, 8, table=rng.standard_normal(64))
        before = m.table.copy()
        X = rng.uniform(0.5, 1.0, size=(40, 2))
        train_epochs(
            m, X, rng.standard_normal(40), TrainConfig(epochs=2, batch_size=10), fresh_adam_state(m.n_params)
        )
        visited = {int(m.param_grad(x).indices[0]) for x in X}
        untouched = np.setdiff1d(np.arange(64), sorted(visited))
        assert np.all(m.table[untouched] == before[untouched])

    def test_shuffle_determinism(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(size=(50, 2))
        Y = rng.standard_normal(50)
        finals = []
        for _ in range(2):
            m = SplineAnnModel(2, 5)
            m.params[:] = 0.01
            train_epochs(m, X, Y, TrainConfig(epochs=4, batch_size=7, shuffle_seed=99), fresh_adam_state(m.n_params))
            finals.append(m.params.copy())
        assert np.all(finals[0] == finals[1])

    def test_different_shuffle_seed_changes_trajectory(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(size=(50, 2))
        Y = rng.standard_normal(50)
        finals = []
        for seed in (1, 2):
            m = SplineAnnModel(2, 5)
            m.params[:] = 0.01
            train_epochs(m, X, Y, TrainConfig(epochs=2, batch_size=7, shuffle_seed=seed), fresh_adam_state(m.n_params))
            finals.append(m.params.copy())
        assert np.any(finals[0] != finals[1])

    def test_empty_dataset_rejected(self):
        m = SplineAnnModel(1, 2)
        with pytest.raises(ValueError, match="empty dataset"):
            train_epochs(m, np.zeros((0, 1)), np.zeros(0), TrainConfig(1, 1), fresh_adam_state(m.n_params))

    def test_domain_violation_rejected(self):
        m = SplineAnnModel(1, 2)
        with pytest.raises(ValueError, match="domain violation"):
            train_epochs(m, np.array([[1.7]]), np.zeros(1), TrainConfig(1, 1), fresh_adam_state(m.n_params))

    def test_length_mismatch_rejected(self):
        m = SplineAnnModel(1, 2)
        with pytest.raises(ValueError, match="dimension mismatch"):
            train_epochs(m, np.zeros((3, 1)), np.zeros(2), TrainConfig(1, 1), fresh_adam_state(m.n_params))


class TestConvergence:
    def test_linear_target_fit_beats_tolerance(self):
        # y = x is exactly representable (cubic B-splines reproduce linears),
        # which the least-squares oracle confirms; Adam gets close enough.
        z = 3
        X = np.linspace(0.0, 1.0, 256).reshape(-1, 1)
        Y = X[:, 0]
        B = np.stack([dense_basis(z, float(x)) for x in X[:, 0]])
        coeffs, *_ = np.linalg.lstsq(B, Y, rcond=None)
        oracle_mae = float(np.abs(B @ coeffs - Y).mean())
        assert oracle_mae < 1e-10

        m = SplineAnnModel(1, z)
        m.params[:] = np.random.default_rng(7).uniform(-0.05, 0.05, m.n_params)
        train_epochs(
            m, X, Y, TrainConfig(epochs=500, batch_size=32, loss="mse", shuffle_seed=5), fresh_adam_state(m.n_params)
        )
        assert evaluate_mae(m, X, Y) < 0.01

    def test_full_batch_mse_loss_monotone_non_increasing(self):
        rng = np.random.default_rng(42)
        m = SplineAnnModel(2, 2)
        m.params[:] = rng.uniform(-0.05, 0.05, m.n_params)
        X = rng.uniform(size=(64, 2))
        Y = 0.5 * X[:, 0] - 0.3 * X[:, 1] + 0.1
        state = fresh_adam_state(m.n_params)
        losses = []
        for _ in range(300):
            value, _ = loss_value_and_dloss("mse", m.forward_batch(X), Y)
            losses.append(float(value.mean()))
            train_epochs(m, X, Y, TrainConfig(epochs=1, batch_size=64, loss="mse"), state)
        value, _ = loss_value_and_dloss("mse", m.forward_batch(X), Y)
        losses.append(float(value.mean()))
        assert np.all(np.diff(losses) <= 1e-9)
