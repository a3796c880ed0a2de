import math

import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from slekan import sle, spline, training
from slekan.errors import DomainError
from slekan.sle import SleParams
from slekan.spline import KnotGrid, SplineMode, SplineModel
from slekan.training import AdamState, Dataset, LossWeights, TrainConfig

from oracles import finite_difference_gradient, random_loss_instance

NO_PENALTY = LossWeights(w_mono=0.0, w_limit=0.0, w_flat=0.0)


def on_model(model, inputs):
    x = np.asarray(inputs, dtype=float)
    return Dataset(x, training.evaluate(model, x))


class TestConfigTypes:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"w_data": 0.0},
            {"w_mono": -1.0},
            {"w_limit": -1.0},
            {"w_flat": -1e-3},
            {"flat_threshold_fraction": 0.0},
            {"flat_threshold_fraction": 1.0},
        ],
    )
    def test_loss_weights_validation(self, kwargs):
        with pytest.raises(DomainError):
            LossWeights(**kwargs)

    @pytest.mark.parametrize(
        "kwargs", [{"learning_rate": 0.0}, {"iterations": -1}, {"iterations": 2.5}, {"seed": -1}, {"seed": 2**64}]
    )
    def test_train_config_validation(self, kwargs):
        with pytest.raises(DomainError):
            TrainConfig(**kwargs)

    def test_defaults(self):
        cfg = TrainConfig()
        assert (cfg.learning_rate, cfg.iterations, cfg.seed) == (0.01, 5000, 0)
        assert cfg.weights == LossWeights(1.0, 10.0, 10.0, 0.01, 0.7)

    @pytest.mark.parametrize(
        "inputs,targets", [([1.0], [1.0]), ([1.0, 2.0], [1.0]), ([1.0, np.nan], [0.0, 1.0]), ([[1.0, 2.0]], [[1.0, 2.0]])]
    )
    def test_dataset_validation(self, inputs, targets):
        with pytest.raises(DomainError):
            Dataset(inputs, targets)


class TestMetrics:
    def test_exact(self):
        m = training.metrics([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
        assert (m.mae, m.rmse, m.r_squared) == (0.0, 0.0, 1.0)

    def test_hand_computed(self):
        m = training.metrics([0.1, 1.1, 2.1], [0.0, 1.0, 2.0])
        assert m.mae == pytest.approx(0.1, rel=1e-12)
        assert m.rmse == pytest.approx(0.1, rel=1e-12)
        assert m.r_squared == pytest.approx(0.985, rel=1e-12)

    def test_constant_targets(self):
        m = training.metrics([1.0, 2.0], [1.0, 1.0])
        assert m.r_squared == -math.inf
        assert m.to_dict()["r_squared"] == "undefined"
        assert training.FitMetrics.from_dict(m.to_dict()) == m
        assert training.metrics([3.0, 3.0], [3.0, 3.0]).r_squared == 1.0

    @pytest.mark.parametrize("p,t", [([], []), ([1.0], [1.0, 2.0])])
    def test_shape_errors(self, p, t):
        with pytest.raises(DomainError):
            training.metrics(p, t)

    @given(
        hnp.arrays(float, st.integers(1, 50), elements=st.floats(-1e3, 1e3)).flatmap(
            lambda t: st.tuples(st.just(t), hnp.arrays(float, t.shape, elements=st.floats(-1e3, 1e3)))
        )
    )
    @example((np.array([1.03764334e-203, 0.0]), np.array([1.0, 1.0])))
    def test_power_mean_ordering(self, pair):
        t, p = pair
        m = training.metrics(p, t)
        assert m.rmse >= m.mae * (1 - 1e-12) >= 0.0
        assert m.r_squared <= 1.0
        ss_tot = float(np.sum((t - t.mean()) ** 2))
        if ss_tot > 0 and float(np.sum((p - t) ** 2)) > 1e-15 * ss_tot:
            assert m.r_squared < 1.0
        if np.array_equal(p, t):
            assert m.r_squared == 1.0


class TestSynthetic:
    def test_grid_example(self):
        d = training.generate_synthetic(SleParams(2.0, 1.0, 1.0), 3, (-1.0, 1.0))
        assert np.array_equal(d.inputs, [-1.0, 0.0, 1.0])
        s = 1 / math.sqrt(2)
        assert np.allclose(d.targets, [-s, 0.0, s], rtol=1e-15, atol=0)
        assert d.mode_tag is training.ModeTag.SYNTHETIC

    @pytest.mark.parametrize("n,rng", [(2, (0.0, 0.0)), (2, (1.0, -1.0)), (1, (0.0, 1.0)), (5, (0.0, np.inf))])
    def test_invalid(self, n, rng):
        with pytest.raises(DomainError):
            training.generate_synthetic(SleParams(2.0, 1.0, 1.0), n, rng)

    def test_saturation_probe(self):
        d = training.generate_synthetic(SleParams(1.3, 0.5, 1.0), 2, (0.0, 1e6))
        assert abs(d.targets[-1]) < 2.0

    def test_random_spacing_seeded(self):
        p = SleParams(2.0, 1.0, 1.0)
        a = training.generate_synthetic(p, 50, (-3, 3), spacing="random", seed=7)
        b = training.generate_synthetic(p, 50, (-3, 3), spacing="random", seed=7)
        c = training.generate_synthetic(p, 50, (-3, 3), spacing="random", seed=8)
        assert a == b and a != c
        assert np.all((a.inputs >= -3) & (a.inputs <= 3))


class TestCompositeLoss:
    def test_interpolating_model_has_zero_loss(self):
        m = SplineModel(KnotGrid(2.0, 3), [0.0, 0.5, 0.8])
        loss, grad = training.composite_loss(m, on_model(m, [-1.5, -0.3, 0.7, 2.5]), 1.0, NO_PENALTY)
        assert loss == 0.0
        assert np.array_equal(grad, np.zeros(3))

    def test_monotone_term_by_hand(self):
        m = SplineModel(KnotGrid(2.0, 3), [0.0, 0.5, 0.4])
        w = LossWeights(w_mono=1.0, w_limit=0.0, w_flat=0.0)
        loss, _ = training.composite_loss(m, on_model(m, [0.5, 1.5]), 10.0, w)
        assert loss == pytest.approx(0.005, rel=1e-12)

    def test_limit_term_by_hand(self):
        m = SplineModel(KnotGrid(2.0, 3), [0.0, 0.5, 1.2])
        w = LossWeights(w_mono=0.0, w_limit=1.0, w_flat=0.0)
        loss, _ = training.composite_loss(m, on_model(m, [0.5, 1.5]), 1.0, w)
        assert loss == pytest.approx(0.04 / 3, rel=1e-12)

    def test_flat_term_by_hand(self):
        # left knots 0, 1, 2, 3 on [0, 4]; only the segment starting at 3 exceeds 0.7 * 4
        m = SplineModel(KnotGrid(4.0, 5), [0.0, 1.0, 1.5, 1.7, 2.0])
        w = LossWeights(w_mono=0.0, w_limit=0.0, w_flat=1.0)
        loss, _ = training.composite_loss(m, on_model(m, [0.5, 2.5]), 10.0, w)
        assert loss == pytest.approx(0.3**2, rel=1e-12)

    def test_empty_dataset(self):
        m = SplineModel(KnotGrid(2.0, 3), [0.0, 0.5, 0.8])
        with pytest.raises(DomainError):
            training.composite_loss(m, None, 1.0, LossWeights())

    def test_residual_mode_rejects_negative_inputs(self):
        m = SplineModel.zeros(KnotGrid(2.0, 3))
        with pytest.raises(DomainError):
            training.composite_loss(m, Dataset([-1.0, 1.0], [0.0, 0.0]), np.inf, NO_PENALTY)

    @given(st.integers(2, 30), st.floats(0.05, 5.0))
    def test_mono_zero_iff_monotone(self, n, bound):
        rng = np.random.default_rng(n)
        c = np.cumsum(np.abs(rng.standard_normal(n)))
        m = SplineModel(KnotGrid(1.0, n), c)
        w = LossWeights(w_mono=1.0, w_limit=0.0, w_flat=0.0)
        data = on_model(m, np.linspace(-1, 1, 7))
        assert training.composite_loss(m, data, bound, w)[0] == 0.0
        if n > 2:
            c[n // 2] = c[n // 2 - 1] - 0.1
            m2 = m.with_coefficients(c)
            assert training.composite_loss(m2, on_model(m2, np.linspace(-1, 1, 7)), bound, w)[0] > 0.0

    @given(st.integers(2, 30), st.floats(0.05, 5.0))
    def test_limit_zero_iff_within_bound(self, n, bound):
        c = np.linspace(0.0, bound, n)
        m = SplineModel(KnotGrid(1.0, n), c)
        w = LossWeights(w_mono=0.0, w_limit=1.0, w_flat=0.0)
        assert training.composite_loss(m, on_model(m, [0.1, 0.9]), bound, w)[0] == 0.0
        m2 = m.with_coefficients(c + np.where(np.arange(n) == n - 1, 1e-3, 0.0))
        assert training.composite_loss(m2, on_model(m, [0.1, 0.9]), bound, w)[0] > 0.0


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        m, data, bound, w = random_loss_instance(rng)
        _, grad = training.composite_loss(m, data, bound, w)
        fd = finite_difference_gradient(m, data, bound, w)
        worst = max(worst, np.linalg.norm(fd - grad) / max(np.linalg.norm(grad), 1e-12))
    assert worst < 1e-5


class TestAdam:
    def test_zero_gradient(self):
        s, delta = training.adam_step(AdamState.zeros(3), np.zeros(3), 0.01)
        assert np.array_equal(delta, np.zeros(3))
        assert s.t == 1 and not s.m.any() and not s.v.any()

    def test_zero_gradient_only_decays_moments(self):
        s = AdamState(np.array([0.2]), np.array([0.5]), t=3)
        s2, _ = training.adam_step(s, [0.0], 0.01)
        assert s2.m[0] == pytest.approx(0.18, rel=1e-15)
        assert s2.v[0] == pytest.approx(0.4995, rel=1e-15)

    def test_first_step_by_hand(self):
        _, delta = training.adam_step(AdamState.zeros(1), [1.0], 0.01)
        # m_hat = 1, v_hat = 1, so delta = -lr / (1 + 1e-8)
        assert abs(delta[0] + 0.01) < 1e-6
        assert delta[0] == pytest.approx(-0.01 / (1 + 1e-8), rel=1e-15)

    @given(hnp.arrays(float, st.integers(1, 10), elements=st.floats(-1e3, 1e3).filter(lambda v: abs(v) > 1e-3)))
    def test_first_step_is_signed_lr(self, g):
        _, delta = training.adam_step(AdamState.zeros(g.size), g, 0.01)
        assert np.allclose(delta, -0.01 * np.sign(g), atol=1e-6)

    def test_constant_gradient_keeps_direction(self):
        s = AdamState.zeros(2)
        s, d1 = training.adam_step(s, [2.0, -3.0], 0.1)
        s, d2 = training.adam_step(s, [2.0, -3.0], 0.1)
        assert np.array_equal(np.sign(d1), np.sign(d2)) and np.array_equal(np.sign(d1), [-1, 1])

    def test_two_steps_against_reference_recurrence(self):
        g1, g2, lr = np.array([0.3, -2.0]), np.array([-0.1, 4.0]), 0.05
        s, _ = training.adam_step(AdamState.zeros(2), g1, lr)
        _, d2 = training.adam_step(s, g2, lr)
        m = 0.9 * 0.1 * g1 + 0.1 * g2
        v = 0.999 * 0.001 * g1**2 + 0.001 * g2**2
        expected = -lr * (m / (1 - 0.81)) / (np.sqrt(v / (1 - 0.999**2)) + 1e-8)
        assert np.allclose(d2, expected, rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            training.adam_step(AdamState.zeros(2), [1.0], 0.01)


class TestTrain:
    @pytest.fixture(scope="class")
    @staticmethod
    def moderate():
        p = SleParams(2.0, 0.5, 1.0)
        data = training.generate_synthetic(p, 200, (-10.0, 10.0))
        bound = p.strain_limit()
        init = SplineModel.linear_ramp(training.default_grid(data), bound)
        model, history = training.train(init, data, bound, TrainConfig())
        return p, data, bound, init, model, history

    def test_moderate_benchmark_accuracy(self, moderate):
        p, data, _, _, model, history = moderate
        x = training.held_out_grid(data)
        m = training.metrics(spline.predict(model, x), sle.strain_from_stress(p, x))
        assert m.r_squared >= 0.999
        assert len(history) == 5000
        assert history[-1] <= history[0]

    def test_post_projection_admissibility(self, moderate):
        _, _, bound, _, model, _ = moderate
        assert model.coefficients[0] == 0.0
        assert model.coefficients.max() <= bound
        assert np.all(spline.segment_slopes(model) >= 0.0)

    def test_deterministic(self, moderate):
        _, data, bound, init, model, history = moderate
        model2, history2 = training.train(init, data, bound, TrainConfig())
        assert model2 == model
        assert np.array_equal(history, history2)

    def test_zero_iterations_projects_initial(self):
        init = SplineModel(KnotGrid(2.0, 3), [0.3, 0.6, 0.4])
        data = Dataset([0.5, 1.0], [0.1, 0.2])
        model, history = training.train(init, data, 0.5, TrainConfig(iterations=0))
        assert len(history) == 0
        assert np.array_equal(model.coefficients, [0.0, 0.5, 0.5])

    def test_residual_mode_is_not_projected(self):
        grid = KnotGrid(1.0, 5)
        x = np.linspace(0.0, 1.0, 9)
        data = Dataset(x, -0.5 + 0 * x)
        cfg = TrainConfig(iterations=2000, weights=LossWeights(w_mono=0.0, w_limit=0.0, w_flat=0.0))
        model, _ = training.train(SplineModel.zeros(grid), data, np.inf, cfg)
        assert model.mode is SplineMode.RESIDUAL
        assert np.allclose(model.coefficients, -0.5, atol=1e-3)

    def test_history_entry_is_loss_before_step(self):
        p = SleParams(2.0, 1.0, 1.0)
        data = training.generate_synthetic(p, 20, (-3.0, 3.0))
        init = SplineModel.linear_ramp(training.default_grid(data, 8), 1.0)
        _, history = training.train(init, data, 1.0, TrainConfig(iterations=3))
        assert history[0] == training.composite_loss(init, data, 1.0, LossWeights())[0]


def test_held_out_grid_is_midpoints():
    d = Dataset([2.0, 0.0, 1.0], [0.0, 0.0, 0.0])
    assert np.array_equal(training.held_out_grid(d), [0.5, 1.5])
