import numpy as np
import pytest

from ltsf_dnode import pipeline
from ltsf_dnode.node import ComponentParams, ModelParams, SolverConfig, TrajectoryStats
from ltsf_dnode.pipeline import VARIANTS, make_spec
from ltsf_dnode.training import (AdamState, TrainConfig, adam_step, backward, evaluate_mse,
                                 loss, train)

import gradcheck


def test_loss_examples():
    t = np.random.default_rng(0).standard_normal((4, 3))
    assert loss(t, t, {}, 0.0, 0.0) == 0.0
    assert loss(t + 1.0, t, {}, 0.0, 0.0) == 1.0
    stats = {"trend": TrajectoryStats(kinetic=2.0), "residual": TrajectoryStats()}
    assert loss(t, t, stats, 0.5, 0.0) == 1.0
    assert loss(t, t, [TrajectoryStats(0.0, 3.0)], 0.0, 0.5) == 1.5
    with pytest.raises(ValueError):
        loss(t, t[:2], {}, 0.0, 0.0)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(lambda_k=1.5)
    with pytest.raises(ValueError):
        TrainConfig(lambda_j=-0.1)
    with pytest.raises(ValueError):
        TrainConfig(patience=0)


def test_dec_b_gradient_with_zero_weights():
    spec = make_spec("ltsf_dnode", 8, 4, kernel_size=3, period=4)
    rng = np.random.default_rng(1)
    model = pipeline.init_model(spec, 2, rng)
    for comp in model.components.values():
        comp.dec_w[:] = 0.0
    x = rng.standard_normal((1, 8, 2))
    y = rng.standard_normal((1, 4, 2))
    _, grads = backward((x, y), model, spec)
    assert gradcheck.check(spec, model, x, y, 0.0, 0.0) < 1e-6
    # seasonality is not denormalized: its bias gradient is the plain MSE gradient
    pred = pipeline.forward(spec, model, x).pred
    expected = (2.0 / pred.size) * (pred - y)[0].sum(axis=1)
    np.testing.assert_allclose(grads.seasonality.dec_b, expected, atol=1e-14)


@pytest.mark.parametrize("variant", VARIANTS)
@pytest.mark.parametrize("lam", [0.0, 0.3])
def test_gradients_every_variant(variant, lam):
    spec, model, x, y = gradcheck.random_instance(7, variant)
    assert gradcheck.check(spec, model, x, y, lam, lam) < 1e-4


@pytest.mark.parametrize("method", ["euler", "rk4"])
def test_gradients_per_feature_weights(method):
    spec, model, x, y = gradcheck.random_instance(11, method=method, individual=True)
    assert gradcheck.check(spec, model, x, y, 0.3, 0.3) < 1e-4


def test_gradients_time_axis_norm():
    spec, model, x, y = gradcheck.random_instance(13)
    spec = pipeline.PipelineSpec(**{**spec.__dict__, "norm_axis": "time"})
    assert gradcheck.check(spec, model, x, y, 0.3, 0.3) < 1e-4


def test_fixed_instance_l8_h4_f2():
    rng = np.random.default_rng(21)
    spec = make_spec("ltsf_dnode", 8, 4, kernel_size=3, period=4,
                     solver=SolverConfig("rk4", 2))
    model = pipeline.init_model(spec, 2, rng)
    for _, arr in model.arrays():
        arr[...] = rng.standard_normal(arr.shape) * 0.3
    x = rng.standard_normal((3, 8, 2))
    y = rng.standard_normal((3, 4, 2))
    assert gradcheck.check(spec, model, x, y, 0.0, 0.0) < 1e-4
    assert gradcheck.check(spec, model, x, y, 0.2, 0.7) < 1e-4


def test_gradient_shapes_mirror_params():
    spec, model, x, y = gradcheck.random_instance(3)
    _, grads = backward((x, y), model, spec, 0.1, 0.1)
    for (k1, a), (k2, g) in zip(model.arrays(), grads.arrays()):
        assert k1 == k2 and a.shape == g.shape and np.isfinite(g).all()


def _scalar_model(value):
    return ModelParams({"series": ComponentParams(None, np.array([[value]]), np.zeros(1))})


def test_adam_zero_gradient_leaves_params():
    model = _scalar_model(1.5)
    state = AdamState.zeros(model)
    adam_step(model, model.zeros_like(), state, 0.01)
    assert model.components["series"].dec_w[0, 0] == 1.5


def test_adam_first_step_bound_and_monotone():
    for g in (1e-6, 0.3, 250.0):
        model = _scalar_model(0.0)
        grads = _scalar_model(g)
        state = AdamState.zeros(model)
        adam_step(model, grads, state, 0.01)
        first = model.components["series"].dec_w[0, 0]
        assert -0.01 * (1 + 1e-6) <= first < 0
        adam_step(model, grads, state, 0.01)
        assert model.components["series"].dec_w[0, 0] < first


def _teacher_data(seed, spec, n):
    rng = np.random.default_rng(seed)
    teacher = pipeline.init_model(spec, 2, rng)
    for _, arr in teacher.arrays():
        arr[...] = rng.standard_normal(arr.shape) * 0.3
    x = np.cumsum(rng.standard_normal((n, spec.L, 2)), axis=1) * 0.3
    return x, pipeline.predict(spec, teacher, x)


def test_teacher_student_reduces_mse_tenfold():
    spec = make_spec("ltsf_dnode", 16, 4, kernel_size=5, period=8)
    x, y = _teacher_data(0, spec, 256)
    student = pipeline.init_model(spec, 2, np.random.default_rng(99))
    before = evaluate_mse(spec, student, x[:200], y[:200])
    best, report = train(spec, (x[:200], y[:200]), (x[200:], y[200:]), student,
                         TrainConfig(learning_rate=0.01, batch_size=16, max_epochs=60))
    after = evaluate_mse(spec, best, x[:200], y[:200])
    assert before / after >= 10
    assert report.train_losses[0] / report.train_losses[report.best_epoch] >= 10


def test_early_stopping_invariants():
    spec = make_spec("ltsf_dnode", 16, 4, kernel_size=5, period=8)
    x, y = _teacher_data(1, spec, 120)
    noisy = y + np.random.default_rng(2).standard_normal(y.shape)
    student = pipeline.init_model(spec, 2, np.random.default_rng(0))
    best, report = train(spec, (x[:60], noisy[:60]), (x[60:], noisy[60:]), student,
                         TrainConfig(learning_rate=0.05, batch_size=8, max_epochs=80,
                                     patience=3))
    assert 0 <= report.best_epoch < report.epochs_run
    assert len(report.val_losses) == report.epochs_run
    assert report.best_val_mse == report.val_losses[report.best_epoch]
    assert all(report.best_val_mse <= v for v in report.val_losses[report.best_epoch:])
    assert evaluate_mse(spec, best, x[60:], noisy[60:]) == report.best_val_mse
    if report.stopped_early:
        assert report.epochs_run - 1 - report.best_epoch == 3


def test_patience_stops_on_degenerate_data():
    spec = make_spec("linear", 8, 2)
    x = np.ones((40, 8, 1))
    y = np.ones((40, 2, 1))
    model = pipeline.init_model(spec, 1, np.random.default_rng(0))
    _, report = train(spec, (x, y), (x, y), model,
                      TrainConfig(learning_rate=0.05, batch_size=8, max_epochs=500,
                                  patience=5))
    assert report.stopped_early
    assert report.epochs_run < 500
    assert report.best_val_mse < 1e-6


def test_training_is_deterministic():
    spec = make_spec("ltsf_dnode", 16, 4, kernel_size=5, period=8)
    x, y = _teacher_data(3, spec, 80)
    cfg = TrainConfig(batch_size=8, max_epochs=4, lambda_k=0.1, lambda_j=0.1, seed=5)
    runs = []
    for _ in range(2):
        init = pipeline.init_model(spec, 2, np.random.default_rng(0))
        runs.append(train(spec, (x[:60], y[:60]), (x[60:], y[60:]), init, cfg))
    (m1, r1), (m2, r2) = runs
    assert r1.to_dict(include_timing=False) == r2.to_dict(include_timing=False)
    for (_, a), (_, b) in zip(m1.arrays(), m2.arrays()):
        assert a.tobytes() == b.tobytes()


def test_divergence_returns_partial_report():
    spec = make_spec("ltsf_dnode", 16, 4, kernel_size=5, period=8)
    x, y = _teacher_data(4, spec, 60)
    init = pipeline.init_model(spec, 2, np.random.default_rng(0))
    best, report = train(spec, (x[:40], y[:40]), (x[40:], y[40:]), init,
                         TrainConfig(learning_rate=1e200, batch_size=8, max_epochs=5))
    assert report.error is not None
    assert best.all_finite()


def test_train_rejects_empty_split():
    spec = make_spec("linear", 4, 2)
    model = pipeline.init_model(spec, 1, np.random.default_rng(0))
    with pytest.raises(ValueError):
        train(spec, (np.zeros((0, 4, 1)), np.zeros((0, 2, 1))),
              (np.zeros((1, 4, 1)), np.zeros((1, 2, 1))), model, TrainConfig())
