import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sfwkit.problem import (
    LossModel,
    Problem,
    full_gradient,
    grad_table,
    loss_deriv,
    loss_value,
    objective,
    smoothness_constant,
)


def model(kind, y):
    return LossModel(kind, np.atleast_1d(np.asarray(y, dtype=float)))


def test_loss_value_examples():
    assert loss_value(model("logistic", [1]), 0, 0.0) == pytest.approx(0.6931471805599453, abs=1e-16)
    assert loss_value(model("squared", [3]), 0, 3.0) == 0.0
    assert loss_value(model("geman_mcclure", [0]), 0, 1.0) == 0.5


def test_loss_deriv_examples():
    lg = model("logistic", [1])
    fd = (loss_value(lg, 0, 1e-6) - loss_value(lg, 0, -1e-6)) / 2e-6
    assert loss_deriv(lg, 0, 0.0) == -0.5
    assert fd == pytest.approx(-0.5, abs=1e-9)
    assert loss_deriv(model("squared", [2]), 0, 5.0) == 3.0
    assert loss_deriv(model("geman_mcclure", [0]), 0, 0.0) == 0.0


def test_logistic_overflow_safe():
    lg = model("logistic", [1, -1])
    for z in (1e4, -1e4):
        for i in (0, 1):
            assert math.isfinite(loss_value(lg, i, z))
            assert math.isfinite(loss_deriv(lg, i, z))
    v = lg.values(np.array([-1e4, 1e4]))
    assert np.all(np.isfinite(v)) and v[0] == pytest.approx(1e4)
    assert np.all(np.isfinite(lg.derivs(np.array([1e4, -1e4]))))


def test_smoothness_constants():
    assert smoothness_constant(model("squared", [0])) == 1.0
    assert smoothness_constant(model("logistic", [1])) == 0.25
    assert smoothness_constant(model("geman_mcclure", [0])) == 2.0


def test_geman_mcclure_constant_by_numerical_maximisation():
    # |g''(u)| for g(u) = u^2 / (1 + u^2), checked against finite differences
    u = np.linspace(-20, 20, 400001)
    g = u**2 / (1 + u**2)
    h = u[1] - u[0]
    second = np.abs(np.diff(g, 2)) / h**2
    assert second.max() == pytest.approx(2.0, rel=1e-6)
    closed = np.abs(2 - 6 * u**2) / (1 + u**2) ** 3
    assert closed.max() == 2.0


def test_logistic_constant_is_sup_of_sigmoid_curvature():
    z = np.linspace(-30, 30, 600001)
    s = 1 / (1 + np.exp(-z))
    assert (s * (1 - s)).max() == pytest.approx(0.25, abs=1e-12)


def test_loss_model_validation():
    with pytest.raises(ValueError):
        model("logistic", [0.0])
    with pytest.raises(ValueError):
        model("hinge", [1.0])
    with pytest.raises(ValueError):
        model("squared", [np.nan])
    assert model("geman", [0.0]).kind == "geman_mcclure"


def test_index_checked():
    with pytest.raises(IndexError):
        loss_value(model("squared", [0]), 1, 0.0)


def test_objective_examples():
    assert objective(Problem.build([[1.0]], [0.0], "squared"), np.zeros(1)) == 0.0
    assert objective(Problem.build([[1.0]], [2.0], "squared"), np.zeros(1)) == 2.0
    X = np.array([[1.0, -1.0], [2.0, -2.0], [0.0, 0.0], [3.0, -3.0]])
    p = Problem.build(X, [1, -1, 1, -1], "logistic")
    assert objective(p, np.ones(2)) == pytest.approx(math.log(2), abs=1e-15)


def test_grad_table_examples():
    p = Problem.build(np.eye(2), [0.0, 0.0], "squared")
    assert grad_table(p, np.array([2.0, -2.0])).tolist() == [1.0, -1.0]
    p = Problem.build(np.eye(2), [1.0, -3.0], "squared")
    assert grad_table(p, np.array([1.0, -3.0])).tolist() == [0.0, 0.0]
    p = Problem.build([[1.0]], [1.0], "logistic")
    assert grad_table(p, np.zeros(1)).tolist() == [-0.5]


def test_problem_validation():
    with pytest.raises(ValueError, match="targets"):
        Problem.build(np.eye(2), [0.0], "squared")
    with pytest.raises(ValueError, match="at least one sample"):
        Problem.build(np.zeros((0, 2)), [], "squared")


def test_full_gradient_matches_finite_differences(rng):
    for kind in ("logistic", "squared", "geman_mcclure"):
        y = np.where(rng.random(6) < 0.5, -1.0, 1.0)
        p = Problem.build(rng.standard_normal((6, 3)), y, kind)
        w = rng.standard_normal(3) * 0.3
        g = full_gradient(p, w)
        for j in range(3):
            e = np.zeros(3)
            e[j] = 1e-6
            fd = (objective(p, w + e) - objective(p, w - e)) / 2e-6
            assert g[j] == pytest.approx(fd, abs=1e-7)


def test_vector_and_scalar_paths_agree(rng):
    for kind in ("logistic", "squared", "geman_mcclure"):
        y = np.where(rng.random(30) < 0.5, -1.0, 1.0)
        m = model(kind, y)
        z = rng.standard_normal(30) * 5
        np.testing.assert_allclose(m.derivs(z), [m.deriv(i, z[i]) for i in range(30)], rtol=1e-14, atol=1e-300)
        np.testing.assert_allclose(m.values(z), [loss_value(m, i, z[i]) for i in range(30)], rtol=1e-14)


finite = st.floats(-10.0, 10.0, allow_nan=False)


@given(st.sampled_from(["logistic", "squared", "geman_mcclure"]), finite, finite)
def test_derivative_matches_central_difference(kind, y, z):
    if kind == "logistic":
        y = 1.0 if y >= 0 else -1.0
    m = model(kind, [y])
    h = 1e-6
    fd = (loss_value(m, 0, z + h) - loss_value(m, 0, z - h)) / (2 * h)
    exact = loss_deriv(m, 0, z)
    assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))
