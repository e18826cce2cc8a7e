import warnings

import numpy as np
import pytest
from scipy.optimize import minimize, rosen, rosen_der

from revlogit.inference import hessian_from_gradient, robust_covariance, t_ratios
from revlogit.optimize import central_gradient, maximize, relative_gradient


class TestMaximize:
    def test_rosenbrock_matches_scipy(self):
        x0 = np.array([-1.2, 1.0])
        ours = maximize(lambda x: -rosen(x), x0, grad=lambda x: -rosen_der(x), gtol=1e-9)
        ref = minimize(rosen, x0, jac=rosen_der, method="BFGS", options={"gtol": 1e-10})
        assert ours.converged
        np.testing.assert_allclose(ours.x, ref.x, atol=1e-6)
        np.testing.assert_allclose(ours.x, 1.0, atol=1e-6)

    def test_joint_value_and_gradient(self):
        A = np.array([[3.0, 1.0], [1.0, 2.0]])
        b = np.array([1.0, -1.0])
        res = maximize(lambda x: (-0.5 * x @ A @ x + b @ x, -A @ x + b), np.zeros(2), grad=True, gtol=1e-12)
        np.testing.assert_allclose(res.x, np.linalg.solve(A, b), atol=1e-8)

    def test_numeric_gradient_default(self):
        res = maximize(lambda x: -np.sum((x - 3.0) ** 2), np.zeros(3))
        np.testing.assert_allclose(res.x, 3.0, atol=1e-5)

    def test_iteration_cap_reported(self):
        res = maximize(lambda x: -rosen(x), np.array([-1.2, 1.0]), grad=lambda x: -rosen_der(x), max_iter=3)
        assert not res.converged and res.n_iter == 3 and "maximum" in res.message

    def test_nonfinite_start(self):
        with pytest.raises(ValueError):
            maximize(lambda x: np.nan, np.zeros(2))

    def test_rejects_nonfinite_trial_points(self):
        def f(x):
            return -np.inf if x[0] > 1.5 else -(x[0] - 1.4) ** 2

        res = maximize(f, np.array([0.0]), grad=lambda x: np.array([-2 * (x[0] - 1.4)]))
        assert res.x[0] == pytest.approx(1.4, abs=1e-6)


def test_central_gradient_and_relative_size():
    g = central_gradient(lambda x: np.sin(x[0]) * x[1] ** 2, np.array([0.3, 2.0]))
    np.testing.assert_allclose(g, [np.cos(0.3) * 4, 2 * np.sin(0.3) * 2], rtol=1e-8)
    assert relative_gradient(np.array([1e-3, 0.0]), np.array([10.0, 0.0]), 100.0) == pytest.approx(1e-4)


def test_hessian_of_quadratic():
    A = np.array([[4.0, 1.0, 0.0], [1.0, 3.0, -1.0], [0.0, -1.0, 2.0]])
    H = hessian_from_gradient(lambda x: -A @ x, np.array([0.5, -1.0, 2.0]))
    np.testing.assert_allclose(H, -A, atol=1e-8)


def test_sandwich_equals_hc0_regression(rng):
    n, k = 200, 3
    X = np.column_stack([np.ones(n), rng.normal(size=(n, k - 1))])
    y = X @ np.array([1.0, -2.0, 0.5]) + rng.normal(size=n) * (1 + np.abs(X[:, 1]))
    b = np.linalg.lstsq(X, y, rcond=None)[0]
    e = y - X @ b
    scores = X * e[:, None]
    cov = robust_covariance(-X.T @ X, scores)
    bread = np.linalg.inv(X.T @ X)
    meat = np.zeros((k, k))
    for i in range(n):
        meat += e[i] ** 2 * np.outer(X[i], X[i])
    np.testing.assert_allclose(cov, bread @ meat @ bread, rtol=1e-10)
    t = t_ratios(b, cov)
    np.testing.assert_allclose(t, b / np.sqrt(np.diag(bread @ meat @ bread)), rtol=1e-10)


def test_ill_conditioned_hessian_warns():
    H = np.diag([1.0, 1e-14])
    with pytest.warns(RuntimeWarning, match="ill-conditioned"):
        cov = robust_covariance(H, np.ones((4, 2)))
    assert np.all(np.isfinite(cov))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        robust_covariance(np.eye(2), np.ones((4, 2)))


def test_shape_checks():
    with pytest.raises(ValueError):
        robust_covariance(np.ones((2, 3)), np.ones((4, 2)))
    with pytest.raises(ValueError):
        robust_covariance(np.eye(2), np.ones((4, 3)))
