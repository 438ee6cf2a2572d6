import math

import numpy as np
import pytest

from gstar.core import (Ball, Box, CrossEntropy, DimensionError, Exponential, Linear, LossBatch, LpRegression,
                        QuadraticResidual, ScaledQuadratic, SquaredDistance, as_vec, loss_grad, loss_value, project,
                        smoothness_constant)


def _fd_grad(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f.value(x + e) - f.value(x - e)) / (2 * h)
    return g


def _families(rng, n=3):
    """One random instance of every loss variant with a feasible set for it."""
    a = rng.normal(size=n)
    return [
        (LpRegression(a, rng.normal(), 2), Ball(np.zeros(n), 1.0)),
        (LpRegression(a, rng.normal(), 4), Ball(np.zeros(n), 1.0)),
        (LpRegression(a, rng.normal(), 3.5), Box(-np.ones(n), np.ones(n))),
        (CrossEntropy(a, 1.0), Ball(np.zeros(n), 2.0)),
        (CrossEntropy(a, -1.0), Box(-np.ones(n), np.ones(n))),
        (Exponential(a), Ball(np.zeros(n), 1.0)),
        (ScaledQuadratic(rng.uniform(0.2, 2)), Box([1.0], [2.0])),
        (QuadraticResidual(rng.uniform(-1, 1), rng.normal()), Box([-1.0], [1.0])),
        (Linear(a), Ball(np.zeros(n), 1.0)),
        (SquaredDistance(rng.normal(size=n)), Ball(np.zeros(n), 1.0)),
    ]


# -- vectors and sets -------------------------------------------------------


def test_as_vec_rejects_nonfinite_and_is_readonly():
    with pytest.raises(ValueError):
        as_vec([1.0, np.nan])
    with pytest.raises(ValueError):
        as_vec([np.inf])
    v = as_vec([1.0, 2.0])
    with pytest.raises(ValueError):
        v[0] = 3.0


def test_project_examples():
    np.testing.assert_allclose(project(Ball([0, 0], 1), [2.0, 0.0]), [1.0, 0.0])
    np.testing.assert_allclose(project(Box([-1.0], [1.0]), [0.5]), [0.5])
    np.testing.assert_allclose(project(Ball([0, 0], 1), [3.0, 4.0]), [0.6, 0.8], atol=1e-15)


def test_ball_projection_matches_boundary_grid_search():
    # oracle: nearest of 200k boundary points on the unit circle
    theta = np.linspace(0, 2 * np.pi, 200_000, endpoint=False)
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = rng.normal(size=2) * 4
        if np.linalg.norm(x) <= 1:
            continue
        best = pts[np.argmin(np.linalg.norm(pts - x, axis=1))]
        np.testing.assert_allclose(project(Ball([0, 0], 1), x), best, atol=1e-4)


def test_project_dimension_mismatch():
    with pytest.raises(DimensionError):
        project(Ball([0, 0], 1), [1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        loss_value(CrossEntropy([1.0, 0.0], 1), [1.0])


def test_diameters():
    assert Ball([1, 2, 3], 0.5).diameter() == 1.0
    assert Box([0, 0], [3, 4]).diameter() == pytest.approx(5.0)


@pytest.mark.parametrize("set_", [Ball([0.3, -0.2, 0.1], 0.7), Box([-1, 0, 2], [1, 0.5, 3])])
def test_projection_idempotent_and_nonexpansive(set_):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(1000, 3)) * 3
    Y = rng.normal(size=(1000, 3)) * 3
    PX = set_.project(X)
    assert np.array_equal(set_.project(PX), PX)
    PY = set_.project(Y)
    assert np.all(np.linalg.norm(PX - PY, axis=1) <= np.linalg.norm(X - Y, axis=1) + 1e-15)
    assert all(set_.contains(p) for p in PX[:50])


def test_box_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        Box([1.0], [0.0])


# -- losses -----------------------------------------------------------------


def test_loss_value_examples():
    assert loss_value(CrossEntropy([1.0, 0.0], 1), [0.0, 0.0]) == pytest.approx(math.log(2))
    assert loss_value(LpRegression([1.0], 0.0, 4), [2.0]) == pytest.approx(4.0)
    # a_t = 64^(-1/6) = 1/2, so (a x)^2 / 2 = 1/8 at x = 1
    assert loss_value(ScaledQuadratic(64 ** (-1 / 6)), [1.0]) == pytest.approx(0.125)


def test_loss_grad_examples():
    g = np.array([0.3, -2.0])
    np.testing.assert_array_equal(loss_grad(Linear(g), [5.0, 7.0]), g)
    np.testing.assert_allclose(loss_grad(Exponential([1.0]), [0.0]), [-1.0])
    ce = CrossEntropy([1.0], 1)
    np.testing.assert_allclose(loss_grad(ce, [0.0]), _fd_grad(ce, np.array([0.0])), rtol=1e-8)
    np.testing.assert_allclose(loss_grad(ce, [0.0]), [-0.5], rtol=1e-12)


def test_cross_entropy_stable_at_large_margins():
    f = CrossEntropy([1.0], 1)
    assert np.isfinite(f.value([-800.0])) and f.value([-800.0]) == pytest.approx(800.0)
    assert f.value([800.0]) >= 0
    assert np.all(np.isfinite(f.grad([800.0])))


def test_smoothness_examples():
    a = np.array([0.6, -0.8])
    assert smoothness_constant(CrossEntropy(a, 1), Ball([0, 0], 1)) == pytest.approx(0.25)
    assert smoothness_constant(QuadraticResidual(0.7, 3.0), Box([-1], [1])) == pytest.approx(0.49)
    f = LpRegression(a, 0.5, 4)
    S = Ball([0, 0], 1)
    # <a, x> sweeps [-1, 1] on the unit ball so max |<a,x> - b| = 1.5
    assert smoothness_constant(f, S) == pytest.approx(3 * 1.0 * 1.5**2)


def test_lp_smoothness_dominates_sampled_hessian():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a = rng.normal(size=2)
        f = LpRegression(a, rng.normal(), 4)
        S = Ball(rng.normal(size=2) * 0.3, rng.uniform(0.2, 1.5))
        X = S.sample(rng, 2000)
        hess_norm = 3 * (X @ a - f.b) ** 2 * (a @ a)
        assert hess_norm.max() <= f.smoothness(S) * (1 + 1e-12)
        assert hess_norm.max() >= 0.8 * f.smoothness(S)  # bound is tight on the boundary


def test_infimum_absent_for_linear():
    assert Linear([1.0, 0.0]).infimum() is None
    assert Linear([0.0, 0.0]).infimum() == 0.0
    b = LossBatch([Linear([1.0]), QuadraticResidual(1, 1)])
    assert b.infima() is None


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(5)
    for f, S in _families(rng):
        X = S.sample(rng, 100)
        for x in X:
            g = f.grad(x)
            fd = _fd_grad(f, x)
            scale = max(np.linalg.norm(fd), 1e-3)
            assert np.linalg.norm(g - fd) / scale <= 1e-5, type(f).__name__


def test_dual_strong_convexity():
    rng = np.random.default_rng(7)
    for f, S in _families(rng):
        L = f.smoothness(S)
        X, Y = S.sample(rng, 1000), S.sample(rng, 1000)
        gx, gy = f.grad(X), f.grad(Y)
        lhs = f.value(X) - f.value(Y) - np.sum(gy * (X - Y), axis=1)
        dg = np.sum((gx - gy) ** 2, axis=1)
        if L == 0:
            assert np.all(dg == 0)
            continue
        assert np.min(lhs - dg / (2 * L)) >= -1e-12 * max(1.0, np.abs(f.value(X)).max()), type(f).__name__


def test_self_boundedness():
    rng = np.random.default_rng(8)
    for f, S in _families(rng):
        inf = f.infimum()
        if inf is None:
            continue
        L = f.smoothness(S)
        X = S.sample(rng, 1000)
        g2 = np.sum(f.grad(X) ** 2, axis=1)
        assert np.all(g2 <= 2 * L * (f.value(X) - inf) + 1e-12), type(f).__name__


def test_loss_batch_matches_per_loss_evaluation():
    rng = np.random.default_rng(2)
    fs = [f for f, _ in _families(rng, n=3) if getattr(f, "dim", 3) == 3]
    b = LossBatch(fs)
    x = rng.normal(size=3)
    np.testing.assert_allclose(b.values(x), [f.value(x) for f in fs], rtol=1e-14)
    np.testing.assert_allclose(b.grads(x), np.stack([f.grad(x) for f in fs]), rtol=1e-14)
    X = rng.normal(size=(len(fs), 3))
    np.testing.assert_allclose(b.values_paired(X), [f.value(xx) for f, xx in zip(fs, X)], rtol=1e-14)
    np.testing.assert_allclose(b.grads_paired(X), np.stack([f.grad(xx) for f, xx in zip(fs, X)]), rtol=1e-14)
    assert isinstance(b[1:3], LossBatch) and len(b[1:3]) == 2


def test_constrained_min_matches_sampling():
    rng = np.random.default_rng(4)
    for f, S in _families(rng):
        X = S.sample(rng, 20000)
        assert f.constrained_min(S) <= f.value(X).min() + 1e-12
        assert f.constrained_min(S) >= f.value(X).min() - 0.05 * (1 + abs(f.value(X).min()))
