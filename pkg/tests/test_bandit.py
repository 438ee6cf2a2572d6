import math

import numpy as np
import pytest

from gstar import bounds
from gstar.bandit import (AdaNorm, BanditConfig, Constant, bandit_smoothness, bgd_run, sample_sphere,
                          smoothed_grad, smoothed_value, two_point_batch, two_point_estimate)
from gstar.core import Ball, CrossEntropy, Linear, LossBatch, SquaredDistance


def test_sphere_unit_norm_and_moments():
    rng = np.random.default_rng(0)
    S = sample_sphere(8, rng, 100_000)
    assert np.all(np.abs(np.linalg.norm(S, axis=1) - 1) <= 1e-12)
    assert np.all(np.abs(S.mean(axis=0)) <= 4 / math.sqrt(100_000))
    cov = S.T @ S / S.shape[0]
    assert np.max(np.abs(cov - np.eye(8) / 8)) <= 5e-3


def test_two_point_sample_fields_exact():
    rng = np.random.default_rng(1)
    f = CrossEntropy(np.arange(1.0, 9.0) / 10, 1)
    x = rng.normal(size=8)
    smp = two_point_estimate(f, x, 0.05, rng)
    assert np.array_equal(smp.y_plus, x + 0.05 * smp.s)
    assert np.array_equal(smp.y_minus, x - 0.05 * smp.s)
    expect = (8 / (2 * 0.05)) * (f.value(smp.y_plus) - f.value(smp.y_minus)) * smp.s
    np.testing.assert_array_equal(smp.g_hat, expect)


def test_constant_loss_zero_estimate():
    rng = np.random.default_rng(2)
    S = sample_sphere(8, rng, 100)
    assert np.all(two_point_batch(Linear(np.zeros(8)), np.ones(8), 0.1, S) == 0)


def test_linear_estimator_unbiased():
    rng = np.random.default_rng(3)
    g = rng.normal(size=8)
    S = sample_sphere(8, rng, 100_000)
    G = two_point_batch(Linear(g), rng.normal(size=8), 0.1, S)
    np.testing.assert_allclose(G, 8 * (S @ g)[:, None] * S, rtol=1e-9, atol=1e-12)
    mean, se = G.mean(0), G.std(0, ddof=1) / math.sqrt(G.shape[0])
    assert np.all(np.abs(mean - g) <= 3 * se + 1e-12)


def test_quadratic_estimator_mean_is_gradient():
    rng = np.random.default_rng(4)
    f = SquaredDistance(np.zeros(8))
    x = rng.normal(size=8)
    G = two_point_batch(f, x, 0.3, sample_sphere(8, rng, 100_000))
    mean, se = G.mean(0), G.std(0, ddof=1) / math.sqrt(G.shape[0])
    assert np.all(np.abs(mean - x) <= 3 * se + 1e-12)


def test_smoothed_value_quadratic_and_linear():
    rng = np.random.default_rng(5)
    x = rng.normal(size=8)
    mu = 0.4
    m, se = smoothed_value(SquaredDistance(np.zeros(8)), x, mu, 100_000, rng)
    # ||x + mu s||^2 / 2 = ||x||^2/2 + mu <x,s> + mu^2/2
    assert abs(m - (0.5 * x @ x + mu**2 / 2)) <= 3 * se
    g = rng.normal(size=8)
    m, se = smoothed_value(Linear(g), x, mu, 100_000, rng)
    assert abs(m - g @ x) <= 3 * se


def test_smoothed_value_sandwich():
    rng = np.random.default_rng(6)
    a = rng.uniform(0, 1, 8)
    f = CrossEntropy(a, -1)
    L = (a @ a) / 4
    mu = 0.5
    for _ in range(10):
        x = rng.normal(size=8)
        m, se = smoothed_value(f, x, mu, 20_000, rng)
        assert float(f.value(x)) <= m + 3 * se
        assert m - 3 * se <= float(f.value(x)) + L * mu**2 / 2


def test_gradient_proximity():
    rng = np.random.default_rng(7)
    a = rng.uniform(0, 1, 8)
    f = CrossEntropy(a, 1)
    L = (a @ a) / 4
    mu = 0.2
    for _ in range(100):
        x = rng.normal(size=8)
        G = two_point_batch(f, x, mu, sample_sphere(8, rng, 2000))
        mean, se = G.mean(0), G.std(0, ddof=1) / math.sqrt(G.shape[0])
        assert np.linalg.norm(mean - f.grad(x)) <= L * mu + 3 * np.linalg.norm(se)


def test_bgd_zero_losses_and_determinism():
    S = Ball(np.zeros(8), 1.0)
    zero = LossBatch([Linear(np.zeros(8))] * 30)
    cfg = BanditConfig(0.1, 8, AdaNorm(1.0), seed=3)
    led = bgd_run(zero, S, cfg)
    assert np.all(led.iterates == 0) and led.regret(np.ones(8) / 4) == 0
    rng = np.random.default_rng(0)
    losses = LossBatch([SquaredDistance(c) for c in rng.normal(size=(50, 8)) * 0.2])
    a = bgd_run(losses, S, cfg).iterates
    assert np.array_equal(a, bgd_run(losses, S, cfg).iterates)
    assert not np.array_equal(a, bgd_run(losses, S, BanditConfig(0.1, 8, AdaNorm(1.0), seed=4)).iterates)
    assert np.all(np.linalg.norm(a, axis=1) <= 1 + 1e-12)


def test_bandit_config_validation():
    with pytest.raises(ValueError):
        BanditConfig(0.1, 4, Constant(0.01))
    cfg = BanditConfig(0.1, 8, Constant(0.1))
    with pytest.raises(ValueError):
        cfg.check_step(1.0)  # 1/(4 n L) = 1/32 < 0.1


def test_bandit_smoothness_uses_inflated_set():
    from gstar.core import LpRegression
    f = LpRegression(np.ones(8) / math.sqrt(8), 0.0, 4)
    S = Ball(np.zeros(8), 1.0)
    assert bandit_smoothness([f], S, 0.5) == pytest.approx(3 * 1.5**2)
    assert bandit_smoothness([f], S, 0.5) > f.smoothness(S)


def test_smoothed_grad_oracle_is_independent_of_estimator():
    # E[g_hat] equals the mean true gradient over the mu-ball; check on a nonlinear loss
    rng = np.random.default_rng(8)
    a = rng.uniform(0, 1, 8)
    f = CrossEntropy(a, -1)
    x = rng.normal(size=8) * 0.5
    mu = 0.8
    oracle, se_o = smoothed_grad(f, x, mu, 200_000, rng)
    G = two_point_batch(f, x, mu, sample_sphere(8, rng, 200_000))
    mean, se = G.mean(0), G.std(0, ddof=1) / math.sqrt(G.shape[0])
    assert np.all(np.abs(mean - oracle) <= 3 * np.sqrt(se**2 + se_o**2))


def test_bgd_constant_tuned_step_valid():
    eta, mu = bounds.bgd_constant_tuned(8, 1.0, 2.0, 1000, 5.0)
    assert 0 < eta * 4 * 8 * 1.0 < 1
    assert mu == pytest.approx(2.0 / math.sqrt(2 * 8 * 1000))


@pytest.mark.parametrize("kind", ["ce", "quad", "lp4", "linear"])
def test_second_moment_bound(kind):
    from gstar.core import LpRegression
    rng = np.random.default_rng(9)
    a = rng.uniform(0, 1, 8)
    S_set = Ball(np.zeros(8), 1.0)
    mu = 0.3
    f = {"ce": CrossEntropy(a, 1), "quad": SquaredDistance(rng.normal(size=8)),
         "lp4": LpRegression(a / np.linalg.norm(a), 0.2, 4), "linear": Linear(a)}[kind]
    L = bandit_smoothness([f], S_set, mu)
    x = S_set.sample(rng, 1)[0]
    G = two_point_batch(f, x, mu, sample_sphere(8, rng, 100_000))
    sq = np.sum(G**2, axis=1)
    m, se = sq.mean(), sq.std(ddof=1) / math.sqrt(sq.size)
    gn = float(np.sum(f.grad(x) ** 2))
    assert m + 3 * se <= bounds.bgd_second_moment_bound(8, gn, mu, L)
