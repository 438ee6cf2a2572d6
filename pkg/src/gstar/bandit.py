"""Two-point zeroth-order feedback: sphere sampling, the gradient estimator,
smoothed-loss utilities and bandit gradient descent (BGD)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConstraintSet, LossFn, as_batch, as_vec
from .hindsight import RegretLedger


def sample_sphere(dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform direction(s) on the unit sphere via normalised Gaussians."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    shape = (dim,) if size is None else (size, dim)
    z = rng.standard_normal(shape)
    nrm = np.linalg.norm(z, axis=-1, keepdims=True)
    while np.any(nrm == 0):  # measure-zero, but never divide by zero
        bad = (nrm == 0)[..., 0]
        z[bad] = rng.standard_normal((int(bad.sum()), dim)) if z.ndim == 2 else rng.standard_normal(dim)
        nrm = np.linalg.norm(z, axis=-1, keepdims=True)
    return z / nrm


def sample_ball(dim: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform points in the unit ball."""
    s = sample_sphere(dim, rng, size)
    return s * rng.uniform(size=(size, 1)) ** (1.0 / dim)


def round_rng(seed: int) -> np.random.Generator:
    """Counter-based stream for one run; draws are consumed in round order."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


@dataclass(frozen=True)
class TwoPointSample:
    s: np.ndarray
    y_plus: np.ndarray
    y_minus: np.ndarray
    g_hat: np.ndarray


def two_point_estimate(f: LossFn, x, mu: float, rng: np.random.Generator | None = None,
                       s: np.ndarray | None = None) -> TwoPointSample:
    """``(n / 2 mu) [l(x + mu s) - l(x - mu s)] s`` for one direction ``s``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    x = as_vec(x)
    if s is None:
        s = sample_sphere(x.size, rng)
    yp = x + mu * s
    ym = x - mu * s
    g = (x.size / (2.0 * mu)) * (float(f.value(yp)) - float(f.value(ym))) * s
    return TwoPointSample(s, yp, ym, g)


def two_point_batch(f: LossFn, x, mu: float, S: np.ndarray) -> np.ndarray:
    """Estimator for every row of the direction matrix ``S``; shape ``(m, n)``."""
    x = as_vec(x)
    diff = f.value(x + mu * S) - f.value(x - mu * S)
    return (x.size / (2.0 * mu)) * diff[:, None] * S


def _mean_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = samples.shape[0]
    return samples.mean(axis=0), samples.std(axis=0, ddof=1) / math.sqrt(m)


def smoothed_value(f: LossFn, x, mu: float, samples: int, rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo estimate of ``E_s l(x + mu s)`` over the unit sphere, with its
    standard error."""
    if samples < 2:
        raise ValueError("need at least two samples for a standard error")
    x = as_vec(x)
    vals = f.value(x + mu * sample_sphere(x.size, rng, samples))
    m, se = _mean_se(vals)
    return float(m), float(se)


def smoothed_grad(f: LossFn, x, mu: float, samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo estimate of ``E_v grad l(x + mu v)`` with ``v`` uniform in the
    unit ball, with per-coordinate standard errors.

    This is the expectation of the two-point estimator.  It is computed from
    true gradients, so it is an independent check on the estimator.
    """
    x = as_vec(x)
    G = f.grad(x + mu * sample_ball(x.size, rng, samples))
    return _mean_se(G)


# ---------------------------------------------------------------------------
# BGD
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    eta: float


@dataclass(frozen=True)
class AdaNorm:
    alpha: float


@dataclass(frozen=True)
class BanditConfig:
    mu: float
    dim: int
    learning: Constant | AdaNorm
    seed: int = 0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.dim < 8:
            raise ValueError(f"two-point BGD guarantees need dim >= 8, got {self.dim}")
        if isinstance(self.learning, Constant) and not self.learning.eta > 0:
            raise ValueError("eta must be positive")
        if isinstance(self.learning, AdaNorm) and not self.learning.alpha > 0:
            raise ValueError("alpha must be positive")

    def check_step(self, L: float) -> None:
        """Reject a constant step outside ``(0, 1/(4 n L))``."""
        if isinstance(self.learning, Constant) and not self.learning.eta * 4 * self.dim * L < 1:
            raise ValueError(f"eta={self.learning.eta} is not below 1/(4 n L)={1 / (4 * self.dim * L)}")


def bandit_smoothness(losses, set_: ConstraintSet, mu: float) -> float:
    """Largest smoothness constant over the set grown by ``mu``, which covers
    every query point."""
    return float(np.max(as_batch(losses).smoothness(set_.inflate(mu))))


def bgd_run(losses, set_: ConstraintSet, cfg: BanditConfig, x0=None) -> RegretLedger:
    """Projected BGD with two-point feedback; losses are charged at ``x^t``.

    Query points ``x^t +- mu s_t`` may leave the set.
    """
    losses = as_batch(losses)
    n = losses.dim
    if n != cfg.dim:
        raise ValueError(f"config dim {cfg.dim} does not match losses dim {n}")
    if isinstance(cfg.learning, Constant):
        cfg.check_step(bandit_smoothness(losses, set_, cfg.mu))
    T = len(losses)
    S = sample_sphere(n, round_rng(cfg.seed), T)
    x = np.array(set_.center if x0 is None else set_.project(as_vec(x0)), dtype=float)
    xs = np.empty((T, n))
    sum_sq = 0.0
    scale = n / (2.0 * cfg.mu)
    for t, f in enumerate(losses.losses):
        xs[t] = x
        s = S[t]
        g = scale * (float(f.value(x + cfg.mu * s)) - float(f.value(x - cfg.mu * s))) * s
        if isinstance(cfg.learning, Constant):
            x = set_.project(x - cfg.learning.eta * g)
        else:
            gsq = float(g @ g)
            if gsq == 0.0:
                continue
            sum_sq += gsq
            x = set_.project(x - cfg.learning.alpha / math.sqrt(sum_sq) * g)
    return RegretLedger.from_iterates(losses, xs, mu=cfg.mu, seed=cfg.seed)
