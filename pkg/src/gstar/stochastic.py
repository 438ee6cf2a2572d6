"""Stochastic optimisation through online learners: online-to-batch runs,
interpolation-regime generators and noise-level estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bounds
from .algorithms import play_adaftrl, play_adagrad_norm, play_ogd, AdaFtrlState
from .core import Ball, ConstraintSet, LossBatch, LpRegression, as_vec


@dataclass(frozen=True)
class StochasticProblem:
    """A distribution over losses ``f(., xi)`` on a set.

    ``sampler(rng, T)`` returns ``T`` i.i.d. losses.  ``gap`` maps a point to
    ``f(x) - f(x*)`` exactly when the generator knows it in closed form.
    """

    sampler: Callable[[np.random.Generator, int], LossBatch]
    set_: ConstraintSet | None
    known_x_star: np.ndarray | None
    L: float
    interpolating: bool = False
    gap: Callable[[np.ndarray], float] | None = None
    sigma_f: float | None = None  # closed forms, when known
    sigma_g: float | None = None
    name: str = ""

    def sample(self, rng: np.random.Generator, T: int) -> LossBatch:
        return self.sampler(rng, T)

    def unconstrained(self) -> "StochasticProblem":
        return StochasticProblem(self.sampler, None, self.known_x_star, self.L, self.interpolating,
                                 self.gap, self.sigma_f, self.sigma_g, self.name)


def _uniform_design(rng, T, n):
    return rng.uniform(-1.0, 1.0, size=(T, n))


def _quad_gap(x_star):
    # E[a a^T] = I/3 for a ~ U[-1, 1]^n
    return lambda x: float(np.sum((np.asarray(x) - x_star) ** 2)) / 6.0


def consistent_least_squares(x_star, radius: float = 1.0, center=None) -> StochasticProblem:
    """``(<a, x> - <a, x*>)^2 / 2`` with ``a ~ U[-1, 1]^n``: every sample is
    minimised at ``x*``."""
    x_star = as_vec(x_star, name="x_star")
    n = x_star.size
    c = np.zeros(n) if center is None else as_vec(center)
    set_ = Ball(c, radius)
    if not set_.contains(x_star):
        raise ValueError("x_star must lie in the set")

    def sampler(rng, T):
        A = _uniform_design(rng, T, n)
        return LossBatch([LpRegression(a, float(a @ x_star), 2.0) for a in A])

    return StochasticProblem(sampler, set_, x_star, float(n), True, _quad_gap(x_star), 0.0, 0.0,
                             "consistent_least_squares")


def noisy_least_squares(x_star, sigma: float, radius: float = 1.0) -> StochasticProblem:
    """Least squares with targets ``<a, x*> + sigma * N(0, 1)``."""
    x_star = as_vec(x_star, name="x_star")
    n = x_star.size
    set_ = Ball(np.zeros(n), radius)
    if not set_.contains(x_star):
        raise ValueError("x_star must lie in the set")

    def sampler(rng, T):
        A = _uniform_design(rng, T, n)
        b = A @ x_star + sigma * rng.standard_normal(T)
        return LossBatch([LpRegression(a, float(bi), 2.0) for a, bi in zip(A, b)])

    return StochasticProblem(sampler, set_, x_star, float(n), sigma == 0, _quad_gap(x_star),
                             sigma**2 / 2.0, sigma * math.sqrt(n / 3.0), "noisy_least_squares")


def quartic_regression(x_star, sigma: float, radius: float = 1.0) -> StochasticProblem:
    """``(<a, x> - b)^4 / 4`` with ``b = <a, x*> + sigma * eps``, Rademacher ``eps``.

    The smoothness bound ``3 n (sqrt(n) D + sigma)^2`` holds for every sample
    on the set since ``|<a, x - x*>| <= sqrt(n) D`` there.
    """
    x_star = as_vec(x_star, name="x_star")
    n = x_star.size
    set_ = Ball(np.zeros(n), radius)
    if not set_.contains(x_star):
        raise ValueError("x_star must lie in the set")
    D = set_.diameter()
    L = 3.0 * n * (math.sqrt(n) * D + sigma) ** 2

    def sampler(rng, T):
        A = _uniform_design(rng, T, n)
        b = A @ x_star + sigma * rng.choice(np.array([-1.0, 1.0]), size=T)
        return LossBatch([LpRegression(a, float(bi), 4.0) for a, bi in zip(A, b)])

    def gap(x):
        d = np.asarray(x, dtype=float) - x_star
        s2 = float(d @ d)
        Eu4 = s2 * s2 / 3.0 - 2.0 / 15.0 * float(np.sum(d**4))
        return (Eu4 + 6.0 * sigma**2 * s2 / 3.0) / 4.0

    return StochasticProblem(sampler, set_, x_star, L, sigma == 0, gap,
                             sigma**4 / 4.0, sigma**3 * math.sqrt(n / 3.0), "quartic_regression")


def repeated_loss(loss, set_: ConstraintSet, x_star=None) -> StochasticProblem:
    """Degenerate distribution: every sample is ``loss``."""
    def sampler(rng, T):
        return LossBatch([loss] * T)

    return StochasticProblem(sampler, set_, None if x_star is None else as_vec(x_star),
                             float(loss.smoothness(set_)), name="repeated_loss")


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SigmaEstimate:
    sigma_f: float
    sigma_g: float
    se_f: float
    se_g: float


def estimate_sigmas(problem: StochasticProblem, samples: int, seed: int) -> SigmaEstimate:
    """Monte Carlo ``sigma_f`` and ``sigma_g`` at the known minimiser."""
    if problem.known_x_star is None:
        raise ValueError("estimating sigmas needs a known minimiser")
    rng = np.random.default_rng(seed)
    batch = problem.sample(rng, samples)
    x = problem.known_x_star
    inf = batch.infima()
    fgap = batch.values(x) - inf
    gsq = np.sum(batch.grads(x) ** 2, axis=1)
    sf = float(fgap.mean())
    se_f = float(fgap.std(ddof=1) / math.sqrt(samples))
    m = float(gsq.mean())
    sg = math.sqrt(m)
    se_m = float(gsq.std(ddof=1) / math.sqrt(samples))
    se_g = se_m / (2 * sg) if sg > 0 else 0.0
    return SigmaEstimate(sf, sg, se_f, se_g)


@dataclass(frozen=True)
class InterpolationReport:
    sigma_f: float
    sigma_g: float
    avg_iterate_gap: float
    bound_values: dict = field(default_factory=dict)
    x_bar: np.ndarray | None = None
    mean_iterate_gap: float | None = None  # (1/T) sum_t f(x^t) - f(x*)
    gap_se: float = 0.0


def _gap_of(problem: StochasticProblem, xs: np.ndarray, rng, mc_samples: int) -> tuple[float, float, float]:
    x_bar = xs.mean(axis=0)
    if problem.gap is not None:
        return problem.gap(x_bar), float(np.mean([problem.gap(x) for x in xs])), 0.0
    # fresh-sample Monte Carlo, common random numbers for both points
    fresh = problem.sample(rng, mc_samples)
    diff = fresh.values(x_bar) - fresh.values(problem.known_x_star)
    se = float(diff.std(ddof=1) / math.sqrt(mc_samples))
    base = float(fresh.total(problem.known_x_star)) / mc_samples
    per_pt = np.concatenate([fresh.total(xs[i:i + 256]) for i in range(0, xs.shape[0], 256)]) / mc_samples
    return float(diff.mean()), float(per_pt.mean() - base), se


def _sigmas(problem, seed):
    if problem.sigma_f is not None and problem.sigma_g is not None:
        return problem.sigma_f, problem.sigma_g
    if problem.known_x_star is None:
        return math.nan, math.nan
    est = estimate_sigmas(problem, 10_000, seed + 1)
    return est.sigma_f, est.sigma_g


def online_to_batch(problem: StochasticProblem, algorithm: str, T: int, seed: int,
                    eta: float | None = None, alpha: float | None = None,
                    mc_samples: int = 10_000, x0=None) -> InterpolationReport:
    """Run an online learner on ``T`` i.i.d. samples and score the average iterate."""
    if problem.set_ is None:
        raise ValueError("online-to-batch runs need a bounded set")
    rng = np.random.default_rng(seed)
    losses = problem.sample(rng, T)
    set_ = problem.set_
    D = set_.diameter()
    L = problem.L
    sf, sg = _sigmas(problem, seed)
    x1 = set_.center if x0 is None else set_.project(as_vec(x0))
    d0 = float(np.sum((x1 - problem.known_x_star) ** 2)) if problem.known_x_star is not None else D * D
    if algorithm == "ogd":
        eta = 1.0 / (2.0 * L) if eta is None else eta
        xs = play_ogd(losses, set_, eta, x1)
        bvals = {"o2b_ogd": bounds.o2b_ogd_bound(eta, L, T, d0, sg)}
    elif algorithm == "adagrad_norm":
        alpha = math.sqrt(2) * D / 2 if alpha is None else alpha
        xs = play_adagrad_norm(losses, set_, alpha, x1)
        bvals = {"o2b_adagrad_norm": bounds.o2b_adagrad_bound(L, D, T, sg)}
    elif algorithm == "adaftrl":
        if not isinstance(set_, Ball):
            raise ValueError("AdaFTRL needs a Ball")
        xs = play_adaftrl(losses, set_)
        R = AdaFtrlState.start(set_).R
        bvals = {"o2b_adaftrl": bounds.o2b_adaftrl_bound(R, L, D, T, sg)}
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    bvals["o2b_adagrad_sigma_f"] = bounds.o2b_adagrad_sigma_f_bound(L, D, T, sf)
    if problem.known_x_star is None:
        return InterpolationReport(sf, sg, math.nan, bvals, xs.mean(axis=0), None, 0.0)
    gap, mean_gap, se = _gap_of(problem, xs, rng, mc_samples)
    return InterpolationReport(sf, sg, gap, bvals, xs.mean(axis=0), mean_gap, se)


def adanorm_unconstrained_run(problem: StochasticProblem, alpha: float, T: int, seed: int,
                              x0) -> InterpolationReport:
    """Unconstrained AdaGrad-Norm on a surely-interpolating problem.

    ``bound_values`` holds the gap bound, the squared-distance radius
    ``D_hat`` and the largest observed ``||x^t - x*||^2``.
    """
    if not problem.interpolating or problem.known_x_star is None:
        raise ValueError("needs a surely-interpolating problem with known minimiser")
    rng = np.random.default_rng(seed)
    losses = problem.sample(rng, T)
    x_star = problem.known_x_star
    x1 = as_vec(x0, name="x0")
    xs = play_adagrad_norm(losses, None, alpha, x1)
    G = losses.grads_paired(xs)
    norms = np.linalg.norm(G, axis=1)
    nz = np.flatnonzero(norms > 0)
    g1 = float(norms[nz[0]]) if nz.size else 0.0
    d0 = float(np.sum((x1 - x_star) ** 2))
    L = _data_smoothness(losses, problem.L)
    D_hat = bounds.interpolation_radius(d0, alpha, L, g1)
    dist = np.sum((xs - x_star) ** 2, axis=1)
    bvals = {
        "gap_bound": bounds.interpolation_gap_bound(d0, alpha, L, g1, T),
        "D_hat": D_hat,
        "max_dist_sq": float(dist.max()),
    }
    gap, mean_gap, se = _gap_of(problem, xs, rng, 10_000)
    return InterpolationReport(0.0, 0.0, gap, bvals, xs.mean(axis=0), mean_gap, se)


def _data_smoothness(losses: LossBatch, fallback: float) -> float:
    """Exact smoothness of the drawn sample for quadratic losses (``max ||a_t||^2``);
    the generator's global constant otherwise."""
    if all(isinstance(f, LpRegression) and f.p == 2.0 for f in losses.losses):
        return float(max(f.a @ f.a for f in losses.losses))
    return fallback


@dataclass(frozen=True)
class RateComparison:
    """Average-iterate rates with the gradient-noise level versus the
    loss-noise level, at one horizon."""

    T: int
    bound_sigma_g: float
    bound_sigma_f: float
    noise_term_ratio: float  # sqrt(2 L sigma_f) / sigma_g

    @property
    def ratio(self) -> float:
        return self.bound_sigma_f / self.bound_sigma_g


def compare_rates(problem: StochasticProblem, T: int, est: SigmaEstimate) -> RateComparison:
    D = problem.set_.diameter()
    L = problem.L
    bg = bounds.o2b_adagrad_bound(L, D, T, est.sigma_g)
    bf = bounds.o2b_adagrad_sigma_f_bound(L, D, T, est.sigma_f)
    noise = math.sqrt(2 * L * est.sigma_f) / est.sigma_g if est.sigma_g > 0 else math.inf
    return RateComparison(T, bg, bf, noise)
