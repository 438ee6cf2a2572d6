"""Synthetic loss sequences: the regression and classification streams used
for regret-vs-bound plots, the 1-D separating constructions, and the
Rademacher adversary."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..algorithms import lower_bound_adversary
from ..core import Box, ConstraintSet, CrossEntropy, LossBatch, LpRegression, QuadraticResidual, ScaledQuadratic
from .. import stochastic


@dataclass(frozen=True)
class Instance:
    losses: LossBatch
    set_: ConstraintSet | None = None  # set fixed by the construction, if any
    meta: dict = field(default_factory=dict)


def generate_lp_instance(T: int, sigma: float, seed: int, n: int = 2, p: float = 4.0) -> Instance:
    """``|<a_t, x> - b_t|^p / p`` with ``a_t, x_bar ~ N(0, I/10)`` and
    ``b_t = <a_t, x_bar> + sigma * N(0, 1)``."""
    rng = np.random.default_rng(seed)
    x_bar = rng.normal(0.0, math.sqrt(0.1), size=n)
    A = rng.normal(0.0, math.sqrt(0.1), size=(T, n))
    b = A @ x_bar + sigma * rng.standard_normal(T)
    losses = LossBatch([LpRegression(a, float(bt), p) for a, bt in zip(A, b)])
    return Instance(losses, None, {"x_bar": x_bar.tolist(), "sigma": sigma, "p": p})


def generate_ce_instance(T: int, delta: float, seed: int, n: int = 2) -> Instance:
    """Cross-entropy with ``a_t ~ U[0, 1]^n`` and ``y_t = +1`` with probability ``delta``."""
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.0, 1.0, size=(T, n))
    y = np.where(rng.uniform(size=T) < delta, 1.0, -1.0)
    losses = LossBatch([CrossEntropy(a, float(yt)) for a, yt in zip(A, y)])
    return Instance(losses, None, {"delta": delta})


# -- 1-D constructions ------------------------------------------------------


def vanishing_regression(T: int, p: float = 1.0 / 6.0) -> Instance:
    """``(t^-p x)^2 / 2`` on ``[1, 2]``; G* grows like ``T^(1-4p)`` and L* like ``T^(1-2p)``."""
    losses = LossBatch([ScaledQuadratic(t ** (-p)) for t in range(1, T + 1)])
    return Instance(losses, Box([1.0], [2.0]), {"p": p})


def drifting_regression(T: int) -> Instance:
    """``(a_t x - 1)^2 / 2`` on ``[-1, 1]`` with ``a_t = 1/2 - (t-1)/T``: slowly
    varying gradients but linear L* and G*."""
    losses = LossBatch([QuadraticResidual(0.5 - (t - 1) / T, 1.0) for t in range(1, T + 1)])
    return Instance(losses, Box([-1.0], [1.0]), {})


def alternating_regression(T: int) -> Instance:
    """``(a_t x - b_t)^2 / 2`` on ``[-1, 1]`` alternating ``(1, 1)`` and
    ``(1/2, 1/2)``: every loss vanishes at ``x = 1`` but gradients jump."""
    ab = [(1.0, 1.0) if t % 2 == 0 else (0.5, 0.5) for t in range(1, T + 1)]
    losses = LossBatch([QuadraticResidual(a, b) for a, b in ab])
    return Instance(losses, Box([-1.0], [1.0]), {})


def drifting_closed_form(T: int) -> dict:
    """Exact comparator and measures of ``drifting_regression(T)`` as rationals.

    Valid once the unconstrained minimiser ``6T/(T^2+2)`` lies in ``[-1, 1]``,
    which is ``T >= 6``; smaller ``T`` puts the comparator on the boundary.
    """
    if T < 6:
        raise ValueError(f"closed form needs T >= 6, got {T}")
    Tq = Fraction(T)
    x_star = 6 * Tq / (Tq**2 + 2)
    L_star = Tq * (Tq**2 - 1) / (2 * (Tq**2 + 2))
    G_star = (-32 + 60 * Tq**2 - 33 * Tq**4 + 5 * Tq**6) / (60 * Tq * (2 + Tq**2) ** 2)
    return {"x_star": x_star, "L_star": L_star, "G_star": G_star}


def vanishing_closed_form(T: int, p: float = 1.0 / 6.0) -> dict:
    """Comparator ``x* = 1`` and its measures for ``vanishing_regression``."""
    t = np.arange(1, T + 1, dtype=float)
    a2 = t ** (-2 * p)
    return {"x_star": 1.0, "L_star": float(np.sum(a2) / 2), "G_star": float(np.sum(a2 * a2))}


# -- dispatch ---------------------------------------------------------------


def build_instance(kind: str, params: dict, T: int, seed: int, dim: int = 2) -> Instance:
    p = dict(params)
    if kind == "lp_regression":
        return generate_lp_instance(T, float(p.get("sigma", 0.1)), seed, dim, float(p.get("p", 4.0)))
    if kind == "cross_entropy":
        return generate_ce_instance(T, float(p.get("delta", 0.95)), seed, dim)
    if kind == "prop1_case2":
        return vanishing_regression(T, float(p.get("p", 1.0 / 6.0)))
    if kind == "prop1_case3":
        return drifting_regression(T)
    if kind == "prop1_case4":
        return alternating_regression(T)
    if kind == "lower_bound":
        M = float(p.get("M", 1.0))
        return Instance(lower_bound_adversary(T, M, dim, seed), None, {"M": M})
    if kind.startswith("stochastic_"):
        rng = np.random.default_rng(seed)
        x_star = np.asarray(p.get("x_star", [0.3] + [0.0] * (dim - 1)), dtype=float)
        radius = float(p.get("radius", 1.0))
        if kind == "stochastic_consistent_ls":
            prob = stochastic.consistent_least_squares(x_star, radius)
        elif kind == "stochastic_noisy_ls":
            prob = stochastic.noisy_least_squares(x_star, float(p.get("sigma", 0.1)), radius)
        elif kind == "stochastic_quartic":
            prob = stochastic.quartic_regression(x_star, float(p.get("sigma", 0.1)), radius)
        else:
            raise ValueError(f"unknown instance kind {kind!r}")
        return Instance(prob.sample(rng, T), None, {"x_star": x_star.tolist()})
    raise ValueError(f"unknown instance kind {kind!r}")


def fixtures(T3: int = 7, T4: int = 8, T2: int = 1000) -> dict:
    """The 1-D constructions with their closed-form comparator values."""
    c3 = drifting_closed_form(T3)
    c2 = vanishing_closed_form(T2)
    return {
        "prop1_case2": {"T": T2, "set": [1.0, 2.0], **c2},
        "prop1_case3": {
            "T": T3,
            "set": [-1.0, 1.0],
            "a_t": [0.5 - (t - 1) / T3 for t in range(1, T3 + 1)],
            **{k: float(v) for k, v in c3.items()},
            "exact": {k: str(v) for k, v in c3.items()},
        },
        "prop1_case4": {"T": T4, "set": [-1.0, 1.0], "x_star": 1.0, "L_star": 0.0, "G_star": 0.0,
                        "gradient_variation": (T4 - 1) * 9.0 / 4.0},
    }
