"""Moreau-envelope surrogates restricted to a constraint set.

``EnvelopeLoss`` wraps a base loss as ``min_{y in X} l(y) + gamma/2 ||y - x||^2``.
It is itself a ``LossFn`` (gamma-smooth, convex), so every online learner and
the regret ledger accept it unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Box, ConstraintSet, LossBatch, LossFn, QuadraticResidual, as_batch, as_vec


class ProxError(RuntimeError):
    """The proximal subproblem hit its iteration cap."""


@dataclass(frozen=True, eq=False)
class EnvelopeLoss(LossFn):
    base: LossFn
    set_: ConstraintSet
    gamma: float
    prox_tol: float = 1e-10
    max_iter: int = 100_000

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.base.dim != self.set_.dim:
            raise ValueError("base loss and set dimensions differ")
        object.__setattr__(self, "_Lbase", float(self.base.smoothness(self.set_)))

    @property
    def dim(self) -> int:
        return self.base.dim

    def prox(self, x) -> np.ndarray:
        """``argmin_{y in X} l(y) + gamma/2 ||y - x||^2`` by projected gradient.

        The subproblem is ``(L + gamma)``-smooth and ``gamma``-strongly convex,
        so the iteration contracts by ``L/(L + gamma)``.  We stop once the
        step length times ``max(1, L/gamma)``, which bounds the distance to
        the minimiser, falls below ``prox_tol``.
        """
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            return np.stack([self.prox(xi) for xi in x])
        L, g = self._Lbase, self.gamma
        step = 1.0 / (L + g)
        amp = max(1.0, L / g)
        y = self.set_.project(x)
        for _ in range(self.max_iter):
            y_new = self.set_.project(y - step * (self.base.grad(y) + g * (y - x)))
            moved = float(np.linalg.norm(y_new - y))
            y = y_new
            if moved * amp <= self.prox_tol:
                return y
        raise ProxError(f"prox did not reach tol={self.prox_tol} in {self.max_iter} iterations")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            return np.array([self.value(xi) for xi in x])
        y = self.prox(x)
        return float(self.base.value(y)) + 0.5 * self.gamma * float(np.sum((y - x) ** 2))

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 2:
            return np.stack([self.grad(xi) for xi in x])
        return self.gamma * (x - self.prox(x))

    def smoothness(self, set_=None) -> float:
        return self.gamma

    def infimum(self) -> float:
        return float(self.base.constrained_min(self.set_))

    def constrained_min(self, set_=None) -> float:
        return float(self.base.constrained_min(self.set_))


def prox(e: EnvelopeLoss, x) -> np.ndarray:
    return e.prox(x)


def envelope_value(e: EnvelopeLoss, x) -> float:
    return e.value(x)


def envelope_grad(e: EnvelopeLoss, x) -> np.ndarray:
    return e.grad(x)


def envelopes(losses, set_: ConstraintSet, gamma: float, **kw) -> LossBatch:
    return LossBatch([EnvelopeLoss(f, set_, gamma, **kw) for f in as_batch(losses).losses])


@dataclass(frozen=True)
class ConstrainedMeasures:
    L_X: float
    G_X: float


def constrained_minima(losses, set_: ConstraintSet, method: str = "closed_form", tol: float = 1e-10) -> np.ndarray:
    """Per-round ``min_{u in X} l_t(u)``.

    ``closed_form`` uses each loss's exact constrained minimum;
    ``solver`` runs the hindsight solver on each loss alone.
    """
    losses = as_batch(losses)
    if method == "closed_form":
        return losses.constrained_minima(set_)
    if method == "solver":
        from .hindsight import solve_hindsight

        out = []
        for f in losses.losses:
            rep = solve_hindsight([f], set_, tol=tol)
            out.append(float(f.value(rep.x_star)))
        return np.array(out)
    raise ValueError(f"unknown method {method!r}")


def constrained_measures(losses, set_: ConstraintSet, gamma: float, x, method: str = "closed_form") -> ConstrainedMeasures:
    """``L^X_T(x) = sum_t l_t(x) - min_X l_t`` and
    ``G^X_T(x) = sum_t ||grad of the gamma-envelope of l_t at x||^2``."""
    losses = as_batch(losses)
    x = as_vec(x)
    if not set_.contains(x, tol=1e-12):
        raise ValueError("x must be feasible")
    mins = constrained_minima(losses, set_, method)
    L_X = float(np.sum(losses.values(x) - mins))
    G_X = float(sum(np.sum(EnvelopeLoss(f, set_, gamma).grad(x) ** 2) for f in losses.losses))
    return ConstrainedMeasures(L_X, G_X)


def boundary_family(T: int, target: float = 2.0, interior_rounds: int = 5) -> tuple[LossBatch, Box]:
    """1-D losses ``(x - c_t)^2 / 2`` on ``[-1, 1]`` whose minimisers mostly sit
    outside the set (``c_t = target``), with a few rounds at ``c_t = 0``.

    The constrained small-loss measure stays bounded in ``T`` while the
    unconstrained one grows linearly.
    """
    if abs(target) <= 1:
        raise ValueError("target must lie outside [-1, 1]")
    cs = [0.0 if t < interior_rounds else target for t in range(T)]
    return LossBatch([QuadraticResidual(1.0, c) for c in cs]), Box([-1.0], [1.0])
