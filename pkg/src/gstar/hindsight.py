"""Offline oracle: best fixed comparator, L*, G*, path length and the
per-round regret ledger."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Ball, Box, ConstraintSet, DimensionError, LossBatch, as_batch, as_vec


@dataclass(frozen=True)
class HindsightReport:
    x_star: np.ndarray
    L_star: float | None
    G_star: float
    solver_residual: float
    iterations: int = 0
    converged: bool = True
    objective_spread: float | None = None  # brute force only
    resolution: float | None = None  # brute force only: final grid cell width


def _measures(losses: LossBatch, x: np.ndarray) -> tuple[float | None, float]:
    G = float(np.sum(losses.grads(x) ** 2))
    inf = losses.infima()
    L = None if inf is None else float(np.sum(losses.values(x) - inf))
    return L, G


def solve_hindsight(losses, set_: ConstraintSet, tol: float = 1e-10,
                    max_iter: int = 1_000_000, x0=None) -> HindsightReport:
    """Minimise the average loss over ``set_`` by accelerated projected gradient.

    The step is ``1/mean_t(L_t)`` with the per-loss smoothness constants on
    the set.  Momentum restarts whenever it points uphill, which keeps the
    method fast on flat (degenerate) minima such as noise-free quartics.  The
    loop stops once the gradient-mapping norm at the current point drops to
    ``tol``.  Pure linear sequences are solved in closed form.
    """
    losses = as_batch(losses)
    if losses.dim != set_.dim:
        raise DimensionError("loss and set dimensions differ")
    T = len(losses)
    Lbar = float(np.mean(losses.smoothness(set_)))
    if Lbar == 0.0:
        x = set_.linear_minimizer(losses.grad_total(np.asarray(set_.center, dtype=float)) / T)
        Ls, Gs = _measures(losses, x)
        return HindsightReport(np.asarray(x, dtype=float), Ls, Gs, 0.0, 0, True)

    step = 1.0 / Lbar
    x = set_.project(np.asarray(set_.center if x0 is None else x0, dtype=float))
    y = x.copy()
    theta = 1.0
    res = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        x_new = set_.project(y - step * (losses.grad_total(y) / T))
        res = float(np.linalg.norm(set_.project(x_new - step * (losses.grad_total(x_new) / T)) - x_new)) / step
        if res <= tol:
            x = x_new
            break
        if float((y - x_new) @ (x_new - x)) > 0:
            theta, y = 1.0, x_new.copy()
        else:
            theta_next = (1.0 + math.sqrt(1.0 + 4.0 * theta * theta)) / 2.0
            y = x_new + (theta - 1.0) / theta_next * (x_new - x)
            theta = theta_next
        x = x_new
    Ls, Gs = _measures(losses, x)
    return HindsightReport(x, Ls, Gs, res, it, res <= tol)


def _grid_axes(lo: np.ndarray, hi: np.ndarray, per_axis: int) -> list[np.ndarray]:
    return [np.linspace(lo[i], hi[i], per_axis) for i in range(lo.size)]


def _bounding_box(set_: ConstraintSet) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(set_, Box):
        return set_.lower.copy(), set_.upper.copy()
    if isinstance(set_, Ball):
        return set_.center - set_.radius, set_.center + set_.radius
    raise TypeError(f"unsupported set {type(set_).__name__}")


def brute_force_hindsight(losses, set_: ConstraintSet, grid_points: int = 100_000,
                          zoom_rounds: int = 3, chunk: int = 2048) -> HindsightReport:
    """Exhaustive grid search for the comparator in one or two dimensions.

    ``grid_points`` is the total number of grid nodes (split evenly across
    axes in 2-D).  Each zoom round regrids a window of two cells around the
    incumbent, so the final resolution shrinks geometrically.  Nodes of a
    Ball's bounding box that fall outside are replaced by their projections,
    which puts grid points on the boundary where constrained optima live.
    Zooming stops at ``sqrt(eps)`` times the set's extent: below that the
    objective is flat to machine precision, and ``resolution`` never claims
    finer than this floor.
    """
    losses = as_batch(losses)
    n = losses.dim
    if n > 2:
        raise DimensionError(f"brute force supports dim <= 2, got {n}")
    per_axis = max(3, int(round(grid_points ** (1.0 / n))))
    box_lo, box_hi = _bounding_box(set_)
    floor = math.sqrt(np.finfo(float).eps) * max(1.0, float(np.max(box_hi - box_lo)))
    lo, hi = box_lo.copy(), box_hi.copy()
    spread = None
    best = None
    cell = None
    for rnd in range(zoom_rounds + 1):
        axes = _grid_axes(lo, hi, per_axis)
        pts = set_.project(np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n))
        obj = np.concatenate([losses.total(pts[i:i + chunk]) for i in range(0, pts.shape[0], chunk)])
        k = int(np.argmin(obj))
        best = pts[k]
        if rnd == 0:
            spread = float(obj.max() - obj.min())
        cell = (hi - lo) / (per_axis - 1)
        if np.max(cell) <= floor:
            break
        lo = np.maximum(best - 2 * cell, box_lo)
        hi = np.minimum(best + 2 * cell, box_hi)
    res = max(float(np.max(cell)), floor)
    Ls, Gs = _measures(losses, best)
    return HindsightReport(best.copy(), Ls, Gs, res, 0, True, spread, res)


def _feasible(set_: ConstraintSet, pts: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    return np.linalg.norm(set_.project(pts) - pts, axis=1) <= tol


def gradient_variation_1d(losses, set_: ConstraintSet, grid: int = 10_000) -> float:
    """``sum_{t>=2} max_x |l_t'(x) - l_{t-1}'(x)|^2`` by grid search on a 1-D set."""
    losses = as_batch(losses)
    if losses.dim != 1:
        raise DimensionError("gradient variation is a 1-D diagnostic")
    lo, hi = _bounding_box(set_)
    xs = np.linspace(lo[0], hi[0], grid)
    total = 0.0
    prev = None
    for f in losses.losses:
        g = f.grad(xs[:, None])[:, 0]
        if prev is not None:
            total += float(np.max((g - prev) ** 2))
        prev = g
    return total


# ---------------------------------------------------------------------------
# Comparator paths and the regret ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComparatorPath:
    points: np.ndarray
    path_length: float

    @classmethod
    def from_points(cls, points, set_: ConstraintSet | None = None, tol: float = 1e-12) -> "ComparatorPath":
        P = np.array(points, dtype=float)
        if P.ndim != 2:
            raise DimensionError("path points must be a (T, n) array")
        if set_ is not None and not np.all(_feasible(set_, P, tol)):
            raise ValueError("comparator path leaves the constraint set")
        length = float(np.sum(np.linalg.norm(np.diff(P, axis=0), axis=1)))
        return cls(P, length)

    @classmethod
    def piecewise_constant(cls, anchors, T: int, set_: ConstraintSet | None = None) -> "ComparatorPath":
        """Equal-length segments, one per anchor point."""
        A = np.array(anchors, dtype=float)
        idx = np.minimum((np.arange(T) * len(A)) // T, len(A) - 1)
        return cls.from_points(A[idx], set_)


@dataclass(frozen=True)
class RegretLedger:
    """Per-round trace of an online run: decision points, charged losses and
    squared gradient norms at the decision points."""

    losses: LossBatch
    iterates: np.ndarray
    loss_t: np.ndarray
    grad_norm_sq: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_iterates(cls, losses, iterates, **meta) -> "RegretLedger":
        losses = as_batch(losses)
        X = np.asarray(iterates, dtype=float)
        if X.shape != (len(losses), losses.dim):
            raise DimensionError(f"iterates have shape {X.shape}, expected {(len(losses), losses.dim)}")
        vals = losses.values_paired(X)
        gsq = np.sum(losses.grads_paired(X) ** 2, axis=1)
        return cls(losses, X, vals, gsq, dict(meta))

    @property
    def T(self) -> int:
        return len(self.losses)

    @property
    def total_loss(self) -> float:
        return float(self.loss_t.sum())

    def regret(self, x) -> float:
        return self.total_loss - float(self.losses.total(as_vec(x)))

    def cumulative_regret(self, x) -> np.ndarray:
        return np.cumsum(self.loss_t - self.losses.values(as_vec(x)))

    def G_T(self, x) -> float:
        return float(np.sum(self.losses.grads(as_vec(x)) ** 2))

    def L_T(self, x) -> float | None:
        inf = self.losses.infima()
        if inf is None:
            return None
        return float(np.sum(self.losses.values(as_vec(x)) - inf))

    def grad_sq_sum(self) -> float:
        """``sum_t ||grad l_t(x^t)||^2``."""
        return float(self.grad_norm_sq.sum())

    def dynamic_regret(self, path: ComparatorPath) -> float:
        return self.total_loss - float(self.losses.values_paired(path.points).sum())

    def path_G(self, path: ComparatorPath) -> float:
        return float(np.sum(self.losses.grads_paired(path.points) ** 2))

    def path_L(self, path: ComparatorPath) -> float | None:
        inf = self.losses.infima()
        if inf is None:
            return None
        return float(np.sum(self.losses.values_paired(path.points) - inf))

    def recompute_ok(self, x, rtol: float = 1e-9) -> bool:
        """Replay the stored iterates one loss at a time and compare."""
        replay = sum(float(f.value(self.iterates[t])) for t, f in enumerate(self.losses.losses))
        replay -= sum(float(f.value(as_vec(x))) for f in self.losses.losses)
        stored = self.regret(x)
        return abs(replay - stored) <= rtol * max(1.0, abs(stored), abs(self.total_loss))
