"""Vectors, constraint sets and the smooth convex loss library.

Every loss in the library except ``SquaredDistance`` is a *ridge* function
``phi(<a, x>)`` of a single linear form.  That shared structure gives closed
forms for the smoothness constant over a set (maximise ``phi''`` over the
interval that ``<a, x>`` sweeps on the set), for the constrained minimum, and
makes it cheap to evaluate a whole loss sequence at once (``LossBatch``).

Losses accept a single point of shape ``(n,)`` or a stack of points of shape
``(m, n)``; values come back with shape ``()`` or ``(m,)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when a point does not live in the space of a set or loss."""


def as_vec(x, *, name: str = "x") -> np.ndarray:
    """Copy ``x`` into a read-only float64 vector, rejecting NaN/Inf."""
    v = np.array(x, dtype=np.float64).reshape(-1) if np.ndim(x) == 0 else np.array(x, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise DimensionError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    v.setflags(write=False)
    return v


def _check_dim(x: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] != n:
        raise DimensionError(f"expected trailing dimension {n}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# Constraint sets
# ---------------------------------------------------------------------------


class ConstraintSet:
    """Closed convex set with exact Euclidean projection."""

    dim: int

    def project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def diameter(self) -> float:
        raise NotImplementedError

    @property
    def center(self) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = _check_dim(x, self.dim)
        return bool(np.all(np.linalg.norm(self.project(x) - x, axis=-1) <= tol))

    def affine_range(self, a: np.ndarray) -> tuple[float, float]:
        """Range ``(min, max)`` of ``<a, x>`` over the set."""
        raise NotImplementedError

    def linear_minimizer(self, g: np.ndarray) -> np.ndarray:
        """A point of the set minimising ``<g, x>``."""
        raise NotImplementedError

    def inflate(self, margin: float) -> "ConstraintSet":
        """A set containing every point within ``margin`` of this one."""
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` random feasible points (not necessarily uniform)."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Ball(ConstraintSet):
    center_: np.ndarray
    radius: float

    def __init__(self, center, radius: float):
        c = as_vec(center, name="center")
        if not (radius > 0 and math.isfinite(radius)):
            raise ValueError(f"radius must be positive and finite, got {radius}")
        object.__setattr__(self, "center_", c)
        object.__setattr__(self, "radius", float(radius))

    def __repr__(self) -> str:
        return f"Ball(center={self.center_.tolist()}, radius={self.radius})"

    @property
    def dim(self) -> int:
        return self.center_.size

    @property
    def center(self) -> np.ndarray:
        return self.center_

    def project(self, x):
        x = _check_dim(x, self.dim)
        d = x - self.center_
        nrm = np.linalg.norm(d, axis=-1, keepdims=True)
        outside = nrm > self.radius
        scale = np.where(outside, self.radius / np.where(nrm > 0, nrm, 1.0), 1.0)
        out = np.where(outside, self.center_ + d * scale, x)
        # rounding can leave a rescaled point a few ulps outside; shrink until it
        # tests as inside so that projecting again is the identity
        for _ in range(64):
            over = np.linalg.norm(out - self.center_, axis=-1, keepdims=True) > self.radius
            if not over.any():
                break
            scale = np.where(over, scale * (1.0 - 2.0**-52), scale)
            out = np.where(over, self.center_ + d * scale, out)
        return out

    def diameter(self) -> float:
        return 2.0 * self.radius

    def affine_range(self, a):
        a = _check_dim(a, self.dim)
        mid = float(a @ self.center_)
        half = self.radius * float(np.linalg.norm(a))
        return mid - half, mid + half

    def linear_minimizer(self, g):
        g = _check_dim(g, self.dim)
        nrm = np.linalg.norm(g)
        if nrm == 0:
            return self.center_.copy()
        return self.center_ - self.radius * g / nrm

    def inflate(self, margin: float) -> "Ball":
        return Ball(self.center_, self.radius + margin)

    def sample(self, rng, size):
        z = rng.standard_normal((size, self.dim))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        r = self.radius * rng.uniform(0.0, 1.0, size=(size, 1)) ** (1.0 / self.dim)
        return self.center_ + r * z


@dataclass(frozen=True, eq=False)
class Box(ConstraintSet):
    lower: np.ndarray
    upper: np.ndarray

    def __init__(self, lower, upper):
        lo = as_vec(lower, name="lower")
        hi = as_vec(upper, name="upper")
        if lo.shape != hi.shape:
            raise DimensionError("lower and upper must have the same shape")
        if np.any(lo > hi):
            raise ValueError("need lower <= upper elementwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __repr__(self) -> str:
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def project(self, x):
        x = _check_dim(x, self.dim)
        return np.clip(x, self.lower, self.upper)

    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    def affine_range(self, a):
        a = _check_dim(a, self.dim)
        lo = np.minimum(a * self.lower, a * self.upper).sum()
        hi = np.maximum(a * self.lower, a * self.upper).sum()
        return float(lo), float(hi)

    def linear_minimizer(self, g):
        g = _check_dim(g, self.dim)
        return np.where(g > 0, self.lower, np.where(g < 0, self.upper, self.center))

    def inflate(self, margin: float) -> "Box":
        return Box(self.lower - margin, self.upper + margin)

    def sample(self, rng, size):
        return rng.uniform(self.lower, self.upper, size=(size, self.dim))


def project(set_: ConstraintSet, x) -> np.ndarray:
    """Euclidean projection of ``x`` onto ``set_``."""
    return set_.project(x)


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------


class LossFn:
    """Smooth convex loss on R^n."""

    dim: int

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def smoothness(self, set_: ConstraintSet) -> float:
        raise NotImplementedError

    def infimum(self) -> float | None:
        """Global infimum over R^n, or ``None`` when unbounded below."""
        raise NotImplementedError

    def constrained_min(self, set_: ConstraintSet) -> float:
        """``min_{u in set_} loss(u)``."""
        raise NotImplementedError


class RidgeLoss(LossFn):
    """Loss of the form ``phi(<a, x>)``.

    Subclasses provide vectorised ``_phi``/``_dphi`` taking the linear form
    ``u`` followed by their scalar parameters (``_params``), the largest
    ``|phi''|`` on an interval, and the minimiser of ``phi`` on an interval.
    """

    a: np.ndarray

    @property
    def dim(self) -> int:
        return self.a.size

    def _params(self) -> tuple:
        return ()

    @staticmethod
    def _phi(u, *params):
        raise NotImplementedError

    @staticmethod
    def _dphi(u, *params):
        raise NotImplementedError

    @staticmethod
    def _curvature_max(lo, hi, *params):
        raise NotImplementedError

    @staticmethod
    def _argmin_u(lo, hi, *params):
        raise NotImplementedError

    def value(self, x):
        x = _check_dim(x, self.dim)
        return self._phi(x @ self.a, *self._params())

    def grad(self, x):
        x = _check_dim(x, self.dim)
        d = self._dphi(x @ self.a, *self._params())
        return np.multiply.outer(d, self.a)

    def smoothness(self, set_):
        lo, hi = set_.affine_range(self.a)
        return float(self._curvature_max(lo, hi, *self._params()) * (self.a @ self.a))

    def constrained_min(self, set_):
        lo, hi = set_.affine_range(self.a)
        return float(self._phi(self._argmin_u(lo, hi, *self._params()), *self._params()))


@dataclass(frozen=True, eq=False)
class LpRegression(RidgeLoss):
    """``|<a, x> - b|^p / p`` for ``p >= 2``."""

    a: np.ndarray
    b: float
    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "a", as_vec(self.a, name="a"))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "p", float(self.p))
        if self.p < 2:
            raise ValueError(f"p must be >= 2, got {self.p}")

    def _params(self):
        return (self.b, self.p)

    @staticmethod
    def _phi(u, b, p):
        return np.abs(u - b) ** p / p

    @staticmethod
    def _dphi(u, b, p):
        r = u - b
        return np.abs(r) ** (p - 2) * r

    @staticmethod
    def _curvature_max(lo, hi, b, p):
        far = np.maximum(np.abs(lo - b), np.abs(hi - b))
        return (p - 1) * far ** (p - 2)

    @staticmethod
    def _argmin_u(lo, hi, b, p):
        return np.clip(b, lo, hi)

    def infimum(self):
        if np.any(self.a != 0):
            return 0.0
        return abs(self.b) ** self.p / self.p


@dataclass(frozen=True, eq=False)
class CrossEntropy(RidgeLoss):
    """``log(1 + exp(-y <a, x>))`` with label ``y`` in {-1, +1}."""

    a: np.ndarray
    y: float

    def __post_init__(self):
        object.__setattr__(self, "a", as_vec(self.a, name="a"))
        if self.y not in (1, -1):
            raise ValueError(f"label must be +1 or -1, got {self.y}")
        object.__setattr__(self, "y", float(self.y))

    def _params(self):
        return (self.y,)

    @staticmethod
    def _phi(u, y):
        return np.logaddexp(0.0, -y * u)

    @staticmethod
    def _dphi(u, y):
        # -y * sigmoid(-y u), written to avoid overflow
        z = y * u
        return -y * np.exp(-np.logaddexp(0.0, z))

    @staticmethod
    def _curvature_max(lo, hi, y):
        return 0.25 + 0.0 * np.asarray(y, dtype=float)

    @staticmethod
    def _argmin_u(lo, hi, y):
        return np.where(np.asarray(y) > 0, hi, lo)

    def infimum(self):
        return 0.0 if np.any(self.a != 0) else math.log(2.0)


@dataclass(frozen=True, eq=False)
class Exponential(RidgeLoss):
    """``exp(-<a, x>)``."""

    a: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", as_vec(self.a, name="a"))

    @staticmethod
    def _phi(u):
        return np.exp(-u)

    @staticmethod
    def _dphi(u):
        return -np.exp(-u)

    @staticmethod
    def _curvature_max(lo, hi):
        return np.exp(-lo)

    @staticmethod
    def _argmin_u(lo, hi):
        return hi

    def infimum(self):
        return 0.0 if np.any(self.a != 0) else 1.0


@dataclass(frozen=True, eq=False)
class ScaledQuadratic(RidgeLoss):
    """One-dimensional ``(a x)^2 / 2``."""

    a: np.ndarray

    def __init__(self, a: float):
        object.__setattr__(self, "a", as_vec([float(a)], name="a"))

    @staticmethod
    def _phi(u):
        return 0.5 * u * u

    @staticmethod
    def _dphi(u):
        return u

    @staticmethod
    def _curvature_max(lo, hi):
        return np.ones_like(np.asarray(lo, dtype=float))

    @staticmethod
    def _argmin_u(lo, hi):
        return np.clip(0.0, lo, hi)

    def infimum(self):
        return 0.0


@dataclass(frozen=True, eq=False)
class QuadraticResidual(RidgeLoss):
    """One-dimensional ``(a x - b)^2 / 2``."""

    a: np.ndarray
    b: float

    def __init__(self, a: float, b: float):
        object.__setattr__(self, "a", as_vec([float(a)], name="a"))
        object.__setattr__(self, "b", float(b))

    def _params(self):
        return (self.b,)

    @staticmethod
    def _phi(u, b):
        return 0.5 * (u - b) ** 2

    @staticmethod
    def _dphi(u, b):
        return u - b

    @staticmethod
    def _curvature_max(lo, hi, b):
        return np.ones_like(np.asarray(b, dtype=float))

    @staticmethod
    def _argmin_u(lo, hi, b):
        return np.clip(b, lo, hi)

    def infimum(self):
        return 0.0 if self.a[0] != 0 else 0.5 * self.b**2


@dataclass(frozen=True, eq=False)
class Linear(RidgeLoss):
    """``<g, x>``; unbounded below unless ``g = 0``."""

    a: np.ndarray

    def __init__(self, g):
        object.__setattr__(self, "a", as_vec(g, name="g"))

    @property
    def g(self) -> np.ndarray:
        return self.a

    @staticmethod
    def _phi(u):
        return u

    @staticmethod
    def _dphi(u):
        return np.ones_like(u)

    @staticmethod
    def _curvature_max(lo, hi):
        return np.zeros_like(np.asarray(lo, dtype=float))

    @staticmethod
    def _argmin_u(lo, hi):
        return lo

    def infimum(self):
        return 0.0 if not np.any(self.a) else None


@dataclass(frozen=True, eq=False)
class SquaredDistance(LossFn):
    """``||x - c||^2 / 2``; the isotropic quadratic used by the bandit and
    envelope fixtures."""

    center: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec(self.center, name="center"))

    @property
    def dim(self) -> int:
        return self.center.size

    def value(self, x):
        d = _check_dim(x, self.dim) - self.center
        return 0.5 * np.sum(d * d, axis=-1)

    def grad(self, x):
        return _check_dim(x, self.dim) - self.center

    def smoothness(self, set_):
        return 1.0

    def infimum(self):
        return 0.0

    def constrained_min(self, set_):
        return float(self.value(set_.project(self.center)))


def loss_value(f: LossFn, x) -> float:
    return f.value(x)


def loss_grad(f: LossFn, x) -> np.ndarray:
    return f.grad(x)


def smoothness_constant(f: LossFn, set_: ConstraintSet) -> float:
    """Smoothness constant of ``f`` valid on ``set_`` (a Hessian bound there)."""
    return f.smoothness(set_)


# ---------------------------------------------------------------------------
# Loss sequences
# ---------------------------------------------------------------------------


class _RidgeGroup:
    def __init__(self, cls, idx, losses):
        self.cls = cls
        self.idx = np.asarray(idx)
        self.A = np.stack([f.a for f in losses])
        self.params = tuple(np.array(p, dtype=float) for p in zip(*[f._params() for f in losses]))

    def value(self, x):  # x (..., n) -> (..., k)
        return self.cls._phi(x @ self.A.T, *self.params)

    def grad(self, x):  # x (n,) -> (k, n)
        return self.cls._dphi(self.A @ x, *self.params)[:, None] * self.A

    def value_paired(self, X):
        return self.cls._phi(np.einsum("ij,ij->i", self.A, X), *self.params)

    def grad_paired(self, X):
        return self.cls._dphi(np.einsum("ij,ij->i", self.A, X), *self.params)[:, None] * self.A

    def grad_sum(self, x):
        return self.cls._dphi(self.A @ x, *self.params) @ self.A


class _GenericGroup:
    """Fallback for loss types without a vectorised form."""

    def __init__(self, idx, losses):
        self.idx = np.asarray(idx)
        self.losses = list(losses)

    def value(self, x):
        return np.stack([np.asarray(f.value(x)) for f in self.losses], axis=-1)

    def grad(self, x):
        return np.stack([f.grad(x) for f in self.losses])

    def value_paired(self, X):
        return np.array([f.value(X[i]) for i, f in enumerate(self.losses)], dtype=float)

    def grad_paired(self, X):
        return np.stack([f.grad(X[i]) for i, f in enumerate(self.losses)])

    def grad_sum(self, x):
        return self.grad(x).sum(axis=0)


class LossBatch(Sequence):
    """An ordered loss sequence ``l_1..l_T`` with vectorised evaluation.

    Losses of the same ridge variant are stacked into one matrix so that the
    whole sequence can be evaluated at a point in a handful of numpy calls.
    """

    def __init__(self, losses: Iterable[LossFn]):
        self.losses = list(losses)
        if not self.losses:
            raise ValueError("need at least one loss")
        dims = {f.dim for f in self.losses}
        if len(dims) != 1:
            raise DimensionError(f"losses disagree on dimension: {sorted(dims)}")
        self.dim = dims.pop()
        by_cls: dict[type, list[int]] = {}
        for i, f in enumerate(self.losses):
            by_cls.setdefault(type(f), []).append(i)
        self._groups = []
        for cls, idx in by_cls.items():
            members = [self.losses[i] for i in idx]
            if issubclass(cls, RidgeLoss):
                self._groups.append(_RidgeGroup(cls, idx, members))
            else:
                self._groups.append(_GenericGroup(idx, members))

    def __len__(self):
        return len(self.losses)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return LossBatch(self.losses[i])
        return self.losses[i]

    def values(self, x) -> np.ndarray:
        """Per-loss values at ``x``: shape ``(T,)``, or ``(m, T)`` for ``x`` of shape ``(m, n)``."""
        x = _check_dim(x, self.dim)
        out = np.empty(x.shape[:-1] + (len(self),))
        for g in self._groups:
            out[..., g.idx] = g.value(x)
        return out

    def total(self, x):
        return self.values(x).sum(axis=-1)

    def grads(self, x) -> np.ndarray:
        x = _check_dim(x, self.dim)
        out = np.empty((len(self), self.dim))
        for g in self._groups:
            out[g.idx] = g.grad(x)
        return out

    def grad_total(self, x) -> np.ndarray:
        x = _check_dim(x, self.dim)
        out = np.zeros(self.dim)
        for g in self._groups:
            out += g.grad_sum(x)
        return out

    def values_paired(self, X) -> np.ndarray:
        """``l_t(X[t])`` for every ``t``."""
        X = _check_dim(X, self.dim)
        out = np.empty(len(self))
        for g in self._groups:
            out[g.idx] = g.value_paired(X[g.idx])
        return out

    def grads_paired(self, X) -> np.ndarray:
        X = _check_dim(X, self.dim)
        out = np.empty((len(self), self.dim))
        for g in self._groups:
            out[g.idx] = g.grad_paired(X[g.idx])
        return out

    def smoothness(self, set_: ConstraintSet) -> np.ndarray:
        return np.array([f.smoothness(set_) for f in self.losses])

    def infima(self) -> np.ndarray | None:
        """Per-loss infima, or ``None`` if any loss is unbounded below."""
        inf = [f.infimum() for f in self.losses]
        if any(v is None for v in inf):
            return None
        return np.array(inf, dtype=float)

    def constrained_minima(self, set_: ConstraintSet) -> np.ndarray:
        return np.array([f.constrained_min(set_) for f in self.losses])


def as_batch(losses) -> LossBatch:
    return losses if isinstance(losses, LossBatch) else LossBatch(losses)
