"""Full-information online learners.

Every learner is an immutable state plus a pure ``*_step`` function, so a run
is a fold over the gradient sequence.  The ``play_*`` helpers do that fold
against a loss sequence and return the ``(T, n)`` array of decision points
``x^1..x^T`` (the point each loss was charged at).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import Ball, ConstraintSet, DimensionError, Linear, LossBatch, as_batch, as_vec


def _grad_vec(grad, dim: int) -> np.ndarray:
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != (dim,):
        raise DimensionError(f"gradient has shape {g.shape}, expected ({dim},)")
    return g


def _start_point(set_: ConstraintSet, x0) -> np.ndarray:
    if x0 is None:
        return np.array(set_.center, dtype=float)
    return set_.project(as_vec(x0, name="x0"))


# ---------------------------------------------------------------------------
# OGD
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OgdState:
    x: np.ndarray
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")


def ogd_step(state: OgdState, grad, set_: ConstraintSet) -> OgdState:
    g = _grad_vec(grad, state.x.size)
    return OgdState(set_.project(state.x - state.eta * g), state.eta)


def play_ogd(losses, set_: ConstraintSet, eta: float, x0=None) -> np.ndarray:
    losses = as_batch(losses)
    state = OgdState(_start_point(set_, x0), float(eta))
    xs = np.empty((len(losses), losses.dim))
    for t, f in enumerate(losses.losses):
        xs[t] = state.x
        state = ogd_step(state, f.grad(state.x), set_)
    return xs


# ---------------------------------------------------------------------------
# AdaGrad-Norm
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdaGradNormState:
    x: np.ndarray
    alpha: float
    sum_sq: float = 0.0
    eta: float = math.inf  # last step size used; inf before the first update

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


def adagrad_norm_step(state: AdaGradNormState, grad, set_: ConstraintSet | None) -> AdaGradNormState:
    """One AdaGrad-Norm update; a zero gradient leaves the state untouched.

    ``set_=None`` runs the unconstrained variant.
    """
    g = _grad_vec(grad, state.x.size)
    gsq = float(g @ g)
    if gsq == 0.0:
        return state
    s = state.sum_sq + gsq
    eta = state.alpha / math.sqrt(s)
    x = state.x - eta * g
    if set_ is not None:
        x = set_.project(x)
    return AdaGradNormState(x, state.alpha, s, eta)


def play_adagrad_norm(losses, set_: ConstraintSet | None, alpha: float, x0=None) -> np.ndarray:
    losses = as_batch(losses)
    if set_ is None:
        x = as_vec(x0, name="x0").copy()
    else:
        x = _start_point(set_, x0)
    state = AdaGradNormState(x, float(alpha))
    xs = np.empty((len(losses), losses.dim))
    for t, f in enumerate(losses.losses):
        xs[t] = state.x
        state = adagrad_norm_step(state, f.grad(state.x), set_)
    return xs


# ---------------------------------------------------------------------------
# AdaFTRL with r(x) = lam * ||x - c||^2 / 2 on a ball
# ---------------------------------------------------------------------------


def _h(theta: np.ndarray, lam: float, B: float) -> float:
    """Conjugate of ``lam ||x||^2 / 2`` restricted to the radius-``B`` ball."""
    nt = float(np.linalg.norm(theta))
    if nt <= lam * B:
        return nt * nt / (2.0 * lam)
    return B * nt - lam * B * B / 2.0


def _grad_h(theta: np.ndarray, lam: float, B: float) -> np.ndarray:
    nt = float(np.linalg.norm(theta))
    if nt <= lam * B:
        return theta / lam
    return B * theta / nt


def bregman_h(x: np.ndarray, y: np.ndarray, lam: float, B: float) -> float:
    """``V_h(x, y) = h(x) - h(y) - <grad h(y), x - y>``."""
    return _h(x, lam, B) - _h(y, lam, B) - float(_grad_h(y, lam, B) @ (x - y))


def delta_increment(L_new: np.ndarray, L_old: np.ndarray, delta: float, lam: float, B: float) -> float:
    """``delta * V_h(-L_new/delta, -L_old/delta)``, with its limit at ``delta = 0``."""
    if delta > 0:
        inc = delta * bregman_h(-L_new / delta, -L_old / delta, lam, B)
        return max(inc, 0.0)  # Bregman divergences are >= 0; clip rounding noise
    n_new = float(np.linalg.norm(L_new))
    n_old = float(np.linalg.norm(L_old))
    if n_old == 0.0:
        return B * n_new
    return max(B * (n_new - float(L_old @ L_new) / n_old), 0.0)


@dataclass(frozen=True)
class AdaFtrlState:
    L_cum: np.ndarray
    delta: float
    lam: float
    ball: Ball
    x: np.ndarray

    @classmethod
    def start(cls, ball: Ball, lam: float | None = None) -> "AdaFtrlState":
        if not isinstance(ball, Ball):
            raise TypeError("AdaFTRL needs a Ball constraint set")
        D = ball.diameter()
        lam_min = 1.0 / (2.0 * D * D)
        lam = lam_min if lam is None else float(lam)
        if lam < lam_min * (1 - 1e-12):
            raise ValueError(f"lambda={lam} is below 1/(2 D^2)={lam_min}")
        return cls(np.zeros(ball.dim), 0.0, lam, ball, np.array(ball.center, dtype=float))

    @property
    def R(self) -> float:
        """``max_x r(x) + 1`` over the ball."""
        return self.lam * self.ball.radius**2 / 2.0 + 1.0


def _ftrl_point(L: np.ndarray, delta: float, lam: float, ball: Ball) -> np.ndarray:
    nL = float(np.linalg.norm(L))
    if nL == 0.0:
        return np.array(ball.center, dtype=float)
    B = ball.radius
    r = B if delta == 0.0 else min(nL / (delta * lam), B)
    return ball.center - r * (L / nL)


def adaftrl_step(state: AdaFtrlState, grad) -> AdaFtrlState:
    g = _grad_vec(grad, state.x.size)
    L_new = state.L_cum + g
    B = state.ball.radius
    delta = state.delta + delta_increment(L_new, state.L_cum, state.delta, state.lam, B)
    x = _ftrl_point(L_new, delta, state.lam, state.ball)
    return AdaFtrlState(L_new, delta, state.lam, state.ball, x)


def play_adaftrl(losses, ball: Ball, lam: float | None = None) -> np.ndarray:
    losses = as_batch(losses)
    state = AdaFtrlState.start(ball, lam)
    xs = np.empty((len(losses), losses.dim))
    for t, f in enumerate(losses.losses):
        xs[t] = state.x
        state = adaftrl_step(state, f.grad(state.x))
    return xs


# ---------------------------------------------------------------------------
# Sword_small: hedge over a learning-rate grid of OGD experts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Fixed:
    delta: float


@dataclass(frozen=True)
class TimeVarying:
    pass


@dataclass(frozen=True)
class SwordConfig:
    T: int
    M: float
    L: float
    D: float
    delta_mode: Fixed | TimeVarying = field(default_factory=TimeVarying)

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not (self.M > 0 and self.D > 0):
            raise ValueError("M and D must be positive")
        if self.L < 0:
            raise ValueError("L must be non-negative")

    @property
    def eta_min(self) -> float:
        return self.D / self.M * math.sqrt(1.0 / (2.0 * self.T))

    @property
    def N(self) -> int:
        if self.L == 0:
            raise ValueError("the learning-rate grid needs L > 0")
        ratio = self.M * math.sqrt(2.0 * self.T) / (self.L * self.D)
        return max(1, math.ceil(math.log2(ratio))) if ratio > 1 else 1

    def grid(self) -> tuple[np.ndarray, bool]:
        """Learning rates ``eta_min * 2^(i-1)``, capped at ``1/(4L)``.

        Returns the grid and whether any entry was capped.
        """
        raw = self.eta_min * 2.0 ** np.arange(self.N)
        cap = 1.0 / (4.0 * self.L)
        return np.minimum(raw, cap), bool(np.any(raw > cap))


@dataclass(frozen=True)
class SwordState:
    experts: tuple[OgdState, ...]
    log_w: np.ndarray
    x: np.ndarray
    grad_sq_sum: float = 0.0

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_w - self.log_w.max())
        return w / w.sum()


def _combine(experts, log_w) -> np.ndarray:
    w = np.exp(log_w - log_w.max())
    w /= w.sum()
    return w @ np.stack([e.x for e in experts])


def sword_start(cfg: SwordConfig, set_: ConstraintSet, x0=None) -> SwordState:
    etas, _ = cfg.grid()
    x = _start_point(set_, x0)
    experts = tuple(OgdState(x.copy(), float(eta)) for eta in etas)
    log_w = np.full(len(experts), -math.log(len(experts)))
    return SwordState(experts, log_w, _combine(experts, log_w))


def sword_step(state: SwordState, cfg: SwordConfig, grad_at_x, set_: ConstraintSet) -> SwordState:
    g = _grad_vec(grad_at_x, state.x.size)
    gsq = state.grad_sq_sum + float(g @ g)
    if isinstance(cfg.delta_mode, Fixed):
        delta = cfg.delta_mode.delta
    else:
        N = len(state.experts)
        delta = math.sqrt((2.0 + math.log(N)) / (cfg.D**2 * gsq)) if gsq > 0 else 0.0
    # meta loss uses the experts' plays from this round, before they move
    lin = np.array([float(g @ e.x) for e in state.experts])
    log_w = state.log_w - delta * lin
    log_w = log_w - (log_w.max() + math.log(np.exp(log_w - log_w.max()).sum()))
    experts = tuple(ogd_step(e, g, set_) for e in state.experts)
    return SwordState(experts, log_w, _combine(experts, log_w), gsq)


def play_sword(losses, set_: ConstraintSet, cfg: SwordConfig, x0=None) -> np.ndarray:
    losses = as_batch(losses)
    state = sword_start(cfg, set_, x0)
    xs = np.empty((len(losses), losses.dim))
    for t, f in enumerate(losses.losses):
        xs[t] = state.x
        state = sword_step(state, cfg, f.grad(state.x), set_)
    return xs


def sword_grad_bound(losses, set_: ConstraintSet, L: float) -> float:
    """``M = max_t ||grad l_t(center)|| + L D``, a bound on every gradient over the set."""
    losses = as_batch(losses)
    G = losses.grads(np.asarray(set_.center, dtype=float))
    return float(np.linalg.norm(G, axis=1).max()) + L * set_.diameter()


def play_sword_oracle(losses, set_: ConstraintSet, T: int, M: float, L: float, D: float,
                      passes: int = 5, rtol: float = 1e-3, x0=None) -> tuple[np.ndarray, float]:
    """Sword with the fixed delta tuned to its own gradient sum.

    That delta depends on the trace it produces, so we iterate: a first pass
    with the time-varying schedule measures ``sum_t ||grad l_t(x^t)||^2``,
    then each further pass reruns with the delta built from the previous
    measurement, until the sum changes by less than ``rtol``.
    Returns the iterates and the delta used for them.
    """
    losses = as_batch(losses)
    cfg = SwordConfig(T, M, L, D, TimeVarying())
    xs = play_sword(losses, set_, cfg, x0)
    S = float(np.sum(losses.grads_paired(xs) ** 2))
    N = cfg.N
    delta = 0.0
    for _ in range(passes):
        delta = math.sqrt((2.0 + math.log(N)) / (D * D * S)) if S > 0 else 0.0
        xs = play_sword(losses, set_, replace(cfg, delta_mode=Fixed(delta)), x0)
        S_new = float(np.sum(losses.grads_paired(xs) ** 2))
        done = abs(S_new - S) <= rtol * max(S, 1e-300)
        S = S_new
        if done:
            break
    return xs, delta


# ---------------------------------------------------------------------------
# Adversary
# ---------------------------------------------------------------------------


def lower_bound_adversary(T: int, M: float, dim: int, seed: int) -> LossBatch:
    """Linear losses ``M * eps_t * e_1`` with Rademacher ``eps_t``."""
    if not M > 0:
        raise ValueError("M must be positive")
    if T < 1 or dim < 1:
        raise ValueError("T and dim must be >= 1")
    rng = np.random.default_rng(seed)
    eps = rng.choice(np.array([-1.0, 1.0]), size=T)
    e = np.zeros(dim)
    e[0] = 1.0
    return LossBatch([Linear(M * s * e) for s in eps])
