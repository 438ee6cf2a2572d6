"""Closed-form regret bounds and the audit that compares them with a run.

Each ``*_bound`` function is a plain formula.  ``bound_evaluators`` wires the
formulas to a hindsight report, a ledger and a dict of constants, and returns
one ``BoundCheck`` per bound it can evaluate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .hindsight import HindsightReport, RegretLedger


# -- static comparator ------------------------------------------------------


def ogd_bound(eta: float, L: float, D: float, G: float) -> float:
    """OGD with ``eta < 1/L``: ``D^2/(2 eta) + eta G / (2 (1 - eta L))``."""
    if eta <= 0 or eta * L >= 1:
        raise ValueError("need eta in (0, 1/L)")
    return D * D / (2 * eta) + eta * G / (2 * (1 - eta * L))


def ogd_tuned_eta(D: float, L: float, G_star: float) -> float:
    cap = math.inf if L == 0 else 1.0 / (2.0 * L)
    if G_star <= 0:
        return cap if math.isfinite(cap) else 1.0  # zero losses: any step works
    return min(D / math.sqrt(G_star), cap)


def ogd_tuned_bound(L: float, D: float, G_star: float) -> float:
    return max(2 * L * D * D, math.sqrt(2 * G_star) * D)


def ogd_large_step_bound(eta: float, L: float, dist0_sq: float, L_T: float, G_T: float) -> float:
    """OGD with ``eta < 2/L``; pays for ``L_T`` as well as ``G_T``."""
    c = 2 - eta * L
    if not (eta > 0 and c > 0):
        raise ValueError("need eta in (0, 2/L)")
    return dist0_sq / (c * eta) + eta / c * (L * L_T + G_T / c)


def adagrad_norm_bound(D: float, L: float, G: float) -> float:
    """AdaGrad-Norm with ``alpha = sqrt(2) D / 2``."""
    return math.sqrt(2) * math.sqrt(G) * D + L * D * D


def adagrad_norm_bound_alpha(alpha: float, D: float, L: float, G: float) -> float:
    """AdaGrad-Norm with any ``alpha``: ``c sqrt(G) + c^2 L / 2`` with
    ``c = alpha + D^2 / (2 alpha)``; equals ``adagrad_norm_bound`` at the default."""
    c = alpha + D * D / (2 * alpha)
    return c * math.sqrt(G) + c * c * L / 2


def adaftrl_bound(R: float, D: float, L: float, G: float) -> float:
    return math.sqrt(3) * R * math.sqrt(G) * D + 2 * R * R * L * D * D


def lower_bound(D: float, G_star: float) -> float:
    """Regret every learner must pay in expectation on the Rademacher adversary."""
    return math.sqrt(G_star) * D / 4


def small_loss_gstar(L: float, L_star: float) -> float:
    """Upper bound ``2 L L*`` on ``G*``."""
    return 2 * L * L_star


# -- dynamic comparator -----------------------------------------------------


def dynamic_ogd_bound(eta: float, D: float, P: float, G_hat: float) -> float:
    return D * (D + 2 * P) / (2 * eta) + eta * G_hat


def dynamic_ogd_eta(D: float, P: float, G_hat: float, L: float) -> float:
    cap = 1.0 / (4.0 * L)
    if G_hat <= 0:
        return cap
    return min(math.sqrt(D * (D + 2 * P) / (2 * G_hat)), cap)


def sword_bound(N: int, D: float, P: float, G_hat: float, L: float) -> float:
    c = 3 + math.log(N)
    return 8 * math.sqrt(c * D * D + 2 * P * D) * math.sqrt(G_hat) + 8 * c * L * D * D + 8 * L * D * P


# -- bandit -----------------------------------------------------------------


def bgd_constant_bound(eta: float, n: int, L: float, D: float, mu: float, T: int, G: float) -> float:
    """Expected regret of two-point BGD with a constant step ``eta < 1/(4 n L)``."""
    k = 4 * n * eta * L
    if not 0 < k < 1:
        raise ValueError("need eta in (0, 1/(4 n L))")
    c = 4 * n * eta / (1 - k)
    return (D * D / (2 * eta) + c * G + c * T * L * L * mu * mu
            + eta * T * n * n * L * L * mu * mu / 2 + T * L * mu * mu / 2)


def bgd_constant_tuned(n: int, L: float, D: float, T: int, G_star: float) -> tuple[float, float]:
    """Step size and smoothing radius for the tuned constant-step bound."""
    eta = 1 / (8 * n * L) if G_star <= 0 else min(D / (4 * math.sqrt(n * G_star)), 1 / (8 * n * L))
    mu = D / math.sqrt(2 * n * L * T)
    return eta, mu


def bgd_constant_tuned_bound(n: int, L: float, D: float, G_star: float) -> float:
    return max(8 * n * L * D * D, 4 * D * math.sqrt(n * G_star)) + L * D * D / 2


def bgd_adanorm_defaults(n: int, D: float, T: int) -> tuple[float, float]:
    """``alpha`` and ``mu`` for the adaptive-step bound."""
    return math.sqrt(2) * D / 2, D / (n * math.sqrt(T))


def bgd_adanorm_bound(n: int, L: float, D: float, G: float) -> float:
    return max(16 * L * D * D * n, 4 * D * math.sqrt(n * G)) + 5 * L * D * D


def bgd_second_moment_bound(n: int, grad_norm_sq: float, mu: float, L: float) -> float:
    return 2 * n * grad_norm_sq + 0.5 * n * n * mu * mu * L * L


# -- stochastic -------------------------------------------------------------


def o2b_ogd_bound(eta: float, L: float, T: int, dist0_sq: float, sigma_g: float) -> float:
    if not 0 < eta * L < 1:
        raise ValueError("need eta in (0, 1/L)")
    return dist0_sq / (2 * eta * T) + eta / (2 * (1 - eta * L)) * sigma_g**2


def o2b_adagrad_bound(L: float, D: float, T: int, sigma_g: float) -> float:
    return L * D * D / T + math.sqrt(2) * D * sigma_g / math.sqrt(T)


def o2b_adaftrl_bound(R: float, L: float, D: float, T: int, sigma_g: float) -> float:
    return 2 * R * R * L * D * D / T + math.sqrt(3) * R * D * sigma_g / math.sqrt(T)


def o2b_adagrad_sigma_f_bound(L: float, D: float, T: int, sigma_f: float) -> float:
    """The AdaGrad-Norm rate with ``sigma_g`` replaced by ``sqrt(2 L sigma_f)``,
    which is what self-boundedness alone gives."""
    return o2b_adagrad_bound(L, D, T, math.sqrt(2 * L * sigma_f))


def interpolation_radius(dist0_sq: float, alpha: float, L: float, g1: float) -> float:
    """Bound on ``||x^t - x*||^2`` for unconstrained AdaGrad-Norm under
    interpolation; ``g1`` is the norm of the first nonzero gradient.

    When ``alpha L <= g1`` every step is at most ``1/L`` and the distance never
    grows, so the radius is the starting distance.
    """
    if g1 <= 0 or alpha * L <= g1:
        return dist0_sq
    return dist0_sq + alpha / L * g1 + 2 * alpha**2 * math.log(alpha * L / (math.sqrt(math.e) * g1))


def interpolation_gap_bound(dist0_sq: float, alpha: float, L: float, g1: float, T: int) -> float:
    """Average-iterate gap ``L/(2T) (D_hat/(2 alpha) + alpha)^2``."""
    if g1 <= 0:
        return 0.0
    inner = interpolation_radius(dist0_sq, alpha, L, g1) / (2 * alpha) + alpha
    return L / (2 * T) * inner * inner


# -- sequence inequality ----------------------------------------------------


def sequence_lemma_slack(a: np.ndarray, b: np.ndarray, alpha: float, beta: float) -> float:
    """RHS minus LHS of
    ``alpha sqrt(sum ||a_t||^2) - beta sum ||a_t - b_t||^2 <= alpha sqrt(sum ||b_t||^2) + alpha^2/(4 beta)``.
    """
    lhs = alpha * math.sqrt(float(np.sum(a * a))) - beta * float(np.sum((a - b) ** 2))
    rhs = alpha * math.sqrt(float(np.sum(b * b))) + alpha * alpha / (4 * beta)
    return rhs - lhs


# ---------------------------------------------------------------------------
# Audit wiring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundCheck:
    name: str
    measured: float
    bound: float
    passed: bool
    kind: str = "upper"  # "upper": measured <= bound; "lower": measured >= bound


@dataclass(frozen=True)
class BoundAudit:
    checks: tuple[BoundCheck, ...]
    skipped: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> BoundCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


class MissingConstantError(KeyError):
    pass


def _need(constants: Mapping, *keys: str) -> list:
    missing = [k for k in keys if constants.get(k) is None]
    if missing:
        raise MissingConstantError(f"missing constants: {', '.join(missing)}")
    return [constants[k] for k in keys]


def _ogd(rep, led, c):
    L, D, eta = _need(c, "L", "D", "eta")
    return led.regret(rep.x_star), ogd_bound(eta, L, D, rep.G_star)


def _ogd_tuned(rep, led, c):
    L, D = _need(c, "L", "D")
    return led.regret(rep.x_star), ogd_tuned_bound(L, D, rep.G_star)


def _ogd_large(rep, led, c):
    L, eta = _need(c, "L", "eta")
    if rep.L_star is None:
        raise MissingConstantError("L* is undefined for these losses")
    d0 = float(np.sum((led.iterates[0] - rep.x_star) ** 2))
    return led.regret(rep.x_star), ogd_large_step_bound(eta, L, d0, rep.L_star, rep.G_star)


def _adagrad(rep, led, c):
    L, D = _need(c, "L", "D")
    return led.regret(rep.x_star), adagrad_norm_bound(D, L, rep.G_star)


def _adaftrl(rep, led, c):
    L, D, R = _need(c, "L", "D", "R")
    return led.regret(rep.x_star), adaftrl_bound(R, D, L, rep.G_star)


def _lower(rep, led, c):
    (D,) = _need(c, "D")
    return led.regret(rep.x_star), lower_bound(D, rep.G_star)


def _small_loss(rep, led, c):
    (L,) = _need(c, "L")
    if rep.L_star is None:
        raise MissingConstantError("L* is undefined for these losses")
    return rep.G_star, small_loss_gstar(L, rep.L_star)


def _path(c):
    path = c.get("path")
    if path is None:
        raise MissingConstantError("missing constants: path")
    return path


def _dynamic_ogd(rep, led, c):
    D, eta = _need(c, "D", "eta")
    path = _path(c)
    return led.dynamic_regret(path), dynamic_ogd_bound(eta, D, path.path_length, led.path_G(path))


def _sword(rep, led, c):
    L, D, N = _need(c, "L", "D", "N")
    path = _path(c)
    return led.dynamic_regret(path), sword_bound(N, D, path.path_length, led.path_G(path), L)


def _bgd_constant(rep, led, c):
    L, D, n, eta, mu = _need(c, "L", "D", "n", "eta", "mu")
    return led.regret(rep.x_star), bgd_constant_bound(eta, n, L, D, mu, led.T, rep.G_star)


def _bgd_adanorm(rep, led, c):
    L, D, n = _need(c, "L", "D", "n")
    return led.regret(rep.x_star), bgd_adanorm_bound(n, L, D, rep.G_star)


EVALUATORS: dict[str, tuple[Callable, str]] = {
    "ogd": (_ogd, "upper"),
    "ogd_tuned": (_ogd_tuned, "upper"),
    "ogd_large_step": (_ogd_large, "upper"),
    "adagrad_norm": (_adagrad, "upper"),
    "adaftrl": (_adaftrl, "upper"),
    "lower_bound": (_lower, "lower"),
    "small_loss": (_small_loss, "upper"),
    "dynamic_ogd": (_dynamic_ogd, "upper"),
    "sword": (_sword, "upper"),
    "bgd_constant": (_bgd_constant, "upper"),
    "bgd_adanorm": (_bgd_adanorm, "upper"),
}


def bound_evaluators(report: HindsightReport, ledger: RegretLedger, constants: Mapping,
                     which: list[str] | None = None, rtol: float = 1e-12) -> BoundAudit:
    """Evaluate bounds against the measured quantities of one run.

    With ``which=None`` every bound whose constants are present is checked
    and the rest are listed as skipped.  Naming a bound in ``which`` makes
    its constants mandatory.  ``rtol`` absorbs floating-point noise only.
    """
    names = list(EVALUATORS) if which is None else list(which)
    checks, skipped = [], []
    for name in names:
        fn, kind = EVALUATORS[name]
        try:
            measured, bound = fn(report, ledger, constants)
        except MissingConstantError:
            if which is not None:
                raise
            skipped.append(name)
            continue
        slack = rtol * max(1.0, abs(bound))
        ok = measured <= bound + slack if kind == "upper" else measured >= bound - slack
        checks.append(BoundCheck(name, float(measured), float(bound), bool(ok), kind))
    return BoundAudit(tuple(checks), tuple(skipped))
