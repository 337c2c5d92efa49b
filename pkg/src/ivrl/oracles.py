"""Closed-form ground truth for the simulation studies.

Covers the fixed points of naive regression under endogenous rewards, the
bias of plain SGD in the advertising model, and the exact solution of the
linear-quadratic control problem (optimal Q coefficients, optimal linear
policy, value of any stable linear policy and the long-term opportunity cost).
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import brentq

from .environments import LqEnvConfig

__all__ = [
    "ThetaStar",
    "PolicyCoeffs",
    "ValueCoeffs",
    "rbias_fixed_point",
    "sgd_bias_closed_form",
    "sgd_bias_monte_carlo",
    "solve_theta_star",
    "theta_star_residuals",
    "optimal_policy",
    "value_of_linear_policy",
    "value_bellman_residual",
    "ltoc",
    "rollout_value",
]


@dataclass(frozen=True)
class ThetaStar:
    """Coefficients of ``Q*(s, a) = (1, s, a, sa, s^2, a^2) . theta``."""

    theta: np.ndarray
    chi: tuple[float, float, float]
    bias_mean: float = 0.0

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.shape != (6,):
            raise ValueError("theta must have six entries")
        if not theta[5] < 0:
            raise ValueError("theta5 must be negative")
        object.__setattr__(self, "theta", theta)

    def __array__(self, dtype=None, copy=None):
        return self.theta if dtype is None else self.theta.astype(dtype)


@dataclass(frozen=True)
class PolicyCoeffs:
    """Linear policy ``pi(s) = omega0 + omega1 * s``."""

    omega0: float
    omega1: float

    def __call__(self, s):
        return self.omega0 + self.omega1 * np.asarray(s, dtype=np.float64)


@dataclass(frozen=True)
class ValueCoeffs:
    """Quadratic value function ``V(s) = v0 + v1 * s + v2 * s^2``."""

    v0: float
    v1: float
    v2: float

    def __call__(self, s):
        s = np.asarray(s, dtype=np.float64)
        return self.v0 + self.v1 * s + self.v2 * s * s


def rbias_fixed_point(theta_star: float, beta: float, mode: str) -> float:
    """Limit of repeated refitting when the policy follows the latest estimate.

    ``mode="action"`` has noise ``beta * A^2`` and the limit ``theta*/(1-beta)``.
    ``mode="state"`` has noise ``beta * S^2`` and the limit solves
    ``theta = theta* + beta/theta``.
    """
    if mode == "action":
        if not abs(beta) < 1:
            raise ValueError("action-dependent noise needs |beta| < 1")
        return theta_star / (1.0 - beta)
    if mode == "state":
        disc = theta_star * theta_star + 4.0 * beta
        if disc < 0:
            raise ValueError("state-dependent noise needs theta*^2 + 4 beta >= 0")
        return theta_star + 0.5 * (math.sqrt(disc) - theta_star)
    raise ValueError(f"unknown mode {mode!r}")


def sgd_bias_closed_form(p: float, tilde_theta: float, b: float, variant: str = "moments") -> float:
    """Asymptotic bias of SGD for the slope in the advertising model.

    The bias is ``Cov(b A^2, S A) / Var(S A)`` under the mixed policy that
    explores uniformly on (0, 1) with probability ``p`` and otherwise plays
    ``tilde_theta * S`` with ``log S ~ N(0, 1/4)``.

    ``variant="moments"`` evaluates that ratio with exact lognormal and
    uniform moments. ``variant="printed"`` evaluates the alternative closed
    form literally, with ``p`` in the role it has there; it differs from the
    exact ratio and is kept for comparison.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    th = tilde_theta
    e = math.e
    if variant == "printed":
        num = (p * th**3 * e**2 + 0.25 * e**0.125 * (1 - p)) - (
            p * th**2 * e**0.5 + (1 - p) / 3
        ) * (p * th * e**0.5 + 0.5 * e**0.125 * (1 - p))
        den = (p * th**2 * e**2 + (1 - p) / 5) - (p * th * e**0.5 + (1 - p) / 3) ** 2
    elif variant == "moments":
        f = 1.0 - p
        e_sa3 = f * th**3 * e**2 + (1 - f) * e**0.125 / 4
        e_a2 = f * th**2 * e**0.5 + (1 - f) / 3
        e_sa = f * th * e**0.5 + (1 - f) * e**0.125 / 2
        e_s2a2 = f * th**2 * e**2 + (1 - f) * e**0.5 / 3
        num = e_sa3 - e_a2 * e_sa
        den = e_s2a2 - e_sa**2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    if den == 0:
        raise ZeroDivisionError("Var(S A) is zero")
    return b * num / den


def sgd_bias_monte_carlo(
    p: float, tilde_theta: float, b: float, rng: np.random.Generator, n: int = 10**7
) -> tuple[float, float]:
    """Monte-Carlo ``Cov(b A^2, S A) / Var(S A)`` and a delta-method standard error."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    chunk = 10**6
    parts = []
    done = 0
    while done < n:
        m = min(chunk, n - done)
        s = np.exp(rng.normal(0.0, 0.5, m))
        explore = rng.random(m) < p
        u = rng.random(m)
        a = np.where(explore, u, tilde_theta * s)
        parts.append(np.stack([s * a, a * a], axis=1))
        done += m
    data = np.concatenate(parts)
    x = data[:, 0] - data[:, 0].mean()
    y = b * (data[:, 1] - data[:, 1].mean())
    var = np.mean(x * x)
    if var == 0:
        raise ZeroDivisionError("Var(S A) is zero")
    slope = np.mean(x * y) / var
    resid = y - slope * x
    se = math.sqrt(np.mean((x * resid) ** 2) / n) / var
    return float(slope), float(se)


def _theta_from_chi2(cfg: LqEnvConfig, chi2: float, bias_mean: float) -> tuple[np.ndarray, tuple]:
    g = cfg.gamma
    c0, c1, c2 = cfg.c
    r0, r1, r2, r3 = cfg.r
    th4 = g * c1 * c1 * chi2
    th3 = r2 + 2 * g * c1 * c2 * chi2
    th5 = r3 + g * c2 * c2 * chi2
    m = th3 / (2 * th5)
    k = (2 * c0 * chi2 - r1 * m) / (1 - g * c1 + g * c2 * m)
    th1 = g * c1 * k
    th2 = r1 + g * c2 * k
    chi1 = th1 - th2 * m
    chi0 = -th2 * th2 / (4 * th5)
    th0 = (r0 + bias_mean + g * chi0 + g * c0 * chi1 + g * (c0 * c0 + cfg.eta_var) * chi2) / (1 - g)
    chi0 = th0 + chi0
    return np.array([th0, th1, th2, th3, th4, th5]), (chi0, chi1, chi2)


def theta_star_residuals(cfg: LqEnvConfig, theta, bias_mean: float | None = None) -> np.ndarray:
    """Residuals of the six coefficient-matching equations at ``theta``."""
    if bias_mean is None:
        bias_mean = cfg.bias_mean
    th0, th1, th2, th3, th4, th5 = np.asarray(theta, dtype=np.float64)
    g = cfg.gamma
    c0, c1, c2 = cfg.c
    r0, r1, r2, r3 = cfg.r
    chi2 = th4 - th3 * th3 / (4 * th5)
    chi1 = th1 - th2 * th3 / (2 * th5)
    chi0 = th0 - th2 * th2 / (4 * th5)
    return np.array(
        [
            th0 - (r0 + bias_mean + g * chi0 + g * c0 * chi1 + g * (c0 * c0 + cfg.eta_var) * chi2),
            th1 - g * (c1 * chi1 + 2 * c0 * c1 * chi2),
            th2 - (r1 + g * (c2 * chi1 + 2 * c0 * c2 * chi2)),
            th3 - (r2 + 2 * g * c1 * c2 * chi2),
            th4 - g * c1 * c1 * chi2,
            th5 - (r3 + g * c2 * c2 * chi2),
        ]
    )


def _real_quadratic_roots(a: float, b: float, c: float) -> list[float]:
    """Real roots of ``a x^2 + b x + c`` without dividing by a tiny ``a``."""
    disc = b * b - 4 * a * c
    if disc < 0:
        if disc < -1e-12 * max(b * b, abs(4 * a * c)):
            return []
        disc = 0.0
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = []
    if q != 0:
        roots.append(c / q)
        if a != 0 and math.isfinite(q / a):
            roots.append(q / a)
    elif a != 0:
        roots.append(0.0)
    return roots


def solve_theta_star(cfg: LqEnvConfig, bias_mean: float | None = None) -> ThetaStar:
    """Solve for the optimal Q coefficients of the linear-quadratic problem.

    The ``(theta3, theta4, theta5)`` block reduces to one equation in
    ``chi2 = theta4 - theta3^2 / (4 theta5)``. Clearing the denominator gives a
    quadratic whose admissible roots (``theta5 < 0``) are refined with
    ``brentq``. When two roots qualify the one that stays finite as
    ``gamma -> 0`` is kept. ``theta0, theta1, theta2`` follow by substitution.
    """
    if bias_mean is None:
        bias_mean = cfg.bias_mean
    g = cfg.gamma
    if not 0 <= g < 1:
        raise ValueError("gamma must lie in [0, 1)")
    c0, c1, c2 = cfg.c
    r0, r1, r2, r3 = cfg.r

    def th5(chi):
        return r3 + g * c2 * c2 * chi

    def f(chi):
        th3 = r2 + 2 * g * c1 * c2 * chi
        return g * c1 * c1 * chi - th3 * th3 / (4 * th5(chi)) - chi

    # 4 th5 (g c1^2 - 1) chi - th3^2 = 0
    qa = 4 * g * c2 * c2 * (g * c1 * c1 - 1) - 4 * (g * c1 * c2) ** 2
    qb = 4 * r3 * (g * c1 * c1 - 1) - 4 * g * c1 * c2 * r2
    qc = -r2 * r2
    roots = _real_quadratic_roots(qa, qb, qc)
    admissible = [r for r in roots if th5(r) < 0]
    if not admissible:
        raise ValueError("no root with theta5 < 0")
    anchor = -r2 * r2 / (4 * r3) if r3 != 0 else 0.0
    guess = min(admissible, key=lambda r: abs(r - anchor))

    chi2 = guess
    if f(guess) != 0:
        width = 1e-8 * max(1.0, abs(guess))
        for _ in range(60):
            lo, hi = guess - width, guess + width
            if th5(hi) < 0 and th5(lo) < 0 and np.sign(f(lo)) != np.sign(f(hi)):
                chi2 = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
                break
            width *= 2
            if th5(guess + width) >= 0:
                break
    theta, chi = _theta_from_chi2(cfg, chi2, bias_mean)
    if np.max(np.abs(theta_star_residuals(cfg, theta, bias_mean))) > 1e-10:
        raise ValueError("coefficient equations not satisfied to 1e-10")
    return ThetaStar(theta, chi, bias_mean)


def optimal_policy(theta) -> PolicyCoeffs:
    """Greedy linear policy of a concave quadratic Q; depends on theta2, theta3, theta5 only."""
    theta = np.asarray(theta, dtype=np.float64)
    if not theta[5] < 0:
        raise ValueError("theta5 must be negative for a maximiser to exist")
    return PolicyCoeffs(float(-theta[2] / (2 * theta[5])), float(-theta[3] / (2 * theta[5])))


def value_of_linear_policy(cfg: LqEnvConfig, policy: PolicyCoeffs) -> ValueCoeffs:
    """Exact value of ``pi(s) = omega0 + omega1 s`` under the true reward."""
    g = cfg.gamma
    c0, c1, c2 = cfg.c
    r0, r1, r2, r3 = cfg.r
    w0, w1 = policy.omega0, policy.omega1
    slope = c1 + c2 * w1
    drift = c0 + c2 * w0
    d2 = 1 - g * slope * slope
    d1 = 1 - g * slope
    if not d2 > 0:
        raise ValueError("unstable policy: gamma * (c1 + c2 omega1)^2 >= 1")
    v2 = (r2 * w1 + r3 * w1 * w1) / d2
    v1 = (r1 * w1 + r2 * w0 + 2 * r3 * w0 * w1 + 2 * g * v2 * drift * slope) / d1
    v0 = (
        r0 + r1 * w0 + r3 * w0 * w0 + g * (v1 * drift + v2 * (drift * drift + cfg.eta_var))
    ) / (1 - g)
    return ValueCoeffs(float(v0), float(v1), float(v2))


def value_bellman_residual(cfg: LqEnvConfig, policy: PolicyCoeffs, value: ValueCoeffs, s) -> np.ndarray:
    """``V(s) - r(s, pi(s)) - gamma E[V(s')]`` evaluated in closed form."""
    s = np.asarray(s, dtype=np.float64)
    a = policy(s)
    c0, c1, c2 = cfg.c
    mean_next = c0 + c1 * s + c2 * a
    ev = value.v0 + value.v1 * mean_next + value.v2 * (mean_next**2 + cfg.eta_var)
    return value(s) - cfg.true_reward(s, a) - cfg.gamma * ev


def ltoc(cfg: LqEnvConfig, theta_hat, s, theta_star: ThetaStar | None = None) -> dict:
    """Long-term opportunity cost of acting greedily with respect to ``theta_hat``.

    The induced policy is the unconstrained linear maximiser of the fitted Q.
    """
    if theta_star is None:
        theta_star = solve_theta_star(cfg)
    v_star = value_of_linear_policy(cfg, optimal_policy(theta_star.theta))
    v_hat = value_of_linear_policy(cfg, optimal_policy(theta_hat))
    vs, vh = v_star(s), v_hat(s)
    if np.any(vs == 0):
        raise ZeroDivisionError("V*(s) = 0; relative cost undefined")
    return {"absolute": vs - vh, "relative": 1.0 - vh / vs}


def rollout_value(
    cfg: LqEnvConfig,
    policy: PolicyCoeffs,
    s0: float,
    rng: np.random.Generator,
    n_rollouts: int = 10**4,
    horizon: int = 200,
) -> tuple[float, float]:
    """Monte-Carlo discounted return of ``policy`` from ``s0``: mean and standard error."""
    c0, c1, c2 = cfg.c
    s = np.full(n_rollouts, float(s0))
    total = np.zeros(n_rollouts)
    disc = 1.0
    for _ in range(horizon):
        a = policy(s)
        total += disc * cfg.true_reward(s, a)
        s = c0 + c1 * s + c2 * a + cfg.sample_eta(rng, n_rollouts)
        disc *= cfg.gamma
    return float(total.mean()), float(total.std(ddof=1) / math.sqrt(n_rollouts))
