"""Asymptotic inference for two-timescale iterates.

The terminal iterate satisfies ``alpha_T^{-1/2} (theta_T - theta*) -> N(0, Sigma)``
where ``Sigma`` solves the Lyapunov equation ``A Sigma + Sigma A^T + Lbar = 0``.
``A`` is the Jacobian of the mean drift in ``theta`` and ``Lbar`` the long-run
(time-average) covariance of the drift. Both are estimated by plug-in from a
recorded trajectory. The module also provides pointwise and uniform tests of a
hypothesised greedy policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
import warnings
from typing import Callable

import numpy as np
from scipy import stats

from .algorithms import FeatureMap, greedy_action
from .environments import Observation

__all__ = [
    "TavcEstimate",
    "CovarianceReport",
    "PolicyTestResult",
    "T2Result",
    "IllConditionedWarning",
    "residual_series",
    "bartlett_weights",
    "newey_west_tavc",
    "iv_sgd_drift",
    "iv_sgd_jacobian",
    "iv_q_drift",
    "iv_q_jacobian",
    "estimate_jacobian_a11",
    "lyapunov_sigma",
    "covariance_report",
    "confidence_interval",
    "spot_test",
    "policy_test_t2",
]


class IllConditionedWarning(RuntimeWarning):
    """The Jacobian estimate is close to singular."""


@dataclass(frozen=True)
class TavcEstimate:
    l0: np.ndarray
    lbar: np.ndarray
    lag_window: int
    weight_scheme: str


@dataclass(frozen=True)
class CovarianceReport:
    theta_hat: np.ndarray
    a11: np.ndarray
    lbar: np.ndarray
    sigma: np.ndarray
    alpha_t: float
    level: float = 0.95
    ci_half_widths: np.ndarray = field(init=False)

    def __post_init__(self):
        z = stats.norm.ppf(0.5 + self.level / 2)
        diag = np.clip(np.diag(self.sigma), 0.0, None)
        object.__setattr__(self, "ci_half_widths", z * np.sqrt(self.alpha_t * diag))

    def to_dict(self) -> dict:
        lo, hi = confidence_interval(self.theta_hat, self, self.level)
        return {
            "theta_hat": self.theta_hat.tolist(),
            "a11": self.a11.tolist(),
            "lbar": self.lbar.tolist(),
            "sigma": self.sigma.tolist(),
            "alpha_t": self.alpha_t,
            "ci": {"level": self.level, "lower": lo.tolist(), "upper": hi.tolist()},
        }


@dataclass(frozen=True)
class PolicyTestResult:
    a_hat: float
    omega_s: float
    t_stat: float
    p_value: float


@dataclass(frozen=True)
class T2Result:
    t2_stat: float
    critical_value: float
    reject: bool


def residual_series(records: Observation, theta_hat, gamma_hat, drift: Callable) -> np.ndarray:
    """Drift evaluations ``G(W_k, theta_hat, gamma_hat)`` centred at their mean.

    ``drift(records, theta, gamma)`` must return a ``(T, p)`` array.
    """
    if len(records) == 0:
        raise ValueError("empty trajectory")
    g = np.asarray(drift(records, theta_hat, gamma_hat), dtype=np.float64)
    if g.ndim != 2:
        raise ValueError("drift must return a (T, p) array")
    return g - g.mean(axis=0)


def bartlett_weights(h: int) -> np.ndarray:
    """``w_l = 1 - l/(h+1)`` for ``l = 1..h``."""
    return 1.0 - np.arange(1, h + 1) / (h + 1.0)


def newey_west_tavc(residuals, h: int | None = None, scheme: str = "bartlett", c: float = 1.0) -> TavcEstimate:
    """Long-run covariance ``L(0) + sum_l w_l (L(l) + L(l)^T)``.

    ``L(l) = T^{-1} sum_k G_k G_{k+l}^T``. The default window is
    ``ceil(c T^{1/3})``.
    """
    r = np.asarray(residuals, dtype=np.float64)
    if r.ndim == 1:
        r = r[:, None]
    n = r.shape[0]
    if h is None:
        h = math.ceil(c * n ** (1.0 / 3.0))
    if h < 0:
        raise ValueError("lag window must be non-negative")
    if h >= n or n < h + 2:
        raise ValueError(f"need at least h+2 residuals, got {n} for h={h}")
    if scheme == "bartlett":
        w = bartlett_weights(h)
    elif scheme == "uniform":
        w = np.ones(h)
    else:
        raise ValueError(f"unknown weight scheme {scheme!r}")
    l0 = r.T @ r / n
    l0 = 0.5 * (l0 + l0.T)
    lbar = l0.copy()
    for lag in range(1, h + 1):
        ll = r[:-lag].T @ r[lag:] / n
        lbar += w[lag - 1] * (ll + ll.T)
    lbar = 0.5 * (lbar + lbar.T)
    return TavcEstimate(l0, lbar, int(h), scheme)


def _gz(gamma, z):
    return np.sum(np.asarray(gamma)[None] * z[:, None, :], axis=-1)


def iv_sgd_drift(records: Observation, theta, gamma) -> np.ndarray:
    """``(y - x.theta) Gamma z`` per record."""
    x = np.asarray(records.x, dtype=np.float64)
    resid = np.asarray(records.y) - x @ np.asarray(theta)
    return resid[:, None] * _gz(gamma, np.asarray(records.instruments))


def iv_sgd_jacobian(records: Observation, theta, gamma) -> np.ndarray:
    """Sample mean of ``-Gamma z x^T``."""
    gz = _gz(gamma, np.asarray(records.instruments))
    return -(gz.T @ np.asarray(records.x)) / len(records)


def iv_q_drift(features: FeatureMap, gamma_discount: float, action_interval=(0.0, 2.0)) -> Callable:
    """Drift ``td Gamma z`` of IV-Q-Learning as a function of the records."""

    def drift(records, theta, gamma):
        from .algorithms import max_q_value

        phi = features(records.state, records.action)
        nxt = max_q_value(features, theta, records.next_state, action_interval)
        td = np.asarray(records.reward_observed) + gamma_discount * nxt - phi @ np.asarray(theta)
        return td[:, None] * _gz(gamma, np.asarray(records.instruments))

    return drift


def iv_q_jacobian(features: FeatureMap, gamma_discount: float, action_interval=(0.0, 2.0)) -> Callable:
    """Mean of ``Gamma z (gamma phi(s', a*(s')) - phi(s, a))^T``.

    The derivative of the max uses the envelope theorem at the greedy action.
    """

    def jac(records, theta, gamma):
        phi = features(records.state, records.action)
        a_star = greedy_action(features, theta, records.next_state, action_interval)
        phi_next = features(records.next_state, a_star)
        gz = _gz(gamma, np.asarray(records.instruments))
        return gz.T @ (gamma_discount * phi_next - phi) / len(records)

    return jac


def estimate_jacobian_a11(
    records: Observation,
    theta_hat,
    gamma_hat,
    drift: Callable,
    jacobian: Callable | None = None,
    mode: str = "analytic",
) -> np.ndarray:
    """Plug-in estimate of ``d E[G] / d theta`` at the terminal iterates.

    ``mode="analytic"`` calls ``jacobian(records, theta, gamma)``;
    ``mode="finite-difference"`` uses central differences of the mean drift
    with step ``1e-5 (1 + |theta_i|)``. A condition number above ``1e12``
    triggers :class:`IllConditionedWarning`.
    """
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    if mode == "analytic":
        if jacobian is None:
            raise ValueError("analytic mode needs a jacobian callable")
        a11 = np.asarray(jacobian(records, theta_hat, gamma_hat), dtype=np.float64)
    elif mode == "finite-difference":
        p = theta_hat.size
        a11 = np.empty((p, p))
        for i in range(p):
            h = 1e-5 * (1 + abs(theta_hat[i]))
            up, dn = theta_hat.copy(), theta_hat.copy()
            up[i] += h
            dn[i] -= h
            g_up = np.mean(drift(records, up, gamma_hat), axis=0)
            g_dn = np.mean(drift(records, dn, gamma_hat), axis=0)
            a11[:, i] = (g_up - g_dn) / (2 * h)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if np.linalg.cond(a11) > 1e12:
        warnings.warn("Jacobian estimate is ill-conditioned", IllConditionedWarning, stacklevel=2)
    return a11


def lyapunov_sigma(a11, lbar) -> np.ndarray:
    """Solve ``A Sigma + Sigma A^T + Lbar = 0`` by Kronecker vectorisation."""
    a = np.atleast_2d(np.asarray(a11, dtype=np.float64))
    lb = np.atleast_2d(np.asarray(lbar, dtype=np.float64))
    eig = np.linalg.eigvals(a)
    if not np.all(eig.real < 0):
        raise ValueError(f"Jacobian is not Hurwitz; max real eigenvalue {eig.real.max():.3g}")
    p = a.shape[0]
    eye = np.eye(p)
    k = np.kron(eye, a) + np.kron(a, eye)
    sigma = np.linalg.solve(k, -lb.reshape(-1, order="F")).reshape(p, p, order="F")
    return 0.5 * (sigma + sigma.T)


def covariance_report(theta_hat, a11, tavc: TavcEstimate | np.ndarray, alpha_t: float, level: float = 0.95) -> CovarianceReport:
    lbar = tavc.lbar if isinstance(tavc, TavcEstimate) else np.asarray(tavc, dtype=np.float64)
    sigma = lyapunov_sigma(a11, lbar)
    return CovarianceReport(
        np.asarray(theta_hat, dtype=np.float64), np.asarray(a11, dtype=np.float64), lbar, sigma, float(alpha_t), level
    )


def confidence_interval(theta_hat, report: CovarianceReport, level: float = 0.95):
    """Componentwise normal intervals ``theta_i +- z sqrt(alpha_T Sigma_ii)``."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    diag = np.diag(report.sigma)
    if np.any(diag <= 0):
        raise ValueError("asymptotic covariance has a non-positive diagonal entry")
    half = stats.norm.ppf(0.5 + level / 2) * np.sqrt(report.alpha_t * diag)
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    return theta_hat - half, theta_hat + half


def _action_hessian(features: FeatureMap, theta, s):
    _, _, k2 = features.action_coefficients(theta, s)
    return 2.0 * k2


def spot_test(
    theta_hat,
    report: CovarianceReport,
    features: FeatureMap,
    s: float,
    a0: float,
    action_interval=(-np.inf, np.inf),
) -> PolicyTestResult:
    """Test that the optimal action at state ``s`` equals ``a0``.

    ``T = (a_hat - a0)^2 / (alpha_T Omega)`` is compared with a chi-square
    distribution with one degree of freedom, where ``Omega = g Sigma g^T`` and
    ``g`` is the inverse action Hessian times ``d phi / d a`` at ``a0``.
    """
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    hess = float(_action_hessian(features, theta_hat, s))
    if hess == 0:
        raise ValueError("action Hessian is singular")
    a_hat = float(greedy_action(features, theta_hat, s, action_interval))
    g = np.asarray(features.action_gradient(s, a0), dtype=np.float64) / hess
    omega = float(g @ report.sigma @ g)
    diff = a_hat - a0
    if diff == 0:
        return PolicyTestResult(a_hat, omega, 0.0, 1.0)
    if not omega > 0:
        raise ValueError("variance of the greedy action is not positive")
    t_stat = diff * diff / (report.alpha_t * omega)
    return PolicyTestResult(a_hat, omega, float(t_stat), float(stats.chi2.sf(t_stat, 1)))


def policy_test_t2(
    theta_hat,
    report: CovarianceReport,
    features: FeatureMap,
    visited_states,
    policy0: Callable,
    n_boot: int,
    level: float,
    rng: np.random.Generator,
    action_interval=(-np.inf, np.inf),
) -> T2Result:
    """Uniform test of ``H0: greedy policy = policy0`` over the visited states.

    Critical values come from a parametric bootstrap that redraws
    ``theta ~ N(theta_hat, alpha_T Sigma)`` and recomputes greedy actions.
    ``level`` is the significance level.
    """
    if n_boot < 100:
        raise ValueError("n_boot must be at least 100")
    states = np.asarray(visited_states, dtype=np.float64)
    if states.size == 0:
        raise ValueError("no visited states")
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    alpha_t = report.alpha_t
    pi_hat = greedy_action(features, theta_hat, states, action_interval)
    t2 = float(np.mean((pi_hat - np.asarray(policy0(states))) ** 2) / alpha_t)

    # symmetric square root tolerates a singular covariance
    w, v = np.linalg.eigh(alpha_t * report.sigma)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    draws = theta_hat + rng.standard_normal((n_boot, theta_hat.size)) @ root.T
    boot = np.empty(n_boot)
    for b in range(n_boot):
        pi_b = greedy_action(features, draws[b], states, action_interval)
        boot[b] = np.mean((pi_b - pi_hat) ** 2) / alpha_t
    crit = float(np.quantile(boot, 1.0 - level))
    return T2Result(t2, crit, bool(t2 > crit))
