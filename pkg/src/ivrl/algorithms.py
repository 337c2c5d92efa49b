"""Update rules for instrumental-variable learners and their naive baselines.

Each IV learner moves ``theta`` along ``Gamma @ z`` (a running first-stage
projection of the regressor onto the instruments) instead of along the
regressor itself. ``Gamma`` is a least-mean-squares fit of the regressor on
``z`` on the slower timescale.

All functions accept leading batch axes: ``theta`` may be ``(..., p)`` and
``gamma_mat`` ``(..., p, q)`` with matching per-record inputs, which lets
independent replications advance in lockstep. Contractions are written as
explicit elementwise sums so results do not depend on the batch shape.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math
from typing import Callable

import numpy as np

from .environments import Observation
from .sa import LearningSchedule, ProjectionBall, project, step_sizes

__all__ = [
    "IvState",
    "FeatureMap",
    "lq_features",
    "iv_sgd_update",
    "iv_sgd_interactive_update",
    "sgd_update",
    "greedy_action",
    "max_q_value",
    "iv_q_update",
    "q_update",
    "iv_td_update",
    "iv_ac_update",
    "gaussian_policy_score",
]


def _dot(a, b):
    return (a * b).sum(axis=-1)


def _matvec(m, v):
    return (m * v[..., None, :]).sum(axis=-1)


@dataclass(frozen=True)
class IvState:
    """Iterates ``theta (..., p)`` and ``gamma_mat (..., p, q)`` at step ``t``.

    Baselines that learn no first stage keep ``gamma_mat=None``.
    """

    theta: np.ndarray
    gamma_mat: np.ndarray | None = None
    t: int = 1

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        object.__setattr__(self, "theta", theta)
        if self.gamma_mat is not None:
            g = np.asarray(self.gamma_mat, dtype=np.float64)
            if g.ndim < 2 or g.shape[:-1] != theta.shape:
                raise ValueError(
                    f"gamma_mat shape {g.shape} does not match theta shape {theta.shape}"
                )
            object.__setattr__(self, "gamma_mat", g)
        if self.t < 1:
            raise ValueError("t starts at 1")


@dataclass(frozen=True)
class FeatureMap:
    """Basis functions ``phi(s, a)`` of length ``p``.

    ``action_coefficients(theta, s)`` returns ``(k0, k1, k2)`` with
    ``phi(s, a) . theta = k0 + k1 a + k2 a^2``; ``action_gradient(s, a)`` is
    ``d phi / d a``. Both are needed by greedy maximisation and policy tests.
    """

    p: int
    evaluator: Callable
    action_coefficients: Callable | None = None
    action_gradient: Callable | None = None

    def __call__(self, s, a) -> np.ndarray:
        return self.evaluator(s, a)


def _lq_eval(s, a):
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    out = np.empty(np.broadcast_shapes(s.shape, a.shape) + (6,))
    out[..., 0] = 1.0
    out[..., 1] = s
    out[..., 2] = a
    out[..., 3] = s * a
    out[..., 4] = s * s
    out[..., 5] = a * a
    return out


def _lq_coeffs(theta, s):
    theta = np.asarray(theta, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    k0 = theta[..., 0] + theta[..., 1] * s + theta[..., 4] * s * s
    k1 = theta[..., 2] + theta[..., 3] * s
    k2 = theta[..., 5] + 0.0 * s
    return k0, k1, k2


def _lq_grad(s, a):
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    s, a = np.broadcast_arrays(s, a)
    zero = np.zeros_like(s)
    return np.stack([zero, zero, np.ones_like(s), s, zero, 2 * a], axis=-1)


lq_features = FeatureMap(6, _lq_eval, _lq_coeffs, _lq_grad)


def _check(state: IvState, p_len: int, q_len: int | None = None):
    if state.theta.shape[-1] != p_len:
        raise ValueError(f"regressor has length {p_len}, theta has {state.theta.shape[-1]}")
    if q_len is not None and state.gamma_mat.shape[-1] != q_len:
        raise ValueError(f"instruments have length {q_len}, gamma_mat expects {state.gamma_mat.shape[-1]}")


def _iv_step(state, residual, x, z, schedule, ball, gamma_ball=None):
    """Shared two-timescale step: ``theta += a r Gz``, ``Gamma += b (x - Gz) z^T``."""
    alpha, beta = step_sizes(schedule, state.t)
    gz = _matvec(state.gamma_mat, z)
    theta = project(ball, state.theta + alpha * residual[..., None] * gz)
    gball = ball if gamma_ball is None else gamma_ball
    gamma = project(gball, state.gamma_mat + beta * (x - gz)[..., :, None] * z[..., None, :], ndim=2)
    return replace(state, theta=theta, gamma_mat=gamma, t=state.t + 1)


def iv_sgd_update(
    state: IvState,
    obs: Observation,
    schedule: LearningSchedule,
    ball: ProjectionBall = ProjectionBall(),
) -> IvState:
    """IV-SGD step for a fixed policy using ``obs.x``, ``obs.y`` and ``obs.instruments``."""
    x = np.asarray(obs.x, dtype=np.float64)
    z = np.asarray(obs.instruments, dtype=np.float64)
    _check(state, x.shape[-1], z.shape[-1])
    residual = np.asarray(obs.y, dtype=np.float64) - _dot(x, state.theta)
    return _iv_step(state, residual, x, z, schedule, ball)


def iv_sgd_interactive_update(
    state: IvState,
    obs: Observation,
    schedule: LearningSchedule,
    ball: ProjectionBall = ProjectionBall(),
) -> IvState:
    """IV-SGD step when the action is ``theta_t * S``.

    ``theta`` has length one, ``obs.x = S^2`` and ``obs.y = R + A^2/2``; the
    fitted value is ``x * theta^2`` because the action itself scales with theta.
    """
    x = np.asarray(obs.x, dtype=np.float64)[..., None]
    z = np.asarray(obs.instruments, dtype=np.float64)
    _check(state, 1, z.shape[-1])
    th = state.theta[..., 0]
    residual = np.asarray(obs.y, dtype=np.float64) - x[..., 0] * th * th
    return _iv_step(state, residual, x, z, schedule, ball)


def sgd_update(
    state: IvState,
    obs: Observation,
    schedule: LearningSchedule,
    ball: ProjectionBall = ProjectionBall(),
) -> IvState:
    """Least-mean-squares step ``theta += alpha (y - x.theta) x``."""
    x = np.asarray(obs.x, dtype=np.float64)
    _check(state, x.shape[-1])
    alpha, _ = step_sizes(schedule, state.t)
    residual = np.asarray(obs.y, dtype=np.float64) - _dot(x, state.theta)
    theta = project(ball, state.theta + alpha * residual[..., None] * x)
    return replace(state, theta=theta, t=state.t + 1)


def _argmax_quadratic(k1, k2, lo: float, hi: float):
    """Maximiser of ``k1 a + k2 a^2`` over ``[lo, hi]``; see :func:`greedy_action`."""
    concave = k2 < 0
    # a nearly flat concave k2 overflows to +-inf, which the clip maps to a bound
    with np.errstate(over="ignore"):
        interior = np.clip(-k1 / (2 * np.where(concave, k2, -1.0)), lo, hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        if not np.all(concave):
            raise ValueError("unbounded maximisation needs a concave quadratic")
        return interior
    # value at hi minus value at lo
    gain = k1 * (hi - lo) + k2 * (hi * hi - lo * lo)
    return np.where(concave, interior, np.where(gain > 0, hi, lo))


def _coefficients(features: FeatureMap, theta, s):
    if features.action_coefficients is None:
        raise ValueError("feature map does not expose its dependence on the action")
    theta = np.asarray(theta, dtype=np.float64)
    if not np.isfinite(theta).all():
        raise ValueError("theta must be finite")
    return features.action_coefficients(theta, s)


def greedy_action(features: FeatureMap, theta, s, action_interval=(0.0, 2.0)):
    """Maximiser of ``phi(s, a) . theta`` over ``action_interval``.

    With a concave quadratic in ``a`` the stationary point is clipped to the
    interval; otherwise the better endpoint wins, ties going to the lower one.
    Pass ``(-inf, inf)`` for an unconstrained maximiser (concave case only).
    """
    lo, hi = (float(v) for v in action_interval)
    _, k1, k2 = _coefficients(features, theta, s)
    return _argmax_quadratic(k1, k2, lo, hi)


def max_q_value(features: FeatureMap, theta, s, action_interval=(0.0, 2.0)):
    """``max_a phi(s, a) . theta`` over the interval, at the :func:`greedy_action` maximiser."""
    lo, hi = (float(v) for v in action_interval)
    k0, k1, k2 = _coefficients(features, theta, s)
    a = _argmax_quadratic(k1, k2, lo, hi)
    return k0 + k1 * a + k2 * a * a


def _td_error(obs, features, theta, gamma_discount, next_value):
    phi = features(obs.state, obs.action)
    if not np.all(np.isfinite(phi)):
        raise ValueError("non-finite feature values")
    reward = np.asarray(obs.reward_observed, dtype=np.float64)
    return phi, reward + gamma_discount * next_value - _dot(phi, theta)


def iv_q_update(
    state: IvState,
    obs: Observation,
    features: FeatureMap,
    gamma_discount: float,
    schedule: LearningSchedule,
    action_interval=(0.0, 2.0),
    ball: ProjectionBall = ProjectionBall(),
    gamma_ball: ProjectionBall | None = None,
) -> IvState:
    """IV-Q-Learning step with a greedy target over ``action_interval``.

    ``gamma_ball`` projects the first stage separately; by default it shares ``ball``.
    """
    z = np.asarray(obs.instruments, dtype=np.float64)
    _check(state, features.p, z.shape[-1])
    nxt = max_q_value(features, state.theta, obs.next_state, action_interval)
    phi, td = _td_error(obs, features, state.theta, gamma_discount, nxt)
    return _iv_step(state, td, phi, z, schedule, ball, gamma_ball)


def q_update(
    state: IvState,
    obs: Observation,
    features: FeatureMap,
    gamma_discount: float,
    schedule: LearningSchedule,
    action_interval=(0.0, 2.0),
    ball: ProjectionBall = ProjectionBall(),
) -> IvState:
    """Q-Learning step along ``phi(s, a)``."""
    _check(state, features.p)
    alpha, _ = step_sizes(schedule, state.t)
    nxt = max_q_value(features, state.theta, obs.next_state, action_interval)
    phi, td = _td_error(obs, features, state.theta, gamma_discount, nxt)
    theta = project(ball, state.theta + alpha * td[..., None] * phi)
    return replace(state, theta=theta, t=state.t + 1)


def iv_td_update(
    state: IvState,
    obs: Observation,
    features: FeatureMap,
    gamma_discount: float,
    schedule: LearningSchedule,
    ball: ProjectionBall = ProjectionBall(),
) -> IvState:
    """IV-TD step for policy evaluation; ``obs.next_action`` comes from the evaluated policy."""
    if obs.next_action is None:
        raise ValueError("observation lacks next_action")
    z = np.asarray(obs.instruments, dtype=np.float64)
    _check(state, features.p, z.shape[-1])
    nxt = _dot(features(obs.next_state, obs.next_action), state.theta)
    phi, td = _td_error(obs, features, state.theta, gamma_discount, nxt)
    return _iv_step(state, td, phi, z, schedule, ball)


def iv_ac_update(
    theta,
    mu,
    gamma_mat,
    obs: Observation,
    features: FeatureMap,
    gamma_discount: float,
    step: tuple[float, float, float],
    score,
):
    """One IV actor-critic step.

    ``step = (alpha_t, beta_t, tau_t)`` and ``score`` is
    ``grad_mu log pi_mu(a | s)`` at the observed action. The critic and first
    stage move as in IV-TD; the actor ascends ``phi(s, a) . theta * score``
    scaled by ``tau_t / (1 - gamma)``. All three use the pre-step iterates.
    """
    if gamma_discount == 1:
        raise ZeroDivisionError("actor scaling needs gamma < 1")
    if obs.next_action is None:
        raise ValueError("observation lacks next_action")
    alpha, beta, tau = step
    theta = np.asarray(theta, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    gamma_mat = np.asarray(gamma_mat, dtype=np.float64)
    z = np.asarray(obs.instruments, dtype=np.float64)
    nxt = _dot(features(obs.next_state, obs.next_action), theta)
    phi, td = _td_error(obs, features, theta, gamma_discount, nxt)
    gz = _matvec(gamma_mat, z)
    q_sa = _dot(phi, theta)
    theta_new = theta + alpha * td[..., None] * gz
    mu_new = mu + tau / (1.0 - gamma_discount) * q_sa[..., None] * np.asarray(score, dtype=np.float64)
    gamma_new = gamma_mat + beta * (phi - gz)[..., :, None] * z[..., None, :]
    return theta_new, mu_new, gamma_new


def gaussian_policy_score(mu, s, a, sd: float):
    """Score of ``N(mu0 + mu1 s, sd^2)`` with respect to ``(mu0, mu1)``."""
    mu = np.asarray(mu, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    u = (np.asarray(a, dtype=np.float64) - mu[..., 0] - mu[..., 1] * s) / (sd * sd)
    return np.stack([u, u * s], axis=-1)
