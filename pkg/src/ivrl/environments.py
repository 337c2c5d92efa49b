"""Simulated data-generating processes with endogenous observed rewards.

Two models are provided. In the advertising model the agent sets ad spend
``A`` in response to traffic ``S`` and observes revenue that depends on
``S * A`` plus noise correlated with the action. In the linear-quadratic model a
scalar state follows a linear transition and the observed reward carries an
extra term driven by one component of the action. Each model also builds the
instruments consumed by the learners.

Every sampler takes a :class:`numpy.random.Generator` and draws whole blocks
of variables at once, so a seeded generator yields a bit-identical stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Mapping

import numpy as np

__all__ = [
    "Observation",
    "AdEnvConfig",
    "LqEnvConfig",
    "InteractiveAdConfig",
    "ad_env_sample",
    "ad_env_step",
    "ad_interactive_step",
    "lq_behavior_actions",
    "lq_env_step",
    "lq_env_sample",
    "lq_instruments",
    "rbias_iteration_env",
]


@dataclass(frozen=True)
class Observation:
    """One record, or a block of records when the fields are arrays.

    ``x`` and ``y`` carry the regressor and regression target for the
    advertising model; ``next_action`` is filled in for on-policy methods.
    """

    state: np.ndarray | float
    action: np.ndarray | float
    reward_observed: np.ndarray | float
    instruments: np.ndarray
    next_state: np.ndarray | float | None = None
    x: np.ndarray | None = None
    y: np.ndarray | float | None = None
    next_action: np.ndarray | float | None = None
    aux: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __len__(self):
        shape = np.shape(self.instruments)
        return int(shape[0]) if len(shape) >= 2 else 1

    def take(self, index) -> "Observation":
        """Select records along the leading axis."""

        def pick(v):
            return None if v is None else np.asarray(v)[index]

        return Observation(
            state=pick(self.state),
            action=pick(self.action),
            reward_observed=pick(self.reward_observed),
            instruments=pick(self.instruments),
            next_state=pick(self.next_state),
            x=pick(self.x),
            y=pick(self.y),
            next_action=pick(self.next_action),
            aux={k: pick(v) for k, v in self.aux.items()},
        )


@dataclass(frozen=True)
class AdEnvConfig:
    """Advertising model with uniform exploration.

    ``log S ~ N(0, 1/4)``. With probability ``p_explore`` the action is drawn
    from ``Uniform(0, 1)``; otherwise it is ``tilde_theta * S``. Revenue is
    ``theta0 + theta1 * S * A + b * A^2 + o`` with ``o ~ N(0, sigma_eps^2)``.
    """

    theta_star: tuple[float, float] = (0.0, 1.0)
    tilde_theta: float = 0.5
    p_explore: float = 0.3
    b: float = 0.3
    sigma_eps: float = 1.0
    s_mean: float = math.exp(0.125)

    def __post_init__(self):
        if not 0 <= self.p_explore <= 1:
            raise ValueError("p_explore must lie in [0, 1]")
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be non-negative")
        object.__setattr__(self, "theta_star", tuple(float(v) for v in self.theta_star))


def ad_env_sample(cfg: AdEnvConfig, rng: np.random.Generator, n: int) -> Observation:
    """Draw ``n`` independent periods of the advertising model.

    The instrument is ``(1, q * (S - E[S]))`` where ``q`` flags an
    exploration period; off exploration the action is a function of ``S`` alone
    and carries no exogenous variation.
    """
    s = np.exp(rng.normal(0.0, 0.5, n))
    explore = rng.random(n) < cfg.p_explore
    u = rng.random(n)
    o = rng.normal(0.0, 1.0, n) * cfg.sigma_eps
    a = np.where(explore, u, cfg.tilde_theta * s)
    sa = s * a
    th0, th1 = cfg.theta_star
    y = th0 + th1 * sa + cfg.b * a * a + o
    q = explore.astype(np.float64)
    ones = np.ones(n)
    return Observation(
        state=s,
        action=a,
        reward_observed=y - 0.5 * a * a,
        instruments=np.stack([ones, q * (s - cfg.s_mean)], axis=-1),
        x=np.stack([ones, sa], axis=-1),
        y=y,
        aux={"explore": q, "noise": cfg.b * a * a + o},
    )


def ad_env_step(cfg: AdEnvConfig, rng: np.random.Generator) -> Observation:
    """A single period; the ``n = 1`` case of :func:`ad_env_sample`."""
    return ad_env_sample(cfg, rng, 1).take(0)


@dataclass(frozen=True)
class InteractiveAdConfig:
    """Advertising model where the policy follows the current estimate.

    Traffic is ``log S = (zeta + nu) / (2 sqrt 2)`` with ``zeta`` an observed
    traffic shifter and ``nu`` a latent shock that also moves revenue through
    ``beta * nu``. The action is ``theta_t * S`` and the learner regresses
    ``R + A^2 / 2`` on ``S^2``; ``(1, zeta)`` is a valid instrument.
    """

    theta_star: float = 1.0
    beta: float = 0.0
    sigma_o: float = 1.0


def ad_interactive_step(
    cfg: InteractiveAdConfig, policy_slope, rng: np.random.Generator
) -> Observation:
    """One period for every entry of ``policy_slope`` (scalar or array)."""
    policy_slope = np.asarray(policy_slope, dtype=np.float64)
    shape = policy_slope.shape
    zeta = rng.normal(size=shape)
    nu = rng.normal(size=shape)
    o = rng.normal(size=shape) * cfg.sigma_o
    s = np.exp((zeta + nu) / (2.0 * math.sqrt(2.0)))
    a = policy_slope * s
    eps = cfg.beta * nu + o
    r = cfg.theta_star * s * a - 0.5 * a * a + eps
    return Observation(
        state=s,
        action=a,
        reward_observed=r,
        instruments=np.stack([np.ones(shape), zeta], axis=-1),
        x=s * s,
        y=r + 0.5 * a * a,
        aux={"noise": eps},
    )


@dataclass(frozen=True)
class LqEnvConfig:
    """Linear-quadratic model.

    ``s' = c0 + c1 s + c2 a + eta`` with ``a = a1 + a2``; the true reward is
    ``r0 + r1 a + r2 s a + r3 a^2`` and the observed reward adds
    ``b * a2^2 + o``. ``eta ~ U(-h, h)`` with ``h = eta_half_width``, the action
    components are Beta draws and ``o ~ U(-o_half_width, o_half_width)``.
    """

    gamma: float = 0.8
    c: tuple[float, float, float] = (0.5, 0.4, 0.2)
    r: tuple[float, float, float, float] = (0.0, 0.0, 1.0, -1.0)
    b: float = 0.8
    eta_half_width: float = math.sqrt(3.0)
    a1_beta: tuple[float, float] = (1.0, 1.5)
    a2_beta: tuple[float, float] = (1.0, 1.5)
    o_half_width: float = 0.25

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if len(self.c) != 3 or len(self.r) != 4:
            raise ValueError("c needs three entries and r four")
        for name in ("c", "r", "a1_beta", "a2_beta"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))

    @property
    def eta_var(self) -> float:
        return self.eta_half_width**2 / 3.0

    @property
    def a2_second_moment(self) -> float:
        a, b = self.a2_beta
        return a * (a + 1) / ((a + b) * (a + b + 1))

    @property
    def mean_action(self) -> float:
        (a1, b1), (a2, b2) = self.a1_beta, self.a2_beta
        return a1 / (a1 + b1) + a2 / (a2 + b2)

    @property
    def bias_mean(self) -> float:
        """``E[b * a2^2]``, the mean of the endogenous reward term."""
        return self.b * self.a2_second_moment

    @property
    def stationary_mean_state(self) -> float:
        """Long-run mean state under the behavior policy."""
        c0, c1, c2 = self.c
        return (c0 + c2 * self.mean_action) / (1 - c1)

    def true_reward(self, s, a):
        r0, r1, r2, r3 = self.r
        return r0 + r1 * a + r2 * s * a + r3 * a * a

    def sample_eta(self, rng: np.random.Generator, n=None):
        return rng.uniform(-self.eta_half_width, self.eta_half_width, n)


def lq_instruments(s, a1) -> np.ndarray:
    """``(1, s, a1, s a1, s^2, a1^2)``, stacked on the last axis."""
    s = np.asarray(s, dtype=np.float64)
    a1 = np.asarray(a1, dtype=np.float64)
    return np.stack([np.ones_like(s), s, a1, s * a1, s * s, a1 * a1], axis=-1)


def lq_behavior_actions(cfg: LqEnvConfig, rng: np.random.Generator, n=None):
    """Draw the two action components of the behavior policy."""
    return rng.beta(*cfg.a1_beta, n), rng.beta(*cfg.a2_beta, n)


def lq_env_step(
    cfg: LqEnvConfig,
    state,
    action_pair,
    rng: np.random.Generator,
    *,
    eta=None,
    o=None,
) -> Observation:
    """Apply ``action_pair = (a1, a2)`` at ``state``.

    ``eta`` and ``o`` override the random draws when given. ``state`` and the
    action components may be arrays, which advances many chains at once.
    """
    a1, a2 = (np.asarray(v, dtype=np.float64) for v in action_pair)
    s = np.asarray(state, dtype=np.float64)
    shape = np.broadcast_shapes(s.shape, a1.shape, a2.shape)
    size = shape or None
    if eta is None:
        eta = cfg.sample_eta(rng, size)
    if o is None:
        o = rng.uniform(-cfg.o_half_width, cfg.o_half_width, size)
    a = a1 + a2
    c0, c1, c2 = cfg.c
    s_next = c0 + c1 * s + c2 * a + eta
    reward = cfg.true_reward(s, a) + cfg.b * a2 * a2 + o
    return Observation(
        state=s,
        action=a,
        reward_observed=reward,
        instruments=lq_instruments(s, a1),
        next_state=s_next,
        aux={"a1": a1, "a2": a2},
    )


def lq_env_sample(
    cfg: LqEnvConfig, s0, rng: np.random.Generator, n: int, n_chains: int | None = None
) -> Observation:
    """Simulate ``n`` consecutive transitions under the behavior policy.

    Returns arrays with a leading time axis (and a second chain axis when
    ``n_chains`` is given). All random variables are drawn up front.
    """
    shape = (n,) if n_chains is None else (n, n_chains)
    a1 = rng.beta(*cfg.a1_beta, shape)
    a2 = rng.beta(*cfg.a2_beta, shape)
    eta = cfg.sample_eta(rng, shape)
    o = rng.uniform(-cfg.o_half_width, cfg.o_half_width, shape)
    c0, c1, c2 = cfg.c
    a = a1 + a2
    shock = c0 + c2 * a + eta
    states = np.empty((n + 1,) + shape[1:])
    states[0] = s0
    for t in range(n):
        states[t + 1] = c1 * states[t] + shock[t]
    s = states[:-1]
    reward = cfg.true_reward(s, a) + cfg.b * a2 * a2 + o
    return Observation(
        state=s,
        action=a,
        reward_observed=reward,
        instruments=lq_instruments(s, a1),
        next_state=states[1:],
        aux={"a1": a1, "a2": a2},
    )


def rbias_iteration_env(
    theta_star: float,
    beta: float,
    mode: str,
    policy_slope: float,
    rng: np.random.Generator,
    n: int,
    sigma_o: float = 1.0,
) -> float:
    """OLS slope of ``R + A^2/2`` on ``S A`` under the fixed policy ``A = slope * S``.

    The noise is ``beta * A^2 + o`` (``mode="action"``) or ``beta * S^2 + o``
    (``mode="state"``), so the slope converges to ``theta* + beta * slope`` or
    ``theta* + beta / slope``.
    """
    if n < 2:
        raise ValueError("need at least two samples")
    if mode not in ("action", "state"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "state" and policy_slope == 0:
        raise ValueError("state-dependent mode needs a nonzero policy slope")
    s = np.exp(rng.normal(0.0, 0.5, n))
    o = rng.normal(0.0, 1.0, n) * sigma_o
    a = policy_slope * s
    eps = beta * (a * a if mode == "action" else s * s) + o
    r = theta_star * s * a - 0.5 * a * a + eps
    x = s * a
    y = r + 0.5 * a * a
    xc = x - x.mean()
    var = np.mean(xc * xc)
    if not var > 0:
        raise ValueError("regressor S*A has zero variance")
    return float(np.mean(xc * (y - y.mean())) / var)
