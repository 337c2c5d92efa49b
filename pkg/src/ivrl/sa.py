"""Projected two-timescale stochastic approximation.

The fast iterate ``lam`` moves with step ``alpha_t`` and the slow iterate
``xi`` with ``beta_t``::

    lam_{t+1} = proj(lam_t + alpha_t * G(W_t, lam_t, xi_t))
    xi_{t+1}  = proj(xi_t  + beta_t  * H(W_t, xi_t))

Both drifts are evaluated at the pre-step iterates. Everything here accepts
leading batch dimensions so that many independent trajectories can be
advanced together; the norm used by the projection is always taken over the
trailing ``ndim`` axes that make up one iterate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class LearningSchedule:
    """Polynomial step sizes ``alpha0 * t**-kappa`` and ``beta0 * t**-delta``.

    ``alpha_max`` and ``beta_max`` optionally cap the early steps; the cap
    binds only for small ``t`` and leaves the decay rates untouched.
    """

    alpha0: float
    kappa: float
    beta0: float
    delta: float
    alpha_max: float | None = None
    beta_max: float | None = None

    def __post_init__(self):
        if not (self.alpha0 > 0 and self.beta0 > 0):
            raise ValueError("alpha0 and beta0 must be positive")
        if not (0 < self.kappa <= self.delta <= 1):
            raise ValueError(
                f"need 0 < kappa <= delta <= 1, got kappa={self.kappa}, delta={self.delta}"
            )
        for cap in (self.alpha_max, self.beta_max):
            if cap is not None and not cap > 0:
                raise ValueError("step caps must be positive")

    def alpha(self, t: int) -> float:
        return self.step_sizes(t)[0]

    def beta(self, t: int) -> float:
        return self.step_sizes(t)[1]

    def step_sizes(self, t: int) -> tuple[float, float]:
        return step_sizes(self, t)


def step_sizes(schedule: LearningSchedule, t: int) -> tuple[float, float]:
    """Return ``(alpha_t, beta_t)``; the schedule starts at ``t = 1``."""
    if t < 1:
        raise ValueError(f"step sizes are defined for t >= 1, got t={t}")
    t = float(t)
    alpha = schedule.alpha0 * t ** (-schedule.kappa)
    beta = schedule.beta0 * t ** (-schedule.delta)
    if schedule.alpha_max is not None:
        alpha = min(alpha, schedule.alpha_max)
    if schedule.beta_max is not None:
        beta = min(beta, schedule.beta_max)
    return alpha, beta


@dataclass(frozen=True)
class ProjectionBall:
    """Euclidean ball of radius ``radius`` centred at the origin.

    ``radius=None`` is the inactive ball: projection is the identity.
    """

    radius: float | None = None

    def __post_init__(self):
        if self.radius is not None and not self.radius > 0:
            raise ValueError("projection radius must be positive")

    @property
    def active(self) -> bool:
        return self.radius is not None

    @classmethod
    def inactive(cls) -> "ProjectionBall":
        return cls(None)


def project(ball: ProjectionBall, x, ndim: int = 1) -> np.ndarray:
    """Project ``x`` onto ``ball``.

    The last ``ndim`` axes form a single point (use ``ndim=2`` for a matrix
    under the Frobenius norm). Points already inside the ball are returned
    unchanged, bit for bit.
    """
    x = np.asarray(x, dtype=np.float64)
    if not ball.active:
        return x
    axes = tuple(range(x.ndim - ndim, x.ndim))
    norm = np.sqrt((x * x).sum(axis=axes, keepdims=True))
    outside = norm > ball.radius
    if not outside.any():
        return x
    scale = np.where(outside, ball.radius / np.where(outside, norm, 1.0), 1.0)
    y = x * scale
    # rounding can leave the rescaled norm one ulp above the radius
    for _ in range(8):
        over = np.sqrt((y * y).sum(axis=axes, keepdims=True)) > ball.radius
        if not over.any():
            break
        scale = np.where(over, np.nextafter(scale, 0.0), scale)
        y = x * scale
    return np.where(outside, y, x)


@dataclass(frozen=True)
class SaState:
    lam: np.ndarray
    xi: np.ndarray
    t: int = 1


def sa_step(
    state: SaState,
    schedule: LearningSchedule,
    ball: ProjectionBall,
    g_value,
    h_value,
) -> SaState:
    """Advance one projected two-timescale step.

    ``g_value`` and ``h_value`` are the drifts ``G(W_t, lam_t, xi_t)`` and
    ``H(W_t, xi_t)`` evaluated by the caller at the current iterates.
    """
    g_value = np.asarray(g_value, dtype=np.float64)
    h_value = np.asarray(h_value, dtype=np.float64)
    if g_value.shape != np.shape(state.lam):
        raise ValueError(f"G has shape {g_value.shape}, lambda has {np.shape(state.lam)}")
    if h_value.shape != np.shape(state.xi):
        raise ValueError(f"H has shape {h_value.shape}, xi has {np.shape(state.xi)}")
    alpha, beta = step_sizes(schedule, state.t)
    lam = project(ball, state.lam + alpha * g_value)
    xi = project(ball, state.xi + beta * h_value)
    return replace(state, lam=lam, xi=xi, t=state.t + 1)


def timescale_ratio(schedule: LearningSchedule, t: int) -> float:
    """``beta_t / alpha_t``; non-increasing in ``t`` when ``delta >= kappa`` and no cap binds."""
    alpha, beta = step_sizes(schedule, t)
    return beta / alpha
