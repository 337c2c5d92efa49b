"""Instrumental-variable stochastic approximation for reinforcement learning
with endogenous rewards.

Submodules:

``sa``            projected two-timescale stochastic approximation engine
``environments``  advertising and linear-quadratic simulators
``algorithms``    IV-SGD, IV-Q-Learning, IV-TD, IV-AC and naive baselines
``inference``     long-run covariance, Lyapunov covariance, CIs, policy tests
``oracles``       closed-form ground truth
``harness``       experiment presets and command-line driver
"""

from . import algorithms, environments, inference, oracles, sa

__version__ = "0.1.0"

__all__ = ["algorithms", "environments", "inference", "oracles", "sa", "__version__"]
