"""Experiment presets.

Replications are grouped into fixed-size chunks. A chunk advances all its
replications in lockstep with vectorised updates, and each replication draws
its entire record stream from its own seeded generator up front. Chunk
membership never depends on the thread count, so results are identical for
any ``threads`` value.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
import math
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from ..algorithms import IvState, iv_q_update, iv_sgd_update, lq_features, q_update, sgd_update
from ..environments import (
    AdEnvConfig,
    LqEnvConfig,
    Observation,
    ad_env_sample,
    lq_env_sample,
    rbias_iteration_env,
)
from ..inference import (
    covariance_report,
    iv_sgd_drift,
    iv_sgd_jacobian,
    newey_west_tavc,
    residual_series,
)
from ..oracles import (
    optimal_policy,
    rbias_fixed_point,
    solve_theta_star,
    value_of_linear_policy,
)
from ..sa import LearningSchedule, ProjectionBall
from .rng import seed_stream

CHUNK = 50
PRESETS = ("rbias", "ivsgd-table", "coverage-table", "lq-run", "lq-oracle", "infer")

AD_SCHEDULE = LearningSchedule(alpha0=10.0, kappa=0.7, beta0=5.0, delta=0.9)
LQ_SCHEDULE = LearningSchedule(alpha0=15.0, kappa=0.7, beta0=10.0, delta=1.0)


@dataclass
class ExperimentConfig:
    """Everything a preset needs; each run is a pure function of this object."""

    preset: str
    replications: int = 200
    horizon: int | None = None
    master_seed: int = 20240607
    schedule: LearningSchedule | None = None
    env: AdEnvConfig | LqEnvConfig | None = None
    output: str | None = None
    threads: int = 1
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {', '.join(PRESETS)}")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.horizon is not None and self.horizon < 10:
            raise ValueError("horizon must be at least 10")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if not isinstance(self.options, dict):
            raise ValueError("options must be a mapping")


class IterateDivergence(RuntimeError):
    """An iterate left the norm bound; ``diagnostic`` says where and when."""

    def __init__(self, diagnostic: dict):
        self.diagnostic = diagnostic
        super().__init__(
            f"{diagnostic['algorithm']} diverged in replication {diagnostic['replication']} "
            f"at t={diagnostic['t']} (norm {diagnostic['norm']:.3g})"
        )


@dataclass(frozen=True)
class TableRow:
    T: int
    p: float
    b: float
    method: str
    bias: float
    rmse: float
    sd_est: float
    sd_theo: float = math.nan
    coverage: float = math.nan
    failures: int = 0

    COLUMNS = ("T", "p", "b", "method", "bias", "rmse", "sd_est", "sd_theo", "coverage", "failures")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _map_chunks(fn: Callable, n_reps: int, threads: int) -> list:
    starts = list(range(0, n_reps, CHUNK))
    reps = [range(s, min(s + CHUNK, n_reps)) for s in starts]
    if threads == 1 or len(reps) == 1:
        return [fn(r) for r in reps]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, reps))


# ---------------------------------------------------------------- ad model


@dataclass(frozen=True)
class AdRunResult:
    """Per-replication output of one advertising-model cell."""

    theta_iv: np.ndarray
    gamma_iv: np.ndarray
    theta_sgd: np.ndarray
    checkpoints: np.ndarray
    path_iv: np.ndarray
    sd_theo: np.ndarray
    covered: np.ndarray
    failed: np.ndarray


def _stack(obs: list[Observation]) -> Observation:
    """Stack per-replication blocks along a new replication axis (axis 1)."""

    def st(name):
        return np.stack([getattr(o, name) for o in obs], axis=1)

    return Observation(
        state=st("state"),
        action=st("action"),
        reward_observed=st("reward_observed"),
        instruments=st("instruments"),
        x=st("x"),
        y=st("y"),
    )


def simulate_ad_chunk(
    cfg: AdEnvConfig,
    schedule: LearningSchedule,
    horizon: int,
    master_seed: int,
    reps: Sequence[int],
    *,
    ball: ProjectionBall = ProjectionBall(3.0),
    theta0=(0.5, 0.5),
    gamma0=(1.0, 1.0),
    checkpoints: Sequence[int] = (),
    inference: bool = False,
    burn_in: float = 0.1,
    level: float = 0.95,
    sigma_scale: float = 1.0,
) -> AdRunResult:
    """Run IV-SGD and SGD on the same record stream for each replication.

    The IV first stage is a 2x2 matrix whose first row stays at ``(1, 0)``:
    the intercept is its own instrument, so the update direction is
    ``(1, Gamma z)`` as required.
    """
    n = len(reps)
    data = _stack([ad_env_sample(cfg, seed_stream(master_seed, r), horizon) for r in reps])
    theta0 = np.asarray(theta0, dtype=np.float64)
    g0 = np.array([[1.0, 0.0], list(gamma0)])
    iv = IvState(np.tile(theta0, (n, 1)), np.tile(g0, (n, 1, 1)))
    sgd = IvState(np.tile(theta0, (n, 1)))
    cps = sorted(set(int(c) for c in checkpoints))
    path = np.empty((len(cps), n, 2))
    k = 0
    for t in range(horizon):
        obs = Observation(
            state=None, action=None, reward_observed=None,
            instruments=data.instruments[t], x=data.x[t], y=data.y[t],
        )
        iv = iv_sgd_update(iv, obs, schedule, ball)
        sgd = sgd_update(sgd, obs, schedule, ball)
        while k < len(cps) and cps[k] == t + 1:
            path[k] = iv.theta
            k += 1

    sd = np.full(n, np.nan)
    covered = np.zeros(n, dtype=bool)
    failed = np.zeros(n, dtype=bool)
    if inference:
        start = int(burn_in * horizon)
        alpha_t = schedule.alpha(horizon)
        for j in range(n):
            rec = Observation(
                state=None, action=None, reward_observed=None,
                instruments=data.instruments[start:, j], x=data.x[start:, j], y=data.y[start:, j],
            )
            try:
                th, gm = iv.theta[j], iv.gamma_mat[j]
                tavc = newey_west_tavc(residual_series(rec, th, gm, iv_sgd_drift))
                rep = covariance_report(th, iv_sgd_jacobian(rec, th, gm), tavc, alpha_t, level)
                var = sigma_scale * alpha_t * rep.sigma[1, 1]
                if not var > 0:
                    raise ValueError("non-positive variance")
                sd[j] = math.sqrt(var)
                half = rep.ci_half_widths[1] * math.sqrt(sigma_scale)
                covered[j] = abs(th[1] - cfg.theta_star[1]) <= half
            except (ValueError, np.linalg.LinAlgError):
                failed[j] = True
    return AdRunResult(iv.theta, iv.gamma_mat, sgd.theta, np.asarray(cps), path, sd, covered, failed)


def run_ad_cell(
    cfg: AdEnvConfig,
    schedule: LearningSchedule,
    horizon: int,
    replications: int,
    master_seed: int,
    threads: int = 1,
    **kwargs,
) -> AdRunResult:
    """All replications of one design cell, concatenated in replication order."""

    def fn(reps):
        return simulate_ad_chunk(cfg, schedule, horizon, master_seed, reps, **kwargs)

    parts = _map_chunks(fn, replications, threads)

    def cat(name, axis=0):
        return np.concatenate([getattr(p, name) for p in parts], axis=axis)

    return AdRunResult(
        cat("theta_iv"), cat("gamma_iv"), cat("theta_sgd"), parts[0].checkpoints,
        cat("path_iv", axis=1), cat("sd_theo"), cat("covered"), cat("failed"),
    )


def summarize(values, truth: float) -> tuple[float, float, float]:
    """``(bias, rmse, sd)`` with ``rmse^2 = bias^2 + sd^2`` (population sd)."""
    v = np.asarray(values, dtype=np.float64)
    bias = float(np.mean(v) - truth)
    sd = float(np.sqrt(np.mean((v - np.mean(v)) ** 2)))
    return bias, math.sqrt(bias * bias + sd * sd), sd


def default_ad_grid(horizons=(10_000, 50_000)) -> list[tuple[int, float, float]]:
    return [(T, p, b) for T in horizons for p in (0.3, 0.7) for b in (0.3, 0.7)]


def _ad_cells(config: ExperimentConfig):
    base = config.env if isinstance(config.env, AdEnvConfig) else AdEnvConfig()
    grid = config.options.get("designs")
    if grid is None:
        horizons = (config.horizon,) if config.horizon else (10_000, 50_000)
        grid = default_ad_grid(horizons)
    for cell in grid:
        if len(cell) != 3:
            raise ValueError(f"design cells are (T, p, b) triples, got {cell!r}")
        T, p, b = int(cell[0]), float(cell[1]), float(cell[2])
        if T < 10 or not 0 <= p <= 1:
            raise ValueError(f"invalid design cell {cell!r}")
        yield T, replace(base, p_explore=p, b=b)


def _cell_seed(master_seed: int, T: int, p: float, b: float) -> int:
    # distinct, reproducible stream family per design cell
    ss = np.random.SeedSequence([int(master_seed), int(T), int(round(p * 1000)), int(round(b * 1000))])
    return int(ss.generate_state(2, dtype=np.uint64)[0])


def run_ivsgd_table(config: ExperimentConfig, *, with_coverage: bool = False) -> list[TableRow]:
    """Bias and RMSE of the slope for IV-SGD and SGD on each design cell."""
    schedule = config.schedule or AD_SCHEDULE
    rows = []
    for T, cfg in _ad_cells(config):
        res = run_ad_cell(
            cfg, schedule, T, config.replications,
            _cell_seed(config.master_seed, T, cfg.p_explore, cfg.b),
            config.threads,
            inference=with_coverage,
            sigma_scale=float(config.options.get("sigma_scale", 1.0)),
            burn_in=float(config.options.get("burn_in", 0.1)),
        )
        truth = cfg.theta_star[1]
        bias, rmse, sd = summarize(res.theta_iv[:, 1], truth)
        extra = {}
        if with_coverage:
            ok = ~res.failed
            extra = dict(
                sd_theo=float(np.mean(res.sd_theo[ok])) if ok.any() else math.nan,
                coverage=float(np.mean(res.covered[ok])) if ok.any() else math.nan,
                failures=int(res.failed.sum()),
            )
        rows.append(TableRow(T, cfg.p_explore, cfg.b, "iv-sgd", bias, rmse, sd, **extra))
        bias, rmse, sd = summarize(res.theta_sgd[:, 1], truth)
        rows.append(TableRow(T, cfg.p_explore, cfg.b, "sgd", bias, rmse, sd))
    return rows


def run_coverage_table(config: ExperimentConfig) -> list[TableRow]:
    """As :func:`run_ivsgd_table` plus plug-in standard errors and 95% CI coverage."""
    return run_ivsgd_table(config, with_coverage=True)


# ---------------------------------------------------------------- R-bias

RBIAS_COLUMNS = ("mode", "theta_star", "beta", "round", "estimate", "fixed_point")


def run_rbias(config: ExperimentConfig) -> list[dict]:
    """Refit the slope repeatedly, each round acting on the previous estimate."""
    opts = config.options
    theta_star = float(opts.get("theta_star", 1.0))
    rounds = int(opts.get("rounds", 10))
    n = int(opts.get("samples", config.horizon or 100_000))
    start = float(opts.get("initial_slope", 0.5))
    cases = opts.get("cases", [["action", 0.25], ["action", 0.5], ["state", 0.5], ["state", 2.0]])
    rows = []
    for idx, (mode, beta) in enumerate(cases):
        rng = seed_stream(config.master_seed, idx)
        fp = rbias_fixed_point(theta_star, float(beta), mode)
        slope = start
        for k in range(1, rounds + 1):
            slope = rbias_iteration_env(theta_star, float(beta), mode, slope, rng, n)
            rows.append(dict(mode=mode, theta_star=theta_star, beta=float(beta), round=k, estimate=slope, fixed_point=fp))
    return rows


# ---------------------------------------------------------------- LQ control

LQ_COLUMNS = ("replication", "algorithm", "series", "t", "key", "value")
LQ_THETA0 = (2.5, 0.5, 0.2, 0.5, 0.5, -1.5)
DIVERGENCE_NORM = 1e6
LTOC_STATES = (1.0, 2.0, 4.0)

# Stabilisers used for the desk-scale acceptance run; each is optional and
# off by default.
LQ_STABILIZED = {
    "alpha_max": 0.02,
    "beta_max": 0.005,
    "theta_radius": 5.0,
    "gamma_radius": 20.0,
    "action_interval": [-1.0, 3.0],
    "gamma_init": "pilot",
    "theta5_guard": 0.1,
}


@dataclass(frozen=True)
class LqRunResult:
    """Per-replication trajectories of IV-Q-Learning (``iv-q``) and Q-Learning (``q``).

    ``paths[alg]`` is ``(len(checkpoints), R, 6)``; ``early[alg]`` holds
    the iterates after each of the first ``n_early`` steps and ``late[alg]``
    those after each of the final ``n_late`` steps.
    """

    replications: tuple
    theta_star: np.ndarray
    checkpoints: np.ndarray
    final: dict
    paths: dict
    early: dict
    late: dict


def _lq_gamma0(kind: str, cfg: LqEnvConfig, master_seed: int, rep: int) -> np.ndarray:
    # a side stream, so the first-stage start never perturbs the data stream
    side = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(int(master_seed), spawn_key=(int(rep), 1)))
    )
    if kind == "random":
        return 0.1 * side.standard_normal((6, 6))
    if kind == "identity":
        return np.eye(6)
    if kind == "pilot":
        pilot = lq_env_sample(cfg, cfg.stationary_mean_state, side, 1000)
        phi = lq_features(pilot.state, pilot.action)
        return np.linalg.lstsq(pilot.instruments, phi, rcond=None)[0].T
    raise ValueError(f"unknown gamma_init {kind!r}; use random, identity or pilot")


def _stack_lq(obs: list[Observation]) -> Observation:
    def st(name):
        return np.stack([getattr(o, name) for o in obs], axis=1)

    return Observation(
        state=st("state"), action=st("action"), reward_observed=st("reward_observed"),
        instruments=st("instruments"), next_state=st("next_state"),
    )


def _lq_checkpoints(horizon: int, n: int) -> np.ndarray:
    return np.unique(np.round(np.linspace(1, horizon, min(n, horizon))).astype(np.int64))


def simulate_lq_chunk(
    cfg: LqEnvConfig,
    schedule: LearningSchedule,
    horizon: int,
    master_seed: int,
    reps: Sequence[int],
    *,
    theta0=LQ_THETA0,
    gamma_init: str = "random",
    action_interval=(0.0, 2.0),
    theta_radius: float | None = None,
    gamma_radius: float | None = None,
    theta5_guard: float | None = None,
    n_checkpoints: int = 1000,
    n_early: int = 5000,
    n_late: int = 10_000,
) -> LqRunResult:
    """Run IV-Q-Learning and Q-Learning on one shared stream per replication."""
    reps = tuple(reps)
    n = len(reps)
    data = _stack_lq([
        lq_env_sample(cfg, cfg.stationary_mean_state, seed_stream(master_seed, r), horizon) for r in reps
    ])
    theta0 = np.asarray(theta0, dtype=np.float64)
    if theta0.shape != (6,):
        raise ValueError("theta0 must have six entries")
    gamma0 = np.stack([_lq_gamma0(gamma_init, cfg, master_seed, r) for r in reps])
    states = {
        "iv-q": IvState(np.tile(theta0, (n, 1)), gamma0),
        "q": IvState(np.tile(theta0, (n, 1))),
    }
    ball = ProjectionBall(theta_radius)
    gball = ProjectionBall(gamma_radius)
    interval = tuple(float(v) for v in action_interval)
    cps = _lq_checkpoints(horizon, n_checkpoints)
    n_early = min(n_early, horizon)
    n_late = min(n_late, horizon)
    paths = {k: np.empty((len(cps), n, 6)) for k in states}
    early = {k: np.empty((n_early, n, 6)) for k in states}
    late = {k: np.empty((n_late, n, 6)) for k in states}
    gamma_d = cfg.gamma
    k = 0
    for t in range(horizon):
        obs = Observation(
            state=data.state[t], action=data.action[t], reward_observed=data.reward_observed[t],
            instruments=data.instruments[t], next_state=data.next_state[t],
        )
        states["iv-q"] = iv_q_update(
            states["iv-q"], obs, lq_features, gamma_d, schedule, interval, ball, gball
        )
        states["q"] = q_update(states["q"], obs, lq_features, gamma_d, schedule, interval, ball)
        for name, st in states.items():
            th = st.theta
            if theta5_guard is not None:
                th = th.copy()
                th[:, 5] = np.minimum(th[:, 5], -theta5_guard)
                states[name] = st = replace(st, theta=th)
            norm = np.sqrt((th * th).sum(axis=1))
            bad = ~(norm <= DIVERGENCE_NORM)
            if bad.any():
                j = int(np.argmax(bad))
                raise IterateDivergence(
                    dict(algorithm=name, replication=reps[j], t=t + 1, norm=float(norm[j]))
                )
            if t < n_early:
                early[name][t] = th
            if t >= horizon - n_late:
                late[name][t - (horizon - n_late)] = th
        while k < len(cps) and cps[k] == t + 1:
            for name, st in states.items():
                paths[name][k] = st.theta
            k += 1
    final = {name: st.theta for name, st in states.items()}
    return LqRunResult(reps, solve_theta_star(cfg).theta, cps, final, paths, early, late)


def ltoc_series(cfg: LqEnvConfig, thetas: np.ndarray, s=LTOC_STATES, relative: bool = False) -> np.ndarray:
    """LTOC of the greedy policy for each row of ``thetas`` at the states ``s``.

    Rows whose greedy policy is undefined (non-concave fit) or unstable give NaN.
    """
    s = np.asarray(s, dtype=np.float64)
    v_star = value_of_linear_policy(cfg, optimal_policy(solve_theta_star(cfg).theta))(s)
    rows = np.asarray(thetas, dtype=np.float64).reshape(-1, 6)
    out = np.full((len(rows), len(s)), np.nan)
    for i, th in enumerate(rows):
        try:
            v_hat = value_of_linear_policy(cfg, optimal_policy(th))(s)
        except ValueError:
            continue
        out[i] = 1.0 - v_hat / v_star if relative else v_star - v_hat
    return out.reshape(np.shape(thetas)[:-1] + (len(s),))


def _lq_options(config: ExperimentConfig) -> dict:
    opts = dict(config.options)
    if opts.pop("stabilized", False):
        opts = {**LQ_STABILIZED, **opts}
    return opts


def run_lq_experiment(config: ExperimentConfig) -> tuple[LqRunResult, list[dict]]:
    """Side-by-side LQ run; returns the raw trajectories and long-format CSV rows."""
    cfg = config.env if isinstance(config.env, LqEnvConfig) else LqEnvConfig()
    opts = _lq_options(config)
    horizon = config.horizon or 200_000
    base = config.schedule or LQ_SCHEDULE
    schedule = replace(
        base,
        alpha_max=opts.get("alpha_max", base.alpha_max),
        beta_max=opts.get("beta_max", base.beta_max),
    )
    kwargs = dict(
        theta0=tuple(opts.get("theta0", LQ_THETA0)),
        gamma_init=str(opts.get("gamma_init", "random")),
        action_interval=tuple(opts.get("action_interval", (0.0, 2.0))),
        theta_radius=opts.get("theta_radius"),
        gamma_radius=opts.get("gamma_radius"),
        theta5_guard=opts.get("theta5_guard"),
        n_checkpoints=int(opts.get("checkpoints", 1000)),
        n_early=int(opts.get("early", 5000)),
        n_late=int(opts.get("late", 10_000)),
    )

    def fn(reps):
        return simulate_lq_chunk(cfg, schedule, horizon, config.master_seed, reps, **kwargs)

    parts = _map_chunks(fn, config.replications, config.threads)

    def cat(attr, axis):
        return {a: np.concatenate([getattr(p, attr)[a] for p in parts], axis=axis) for a in ("iv-q", "q")}

    res = LqRunResult(
        tuple(r for p in parts for r in p.replications), parts[0].theta_star, parts[0].checkpoints,
        cat("final", 0), cat("paths", 1), cat("early", 1), cat("late", 1),
    )
    return res, lq_rows(cfg, res)


def lq_rows(cfg: LqEnvConfig, res: LqRunResult) -> list[dict]:
    rows = []
    horizon = int(res.checkpoints[-1])
    for alg in ("iv-q", "q"):
        early = ltoc_series(cfg, res.early[alg])
        late = np.mean(ltoc_series(cfg, res.late[alg], relative=True), axis=0)
        for j, rep in enumerate(res.replications):
            def add(series, t, key, value):
                rows.append(dict(replication=rep, algorithm=alg, series=series, t=int(t), key=key, value=float(value)))

            for c, t in enumerate(res.checkpoints):
                for i in range(6):
                    add("theta", t, f"theta{i}", res.paths[alg][c, j, i])
            for t in range(early.shape[0]):
                for m, s in enumerate(LTOC_STATES):
                    add("ltoc", t + 1, f"s={s:g}", early[t, j, m])
            for m, s in enumerate(LTOC_STATES):
                add("relative_ltoc_late", horizon, f"s={s:g}", late[j, m])
            add("sup_error", horizon, "sup_norm", np.max(np.abs(res.final[alg][j] - res.theta_star)))
    return rows


# ---------------------------------------------------------------- oracle and inference

ORACLE_COLUMNS = ("quantity", "value")


def run_lq_oracle(config: ExperimentConfig) -> list[dict]:
    """Closed-form optimum of the LQ design: Q coefficients, policy and values."""
    cfg = config.env if isinstance(config.env, LqEnvConfig) else LqEnvConfig()
    ts = solve_theta_star(cfg)
    pol = optimal_policy(ts.theta)
    val = value_of_linear_policy(cfg, pol)
    rows = [dict(quantity=f"theta{i}", value=float(v)) for i, v in enumerate(ts.theta)]
    rows += [dict(quantity=f"chi{i}", value=float(v)) for i, v in enumerate(ts.chi)]
    rows += [dict(quantity="omega0", value=pol.omega0), dict(quantity="omega1", value=pol.omega1)]
    rows += [dict(quantity=f"v{i}", value=float(v)) for i, v in enumerate((val.v0, val.v1, val.v2))]
    for s in config.options.get("states", (0.0,) + LTOC_STATES):
        rows.append(dict(quantity=f"V*({float(s):g})", value=float(val(float(s)))))
    return rows


INFER_COLUMNS = ("replication", "T", "p", "b", "theta1_hat", "sd_theo", "ci_lower", "ci_upper", "covered", "failed")


def run_infer(config: ExperimentConfig) -> list[dict]:
    """Per-replication plug-in intervals for the advertising slope."""
    base = config.env if isinstance(config.env, AdEnvConfig) else AdEnvConfig(p_explore=0.7, b=0.3)
    cfg = replace(base, p_explore=float(config.options.get("p", base.p_explore)), b=float(config.options.get("b", base.b)))
    T = config.horizon or 50_000
    level = float(config.options.get("level", 0.95))
    res = run_ad_cell(
        cfg, config.schedule or AD_SCHEDULE, T, config.replications,
        _cell_seed(config.master_seed, T, cfg.p_explore, cfg.b), config.threads,
        inference=True, level=level, burn_in=float(config.options.get("burn_in", 0.1)),
    )
    z = float(stats.norm.ppf(0.5 + level / 2))
    rows = []
    for j in range(config.replications):
        th = float(res.theta_iv[j, 1])
        sd = float(res.sd_theo[j])
        rows.append(dict(
            replication=j, T=T, p=cfg.p_explore, b=cfg.b, theta1_hat=th, sd_theo=sd,
            ci_lower=th - z * sd, ci_upper=th + z * sd,
            covered=bool(res.covered[j]), failed=bool(res.failed[j]),
        ))
    return rows


# ---------------------------------------------------------------- dispatch

SCHEMAS = {
    "rbias": RBIAS_COLUMNS,
    "ivsgd-table": TableRow.COLUMNS,
    "coverage-table": TableRow.COLUMNS,
    "lq-run": LQ_COLUMNS,
    "lq-oracle": ORACLE_COLUMNS,
    "infer": INFER_COLUMNS,
}


def run_preset(config: ExperimentConfig) -> tuple[list[dict], tuple[str, ...]]:
    """Run ``config.preset`` and return CSV rows with their column order."""
    name = config.preset
    if name == "rbias":
        rows = run_rbias(config)
    elif name == "ivsgd-table":
        rows = [r.as_dict() for r in run_ivsgd_table(config)]
    elif name == "coverage-table":
        rows = [r.as_dict() for r in run_coverage_table(config)]
    elif name == "lq-run":
        rows = run_lq_experiment(config)[1]
    elif name == "lq-oracle":
        rows = run_lq_oracle(config)
    else:
        rows = run_infer(config)
    return rows, SCHEMAS[name]
