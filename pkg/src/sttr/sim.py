"""Scenario orchestration, metrics, Monte Carlo and parameter sweeps.

Trials are simulated in batches: every array carries a leading trial axis,
and each trial draws all of its randomness from its own generator seeded
with ``base_seed + t``, so results do not depend on how trials are grouped.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import CameraNoise, PinholeIntrinsics, detection_to_world, synthesize_detection
from .config import ScenarioConfig
from .dynamics import (
    ObserverPose,
    circular_observer,
    constant_velocity_position,
    eight_shape_position,
    eight_shape_velocity,
    make_transition,
    square_shape_position,
    square_shape_velocity,
)
from .estimators import CkfBank, ConsensusKfBank, SttrBank
from .geometry import bearing_rate_true, projector, rotate_bearing, unit_bearing
from .measurement import bearing_blocks, rate_blocks
from .network import adjacency_from_indices, neighbor_indices
from .observability import batch_singular_values, numeric_rank

log = logging.getLogger(__name__)

SWEEP_BUDGET = 5000  # trial-runs before a sweep warns


# -- ground truth ----------------------------------------------------------------


def target_truth(cfg, times):
    c = np.asarray(cfg.target_center, dtype=float)
    if cfg.trajectory == "eight":
        return eight_shape_position(times, c), eight_shape_velocity(times)
    if cfg.trajectory == "square":
        return square_shape_position(times, c), square_shape_velocity(times)
    v = np.asarray(cfg.target_velocity, dtype=float)
    return constant_velocity_position(times, c, v), np.broadcast_to(v, times.shape + (3,)).copy()


@dataclass
class ObserverLayout:
    centers: np.ndarray  # (n, 3)
    radii: np.ndarray  # (n,)
    omegas: np.ndarray  # (n,)
    phases: np.ndarray  # (n,)


def draw_layout(cfg, rng):
    n = cfg.n_observers
    bx, by, bz = cfg.box
    low = np.array([-bx / 2, -by / 2, 0.0])
    high = np.array([bx / 2, by / 2, bz])
    centers = rng.uniform(low, high, size=(n, 3))
    radii = rng.uniform(*cfg.radius_range, size=n)
    omegas = rng.uniform(*cfg.omega_range, size=n)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=n)
    return ObserverLayout(centers, radii, omegas, phases)


@dataclass
class TrialNoise:
    eps: np.ndarray  # (N, n) bearing rotation angles
    theta: np.ndarray  # (N, n) rotation axis angles
    rate: np.ndarray  # (N, n, 3) tangent rate noise, or pixel noise (N, n, 4)
    gyro: np.ndarray  # (N, n, 3)


def draw_noise(cfg, rng):
    N, n = cfg.n_steps, cfg.n_observers
    if cfg.noise_path == "angular":
        eps = rng.normal(0.0, 1.0, size=(N, n)) * cfg.sigma_g
        theta = rng.uniform(0.0, 2.0 * np.pi, size=(N, n))
        rate = rng.normal(0.0, 1.0, size=(N, n, 3)) * cfg.sigma_h
    else:
        eps = np.zeros((N, n))
        theta = np.zeros((N, n))
        rate = rng.normal(0.0, 1.0, size=(N, n, 4))
    gyro = rng.normal(0.0, 1.0, size=(N, n, 3)) * cfg.sigma_omega
    return TrialNoise(eps, theta, rate, gyro)


@dataclass
class Batch:
    """Everything the estimators consume for a batch of trials (leading axis B)."""

    times: np.ndarray
    truth: np.ndarray  # (N, 6)
    obs_pos: np.ndarray  # (B, N, n, 3)
    obs_vel: np.ndarray
    g: np.ndarray  # true bearings (B, N, n, 3)
    h: np.ndarray
    g_meas: np.ndarray
    h_meas: np.ndarray
    neighbors: np.ndarray  # (B, N, n, m)


def synthesize_batch(cfg, seeds):
    times = np.arange(cfg.n_steps) * cfg.dt
    p_T, v_T = target_truth(cfg, times)
    layouts, noises = [], []
    for s in seeds:
        rng = np.random.default_rng(int(s))
        layouts.append(draw_layout(cfg, rng))
        noises.append(draw_noise(cfg, rng))
    centers = np.stack([l.centers for l in layouts])[:, None]  # (B, 1, n, 3)
    radii = np.stack([l.radii for l in layouts])[:, None]
    omegas = np.stack([l.omegas for l in layouts])[:, None]
    phases = np.stack([l.phases for l in layouts])[:, None]
    t = times[None, :, None]
    target = (p_T[None, :, None, :], v_T[None, :, None, :]) if cfg.pointing == "target" else None
    pose = circular_observer(t, centers, radii, omegas, phases, target=target)
    g, r = unit_bearing(p_T[None, :, None, :], pose.position)
    h = bearing_rate_true(g, r, v_T[None, :, None, :] - pose.velocity)

    eps = np.stack([nz.eps for nz in noises])
    theta = np.stack([nz.theta for nz in noises])
    rate = np.stack([nz.rate for nz in noises])
    gyro = np.stack([nz.gyro for nz in noises])
    if cfg.noise_path == "angular":
        g_meas = rotate_bearing(g, eps, theta)
        # rate noise plus uncompensated gyro error, both seen in the measured tangent plane
        disturbance = h + rate + np.cross(gyro, g_meas)
        h_meas = np.einsum("...ij,...j->...i", projector(g_meas), disturbance)
    else:
        intr = PinholeIntrinsics.from_focal(cfg.focal, cfg.cx, cfg.cy)
        cam_noise = CameraNoise.from_angular(cfg.focal, cfg.sigma_g, cfg.sigma_h,
                                             cfg.sigma_omega)
        det = synthesize_detection(p_T[None, :, None, :], v_T[None, :, None, :], pose, intr)
        det.center = det.center + cam_noise.sigma_pixel * rate[..., :2]
        det.pixel_velocity = det.pixel_velocity + cam_noise.sigma_pixel_rate * rate[..., 2:]
        noisy_pose = ObserverPose(pose.position, pose.velocity, pose.R_cw, pose.omega + gyro)
        g_meas, h_meas = detection_to_world(det, noisy_pose, intr)
    nbrs = neighbor_indices(pose.position, cfg.neighbors)
    return Batch(times, np.concatenate([p_T, v_T], axis=-1), pose.position, pose.velocity,
                 g, h, g_meas, h_meas, nbrs)


# -- running estimators -----------------------------------------------------------


def make_bank(name, cfg, positions):
    p = cfg.params[name]
    if name == "sttr":
        return SttrBank(positions, p, use_rate=True)
    if name == "stt":
        return SttrBank(positions, p, use_rate=False)
    if name == "ckf":
        return CkfBank(positions, p, cfg.sigma_g, cfg.sigma_h)
    mode = "information" if name == "cikf" else "measurements"
    return ConsensusKfBank(positions, p, cfg.sigma_g, cfg.sigma_h, mode)


def run_estimators(cfg, batch, names=None):
    """Step the selected estimators in lockstep; returns ``{name: (B, N, n, 6)}``."""
    names = tuple(cfg.estimators if names is None else names)
    model = make_transition(cfg.dt)
    zg, Hg = bearing_blocks(batch.g_meas, batch.obs_pos)
    zh, Hh = rate_blocks(batch.g_meas, batch.h_meas, batch.obs_pos, batch.obs_vel)
    n = cfg.n_observers
    adj = adjacency_from_indices(batch.neighbors, n)
    B, N = batch.obs_pos.shape[:2]
    banks = {name: make_bank(name, cfg, batch.obs_pos[:, 0]) for name in names}
    out = {name: np.empty((B, N, n, 6)) for name in names}
    for k in range(N):
        for name, bank in banks.items():
            out[name][:, k] = bank.step(model, adj[:, k], zg[:, k], Hg[:, k], zh[:, k], Hh[:, k])
    return out


@dataclass
class RunTrace:
    config: ScenarioConfig
    times: np.ndarray  # (N,)
    truth: np.ndarray  # (N, 6)
    estimates: dict  # name -> (N, n, 6)
    observer_positions: np.ndarray  # (N, n, 3)
    observer_velocities: np.ndarray
    g_meas: np.ndarray  # (N, n, 3)
    h_meas: np.ndarray
    neighbors: np.ndarray  # (N, n, m)
    obs_rank: np.ndarray  # (N, n)
    obs_singular_values: np.ndarray  # (N, n, 6)

    @property
    def n_steps(self):
        return len(self.times)


def run_scenario(cfg, seed=None):
    seed = cfg.seed if seed is None else seed
    batch = synthesize_batch(cfg, [seed])
    est = run_estimators(cfg, batch)
    model = make_transition(cfg.dt)
    adj = adjacency_from_indices(batch.neighbors[0], cfg.n_observers)
    sv = batch_singular_values(batch.g[0], batch.h[0], adj, 0, model)
    return RunTrace(
        config=cfg,
        times=batch.times,
        truth=batch.truth,
        estimates={k: v[0] for k, v in est.items()},
        observer_positions=batch.obs_pos[0],
        observer_velocities=batch.obs_vel[0],
        g_meas=batch.g_meas[0],
        h_meas=batch.h_meas[0],
        neighbors=batch.neighbors[0],
        obs_rank=numeric_rank(sv),
        obs_singular_values=sv,
    )


def observability_series(cfg, seed=None, empirical=False):
    """Single-step singular values of every observer at every step, ``(times, (N, n, 6))``.

    The default uses true geometry; ``empirical=True`` builds the rows from
    the measured bearings and rates instead, which turns the margin
    ``s6 / s1`` into a conditioning diagnostic of the actual data.
    """
    seed = cfg.seed if seed is None else seed
    batch = synthesize_batch(cfg, [seed])
    g, h = (batch.g_meas[0], batch.h_meas[0]) if empirical else (batch.g[0], batch.h[0])
    adj = adjacency_from_indices(batch.neighbors[0], cfg.n_observers)
    return batch.times, batch_singular_values(g, h, adj, 0, make_transition(cfg.dt))


# -- metrics ------------------------------------------------------------------------


@dataclass
class EstimatorMetrics:
    pos_rmse: float
    vel_rmse: float
    pos_rmse_ss: float
    vel_rmse_ss: float
    lag: float
    pos_error: np.ndarray = field(repr=False, default=None)  # (N, 3) observer-mean error
    vel_error: np.ndarray = field(repr=False, default=None)

    @property
    def combined_ss(self):
        return self.pos_rmse_ss + self.vel_rmse_ss


def _rmse(err):
    """RMS of the Euclidean error over every axis but the last."""
    return np.sqrt(np.mean(np.sum(err**2, axis=-1), axis=(-2, -1)))


def velocity_lag(v_true, v_est, max_lag_steps):
    """Delay (in steps) maximising the normalised cross-correlation of velocity series.

    ``v_true`` is (..., N, 3), ``v_est`` is (..., N, n, 3). Positive values
    mean the estimate trails the truth. Components and observers are pooled;
    using the velocity vector rather than speed keeps the statistic defined
    for constant-speed targets that only turn.
    """
    v_true = np.asarray(v_true, dtype=float)
    v_est = np.asarray(v_est, dtype=float)
    N = v_true.shape[-2]
    max_lag_steps = min(max_lag_steps, N - 2)
    lags = np.arange(-max_lag_steps, max_lag_steps + 1)
    scores = []
    for L in lags:
        if L >= 0:
            a, b = v_true[..., : N - L, :], v_est[..., L:, :, :]
        else:
            a, b = v_true[..., -L:, :], v_est[..., : N + L, :, :]
        a = a - a.mean(axis=-2, keepdims=True)
        b = b - b.mean(axis=-3, keepdims=True)
        num = np.einsum("...tc,...tic->...", a, b)
        den = np.sqrt(np.einsum("...tc,...tc->...", a, a) * b.shape[-2]
                      * np.einsum("...tic,...tic->...", b, b))
        scores.append(np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0))
    scores = np.stack(scores, axis=-1)
    return lags[np.argmax(scores, axis=-1)]


def estimator_metrics(times, truth, est, steady_state_start, max_lag):
    """Metrics for one estimator; ``est`` is (..., N, n, 6), ``truth`` (N, 6)."""
    if not times[0] <= steady_state_start < times[-1] + (times[1] - times[0] if len(times) > 1
                                                        else 1.0):
        raise ValueError("steady-state window lies outside the run")
    err = est - truth[:, None, :]
    ss = times >= steady_state_start - 1e-12
    if not np.any(ss):
        raise ValueError("steady-state window is empty")
    dt = times[1] - times[0] if len(times) > 1 else 1.0
    lag_steps = velocity_lag(truth[ss, 3:], est[..., ss, :, 3:], int(round(max_lag / dt)))
    return dict(
        pos_rmse=_rmse(err[..., :3]),
        vel_rmse=_rmse(err[..., 3:]),
        pos_rmse_ss=_rmse(err[..., ss, :, :3]),
        vel_rmse_ss=_rmse(err[..., ss, :, 3:]),
        lag=lag_steps * dt,
        pos_error=err[..., :3].mean(axis=-2),
        vel_error=err[..., 3:].mean(axis=-2),
    )


def compute_metrics(trace, steady_state_start=None, max_lag=None):
    cfg = trace.config
    start = cfg.steady_start if steady_state_start is None else steady_state_start
    if not 0 <= start < cfg.duration:
        raise ValueError(f"steady_state_start {start} outside [0, {cfg.duration})")
    lag = cfg.max_lag if max_lag is None else max_lag
    out = {}
    for name, est in trace.estimates.items():
        m = estimator_metrics(trace.times, trace.truth, est, start, lag)
        out[name] = EstimatorMetrics(
            float(m["pos_rmse"]), float(m["vel_rmse"]), float(m["pos_rmse_ss"]),
            float(m["vel_rmse_ss"]), float(m["lag"]), m["pos_error"], m["vel_error"])
    return out


# -- Monte Carlo --------------------------------------------------------------------

METRIC_NAMES = ("pos_rmse", "vel_rmse", "pos_rmse_ss", "vel_rmse_ss", "lag")


@dataclass
class MonteCarloResult:
    config: ScenarioConfig
    seeds: list
    table: dict  # estimator -> metric -> (trials,) array

    def mean(self, name, metric):
        return float(np.mean(self.table[name][metric]))

    def std(self, name, metric):
        return float(np.std(self.table[name][metric]))

    def summary(self):
        return {name: {m: (self.mean(name, m), self.std(name, m)) for m in METRIC_NAMES}
                for name in self.table}

    def rows(self):
        """Per-trial rows ``(trial, seed, estimator, metrics...)``."""
        out = []
        for t, s in enumerate(self.seeds):
            for name in self.table:
                out.append([t, s, name, *(float(self.table[name][m][t]) for m in METRIC_NAMES)])
        return out


def monte_carlo(cfg, trials, chunk=25):
    """Run ``trials`` seeded trials (seed ``cfg.seed + t``) in batches of ``chunk``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seeds = [cfg.seed + t for t in range(trials)]
    table = {name: {m: [] for m in METRIC_NAMES} for name in cfg.estimators}
    for start in range(0, trials, chunk):
        part = seeds[start : start + chunk]
        batch = synthesize_batch(cfg, part)
        est = run_estimators(cfg, batch)
        for name, arr in est.items():
            m = estimator_metrics(batch.times, batch.truth, arr, cfg.steady_start, cfg.max_lag)
            for key in METRIC_NAMES:
                table[name][key].append(np.atleast_1d(m[key]))
    table = {name: {k: np.concatenate(v) for k, v in d.items()} for name, d in table.items()}
    return MonteCarloResult(cfg, seeds, table)


# -- parameter sweep -------------------------------------------------------------------


@dataclass
class SweepRow:
    point: dict
    estimator: str
    pos_rmse_ss: float
    vel_rmse_ss: float

    @property
    def score(self):
        return self.pos_rmse_ss + self.vel_rmse_ss


def parse_grid(spec):
    """``{"sttr.c2": "0, 0.032"}`` style mapping -> ``{("sttr", "c2"): [0.0, 0.032]}``."""
    grid = {}
    for key, values in spec.items():
        est, _, param = key.partition(".")
        if not param:
            raise ValueError(f"grid key {key!r} must look like estimator.parameter")
        if isinstance(values, str):
            values = [float(v) for v in values.replace(",", " ").split()]
        grid[(est, param)] = list(values)
    return grid


def parameter_sweep(cfg, grid, trials=10, chunk=25):
    """Monte Carlo at every grid point; rows ranked by steady-state pos + vel RMSE."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("grid must be nonempty")
    keys = list(grid)
    points = list(itertools.product(*(grid[k] for k in keys)))
    if len(points) * trials > SWEEP_BUDGET:
        log.warning("sweep of %d points x %d trials exceeds the budget of %d runs",
                    len(points), trials, SWEEP_BUDGET)
    swept = sorted({est for est, _ in keys})
    rows = []
    for values in points:
        c = cfg
        point = {}
        for (est, param), v in zip(keys, values):
            c = c.with_params(est, **{param: v})
            point[f"{est}.{param}"] = v
        c = replace(c, estimators=tuple(swept))
        res = monte_carlo(c, trials, chunk)
        for est in swept:
            rows.append(SweepRow(point, est, res.mean(est, "pos_rmse_ss"),
                                 res.mean(est, "vel_rmse_ss")))
    # stable sort: equal scores keep grid order
    return sorted(rows, key=lambda r: r.score)
