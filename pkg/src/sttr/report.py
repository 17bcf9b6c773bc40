"""Delimited outputs written by the CLI.

Every float goes through :func:`fmt` (9 significant digits), so two runs
that compute identical numbers write identical bytes.

trace.csv
    ``step, time, truth_{px,py,pz,vx,vy,vz}``, then for every selected
    estimator and observer ``{est}_o{i}_{px..vz}``, then the measured bearing
    ``g_o{i}_{x,y,z}`` and bearing rate ``h_o{i}_{x,y,z}`` of each observer,
    then ``rank_o{i}``, the single-step observability rank of observer ``i``
    from the true geometry of that step.
metrics.csv (run)
    ``estimator, pos_rmse, vel_rmse, pos_rmse_ss, vel_rmse_ss, lag``; RMSE in
    m and m/s over all observers, lag in seconds.
metrics.csv (mc)
    one row per trial: ``trial, seed, estimator`` and the same metrics.
summary.csv (mc)
    ``estimator, metric, mean, std``.
sweep.csv
    ``rank, <swept parameters...>, estimator, pos_rmse_ss, vel_rmse_ss, score``.
topology.csv
    ``step, observer, neighbor1..m``.
observability.csv
    ``step, observer, rank, s1..s6, margin`` with ``margin = s6 / s1``.
"""

import csv
import os

import numpy as np

from .config import dump_config
from .sim import METRIC_NAMES

STATE = ("px", "py", "pz", "vx", "vy", "vz")


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".9g")
    return str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def trace_header(trace):
    n = trace.observer_positions.shape[1]
    cols = ["step", "time"] + [f"truth_{s}" for s in STATE]
    for name in trace.estimates:
        cols += [f"{name}_o{i}_{s}" for i in range(n) for s in STATE]
    cols += [f"g_o{i}_{a}" for i in range(n) for a in "xyz"]
    cols += [f"h_o{i}_{a}" for i in range(n) for a in "xyz"]
    cols += [f"rank_o{i}" for i in range(n)]
    return cols


def trace_rows(trace):
    N = trace.n_steps
    blocks = [np.arange(N)[:, None].astype(float), trace.times[:, None], trace.truth]
    blocks += [est.reshape(N, -1) for est in trace.estimates.values()]
    blocks += [trace.g_meas.reshape(N, -1), trace.h_meas.reshape(N, -1)]
    table = np.concatenate(blocks, axis=1)
    ranks = trace.obs_rank
    for k in range(N):
        yield [k, *table[k, 1:], *(int(r) for r in ranks[k])]


def write_trace(path, trace):
    write_csv(path, trace_header(trace), trace_rows(trace))


def write_topology(path, neighbors):
    """``neighbors`` is (N, n, m)."""
    m = neighbors.shape[-1]
    header = ["step", "observer"] + [f"neighbor{j + 1}" for j in range(m)]
    rows = ([k, i, *neighbors[k, i]] for k in range(neighbors.shape[0])
            for i in range(neighbors.shape[1]))
    write_csv(path, header, rows)


def write_observability(path, singular_values, tol=1e-9):
    """``singular_values`` is (N, n, 6)."""
    from .observability import numeric_rank

    header = ["step", "observer", "rank"] + [f"s{j + 1}" for j in range(6)] + ["margin"]
    ranks = numeric_rank(singular_values, tol)
    rows = []
    for k in range(singular_values.shape[0]):
        for i in range(singular_values.shape[1]):
            s = singular_values[k, i]
            margin = s[-1] / s[0] if s[0] > 0 else 0.0
            rows.append([k, i, int(ranks[k, i]), *s, margin])
    write_csv(path, header, rows)


def write_run_metrics(path, metrics):
    rows = [[name, m.pos_rmse, m.vel_rmse, m.pos_rmse_ss, m.vel_rmse_ss, m.lag]
            for name, m in metrics.items()]
    write_csv(path, ["estimator", *METRIC_NAMES], rows)


def write_mc(out_dir, result):
    write_csv(os.path.join(out_dir, "metrics.csv"), ["trial", "seed", "estimator", *METRIC_NAMES],
              result.rows())
    rows = [[name, metric, mean, std] for name, d in result.summary().items()
            for metric, (mean, std) in d.items()]
    write_csv(os.path.join(out_dir, "summary.csv"), ["estimator", "metric", "mean", "std"], rows)


def write_sweep(path, rows):
    keys = list(rows[0].point) if rows else []
    header = ["rank", *keys, "estimator", "pos_rmse_ss", "vel_rmse_ss", "score"]
    write_csv(path, header, ([r, *(row.point[k] for k in keys), row.estimator,
                              row.pos_rmse_ss, row.vel_rmse_ss, row.score]
                             for r, row in enumerate(rows, start=1)))


def metrics_table(metrics):
    """Aligned text table of ``{name: EstimatorMetrics}``."""
    lines = [f"{'estimator':<10}{'pos_rmse':>12}{'vel_rmse':>12}{'pos_ss':>12}{'vel_ss':>12}"
             f"{'lag_s':>9}"]
    for name, m in metrics.items():
        lines.append(f"{name:<10}{m.pos_rmse:12.4f}{m.vel_rmse:12.4f}{m.pos_rmse_ss:12.4f}"
                     f"{m.vel_rmse_ss:12.4f}{m.lag:9.3f}")
    return "\n".join(lines)


def mc_table(result):
    lines = [f"{'estimator':<10}" + "".join(f"{m:>22}" for m in METRIC_NAMES)]
    for name, d in result.summary().items():
        cells = "".join(f"{f'{mu:.4f} +/- {sd:.4f}':>22}" for mu, sd in d.values())
        lines.append(f"{name:<10}{cells}")
    return "\n".join(lines)


def write_summary(path, title, body, cfg):
    with open(path, "w") as fh:
        fh.write(f"{title}\n\n{body}\n\n# configuration\n{dump_config(cfg)}")
