"""Figures saved next to the CSV outputs (Agg backend, no windows)."""

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"ckf": "tab:gray", "cikf": "tab:green", "cmkf": "tab:purple",
          "stt": "tab:blue", "sttr": "tab:red"}
LABELS = {"ckf": "CKF", "cikf": "CIKF", "cmkf": "CMKF", "stt": "STT", "sttr": "STT-R"}
DPI = 120


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def error_curves(trace, path):
    """Observer-averaged position and velocity error norms over time."""
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for name, est in trace.estimates.items():
        err = est - trace.truth[:, None, :]
        pe = np.linalg.norm(err[..., :3], axis=-1).mean(axis=-1)
        ve = np.linalg.norm(err[..., 3:], axis=-1).mean(axis=-1)
        kw = dict(color=COLORS.get(name), label=LABELS.get(name, name), lw=1.0)
        axes[0].plot(trace.times, pe, **kw)
        axes[1].plot(trace.times, ve, **kw)
    axes[0].set_ylabel("position error [m]")
    axes[1].set_ylabel("velocity error [m/s]")
    axes[1].set_xlabel("time [s]")
    for ax in axes:
        ax.set_yscale("log")
        ax.grid(alpha=0.3)
    axes[0].legend(ncol=len(trace.estimates), fontsize=8)
    return _save(fig, path)


def trajectories(trace, path, observer=0):
    """Top view: target truth, observer paths and each estimator's track at one observer."""
    fig, ax = plt.subplots(figsize=(6, 6))
    ax.plot(trace.truth[:, 0], trace.truth[:, 1], "k-", lw=2, label="target")
    for i in range(trace.observer_positions.shape[1]):
        p = trace.observer_positions[:, i]
        ax.plot(p[:, 0], p[:, 1], color="0.7", lw=0.8)
        ax.plot(p[0, 0], p[0, 1], "^", color="0.5", ms=5)
    for name, est in trace.estimates.items():
        ax.plot(est[:, observer, 0], est[:, observer, 1], color=COLORS.get(name), lw=0.8,
                alpha=0.8, label=f"{LABELS.get(name, name)} (observer {observer})")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(fontsize=8)
    return _save(fig, path)


def rmse_bars(result, path):
    names = list(result.table)
    x = np.arange(len(names))
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5))
    for ax, metric, label in zip(axes, ("pos_rmse_ss", "vel_rmse_ss"),
                                 ("steady-state position RMSE [m]",
                                  "steady-state velocity RMSE [m/s]")):
        mu = [result.mean(n, metric) for n in names]
        sd = [result.std(n, metric) for n in names]
        ax.bar(x, mu, yerr=sd, color=[COLORS.get(n) for n in names], capsize=3)
        ax.set_xticks(x, [LABELS.get(n, n) for n in names])
        ax.set_ylabel(label)
        ax.grid(axis="y", alpha=0.3)
    fig.suptitle(f"{len(result.seeds)} trials")
    return _save(fig, path)


def sweep_scores(rows, path, top=20):
    rows = rows[:top]
    fig, ax = plt.subplots(figsize=(7, 0.3 * len(rows) + 1.2))
    labels = [", ".join(f"{k}={v:g}" for k, v in r.point.items()) + f" [{r.estimator}]"
              for r in rows]
    y = np.arange(len(rows))[::-1]
    ax.barh(y, [r.score for r in rows], color=[COLORS.get(r.estimator) for r in rows])
    ax.set_yticks(y, labels, fontsize=7)
    ax.set_xlabel("steady-state position + velocity RMSE")
    return _save(fig, path)


def observability_margin(times, singular_values, path):
    """``s6 / s1`` per observer over time."""
    s = singular_values
    margin = np.where(s[..., 0] > 0, s[..., -1] / np.where(s[..., 0] > 0, s[..., 0], 1.0), 0.0)
    fig, ax = plt.subplots(figsize=(7, 3))
    for i in range(margin.shape[1]):
        ax.plot(times, margin[:, i], lw=0.8, label=f"observer {i}")
    ax.set_yscale("log")
    ax.set_xlabel("time [s]")
    ax.set_ylabel(r"$\sigma_6 / \sigma_1$")
    ax.legend(fontsize=7, ncol=3)
    ax.grid(alpha=0.3)
    return _save(fig, path)


def run_figures(trace, out_dir):
    return [error_curves(trace, os.path.join(out_dir, "errors.png")),
            trajectories(trace, os.path.join(out_dir, "trajectories.png"))]
