"""Report figures written next to the CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RL_COLOR = "tab:blue"
QS_COLOR = "tab:red"


def _smooth(y, window):
    y = np.asarray(y, dtype=float)
    if len(y) < window or window < 2:
        return y
    kernel = np.ones(window) / window
    return np.convolve(y, kernel, mode="valid")


def plot_training(columns: dict, path, window: int = 50):
    """Episode reward and dynamics-model error against episode."""
    ep = columns["episode"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 3.6))
    ax1.plot(ep, columns["total_reward"], color="0.8", lw=0.5)
    sm = _smooth(columns["total_reward"], window)
    ax1.plot(ep[len(ep) - len(sm):], sm, color=RL_COLOR)
    ax1.set_xlabel("episode")
    ax1.set_ylabel("total reward")
    ax2.semilogy(ep, columns["env_model_mse"], color="0.3", lw=0.7)
    ax2.set_xlabel("episode")
    ax2.set_ylabel("dynamics model MSE")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_evaluation(report, path):
    """Per-environment mean reward of both agent kinds."""
    fig, ax = plt.subplots(figsize=(8, 3.6))
    for kind, color in (("rl", RL_COLOR), ("qs", QS_COLOR)):
        if len(report.rewards(kind)) == 0:
            continue
        means = report.per_env_means(kind)
        mean, se = report.aggregate(kind)
        ax.plot(np.arange(len(means)), means, "o-", ms=3, color=color,
                label=f"{kind.upper()}  {mean:.1f} ± {se:.1f}")
    ax.set_xlabel("environment")
    ax.set_ylabel("mean reward over agents")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_sweep(report, path):
    x = report.column("value")
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.errorbar(x, report.column("mean_reward_qs"), yerr=report.column("stderr_qs"),
                fmt="o-", color=QS_COLOR, capsize=3, label="QS")
    ax.axhline(report.rows[0]["mean_reward_rl"], color=RL_COLOR, ls="--", label="RL")
    ax.set_xlabel(report.parameter)
    ax.set_ylabel("mean reward")
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
