"""Figures rendered next to the CSV outputs when ``--plot`` is given."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _finish(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def price_paths(prices: np.ndarray, path, title: str = "") -> Path:
    """Individual runs in gray with the across-run mean on top."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    rounds = np.arange(prices.shape[1])
    for run in prices:
        ax.plot(rounds, run, color="0.75", lw=0.5)
    ax.plot(rounds, prices.mean(axis=0), color="C0", lw=2, label="mean")
    ax.set_xlabel("round")
    ax.set_ylabel("average traded price")
    ax.set_title(title)
    ax.legend(frameon=False)
    return _finish(fig, path)


def net_worth_paths(net_worth: np.ndarray, path, title: str = "") -> Path:
    """Net worth per trader (rows of ``net_worth`` are rounds)."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(net_worth, lw=1)
    ax.set_xlabel("round")
    ax.set_ylabel("net worth")
    ax.set_title(title)
    return _finish(fig, path)


def gamma_bars(gammas, means, stds, path) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.errorbar(gammas, means, yerr=stds, fmt="o", capsize=4)
    ax.axhline(0, color="0.5", lw=0.8)
    ax.set_xlabel(r"$\gamma$")
    ax.set_ylabel(r"$\Delta$ price")
    return _finish(fig, path)


def utility_surfaces(grid, u1, u2, br1, br2, path) -> Path:
    """Heat maps of u1 and u2 over (theta1, theta2) with grid best responses overlaid."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4), sharey=True)
    extent = (grid[0], grid[-1], grid[0], grid[-1])
    for ax, u, name in zip(axes, (u1, u2), ("$u_1$", "$u_2$")):
        im = ax.imshow(u.T, origin="lower", extent=extent, aspect="auto", cmap="viridis")
        fig.colorbar(im, ax=ax)
        ax.set_title(name)
        ax.set_xlabel(r"$\theta_1$")
    axes[0].set_ylabel(r"$\theta_2$")
    for ax in axes:
        for n, rows in enumerate(br1):
            ax.plot(grid[rows], [grid[n]] * len(rows), "r.", ms=3)
        for m, cols in enumerate(br2):
            ax.plot([grid[m]] * len(cols), grid[cols], ".", color="orange", ms=3)
    return _finish(fig, path)


def nash_averages(rows, path) -> Path:
    """Average theta per equilibrium against k, one panel per player."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5), sharey=True)
    for player, ax in zip((1, 2), axes):
        pts = [(r["k"], r["avg_theta"], r["equilibrium_index"]) for r in rows if r["player"] == player]
        if pts:
            k, theta, idx = map(np.array, zip(*pts))
            markers = "o^sDv<>p*h"
            for i in np.unique(idx):
                sel = idx == i
                ax.plot(k[sel], theta[sel], markers[int(i) % len(markers)], ls="none", label=f"eq {i}")
        ax.axhline(np.pi / 2, color="0.6", lw=0.8, ls="--")
        ax.set_xlabel("k")
        ax.set_title(f"player {player}")
    axes[0].set_ylabel(r"$\bar\theta$")
    axes[0].legend(frameon=False, fontsize=7)
    return _finish(fig, path)
