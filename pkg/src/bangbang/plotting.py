"""Figures written next to the CSV outputs of each CLI subcommand."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no Software/date tags, so identical data gives identical files
_PNG_META = {"Software": None}


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)
    return path


def plot_success_curve(curve, bound: float, path, title: str = "") -> Path:
    """P_L against the number of iterations l, with the guaranteed lower bound."""
    ls = [row[0] for row in curve]
    ps = [row[2] for row in curve]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(ls, ps, "o-", color="tab:red", label="simulated $P_L$")
    ax.axhline(bound, ls=":", color="k", lw=1, label=f"bound {bound:.2f}")
    ax.set_xlabel("iterations $l$")
    ax.set_ylabel("success probability")
    ax.set_ylim(0, 1.05)
    ax.set_xticks(ls)
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right", frameon=False)
    return _finish(fig, path)


def plot_bench(points, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    for n in sorted({p.n_spins for p in points}):
        pts = sorted((p for p in points if p.n_spins == n), key=lambda p: p.duty)
        ax.plot([p.duty for p in pts], [p.ratio for p in pts], "o-", label=f"n = {n}")
    ax.set_xlabel("duty cycle")
    ax.set_ylabel(r"$\tau_{SM} / \tau_{BB}$")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(frameon=False)
    return _finish(fig, path)


def plot_pps_bars(labels, theory, achieved, path) -> Path:
    x = np.arange(len(labels))
    w = 0.38
    fig, ax = plt.subplots(figsize=(max(4, 0.35 * len(labels) + 2), 3.2))
    ax.bar(x - w / 2, theory, w, color="tab:red", label="target")
    ax.bar(x + w / 2, achieved, w, color="tab:blue", label="achieved")
    ax.axhline(0, color="k", lw=0.6)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=90 if len(labels) > 8 else 0)
    ax.set_ylabel("deviation diagonal")
    ax.legend(frameon=False)
    return _finish(fig, path)


def plot_trace(trace, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(np.arange(len(trace)), trace, color="tab:green")
    ax.set_xlabel("generation")
    ax.set_ylabel("best fitness")
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)
