"""Figure rendering for experiment output and single-run traces.

Figures are written next to the delimited output; nothing here feeds back
into the data path, so CSV bytes never depend on whether plots were asked
for.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .dynamics import DynamicsTrace
from .harness import TrialRow


def render_experiment_figures(rows: list[TrialRow], stem: str | Path) -> list[Path]:
    """Render the standard experiment figures as ``<stem>_*.png``.

    One histogram of final costs against the broadcast cost, and one scatter
    of the per-trial phase-1 deviation weight against its deterministic
    bound (all points should sit on or below the diagonal).
    """
    stem = Path(stem)
    written: list[Path] = []

    cost_ad = rows[0].cost_ad if rows else 0.0
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist([r.cost_s2 for r in rows], bins=40, color="steelblue", alpha=0.85)
    ax.axvline(cost_ad, color="firebrick", linestyle="--", label="broadcast cost")
    ax.set_xlabel("final social cost")
    ax.set_ylabel("trials")
    ax.legend()
    fig.tight_layout()
    path = stem.with_name(stem.name + "_cost_hist.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    xs = [r.c_l for r in rows]
    ys = [r.w_fbad for r in rows]
    lim = max(xs + ys + [1.0]) * 1.05
    ax.plot([0, lim], [0, lim], color="gray", linewidth=1, label="bound")
    ax.scatter(xs, ys, s=12, alpha=0.6, color="darkorange")
    ax.set_xlim(0, lim)
    ax.set_ylim(0, lim)
    ax.set_xlabel("cost of broadcast-on agents")
    ax.set_ylabel("weight of newly uncovered sets")
    ax.legend()
    fig.tight_layout()
    path = stem.with_name(stem.name + "_deviation_scatter.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written


def render_trace_figure(trace: DynamicsTrace, path: str | Path) -> Path:
    """Potential after each event, with phase boundaries marked."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    times = [e.time for e in trace.events]
    pots = [e.potential for e in trace.events]
    ax.step(times, pots, where="post", color="steelblue")
    for t in trace.phase_ends[:-1]:
        ax.axvline(t, color="gray", linestyle=":", linewidth=1)
    ax.set_xlabel("event time")
    ax.set_ylabel("potential")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
