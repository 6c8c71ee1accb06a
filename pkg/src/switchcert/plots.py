"""Figure rendering for reports (file output only, no display)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .montecarlo import ExponentEstimate  # noqa: E402
from .report import AnalysisReport, bounds_rows  # noqa: E402


def bounds_figure(report: AnalysisReport, path) -> Path:
    """Bar chart of lift-adjusted bounds with the stability line at 1."""
    rows = bounds_rows(report)
    path = Path(path)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(rows) + 2.0), 3.6))
    labels = [f"{lift}\n{kind}" for lift, kind, _, _ in rows]
    values = [adjusted for _, _, _, adjusted in rows]
    colors = ["#2a8f4e" if v < 1.0 else "#b8442c" for v in values]
    ax.bar(range(len(rows)), values, color=colors)
    ax.axhline(1.0, color="black", linewidth=1.0, linestyle="--",
               label="stability threshold")
    ax.set_xticks(range(len(rows)), labels, fontsize=8)
    ax.set_ylabel("lift-adjusted bound")
    ax.set_title("certified decay bounds")
    ax.legend(fontsize=8, loc="best")
    lo = min(values + [1.0])
    hi = max(values + [1.0])
    pad = 0.05 * max(hi - lo, 0.05)
    ax.set_ylim(lo - pad, hi + pad)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def trajectory_figure(estimate: ExponentEstimate, path) -> Path:
    """Running averages of sampled log-growth, with the final estimate and
    its confidence band."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for traj in estimate.trajectories:
        steps = [t for t, _ in traj]
        means = [m for _, m in traj]
        ax.plot(steps, means, linewidth=0.8, alpha=0.7)
    ax.axhline(estimate.mean, color="black", linewidth=1.2,
               label=f"estimate {estimate.mean:.5f}")
    ax.axhspan(estimate.mean - estimate.half_width,
               estimate.mean + estimate.half_width,
               color="gray", alpha=0.3, label="95% CI")
    ax.axhline(0.0, color="#b8442c", linewidth=1.0, linestyle="--")
    ax.set_xlabel("step")
    ax.set_ylabel("running average log growth")
    ax.set_title(f"sampled Lyapunov exponent ({estimate.trials} trials, "
                 f"{len(estimate.trajectories)} shown)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_report_figures(report: AnalysisReport, directory) -> list:
    """Write all applicable figures into a directory; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    if bounds_rows(report):
        written.append(bounds_figure(report, directory / "bounds.png"))
    if report.monte_carlo is not None and report.monte_carlo.trajectories:
        written.append(trajectory_figure(report.monte_carlo,
                                         directory / "trajectories.png"))
    return written
