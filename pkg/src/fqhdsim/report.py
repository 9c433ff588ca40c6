"""Figure rendering for completed runs.

Reads the delimited output of an experiment directory and writes PNG
figures next to it: field profiles, the decay series with its fitted line,
and the eps-convergence plot.
"""

import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .outputs import read_fields_csv, read_two_column_csv  # noqa: E402

log = logging.getLogger(__name__)


def _plot_fields(csv_path, out_path, title):
    data = read_fields_csv(csv_path)
    fig, axes = plt.subplots(2, 2, figsize=(8, 6), sharex=True)
    for ax, name, label in zip(
        axes.ravel(),
        ("n", "j", "theta", "phi"),
        ("density n", "current j", "temperature", "potential"),
    ):
        ax.plot(data["x"], data[name], lw=1.2)
        ax.set_ylabel(label)
        ax.grid(alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("x")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def _plot_series(csv_path, out_path, fitted):
    data = read_two_column_csv(csv_path)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    t = data["t"]
    for name in data:
        if name == "t":
            continue
        ax.semilogy(t, np.abs(data[name]), lw=1.2, label=name)
    gamma = fitted.get("gamma")
    amplitude = fitted.get("amplitude")
    if gamma is not None and amplitude is not None:
        t0 = fitted.get("window_start", t[0])
        mask = t >= t0
        ax.semilogy(
            t[mask],
            amplitude * np.exp(-gamma * t[mask]),
            "k--",
            lw=1.0,
            label=f"fit: gamma = {gamma:.3f}",
        )
    ax.set_xlabel("t")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def _plot_convergence(csv_path, out_path, fitted):
    data = read_two_column_csv(csv_path)
    eps = data["eps"]
    err = data["error"]
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.loglog(eps, err, "o-", lw=1.2, label="measured error")
    ref = err[0] * eps / eps[0]
    ax.loglog(eps, ref, "k--", lw=1.0, label="slope 1 reference")
    slope = fitted.get("slope", fitted.get("slope_at_horizon"))
    title = f"fitted slope = {slope:.3f}" if slope is not None else "convergence"
    ax.set_title(title)
    ax.set_xlabel("eps")
    ax.set_ylabel("error")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def render_run(run_dir):
    """Render every figure the run's data supports; returns written paths."""
    run_dir = Path(run_dir)
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        raise FileNotFoundError(f"no summary.json in {run_dir}")
    with summary_path.open("r", encoding="utf-8") as fh:
        summary = json.load(fh)
    fitted = summary.get("fitted_rates") or {}

    written = []
    for csv_path in sorted(run_dir.glob("fields_*.csv")):
        out = run_dir / (csv_path.stem + ".png")
        written.append(_plot_fields(csv_path, out, csv_path.stem))
    if (run_dir / "series.csv").exists():
        written.append(_plot_series(run_dir / "series.csv", run_dir / "series.png", fitted))
    for csv_path in sorted(run_dir.glob("series_eps_*.csv")):
        written.append(_plot_series(csv_path, run_dir / (csv_path.stem + ".png"), {}))
    if (run_dir / "convergence.csv").exists():
        written.append(
            _plot_convergence(run_dir / "convergence.csv", run_dir / "convergence.png", fitted)
        )
    for path in written:
        log.info("wrote %s", path)
    return written
