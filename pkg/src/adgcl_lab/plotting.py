"""Optional figures for sweeps and training histories, rendered off-screen."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FORMATS = (".png", ".svg")


def _check_path(path) -> Path:
    path = Path(path)
    if path.suffix.lower() not in FORMATS:
        raise ValueError(f"plot path must end in one of {FORMATS}, got {path.name!r}")
    return path


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    if path.suffix.lower() == ".svg":
        # fixed salt and no date so reruns are byte-identical
        with matplotlib.rc_context({"svg.hashsalt": "adgcl-lab"}):
            fig.savefig(path, metadata={"Date": None})
    else:
        fig.savefig(path)
    plt.close(fig)
    return path


def plot_sweep(rows: Sequence, path) -> Path:
    """Lambda vs final drop ratio, and lambda vs validation metric, side by side."""
    path = _check_path(path)
    if not rows:
        raise ValueError("nothing to plot")
    rows = sorted(rows, key=lambda r: r.lambda_reg)
    lams = [r.lambda_reg for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(lams, [r.final_drop_ratio for r in rows], marker="o")
    ax1.set_xscale("log")
    ax1.set_ylim(-0.02, 1.02)
    ax1.set_xlabel("lambda")
    ax1.set_ylabel("final drop ratio")
    ax2.plot(lams, [r.val_metric for r in rows], marker="o", color="tab:orange")
    ax2.set_xscale("log")
    ax2.set_xlabel("lambda")
    ax2.set_ylabel(rows[0].metric_name or "validation metric")
    return _save(fig, path)


def plot_history(history, path) -> Path:
    """Per-epoch InfoNCE estimate and drop ratio."""
    path = _check_path(path)
    epochs = [r.epoch for r in history.records]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(epochs, [r.nce for r in history.records])
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("InfoNCE estimate")
    ax2.plot(epochs, [r.drop_ratio for r in history.records], color="tab:green")
    ax2.set_ylim(-0.02, 1.02)
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("drop ratio")
    return _save(fig, path)
