"""Matplotlib rendering for run reports.

Every report CSV the CLI writes gets a figure next to it. Figures are
rendered headlessly and with fixed metadata so identical runs produce
identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_META = {"Software": "refold"}


def training_curves(metrics, path):
    """Loss per step plus the lr/margin schedules actually applied."""
    steps = [r.step for r in metrics]
    fig, (ax_loss, ax_lr) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax_loss.plot(steps, [r.loss for r in metrics], lw=0.8, color="tab:blue")
    ax_loss.set_ylabel("loss")
    ax_loss.grid(alpha=0.3)
    ax_lr.plot(steps, [r.lr for r in metrics], lw=0.8, color="tab:orange",
               label="lr")
    ax_lr.set_yscale("log")
    ax_lr.set_xlabel("step")
    ax_lr.set_ylabel("lr")
    ax_lr.grid(alpha=0.3)
    ax_m = ax_lr.twinx()
    ax_m.plot(steps, [r.margin for r in metrics], lw=0.8, color="tab:green",
              label="margin")
    ax_m.set_ylabel("margin")
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def far_frr_curve(thresholds, far, frr, eer_value, eer_threshold, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(thresholds, far, label="FAR", color="tab:red")
    ax.plot(thresholds, frr, label="FRR", color="tab:blue")
    ax.axvline(eer_threshold, color="gray", ls="--", lw=0.8)
    ax.plot([eer_threshold], [eer_value], "ko", ms=4,
            label=f"EER {100 * eer_value:.2f}%")
    ax.set_xlabel("score threshold")
    ax.set_ylabel("rate")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)


def pareto_front(rows, path):
    """rows: (gmacs, params, eer, name) sorted by gmacs."""
    fig, ax = plt.subplots(figsize=(6, 4))
    g = [r[0] for r in rows]
    e = [100.0 * r[2] for r in rows]
    ax.plot(g, e, "o-", color="tab:purple")
    for gm, params, eer_v, name in rows:
        ax.annotate(f"{name}\n{params / 1e6:.2f}M", (gm, 100.0 * eer_v),
                    textcoords="offset points", xytext=(4, 4), fontsize=7)
    ax.set_xlabel("GMACs (2 s input)")
    ax.set_ylabel("EER (%)")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
