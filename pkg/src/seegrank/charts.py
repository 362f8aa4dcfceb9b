"""Per-stage ranking artifacts: an SVG bar chart and a CSV table.

Charts show the top-ranked channels as horizontal bars (at most 20),
clinician-selected channels highlighted and starred, and the elbow cutoff
drawn as a dashed line. SVG output is byte-deterministic: fixed hash salt,
no embedded date.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .ranking import StageResult

MAX_BARS = 20

_BAR_COLOR = "#4878a8"
_CLINICIAN_COLOR = "#b0543a"


def render_ranking_svg(path, stage: StageResult, clinician_selected) -> None:
    """Horizontal bar chart of the stage ranking, top rank at the top."""
    clin = set(clinician_selected)
    shown = list(zip(stage.elbow.order, stage.elbow.values))[:MAX_BARS]
    labels = [f"{ch}*" if ch in clin else str(ch) for ch, _ in shown]
    values = [v for _, v in shown]
    colors = [_CLINICIAN_COLOR if ch in clin else _BAR_COLOR for ch, _ in shown]

    plt.rcParams["svg.hashsalt"] = "seegrank"
    plt.rcParams["svg.fonttype"] = "none"
    fig, ax = plt.subplots(figsize=(7.0, 0.35 * len(shown) + 1.4))
    positions = range(len(shown))
    ax.barh(positions, values, color=colors)
    ax.set_yticks(positions, labels)
    ax.invert_yaxis()
    ax.set_xlabel("mean Shapley value (raw-margin units)")
    ax.set_title(f"stage {stage.name}: channel ranking, {len(stage.channels)} channels")
    if 0 < stage.elbow.k_star < len(shown):
        ax.axhline(stage.elbow.k_star - 0.5, color="black", linestyle="--", linewidth=1)
        ax.annotate(f"elbow k*={stage.elbow.k_star}",
                    xy=(0.98, stage.elbow.k_star - 0.6),
                    xycoords=("axes fraction", "data"),
                    ha="right", va="bottom", fontsize=8)
    ax.grid(axis="x", linewidth=0.3, alpha=0.5)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def write_ranking_csv(path, stage: StageResult, clinician_selected) -> None:
    """Full ranking table: rank, channel, phi, clinician flag, elbow flag."""
    clin = set(clinician_selected)
    kept = set(stage.elbow.selected)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "channel", "phi", "clinician_selected", "selected"])
        for position, (ch, value) in enumerate(zip(stage.elbow.order, stage.elbow.values), 1):
            writer.writerow([
                position, str(ch), repr(value),
                int(ch in clin), int(ch in kept),
            ])
