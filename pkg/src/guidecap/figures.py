"""Figure rendering for the evaluation report path.

Figures are written next to the delimited per-item output: a summary bar
chart of the corpus metrics and histograms of the per-item scores.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from .metrics import MetricReport

FIGURE_DPI = 150


def write_per_item_csv(path: str | Path, rows: Sequence[dict]) -> None:
    if not rows:
        raise ValueError("no per-item rows to write")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def render_report_figures(
    report: MetricReport, per_item: Sequence[dict], out_dir: str | Path
) -> list[Path]:
    """Render the metric summary and per-item distributions as PNG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    fig, (ax_unit, ax_cider) = plt.subplots(1, 2, figsize=(8, 3.2), width_ratios=[3, 1])
    unit_names = ["BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L"]
    unit_values = [report.bleu_1, report.bleu_2, report.bleu_3, report.bleu_4, report.rouge_l]
    ax_unit.bar(unit_names, unit_values, color="#4878a8")
    ax_unit.set_ylim(0.0, 1.0)
    ax_unit.set_ylabel("score")
    ax_unit.tick_params(axis="x", rotation=30)
    ax_cider.bar(["CIDEr"], [report.cider], color="#a85448")
    ax_cider.set_ylim(0.0, 10.0)
    fig.suptitle("Caption metrics")
    fig.tight_layout()
    summary_path = out / "metrics_summary.png"
    fig.savefig(summary_path, dpi=FIGURE_DPI)
    plt.close(fig)
    written.append(summary_path)

    if per_item:
        fig, (ax_rouge, ax_cid) = plt.subplots(1, 2, figsize=(8, 3.2))
        ax_rouge.hist([row["rouge_l"] for row in per_item], bins=20, color="#4878a8")
        ax_rouge.set_xlabel("per-item ROUGE-L")
        ax_rouge.set_ylabel("items")
        ax_cid.hist([row["cider"] for row in per_item], bins=20, color="#a85448")
        ax_cid.set_xlabel("per-item CIDEr")
        fig.suptitle("Per-item score distributions")
        fig.tight_layout()
        hist_path = out / "per_item_distributions.png"
        fig.savefig(hist_path, dpi=FIGURE_DPI)
        plt.close(fig)
        written.append(hist_path)
    return written
