"""Report rendering: delimited output plus matplotlib figures on disk."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .extractors import ExtractionReport
from .model import EpochRecord


def write_training_log_csv(log: list[EpochRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_loss", "lr", "val_f1"])
        for r in log:
            writer.writerow([r.epoch, f"{r.train_loss:.6f}", f"{r.val_loss:.6f}",
                             f"{r.lr:.8f}", f"{r.val_f1:.4f}"])


def plot_training_curves(log: list[EpochRecord], path) -> None:
    epochs = [r.epoch for r in log]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax1.plot(epochs, [r.train_loss for r in log], label="train")
    ax1.plot(epochs, [r.val_loss for r in log], label="validation")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend()
    ax2.plot(epochs, [r.val_f1 for r in log], color="tab:green")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("validation F1 @ 0.5")
    ax2.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_extraction_report_csv(report: ExtractionReport, path) -> None:
    rows = report.rows()
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=["task", "metric", "before", "after", "delta"])
        writer.writeheader()
        writer.writerows(rows)


def plot_extraction_report(report: ExtractionReport, path) -> None:
    rows = [r for r in report.rows() if r["metric"] == "precision"]
    tasks = [r["task"] for r in rows]
    x = range(len(rows))
    width = 0.38
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.bar([i - width / 2 for i in x], [r["before"] for r in rows], width,
           label="full text")
    ax.bar([i + width / 2 for i in x], [r["after"] for r in rows], width,
           label="scoped")
    ax.set_xticks(list(x))
    ax.set_xticklabels(tasks)
    ax.set_ylabel("precision")
    ax.set_ylim(0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_training_report(log: list[EpochRecord], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "training_log.csv"
    png_path = out / "training_curves.png"
    write_training_log_csv(log, csv_path)
    plot_training_curves(log, png_path)
    return [csv_path, png_path]


def render_extraction_report(report: ExtractionReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "extraction_report.csv"
    json_path = out / "extraction_report.json"
    png_path = out / "extraction_precision.png"
    write_extraction_report_csv(report, csv_path)
    json_path.write_text(report.to_json() + "\n", encoding="utf-8")
    plot_extraction_report(report, png_path)
    return [csv_path, json_path, png_path]
