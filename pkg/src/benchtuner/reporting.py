"""Report assembly: delimited summaries plus rendered figures.

Evaluation records (one JSON per evaluated dataset) are grouped by
difficulty level, aggregated with the metrics module, and written as a
CSV with a JSON mirror. Two figures accompany the tables when there is
data for them: mean gap per level with interval bars, and best-gap
convergence curves read from run logs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # file output only, no display server

import matplotlib.pyplot as plt

from .metrics import InsufficientData, aggregate_ci
from .search import resume
from .util import canonical_json

CSV_COLUMNS = ("level", "rho", "mean_rho_hat", "mean_gap", "ci_half_width",
               "n_seeds")


def build_rows(records: list[dict]) -> tuple[list[dict], list[str]]:
    """Aggregate evaluation records into report rows.

    Each record needs "rho" and "rho_hat"; "level" is optional and only
    labels the row. Records sharing (level, rho) are one group; the row
    carries the group's mean observed rate, mean per-record gap, and the
    interval half-width over those gaps (None for singleton groups, which
    also produce a warning string).
    """
    groups: dict[tuple, list[dict]] = {}
    for record in records:
        if "rho" not in record or "rho_hat" not in record:
            raise ValueError("evaluation record needs rho and rho_hat")
        key = (record.get("level") or "", float(record["rho"]))
        groups.setdefault(key, []).append(record)
    rows, warnings = [], []
    for (level, rho) in sorted(groups, key=lambda k: (k[1], k[0])):
        members = groups[(level, rho)]
        rates = [float(m["rho_hat"]) for m in members]
        gaps = [abs(rate - rho) for rate in rates]
        try:
            _, half_width = aggregate_ci(gaps)
        except InsufficientData:
            half_width = None
            label = level or f"rho={rho:g}"
            warnings.append(
                f"group {label!r} has a single record; interval omitted")
        rows.append({"level": level, "rho": rho,
                     "mean_rho_hat": sum(rates) / len(rates),
                     "mean_gap": sum(gaps) / len(gaps),
                     "ci_half_width": half_width, "n_seeds": len(members)})
    return rows, warnings


def write_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            half = row["ci_half_width"]
            writer.writerow([
                row["level"],
                f"{row['rho']:g}",
                f"{row['mean_rho_hat']:.6f}",
                f"{row['mean_gap']:.6f}",
                "" if half is None else f"{half:.6f}",
                row["n_seeds"],
            ])


def write_json(rows: list[dict], path) -> None:
    Path(path).write_text(canonical_json(rows) + "\n", encoding="utf-8")


def _save(figure, path) -> None:
    # strip the writer's software tag so repeated runs byte-match
    figure.savefig(path, dpi=150, bbox_inches="tight",
                   metadata={"Software": None})
    plt.close(figure)


def render_gap_by_level(rows: list[dict], path) -> None:
    """Bar chart of mean gap per report row, with interval whiskers."""
    labels = [row["level"] or f"rho={row['rho']:g}" for row in rows]
    means = [row["mean_gap"] for row in rows]
    errors = [row["ci_half_width"] or 0.0 for row in rows]
    figure, axis = plt.subplots(figsize=(6.0, 4.0))
    axis.bar(range(len(rows)), means, yerr=errors, capsize=4,
             color="#4878a8", edgecolor="#2b4a68")
    axis.set_xticks(range(len(rows)))
    axis.set_xticklabels(labels, rotation=20, ha="right")
    axis.set_ylabel("mean |observed - target|")
    axis.set_title("Difficulty calibration gap by level")
    axis.grid(axis="y", alpha=0.3)
    _save(figure, path)


def curves_from_logs(log_paths) -> list[dict]:
    """Best-gap-so-far trajectories extracted from run logs."""
    curves = []
    for log_path in log_paths:
        run = resume(log_path)
        best_so_far, best = [], None
        for entry in run.history:
            best = entry.gap if best is None else min(best, entry.gap)
            best_so_far.append(best)
        strategy = run.designer_spec.get("strategy", "?")
        curves.append({
            "label": f"{run.env_name}/{strategy} seed={run.seed}",
            "iterations": [entry.iteration for entry in run.history],
            "best_gaps": best_so_far,
        })
    return curves


def render_convergence(curves: list[dict], path) -> None:
    """Step plot of the best gap reached after each iteration."""
    figure, axis = plt.subplots(figsize=(6.0, 4.0))
    for curve in curves:
        if not curve["best_gaps"]:
            continue
        axis.step(curve["iterations"], curve["best_gaps"], where="post",
                  marker="o", markersize=3, label=curve["label"])
    axis.set_xlabel("iteration")
    axis.set_ylabel("best gap so far")
    axis.set_title("Search convergence")
    axis.grid(alpha=0.3)
    if any(curve["best_gaps"] for curve in curves):
        axis.legend(fontsize=8)
    _save(figure, path)


def write_report(records: list[dict], out_dir, log_paths=()) -> tuple[list[dict], list[str]]:
    """Write report.csv, report.json, and available figures to out_dir.

    Returns the rows and any warnings so callers can surface them.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows, warnings = build_rows(records)
    write_csv(rows, out / "report.csv")
    write_json(rows, out / "report.json")
    if rows:
        render_gap_by_level(rows, out / "gap_by_level.png")
    if log_paths:
        render_convergence(curves_from_logs(log_paths), out / "convergence.png")
    return rows, warnings
