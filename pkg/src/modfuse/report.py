"""Persistence and reporting: results CSV, summary JSON, box-plot SVG.

All outputs are plain text. Floats in the CSV are written with 17
significant digits so that statistics recomputed from a parsed file match
the in-memory ones exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .scenario import (
    MethodStats,
    ScenarioConfig,
    StudySummary,
    TrialRecord,
    summarize_values,
)

__all__ = [
    "CSV_HEADER",
    "write_results_csv",
    "read_results_csv",
    "summary_to_dict",
    "write_summary_json",
    "summary_from_rows",
    "write_trace_csv",
    "emit_boxplot",
]

CSV_HEADER = "trial_index,seed,method,e_l_T,robot_pos_err_T,det_Pl_T,failed"

_CONVENTIONS = {
    "quantile": "linear interpolation between order statistics",
    "std": "population (divide by n)",
    "mean_std_include_outliers": True,
    "mean_std_exclude_failed": True,
}


def _fmt(value: float) -> str:
    return f"{value:.16e}"


def write_results_csv(records: list[TrialRecord], config: ScenarioConfig, path: str | Path) -> None:
    """One row per (trial, method), methods in configured order."""
    lines = [CSV_HEADER]
    method_names = [m.value for m in config.methods]
    for rec in records:
        for name in method_names:
            out = rec.outcomes[name]
            lines.append(
                f"{rec.trial_index},{rec.seed},{name},"
                f"{_fmt(out.e_l)},{_fmt(out.robot_pos_err)},{_fmt(out.det_pl)},"
                f"{1 if out.failed else 0}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def read_results_csv(path: str | Path) -> list[dict]:
    """Parse a results CSV into row dicts (floats restored exactly)."""
    text = Path(path).read_text().splitlines()
    if not text or text[0] != CSV_HEADER:
        raise ValueError(f"unexpected results header: {text[0] if text else '(empty file)'}")
    rows = []
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 7:
            raise ValueError(f"malformed results row at line {lineno}")
        rows.append(
            {
                "trial_index": int(parts[0]),
                "seed": int(parts[1]),
                "method": parts[2],
                "e_l_T": float(parts[3]),
                "robot_pos_err_T": float(parts[4]),
                "det_Pl_T": float(parts[5]),
                "failed": bool(int(parts[6])),
            }
        )
    return rows


def summary_to_dict(summary: StudySummary) -> dict:
    return {
        "n_trials": summary.n_trials,
        "methods": {name: asdict(stats) for name, stats in summary.methods.items()},
        "conventions": dict(_CONVENTIONS),
    }


def write_summary_json(summary_dict: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary_dict, indent=2) + "\n")


def _group_rows(rows: list[dict]) -> dict[str, dict]:
    """Group CSV rows by method, preserving first-appearance order."""
    grouped: dict[str, dict] = {}
    for row in rows:
        entry = grouped.setdefault(row["method"], {"values": [], "n_failed": 0})
        if row["failed"]:
            entry["n_failed"] += 1
        else:
            entry["values"].append(row["e_l_T"])
    return grouped


def summary_from_rows(rows: list[dict]) -> dict:
    """Summary dict recomputed from parsed CSV rows (matches the run-time one)."""
    grouped = _group_rows(rows)
    methods = {
        name: asdict(summarize_values(np.asarray(entry["values"]), entry["n_failed"]))
        for name, entry in grouped.items()
    }
    n_trials = len({row["trial_index"] for row in rows})
    return {"n_trials": n_trials, "methods": methods, "conventions": dict(_CONVENTIONS)}


def write_trace_csv(record: TrialRecord, config: ScenarioConfig, path: str | Path) -> None:
    """Per-step truth and per-method estimate trajectories for one traced trial."""
    if record.trace is None:
        raise ValueError("trial record carries no trace")
    trace = record.trace
    method_names = [m.value for m in config.methods]
    header = ["k", "true_x", "true_y", "true_theta", "lm_true_x", "lm_true_y"]
    for name in method_names:
        header += [
            f"{name}_robot_x",
            f"{name}_robot_y",
            f"{name}_robot_theta",
            f"{name}_lm_x",
            f"{name}_lm_y",
        ]
    lines = [",".join(header)]
    lm_true = trace["landmark"]
    for k in range(config.t_steps + 1):
        cells = [str(k)]
        cells += [_fmt(v) for v in trace["truth"][k]]
        cells += [_fmt(lm_true[0]), _fmt(lm_true[1])]
        for name in method_names:
            mt = trace["methods"][name]
            cells += [_fmt(v) for v in mt["robot"][k]]
            cells += [_fmt(v) for v in mt["lm"][k]]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def _boxplot_stats(values: np.ndarray) -> dict:
    """Box geometry for one method: quartiles, clipped whiskers, outliers."""
    stats = summarize_values(values, 0)
    inliers = values[(values >= stats.whisker_low) & (values <= stats.whisker_high)]
    outliers = values[(values < stats.whisker_low) | (values > stats.whisker_high)]
    out = asdict(stats)
    out["whisker_data_low"] = float(inliers.min()) if inliers.size else stats.q1
    out["whisker_data_high"] = float(inliers.max()) if inliers.size else stats.q3
    out["outliers"] = sorted(float(v) for v in outliers)
    return out


def emit_boxplot(values_by_method: dict[str, np.ndarray], path: str | Path) -> dict:
    """Write a log-scale box plot SVG plus a sidecar JSON with the numbers.

    One box per method: median line, first-to-third-quartile box, whiskers at
    1.5 IQR clipped to the data range, outlier circles and a dashed green
    mean line. Returns the sidecar dict.
    """
    if not values_by_method or any(len(v) == 0 for v in values_by_method.values()):
        raise ValueError("boxplot requires at least one value per method")
    stats = {
        name: _boxplot_stats(np.asarray(vals, dtype=float))
        for name, vals in values_by_method.items()
    }

    all_values = np.concatenate([np.asarray(v, dtype=float) for v in values_by_method.values()])
    positive = all_values[all_values > 0.0]
    log_clip = float(positive.min() * 0.5) if positive.size else 1e-12
    lo = math.log10(max(float(all_values.min()), log_clip))
    hi = math.log10(max(float(all_values.max()), log_clip))
    if hi - lo < 1e-9:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    width, height = 640, 480
    m_left, m_right, m_top, m_bottom = 70, 20, 20, 50
    plot_w = width - m_left - m_right
    plot_h = height - m_top - m_bottom
    n = len(stats)
    slot = plot_w / n
    box_w = slot * 0.5

    def y_of(value: float) -> float:
        lv = math.log10(max(value, log_clip))
        return m_top + plot_h * (hi - lv) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{m_left}" y="{m_top}" width="{plot_w}" height="{plot_h}" '
        'fill="none" stroke="black"/>',
    ]
    # Decade ticks on the log axis.
    for exp in range(math.floor(lo), math.ceil(hi) + 1):
        if lo <= exp <= hi:
            y = y_of(10.0**exp)
            parts.append(
                f'<line x1="{m_left - 5}" y1="{y:.2f}" x2="{m_left}" y2="{y:.2f}" stroke="black"/>'
            )
            parts.append(
                f'<text x="{m_left - 8}" y="{y + 4:.2f}" text-anchor="end" '
                f'font-size="12">1e{exp}</text>'
            )
    for i, (name, st) in enumerate(stats.items()):
        cx = m_left + slot * (i + 0.5)
        x0, x1 = cx - box_w / 2, cx + box_w / 2
        y_q1, y_q3 = y_of(st["q1"]), y_of(st["q3"])
        y_med = y_of(st["median"])
        y_wlo, y_whi = y_of(st["whisker_data_low"]), y_of(st["whisker_data_high"])
        y_mean = y_of(st["mean"])
        parts += [
            f'<line x1="{cx:.2f}" y1="{y_wlo:.2f}" x2="{cx:.2f}" y2="{y_q1:.2f}" stroke="black"/>',
            f'<line x1="{cx:.2f}" y1="{y_q3:.2f}" x2="{cx:.2f}" y2="{y_whi:.2f}" stroke="black"/>',
            f'<line x1="{x0:.2f}" y1="{y_wlo:.2f}" x2="{x1:.2f}" y2="{y_wlo:.2f}" stroke="black"/>',
            f'<line x1="{x0:.2f}" y1="{y_whi:.2f}" x2="{x1:.2f}" y2="{y_whi:.2f}" stroke="black"/>',
            f'<rect x="{x0:.2f}" y="{y_q3:.2f}" width="{box_w:.2f}" '
            f'height="{abs(y_q1 - y_q3):.2f}" fill="none" stroke="black"/>',
            f'<line x1="{x0:.2f}" y1="{y_med:.2f}" x2="{x1:.2f}" y2="{y_med:.2f}" '
            'stroke="orange" stroke-width="2"/>',
            f'<line x1="{x0:.2f}" y1="{y_mean:.2f}" x2="{x1:.2f}" y2="{y_mean:.2f}" '
            'stroke="green" stroke-width="2" stroke-dasharray="6,4"/>',
            f'<text x="{cx:.2f}" y="{height - m_bottom + 20}" text-anchor="middle" '
            f'font-size="13">{name}</text>',
        ]
        for v in st["outliers"]:
            parts.append(
                f'<circle cx="{cx:.2f}" cy="{y_of(v):.2f}" r="2.5" fill="none" stroke="black"/>'
            )
    parts.append("</svg>")

    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    sidecar = {
        "log_clip": log_clip,
        "conventions": dict(_CONVENTIONS),
        "methods": stats,
    }
    sidecar_path = path.parent / "boxplot_data.json"
    sidecar_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    return sidecar
