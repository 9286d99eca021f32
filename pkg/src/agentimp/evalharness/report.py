"""CSV / JSON writers for evaluation reports and heatmaps."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from agentimp.evalharness.experiment import QUANTITIES, CorrelationRow, Heatmap
from agentimp.evalharness.stats import QUANTILES


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_correlation_table(path, rows: list[CorrelationRow], label: str = "k") -> None:
    write_rows(
        path,
        (label, "n", "traj_pearson", "traj_r2", "err_pearson", "err_r2"),
        [(r.label, r.n, r.traj_pearson, r.traj_r2, r.err_pearson, r.err_r2) for r in rows],
    )


def write_quantile_table(path, table: dict) -> None:
    rows = []
    for name in QUANTITIES:
        entry = table[name]
        qs = entry["quantiles"] or [None] * len(QUANTILES)
        rows.append((name, entry["n"], *qs))
    write_rows(path, ("quantity", "n", *(f"q{q}" for q in QUANTILES)), rows)


def write_histograms(path, hists: dict) -> None:
    """Long format: one row per bin plus underflow / overflow rows per quantity."""
    rows = []
    for name, h in hists.items():
        edges = h["edges"]
        rows.append((name, "underflow", "", float(edges[0]), h["underflow"]))
        for n, c in enumerate(h["counts"]):
            rows.append((name, "bin", float(edges[n]), float(edges[n + 1]), int(c)))
        rows.append((name, "overflow", float(edges[-1]), "", h["overflow"]))
    write_rows(path, ("quantity", "kind", "lo", "hi", "count"), rows)


def write_records(path, records) -> None:
    cols = ("scene_id", "k", "agent_ids", "removed_attention", "traj_delta", "error_delta", "angular_delta")
    write_rows(path, cols, [tuple(r.row()[c] for c in cols) for r in records])


def write_heatmap_csv(path, hm: Heatmap, grid=None) -> None:
    """Header row: x lower edges; first column: y lower edges, farthest-ahead row first."""
    grid = hm.mean_per_cell if grid is None else grid
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y\\x", *(_fmt(float(e)) for e in hm.x_edges[:-1])])
        for iy in range(grid.shape[0] - 1, -1, -1):
            w.writerow([_fmt(float(hm.y_edges[iy])), *(_fmt(float(v)) for v in grid[iy])])


def read_heatmap_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    x_edges = np.array([float(v) for v in rows[0][1:]])
    y_edges = np.array([float(r[0]) for r in rows[1:]])[::-1]
    grid = np.array([[float(v) for v in r[1:]] for r in rows[1:]])[::-1]
    return x_edges, y_edges, grid


def heatmap_summary(hm: Heatmap) -> dict:
    return {
        "num_scenes": hm.num_scenes,
        "cells": [int(hm.mass.shape[0]), int(hm.mass.shape[1])],
        "edges": hm.x_edges.tolist(),
        "total_mass": hm.total_mass,
        "grid_mass": float(hm.mass.sum()),
        "overflow_mass": hm.overflow_mass,
        "overflow_count": hm.overflow_count,
        "front_fraction": hm.front_fraction(),
        "mass": hm.mass.tolist(),
        "counts": hm.counts.tolist(),
    }


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def rows_to_json(rows: list[CorrelationRow]) -> list[dict]:
    return [asdict(r) for r in rows]
