"""End-to-end evaluation: removal tables, quantiles, histograms, importance dump."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from agentimp import importance as imp
from agentimp.evalharness import report
from agentimp.evalharness.experiment import (
    ALL,
    RemovalResult,
    correlation_row,
    OracleAgreement,
    evaluate_scene,
    oracle_agreement,
    quantile_table,
    run_removal_experiment,
)
from agentimp.evalharness.stats import histogram
from agentimp.model.params import ModelParams

log = logging.getLogger(__name__)


@dataclass
class EvalReport:
    agg_mode: str
    removal: RemovalResult
    aggregation_rows: list
    quantiles: dict
    histograms: dict
    oracle: OracleAgreement | None = None
    evals: list = field(repr=False, default_factory=list)

    def summary(self) -> dict:
        return {
            "agg_mode": self.agg_mode,
            "num_scenes": len(self.evals),
            "excluded_scenes": list(self.removal.excluded),
            "warnings": list(self.removal.warnings),
            "table1": report.rows_to_json(self.removal.rows),
            "table2": self.quantiles,
            "table3": report.rows_to_json(self.aggregation_rows),
            "histogram_outliers": {k: {"underflow": h["underflow"], "overflow": h["overflow"]} for k, h in self.histograms.items()},
            "oracle_spearman": None if self.oracle is None else {
                "mean": self.oracle.mean_spearman,
                "scenes": len(self.oracle.per_scene),
                "skipped": len(self.oracle.skipped),
            },
        }


def evaluate(params: ModelParams, scenes, ks=(1, 2, 3, ALL), agg_mode: str = "last", hist_bins: int = 30, hist_max: float = 3.0) -> EvalReport:
    evals = [evaluate_scene(params, s) for s in scenes]
    removal = run_removal_experiment(params, scenes, ks, agg_mode, evals=evals)
    agg_rows = []
    for mode in imp.AGG_MODES:
        res = removal if mode == agg_mode and 1 in [r.label for r in removal.rows] else run_removal_experiment(params, scenes, (1,), mode, evals=evals)
        recs = [r for r in res.records if r.k == 1]
        agg_rows.append(correlation_row(mode, recs))
    top1 = [r for r in removal.records if r.k == 1]
    hists = {
        "traj_delta_top1": histogram([r.traj_delta for r in top1], hist_bins, (0.0, hist_max)),
        "removed_attention_top1": histogram([r.removed_attention for r in top1], 20, (0.0, 1.0)),
    }
    table2 = quantile_table(removal.records, evals, agg_mode)
    return EvalReport(agg_mode, removal, agg_rows, table2, hists, oracle_agreement(evals, agg_mode), evals)


def write_report(rep: EvalReport, out_dir) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "table1": out / "table1.csv",
        "table2": out / "table2.csv",
        "table3": out / "table3.csv",
        "fig1_hist": out / "fig1_hist.csv",
        "records": out / "records.csv",
        "importance": out / "importance.csv",
        "summary": out / "summary.json",
    }
    report.write_correlation_table(paths["table1"], rep.removal.rows, "k")
    report.write_quantile_table(paths["table2"], rep.quantiles)
    report.write_correlation_table(paths["table3"], rep.aggregation_rows, "aggregation")
    report.write_histograms(paths["fig1_hist"], rep.histograms)
    report.write_records(paths["records"], rep.removal.records)
    imp.write_importance_csv(paths["importance"], [e.scores for e in sorted(rep.evals, key=lambda e: e.scene.scene_id)])
    report.write_json(paths["summary"], rep.summary())
    return paths
