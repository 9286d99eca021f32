"""Agent-removal evaluation, statistics and spatial heatmaps."""

from agentimp.evalharness.experiment import (
    ALL,
    Heatmap,
    OracleAgreement,
    RemovalRecord,
    RemovalResult,
    SceneEval,
    angular_delta,
    attention_heatmap,
    evaluate_scene,
    oracle_agreement,
    quantile_table,
    remove_agent,
    remove_agents,
    run_removal_experiment,
    traj_delta,
)
from agentimp.evalharness.pipeline import EvalReport, evaluate, write_report
from agentimp.evalharness.stats import (
    QUANTILES,
    UndefinedStatistic,
    histogram,
    pearson,
    quantile_nearest_rank,
    quantiles,
    r_squared,
    rankdata,
    spearman,
)

__all__ = [
    "ALL",
    "EvalReport",
    "QUANTILES",
    "Heatmap",
    "OracleAgreement",
    "RemovalRecord",
    "RemovalResult",
    "SceneEval",
    "UndefinedStatistic",
    "angular_delta",
    "attention_heatmap",
    "evaluate",
    "evaluate_scene",
    "oracle_agreement",
    "histogram",
    "pearson",
    "quantile_nearest_rank",
    "quantile_table",
    "quantiles",
    "r_squared",
    "rankdata",
    "remove_agent",
    "remove_agents",
    "run_removal_experiment",
    "spearman",
    "traj_delta",
    "write_report",
]
