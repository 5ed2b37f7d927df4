"""Ensemble feature selection: rankers, stability and rank aggregation."""

from .aggregate import StabilityReport, beta_scores, rra, stability, stability_of, tanimoto
from .hfse import SelectionConfig, SelectionResult, hfse_select, run_ranker
from .rankers import (ALGORITHMS, Algorithm, RankList, discretize, ict_importance, ldr_importance,
                      mrmr, mutual_information, oob_importance, order_from_scores, relief_f)
from .subsample import SubsampleSpec, jaccard, stratified_subsample

__all__ = [
    "ALGORITHMS", "Algorithm", "RankList", "SelectionConfig", "SelectionResult", "StabilityReport",
    "SubsampleSpec", "beta_scores", "discretize", "hfse_select", "ict_importance", "jaccard",
    "ldr_importance", "mrmr", "mutual_information", "oob_importance", "order_from_scores", "relief_f",
    "rra", "run_ranker", "stability", "stability_of", "stratified_subsample", "tanimoto",
]
