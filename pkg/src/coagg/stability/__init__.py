"""Multiscale community detection with Markov Stability."""

from .dendrogram import Dendrogram, build_dendrogram
from .kernel import MarkovKernel, Mode, StabilityScore, autocovariance, stability
from .louvain import louvain_maximize
from .partition import Partition, mean_pairwise_vi, variation_of_information
from .sweep import (
    Selection,
    SweepResult,
    TimePoint,
    external_partition,
    local_minima,
    score_external_partition,
    select_partitions,
    sweep,
    time_grid,
)

__all__ = [
    "Dendrogram", "MarkovKernel", "Mode", "Partition", "Selection", "StabilityScore",
    "SweepResult", "TimePoint", "autocovariance", "build_dendrogram", "external_partition",
    "local_minima", "louvain_maximize", "mean_pairwise_vi", "score_external_partition",
    "select_partitions", "stability", "sweep", "time_grid", "variation_of_information",
]
