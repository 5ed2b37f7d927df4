"""DTW, DBA and count-matched synthetic window generation."""

from .dba import BarycenterConfig, dba, dba_iterations, medoid_index, multichannel_medoid_index
from .dtw import DTWResult, dtw, dtw_cost, is_admissible, path_cost
from .generate import (CHANNELS, Segment, SynthesisConfig, SynthesisPlan, WindowPolicy, build_plans,
                       generate_synthetic, policy_for, read_synthetic, sample_windows,
                       synthesize_dataset, write_synthetic)

__all__ = [
    "BarycenterConfig", "CHANNELS", "DTWResult", "Segment", "SynthesisConfig", "SynthesisPlan",
    "WindowPolicy", "build_plans", "dba", "dba_iterations", "dtw", "dtw_cost", "generate_synthetic",
    "is_admissible", "medoid_index", "multichannel_medoid_index", "path_cost", "policy_for",
    "read_synthetic", "sample_windows", "synthesize_dataset", "write_synthetic",
]
