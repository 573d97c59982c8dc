from .baselines import (PROVIDER_LADDERS, JointComparison, SpacingInvalid, joint_vs_independent,
                        pa_baseline, pa_sweep, recommended_set, subsample_views)
from .evaluate import CandidateLadder, UserType, expected_satisfaction, user_types
from .gap import GapResult, gap_study, solve_gap, zero_gap_fraction
from .ilp import IlpModel, build_ilp, closed_form_counts, export_ilp, solve_milp, write_lp
from .search import (Frontier, OptimizationReport, brute_force_set_selection, merge_frontiers,
                     optimize_set, optimize_sweep, video_frontiers)

__all__ = [
    "PROVIDER_LADDERS", "CandidateLadder", "Frontier", "GapResult", "IlpModel", "JointComparison",
    "OptimizationReport", "SpacingInvalid", "UserType", "brute_force_set_selection", "build_ilp",
    "closed_form_counts", "expected_satisfaction", "export_ilp", "gap_study", "joint_vs_independent",
    "merge_frontiers", "optimize_set", "optimize_sweep", "pa_baseline", "pa_sweep",
    "recommended_set", "solve_gap", "solve_milp", "subsample_views", "user_types",
    "video_frontiers", "write_lp", "zero_gap_fraction",
]
