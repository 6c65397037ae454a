"""Panel regression with interactive and two-way grouped fixed effects."""

from .clustering import Grouping, cluster_points, pair_triple_partition, pairwise_distances
from .errors import (BalanceError, BootstrapError, DomainError, JackknifeError, PanelError,
                     ParseError, SingularDesignError)
from .estimators import EstimatorSpec, PanelFitter, fit_report, parse_estimator
from .factor_ls import FactorEstimate, LsConfig, estimate_ls, factor_annihilate
from .grouped_fe import (GroupedFEEstimate, build_dummies, estimate_gfe, estimate_gfe_given_groups,
                         project_within)
from .inference import (bootstrap_cluster_se, cluster_se, hc_se, jackknife_combine,
                        jackknife_correct)
from .panel import EstimateReport, PanelData, load_panel_csv, singular_tail_share, write_panel_csv
from .simulation import MCReport, SimConfig, decompose_error, generate_panel, kernel_h, run_monte_carlo
from .split_sample import BlockScheme, SplitGFEEstimate, estimate_gfe_split, make_blocks

__version__ = "0.1.0"

__all__ = [
    "BalanceError", "BlockScheme", "BootstrapError", "DomainError", "EstimateReport",
    "EstimatorSpec", "FactorEstimate", "GroupedFEEstimate", "Grouping", "JackknifeError",
    "LsConfig", "MCReport", "PanelData", "PanelError", "PanelFitter", "ParseError",
    "SimConfig", "SingularDesignError", "SplitGFEEstimate", "bootstrap_cluster_se",
    "build_dummies", "cluster_points", "cluster_se", "decompose_error", "estimate_gfe",
    "estimate_gfe_given_groups", "estimate_gfe_split", "estimate_ls", "factor_annihilate",
    "fit_report", "generate_panel", "hc_se", "jackknife_combine", "jackknife_correct",
    "kernel_h", "load_panel_csv", "make_blocks", "pair_triple_partition", "pairwise_distances",
    "parse_estimator", "project_within", "run_monte_carlo", "singular_tail_share",
    "write_panel_csv",
]
