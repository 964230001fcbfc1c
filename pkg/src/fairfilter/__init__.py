"""Fairness-aware graph filter posteriors via prior editing."""
from .bounds import HorizonReport, horizon_report, horizon_radius, quadratic_horizon_radius, transfer_shrink
from .data import (
    Dataset,
    TaskInstance,
    community_task,
    diffusion_task,
    load_dataset,
    member_diffusion_task,
    save_dataset,
    stable_seed,
    synth_biased_graph,
)
from .filters import (
    FilterSpec,
    apply_filter,
    apply_filter_transpose,
    eigenvalue_ratio_bound,
    hk_coefficients,
    parse_filter_name,
    ppr_coefficients,
)
from .graph import Graph, load_edge_list, normalize
from .metrics import auc, calders_verwer, prule, target_phi, utility_loss
from .mitigation import GroupMassError, lfpro, mult_transform
from .nsgff import NsgffResult, SurrogateTask, build_task, fit

__version__ = "0.1.0"
