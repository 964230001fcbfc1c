"""Optimization horizon diagnostics reported next to each experiment cell."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

from .filters import FilterSpec, eigenvalue_ratio_bound
from .graph import Graph, smallest_component_size

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HorizonReport:
    radius: float
    eigen_ratio: float
    p_ratio: float
    transfer_shrink: float
    constraint_multiplier: float
    effective_nodes: int
    quadratic_radius: float

    def as_dict(self) -> dict:
        return asdict(self)

    def line(self) -> str:
        return " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in asdict(self).items())


def horizon_radius(spec: FilterSpec, p_ratio: float, node_count: int) -> float:
    """0.5 * n * (lambda_1 / lambda_max bound) * (min p / max p)."""
    if node_count <= 0:
        raise ValueError("node count must be positive")
    return 0.5 * node_count * eigenvalue_ratio_bound(spec) * p_ratio


def quadratic_horizon_radius(spec: FilterSpec, delta0: float, node_count: int) -> float:
    """Radius with the transfer trick under L1-normalized posteriors (grows with n squared)."""
    if node_count <= 0:
        raise ValueError("node count must be positive")
    return 0.5 * delta0 / (delta0 + 1) ** 2 * node_count**2 * eigenvalue_ratio_bound(spec)


def transfer_shrink(delta0: float) -> float:
    if delta0 <= 0:
        raise ValueError("delta0 must be positive")
    return delta0 / (delta0 + 1)


def constraint_multiplier(prule_original: float, target_prule: float) -> float:
    hi = max(prule_original, target_prule)
    if hi == 0:
        return 0.0
    value = min(prule_original, target_prule) / hi
    if prule_original == 0:
        logger.warning("original prule is zero: the fairness constraint collapses the optimization horizon")
    return value


def horizon_report(
    spec: FilterSpec,
    graph: Graph,
    delta0: float,
    prule_original: float,
    target_prule: float = 1.0,
    p_ratio: float = 1.0,
) -> HorizonReport:
    """All diagnostics for one cell. ``p_ratio`` is 1 for L1 post-processing."""
    n = smallest_component_size(graph)
    return HorizonReport(
        radius=horizon_radius(spec, p_ratio, n),
        eigen_ratio=eigenvalue_ratio_bound(spec),
        p_ratio=p_ratio,
        transfer_shrink=transfer_shrink(delta0),
        constraint_multiplier=constraint_multiplier(prule_original, target_prule),
        effective_nodes=n,
        quadratic_radius=quadratic_horizon_radius(spec, delta0, n),
    )
