"""Disparate impact and posterior quality measures."""
from __future__ import annotations

import logging

import numpy as np
from scipy.stats import rankdata

logger = logging.getLogger(__name__)

UTILITY_FLOOR = 1e-12


def as_mask(group, node_count: int | None = None) -> np.ndarray:
    """Boolean membership vector from a mask or an index collection."""
    group = np.asarray(group)
    if group.dtype == bool:
        if node_count is not None and len(group) != node_count:
            raise ValueError("mask length does not match node count")
        return group
    if node_count is None:
        raise ValueError("node_count required for index-based groups")
    mask = np.zeros(node_count, dtype=bool)
    mask[group.astype(np.int64)] = True
    return mask


def _split(r, sensitive):
    r = np.asarray(r, dtype=float)
    mask = as_mask(sensitive, len(r))
    n_s = int(mask.sum())
    n_ns = len(r) - n_s
    if n_s == 0 or n_ns == 0:
        raise ValueError("protected group needs at least one member and one non-member")
    return r, mask, n_s, n_ns


def prule(r, sensitive) -> float:
    """Score-based p-rule between the protected group and its complement.

    Scores must be non-negative. Returns 0 when every score is zero.
    """
    r, mask, n_s, n_ns = _split(r, sensitive)
    if np.any(r < 0):
        raise ValueError("prule is defined for non-negative scores only")
    a = n_ns * r[mask].sum()
    b = n_s * r[~mask].sum()
    hi = max(a, b)
    if hi == 0:
        return 0.0
    # same as min/max; the exact difference keeps decimal ratios such as 0.6/0.8 at 0.75
    return float(1 - abs(a - b) / hi)


def phi_from_prule(p: float, n_protected: int, n_nodes: int) -> float:
    """Protected-group mass fraction that corresponds to ``p`` (protected group lower-scored)."""
    return n_protected * p / (n_nodes + n_protected * (p - 1))


def prule_from_phi(phi: float, n_protected: int, n_nodes: int) -> float:
    if not 0 < phi < 1:
        raise ValueError(f"phi must lie in (0, 1), got {phi}")
    return phi * (n_nodes - n_protected) / ((1 - phi) * n_protected)


def target_phi(r, sensitive, target_prule: float = 1.0) -> tuple[float, bool]:
    """Mass fraction the protected group should hold to reach ``target_prule``.

    When the protected group already has the larger average score the
    complement is treated as protected for the conversion; the returned flag
    reports that swap.
    """
    r, mask, n_s, n_ns = _split(r, sensitive)
    n = len(r)
    swapped = n_ns * r[mask].sum() > n_s * r[~mask].sum()
    if swapped:
        return 1.0 - phi_from_prule(target_prule, n_ns, n), True
    return phi_from_prule(target_prule, n_s, n), False


def utility_loss(r_fair, r_original, floor: float = UTILITY_FLOOR, strict: bool = False) -> float:
    """Mean relative error ``|1 - r_fair / r_original|``.

    Nodes whose original score is at most ``floor`` are skipped (or raise when
    ``strict``); the mean is taken over the remaining nodes.
    """
    r_fair = np.asarray(r_fair, dtype=float)
    r_original = np.asarray(r_original, dtype=float)
    if r_fair.shape != r_original.shape:
        raise ValueError("signals must have equal length")
    keep = r_original > floor
    excluded = int((~keep).sum())
    if excluded:
        if strict:
            raise ValueError(f"{excluded} nodes have original scores <= {floor}")
        logger.warning("utility loss skips %d nodes with original scores <= %g", excluded, floor)
    if not keep.any():
        raise ValueError("no node has a positive original score")
    return float(np.mean(np.abs(1 - r_fair[keep] / r_original[keep])))


def auc(scores, positives, eval_mask=None) -> float:
    """Probability that a positive outranks a negative, ties counting one half.

    ``positives`` and ``eval_mask`` accept boolean masks or index arrays; only
    nodes inside ``eval_mask`` (default: all) take part.
    """
    scores = np.asarray(scores, dtype=float)
    n = len(scores)
    pos = as_mask(positives, n)
    keep = np.ones(n, dtype=bool) if eval_mask is None else as_mask(eval_mask, n)
    s = scores[keep]
    y = pos[keep]
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both positive and negative nodes in the evaluation set")
    ranks = rankdata(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def calders_verwer(r, sensitive, normalize: bool = False) -> float:
    """Absolute difference of the two groups' mean scores.

    With ``normalize`` the scores are first divided by their sum.
    """
    r, mask, _, _ = _split(r, sensitive)
    if normalize:
        total = r.sum()
        if total != 0:
            r = r / total
    return float(abs(r[mask].mean() - r[~mask].mean()))
