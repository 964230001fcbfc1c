"""Post-hoc disparate impact mitigation of posterior scores."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import _split, phi_from_prule, prule


class GroupMassError(ValueError):
    """A group holds no score mass, so no rescaling can balance it."""


def _scale(total: float, p0) -> float:
    if p0 == "l1":
        return 1.0
    if p0 == "mass":
        return total
    return float(p0)


def mult_transform(r, sensitive, phi: float, p0="l1") -> np.ndarray:
    """Rescale each group so that the protected one holds fraction ``phi`` of the mass.

    ``p0`` fixes the output total: ``"l1"`` (sum to one), ``"mass"`` (keep the
    input sum) or a positive number.
    """
    r, mask, _, _ = _split(r, sensitive)
    if not 0 < phi < 1:
        raise ValueError(f"phi must lie in (0, 1), got {phi}")
    m_s = r[mask].sum()
    m_n = r[~mask].sum()
    if not (m_s > 0 and m_n > 0):
        raise GroupMassError(f"group score masses must be positive (protected {m_s:g}, rest {m_n:g})")
    total = _scale(m_s + m_n, p0)
    return np.where(mask, phi / m_s, (1 - phi) / m_n) * r * total


@dataclass
class LfproResult:
    scores: np.ndarray
    converged: bool
    iterations: int
    prule_trace: list = field(default_factory=list)
    method: str = "lfpro (reconstructed)"


def lfpro(
    r,
    sensitive,
    target_prule: float = 1.0,
    tolerance: float = 1e-12,
    max_iters: int = 10_000,
    step: float = 0.1,
    weighting: str = "proportional",
) -> LfproResult:
    """Incrementally move excess score mass from the over-represented group to the other.

    Each iteration computes the mass deficit of the under-represented group
    relative to its share at ``target_prule`` and moves ``step`` of it. Mass is
    removed from over-group nodes and added to under-group nodes, either in
    proportion to their scores or, with ``weighting="uniform"``, as equal
    shifts (removal clamped at zero). Stops once the deficit falls below
    ``tolerance`` times the total mass, when nothing can move, or after
    ``max_iters``.
    """
    r, mask, n_s, n_ns = _split(r, sensitive)
    if np.any(r < 0):
        raise ValueError("lfpro expects non-negative scores")
    if weighting not in ("proportional", "uniform"):
        raise ValueError(f"unknown weighting {weighting!r}")
    out = r.copy()
    total = out.sum()
    n = len(out)
    trace = [prule(out, mask)]
    if total == 0:
        return LfproResult(out, True, 0, trace)

    s_lower = n_ns * out[mask].sum() <= n_s * out[~mask].sum()
    under = mask if s_lower else ~mask
    over = ~under
    share = phi_from_prule(target_prule, int(under.sum()), n)

    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        deficit = share * total - out[under].sum()
        if deficit <= tolerance * total:
            converged = True
            it -= 1
            break
        available = out[over].sum()
        amount = min(step * deficit, available)
        if amount <= 0:
            break
        if weighting == "proportional":
            out[over] *= 1 - amount / available
            m_under = out[under].sum()
            if m_under > 0:
                out[under] *= 1 + amount / m_under
            else:
                out[under] += amount / under.sum()
        else:
            out[over] = _remove_uniform(out[over], amount)
            out[under] += amount / under.sum()
        trace.append(prule(out, mask))
    return LfproResult(out, converged, it, trace)


def _remove_uniform(values: np.ndarray, amount: float) -> np.ndarray:
    """Subtract a common shift from all entries, clamping at zero, so ``amount`` is removed in total."""
    values = values.copy()
    remaining = amount
    while remaining > 0:
        active = values > 0
        k = int(active.sum())
        if k == 0:
            break
        shift = remaining / k
        smallest = values[active].min()
        if smallest >= shift:
            values[active] -= shift
            break
        values[active] -= smallest
        remaining -= smallest * k
        values[values < 0] = 0.0
    return values
