"""Truncated polynomial graph filters."""
from __future__ import annotations

import hashlib
import math
import re
import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import COLUMN, SYMMETRIC, NormalizedGraph, spmv, spmv_transpose

DEFAULT_TERMS = 20
GRID_POINTS = 2001


class ZeroSignalWarning(RuntimeWarning):
    """L1 post-processing was requested for an all-zero posterior."""


@dataclass(frozen=True, eq=False)
class FilterSpec:
    """Coefficients f_0..f_N of ``F(A) = sum_n f_n A^n``.

    ``kind`` is ``"ppr"``, ``"hk"`` or ``"custom"``; ``param`` holds the
    teleport ``a`` or heat ``t`` for the first two.
    """

    kind: str
    coefficients: np.ndarray
    param: float | None = None
    name: str = field(default="")

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float).ravel()
        if coef.size == 0 or not np.all(np.isfinite(coef)):
            raise ValueError("filter coefficients must be finite and non-empty")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        if not self.name:
            label = self.kind if self.param is None else f"{self.kind}{self.param:g}"
            object.__setattr__(self, "name", label)

    @property
    def terms(self) -> int:
        """Truncation order N (highest power of the adjacency)."""
        return len(self.coefficients) - 1

    def key(self) -> str:
        """Stable digest identifying the exact filter, used to assert that two pipelines share it."""
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(repr(self.param).encode())
        h.update(self.coefficients.tobytes())
        return h.hexdigest()[:16]

    def __eq__(self, other):
        return isinstance(other, FilterSpec) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def polynomial(self, lam) -> np.ndarray:
        """Evaluate the truncated polynomial at scalar or array ``lam``."""
        lam = np.asarray(lam, dtype=float)
        out = np.zeros_like(lam)
        for c in self.coefficients[::-1]:
            out = out * lam + c
        return out

    def generating_function(self, lam) -> np.ndarray:
        """Untruncated response: (1-a)/(1-a lam) for ppr, exp(-t(1-lam)) for hk.

        Custom filters fall back to the truncated polynomial.
        """
        lam = np.asarray(lam, dtype=float)
        if self.kind == "ppr":
            a = self.param
            return (1 - a) / (1 - a * lam)
        if self.kind == "hk":
            return np.exp(-self.param * (1 - lam))
        return self.polynomial(lam)


def ppr_coefficients(a: float, terms: int = DEFAULT_TERMS) -> FilterSpec:
    """Personalized pagerank weights f_n = (1-a) a^n."""
    if not 0 < a < 1:
        raise ValueError(f"ppr parameter must lie in (0, 1), got {a}")
    n = np.arange(terms + 1)
    return FilterSpec("ppr", (1 - a) * a**n, param=float(a))


def hk_coefficients(t: float, terms: int = DEFAULT_TERMS) -> FilterSpec:
    """Heat kernel weights f_n = e^-t t^n / n!."""
    if not t > 0:
        raise ValueError(f"heat kernel parameter must be positive, got {t}")
    coef = [math.exp(-t) * t**n / math.factorial(n) for n in range(terms + 1)]
    return FilterSpec("hk", coef, param=float(t))


def custom_filter(coefficients, name: str = "custom") -> FilterSpec:
    return FilterSpec("custom", coefficients, name=name)


def identity_filter() -> FilterSpec:
    return FilterSpec("custom", [1.0], name="identity")


_NAME = re.compile(r"^(ppr|hk)([0-9]*\.?[0-9]+)(sym|col)$", re.IGNORECASE)


def parse_filter_name(name: str) -> tuple[FilterSpec, str]:
    """Parse names such as ``ppr0.85sym`` or ``hk3col`` into (spec, normalization)."""
    m = _NAME.match(name.strip())
    if m is None:
        raise ValueError(f"cannot parse filter name {name!r}; expected {{ppr|hk}}<param>{{sym|col}}")
    kind, param, norm = m.group(1).lower(), float(m.group(2)), m.group(3).lower()
    spec = ppr_coefficients(param) if kind == "ppr" else hk_coefficients(param)
    spec = FilterSpec(spec.kind, spec.coefficients, spec.param, name=name.strip().lower())
    return spec, SYMMETRIC if norm == "sym" else COLUMN


def l1_scale(r: np.ndarray) -> tuple[np.ndarray, float]:
    """Divide by the L1 norm; returns the scaled signal and the factor used.

    An all-zero signal is returned unchanged with factor 1 and a
    :class:`ZeroSignalWarning`.
    """
    norm = np.abs(r).sum()
    if norm == 0:
        warnings.warn("L1 post-processing of an all-zero posterior", ZeroSignalWarning, stacklevel=2)
        return r, 1.0
    return r / norm, 1.0 / norm


def apply_filter(spec: FilterSpec, graph: NormalizedGraph, q, postprocess: str = "none") -> np.ndarray:
    """Posteriors ``diag(p) F(A) q`` via repeated sparse propagation.

    ``postprocess`` is ``"none"`` or ``"l1"``. ``q`` may also be a 2-d array of
    column signals, in which case post-processing is not supported.
    """
    q = np.asarray(q, dtype=float)
    if q.shape[0] != graph.node_count:
        raise ValueError(f"signal length {q.shape[0]} != node count {graph.node_count}")
    coef = spec.coefficients
    power = q
    r = coef[0] * q
    for c in coef[1:]:
        power = spmv(graph, power)
        r = r + c * power
    if postprocess == "l1":
        if r.ndim != 1:
            raise ValueError("l1 post-processing expects a single signal")
        r, _ = l1_scale(r)
    elif postprocess != "none":
        raise ValueError(f"unknown post-processing {postprocess!r}")
    return r


def apply_filter_transpose(spec: FilterSpec, graph: NormalizedGraph, g) -> np.ndarray:
    """Adjoint ``F(A)^T g``."""
    g = np.asarray(g, dtype=float)
    if g.shape[0] != graph.node_count:
        raise ValueError(f"signal length {g.shape[0]} != node count {graph.node_count}")
    coef = spec.coefficients
    power = g
    r = coef[0] * g
    for c in coef[1:]:
        power = spmv_transpose(graph, power)
        r = r + c * power
    return r


def _grid(grid_points: int) -> np.ndarray:
    if grid_points < 2:
        raise ValueError("need at least two grid points")
    return np.linspace(-1.0, 1.0, grid_points)


def positive_definite_check(spec: FilterSpec, grid_points: int = GRID_POINTS) -> bool:
    """Whether the truncated polynomial is strictly positive on [-1, 1]."""
    return bool(np.all(spec.polynomial(_grid(grid_points)) > 0))


def eigenvalue_ratio_bound(spec: FilterSpec, grid_points: int = GRID_POINTS, truncated: bool = False) -> float:
    """Lower bound min F / max F over [-1, 1] for the ratio of extreme filter eigenvalues.

    By default ppr and hk filters use their closed-form response; pass
    ``truncated=True`` to bound the N-term polynomial that is actually applied.
    """
    lam = _grid(grid_points)
    values = spec.polynomial(lam) if truncated else spec.generating_function(lam)
    if not np.all(values > 0):
        raise ValueError(f"filter {spec.name} is not positive definite on [-1, 1]")
    return float(values.min() / values.max())
