"""Neural surrogate of fairness-aware graph filtering (NSGFF).

A small relu network edits the filter's priors node by node from the
features (q0, r0, sensitive flag[, asymmetric posteriors]). The edited priors
go through the same filter that produced the original posteriors, then
through the transfer map ``f(r) = r_ns0 (delta + r) / (delta + r0)``, the
group rebalancing that hard-codes the fairness target, and L1 normalization.
Training minimizes the relative utility loss against the original
posteriors with full-batch Adam; gradients are derived by hand.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .filters import (
    FilterSpec,
    apply_filter,
    apply_filter_transpose,
    hk_coefficients,
    identity_filter,
    ppr_coefficients,
)
from .graph import COLUMN, SYMMETRIC, Graph, NormalizedGraph, normalize
from .metrics import UTILITY_FLOOR, as_mask, target_phi
from .mitigation import GroupMassError, mult_transform

logger = logging.getLogger(__name__)

DEPTHS = tuple(range(3, 10))
DELTA0S = (0.1, 1.0, 10.0)
VARIANTS = ("nsgff", "nn", "appnp")
FOLD_VAR = 1 - 2 / math.pi


# ---------------------------------------------------------------- features


def build_features(q0, r0, sensitive, mode: str = SYMMETRIC, r_ns0=None) -> np.ndarray:
    """Node feature matrix with columns (q0, r0, s) plus r_ns0 for column normalization."""
    q0 = np.asarray(q0, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    s = as_mask(sensitive, len(q0))
    if not s.any():
        raise ValueError("protected group is empty")
    cols = [q0, r0, s.astype(float)]
    if mode == COLUMN:
        if r_ns0 is None:
            raise ValueError("column normalization needs the asymmetric posteriors r_ns0")
        cols.append(np.asarray(r_ns0, dtype=float))
    elif r_ns0 is not None and mode != SYMMETRIC:
        raise ValueError(f"unknown normalization {mode!r}")
    features = np.column_stack(cols)
    if not np.all(np.isfinite(features)):
        raise ValueError("features must be finite")
    return features


# ------------------------------------------------------------------- model


@dataclass
class NsgffModel:
    weights: list
    biases: list

    @property
    def depth(self) -> int:
        return len(self.weights)

    def params(self) -> list:
        return self.weights + self.biases

    def copy(self) -> "NsgffModel":
        return NsgffModel([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def layer_dims(n_features: int, depth: int) -> list[int]:
    if depth < 1:
        raise ValueError("depth must be at least 1")
    width = n_features + 2
    return [n_features] + [width] * (depth - 1) + [1]


def folded_normal(fan_in: int, size, rng: np.random.Generator) -> np.ndarray:
    """Samples |N(0, sigma)| with sigma chosen so their standard deviation is sqrt(2 / fan_in)."""
    sigma = math.sqrt(2 / (FOLD_VAR * fan_in))
    return np.abs(rng.normal(0.0, sigma, size=size))


def init_folded_normal(n_features: int, depth: int, rng: np.random.Generator) -> NsgffModel:
    """Folded-normal weights (fan_in = input width of the layer) and zero biases."""
    dims = layer_dims(n_features, depth)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(folded_normal(fan_in, (fan_in, fan_out), rng))
        biases.append(np.zeros(fan_out))
    return NsgffModel(weights, biases)


# -------------------------------------------------------------------- task


def surrogate_filter(spec: FilterSpec, variant: str = "nsgff") -> FilterSpec:
    """Propagation used inside the surrogate: the base filter, identity (nn) or ppr(0.9) with 10 hops (appnp)."""
    if variant == "nsgff":
        return spec
    if variant == "nn":
        return identity_filter()
    if variant == "appnp":
        return ppr_coefficients(0.9, terms=10)
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


@dataclass(eq=False)
class SurrogateTask:
    """Everything a forward pass needs besides the parameters.

    ``r0`` are the L1-normalized symmetric posteriors of the unedited priors,
    ``reference`` the posteriors the loss compares against (the base filter's
    own L1 output, equal to ``r0`` under symmetric normalization), ``scale``
    the fixed post-processing factor applied after propagation.
    """

    features: np.ndarray
    spec: FilterSpec
    graph: NormalizedGraph
    scale: float
    r0: np.ndarray
    reference: np.ndarray
    sensitive: np.ndarray
    phi: float
    l_reg: float
    base_key: str
    variant: str = "nsgff"
    mode: str = SYMMETRIC
    floor: float = UTILITY_FLOOR

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def build_task(
    graph: Graph,
    q0,
    sensitive,
    spec: FilterSpec,
    mode: str = SYMMETRIC,
    target_prule: float = 1.0,
    variant: str = "nsgff",
    l_reg: float | None = None,
    propagation: NormalizedGraph | None = None,
) -> SurrogateTask:
    """Prepare a surrogate training problem for priors ``q0`` filtered by ``spec``.

    Column-normalized filtering is learned through the equivalent symmetric
    filter and mapped back by the transfer map; ``propagation`` overrides the
    graph the surrogate propagates on.
    """
    q0 = np.asarray(q0, dtype=float)
    if np.any(q0 < 0):
        raise ValueError("the transfer map needs non-negative priors")
    mask = as_mask(sensitive, graph.node_count)
    sym = normalize(graph, SYMMETRIC)
    r0 = apply_filter(spec, sym, q0, "l1")
    if mode == COLUMN:
        r_ns0 = apply_filter(spec, normalize(graph, COLUMN), q0, "l1")
    elif mode == SYMMETRIC:
        r_ns0 = r0
    else:
        raise ValueError(f"unknown normalization {mode!r}")
    features = build_features(q0, r0, mask, mode, r_ns0 if mode == COLUMN else None)
    prop_graph = sym if propagation is None else propagation
    prop_spec = surrogate_filter(spec, variant)
    if variant == "nsgff":
        assert prop_spec.key() == spec.key()
    mass = np.abs(apply_filter(prop_spec, prop_graph, q0)).sum()
    if mass == 0:
        raise ValueError("priors propagate to an all-zero signal")
    phi, _ = target_phi(r_ns0, mask, target_prule)
    if l_reg is None:
        l_reg = np.abs(q0).sum() / len(q0)
    return SurrogateTask(
        features=features,
        spec=prop_spec,
        graph=prop_graph,
        scale=1.0 / mass,
        r0=r0,
        reference=r_ns0,
        sensitive=mask,
        phi=phi,
        l_reg=float(l_reg),
        base_key=spec.key(),
        variant=variant,
        mode=mode,
    )


# ---------------------------------------------------------- forward/backward


@dataclass
class Tape:
    model: NsgffModel
    task: SurrogateTask
    delta: float
    pre: list
    acts: list
    r: np.ndarray
    g: np.ndarray
    out: np.ndarray


def forward(model: NsgffModel, task: SurrogateTask, delta: float) -> tuple[np.ndarray, Tape]:
    """Fair posteriors for the current parameters, plus the tape for :func:`backward`."""
    h = task.features
    acts, pre = [h], []
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < model.depth - 1 else z
        acts.append(h)
    priors = h[:, 0]
    r = task.scale * apply_filter(task.spec, task.graph, priors)
    g = task.reference * (delta + r) / (delta + task.r0)
    out = mult_transform(g, task.sensitive, task.phi, "l1")
    return out, Tape(model, task, delta, pre, acts, r, g, out)


def loss(r_out, reference, l_reg: float, floor: float = UTILITY_FLOOR) -> float:
    """Relative utility loss plus ``l_reg * (sum r_out - sum reference)``."""
    r_out = np.asarray(r_out, dtype=float)
    reference = np.asarray(reference, dtype=float)
    keep = reference > floor
    util = np.mean(np.abs(1 - r_out[keep] / reference[keep]))
    return float(util + l_reg * (r_out.sum() - reference.sum()))


def task_loss(out: np.ndarray, task: SurrogateTask) -> float:
    return loss(out, task.reference, task.l_reg, task.floor)


def loss_grad(out, task: SurrogateTask) -> np.ndarray:
    ref = task.reference
    keep = ref > task.floor
    grad = np.zeros_like(out)
    grad[keep] = -np.sign(1 - out[keep] / ref[keep]) / ref[keep] / keep.sum()
    return grad + task.l_reg


def backward(tape: Tape) -> list:
    """Gradients of the task loss w.r.t. ``model.params()`` (weights first, then biases)."""
    task, model = tape.task, tape.model
    grad_out = loss_grad(tape.out, task)

    # group rebalancing: out_v = c_group * g_v, c_S = phi / M_S, c_N = (1 - phi) / M_N
    s = task.sensitive
    g = tape.g
    grad_g = np.empty_like(g)
    for members, frac in ((s, task.phi), (~s, 1 - task.phi)):
        mass = g[members].sum()
        grad_g[members] = frac / mass * grad_out[members] - frac * (grad_out[members] @ g[members]) / mass**2

    grad_r = grad_g * task.reference / (tape.delta + task.r0)
    grad_q = task.scale * apply_filter_transpose(task.spec, task.graph, grad_r)

    grad_h = grad_q[:, None]
    grads_w = [None] * model.depth
    grads_b = [None] * model.depth
    for i in reversed(range(model.depth)):
        grad_z = grad_h if i == model.depth - 1 else grad_h * (tape.pre[i] > 0)
        grads_w[i] = tape.acts[i].T @ grad_z
        grads_b[i] = grad_z.sum(axis=0)
        grad_h = grad_z @ model.weights[i].T
    return grads_w + grads_b


# ----------------------------------------------------------------- training


@dataclass
class TrainConfig:
    lr: float = 0.01
    patience: int = 100
    max_epochs: int = 20_000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def shallow(cls) -> "TrainConfig":
        return cls(lr=0.1, patience=5, max_epochs=50)


@dataclass
class TrainResult:
    model: NsgffModel
    loss: float
    epochs: int
    trace: list = field(default_factory=list)
    diverged: bool = False


class Adam:
    def __init__(self, params: list, lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list, grads: list) -> None:
        self.t += 1
        c1 = 1 - self.beta1**self.t
        c2 = 1 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(model: NsgffModel, task: SurrogateTask, delta0: float, config: TrainConfig | None = None) -> TrainResult:
    """Full-batch Adam until the loss stops improving for ``patience`` epochs.

    The model is updated in place and left at its best snapshot; only
    parameters whose fair posteriors are all non-negative qualify as a
    snapshot. A forward pass that breaks the group-mass precondition or
    yields a non-finite loss ends training early.
    """
    config = config or TrainConfig()
    delta = delta0 * float(task.r0.max())
    opt = Adam(model.params(), config.lr, config.beta1, config.beta2, config.eps)
    best, best_model, wait = math.inf, model.copy(), 0
    trace = []
    diverged = False
    epoch = 0
    for epoch in range(1, config.max_epochs + 1):
        try:
            out, tape = forward(model, task, delta)
            value = task_loss(out, task)
        except GroupMassError:
            value = math.nan
        if not math.isfinite(value):
            diverged = True
            break
        trace.append(value)
        if value < best and out.min() >= 0:
            best, best_model, wait = value, model.copy(), 0
        else:
            wait += 1
            if wait >= config.patience:
                break
        opt.step(model.params(), backward(tape))
    model.weights, model.biases = best_model.weights, best_model.biases
    return TrainResult(model, best, epoch, trace, diverged)


def _model_rng(seed: int, depth: int) -> np.random.Generator:
    return np.random.default_rng([seed, depth])


@dataclass
class SearchResult:
    depth: int
    delta0: float
    loss: float
    table: list


def hyperparam_search(
    task: SurrogateTask,
    seed: int = 0,
    depths=DEPTHS,
    delta0s=DELTA0S,
    config: TrainConfig | None = None,
) -> SearchResult:
    """Shallow-train every (depth, delta0) pair and keep the lowest loss.

    Ties go to the smaller depth, then the smaller delta0.
    """
    config = config or TrainConfig.shallow()
    table = []
    best = None
    for depth in sorted(depths):
        for delta0 in sorted(delta0s):
            model = init_folded_normal(task.n_features, depth, _model_rng(seed, depth))
            result = train(model, task, delta0, config)
            table.append((depth, delta0, result.loss))
            if best is None or result.loss < best[2]:
                best = (depth, delta0, result.loss)
    return SearchResult(best[0], best[1], best[2], table)


@dataclass
class NsgffResult:
    scores: np.ndarray
    depth: int
    delta0: float
    epochs: int
    loss: float
    trace: list
    search: SearchResult | None = None
    model: NsgffModel | None = None

    def metadata(self) -> dict:
        return {"L": self.depth, "delta0": self.delta0, "epochs": self.epochs, "loss": self.loss}


def fit(
    task: SurrogateTask,
    seed: int = 0,
    depth: int | None = None,
    delta0: float | None = None,
    config: TrainConfig | None = None,
    shallow: TrainConfig | None = None,
) -> NsgffResult:
    """Pick depth and delta0 by shallow search (unless both are given), then train fully."""
    search = None
    if depth is None or delta0 is None:
        search = hyperparam_search(
            task,
            seed,
            depths=DEPTHS if depth is None else (depth,),
            delta0s=DELTA0S if delta0 is None else (delta0,),
            config=shallow,
        )
        depth, delta0 = search.depth, search.delta0
    model = init_folded_normal(task.n_features, depth, _model_rng(seed, depth))
    result = train(model, task, delta0, config)
    out, _ = forward(model, task, delta0 * float(task.r0.max()))
    logger.info(
        "nsgff variant=%s L=%d delta0=%g epochs=%d loss=%.6g", task.variant, depth, delta0, result.epochs, result.loss
    )
    return NsgffResult(out, depth, delta0, result.epochs, result.loss, result.trace, search, model)


def nsgff(
    graph: Graph,
    q0,
    sensitive,
    spec: FilterSpec,
    mode: str = SYMMETRIC,
    target_prule: float = 1.0,
    variant: str = "nsgff",
    seed: int = 0,
    **kwargs,
) -> NsgffResult:
    """Fair posteriors for priors ``q0`` under filter ``spec``; see :func:`fit` for keyword options."""
    task = build_task(graph, q0, sensitive, spec, mode, target_prule, variant)
    return fit(task, seed, **kwargs)


# ------------------------------------------------------------ gradient check


def reference_loss(model: NsgffModel, task: SurrogateTask, delta: float) -> np.longdouble:
    """Loss of the whole pipeline recomputed densely in extended precision.

    Shares no code with :func:`forward`; serves as the finite-difference oracle.
    """
    ld = np.longdouble
    h = task.features.astype(ld)
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w.astype(ld) + b.astype(ld)
        if i < model.depth - 1:
            h = np.where(h > 0, h, ld(0))
    q = h[:, 0]
    adj = task.graph.matrix.toarray().astype(ld)
    r = np.zeros_like(q)
    power = q
    for n, c in enumerate(task.spec.coefficients):
        if n:
            power = adj @ power
        r = r + ld(c) * power
    r = ld(task.scale) * r
    ref = task.reference.astype(ld)
    g = ref * (ld(delta) + r) / (ld(delta) + task.r0.astype(ld))
    s = task.sensitive
    phi = ld(task.phi)
    out = np.where(s, phi * g / g[s].sum(), (1 - phi) * g / g[~s].sum())
    keep = task.reference > task.floor
    util = np.abs(1 - out[keep] / ref[keep]).mean()
    return util + ld(task.l_reg) * (out.sum() - ref.sum())


def _near_kink(tape: Tape, margin: float) -> bool:
    if any(np.any(np.abs(z) < margin) for z in tape.pre[:-1]):
        return True
    ref = tape.task.reference
    keep = ref > tape.task.floor
    return bool(np.any(np.abs(1 - tape.out[keep] / ref[keep]) < margin))


def gradcheck(model: NsgffModel, task: SurrogateTask, delta: float, step: float = 1e-5) -> float:
    """Largest relative gap between :func:`backward` and central finite differences of :func:`reference_loss`.

    The gap is measured per parameter array as ``|a - n| / max(|a|, |n|)`` in
    the L2 norm, so entries whose gradient sits at round-off level do not
    dominate.
    """
    _, tape = forward(model, task, delta)
    analytic = backward(tape)
    worst = 0.0
    for p, a in zip(model.params(), analytic):
        numeric = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + step
            up = reference_loss(model, task, delta)
            p[idx] = old - step
            down = reference_loss(model, task, delta)
            p[idx] = old
            numeric[idx] = float((up - down) / (2 * step))
        scale = max(np.linalg.norm(a), np.linalg.norm(numeric))
        if scale > 0:
            worst = max(worst, float(np.linalg.norm(a - numeric) / scale))
    return worst


def random_parameters(
    task: SurrogateTask,
    depth: int,
    rng: np.random.Generator,
    delta0: float = 1.0,
    jitter: float = 0.3,
    margin: float = 1e-3,
    tries: int = 100,
) -> NsgffModel:
    """A folded-normal model with jittered weights and biases, away from relu and |.| kinks."""
    for _ in range(tries):
        model = init_folded_normal(task.n_features, depth, rng)
        for p in model.params():
            p += jitter * rng.normal(size=p.shape) * (np.abs(p).mean() + 0.1)
        try:
            _, tape = forward(model, task, delta0 * float(task.r0.max()))
        except GroupMassError:
            continue
        if np.all(tape.g > 0) and not _near_kink(tape, margin):
            return model
    raise RuntimeError("could not draw parameters away from non-differentiable points")


@dataclass(frozen=True)
class GradcheckRecord:
    trial: int
    mode: str
    depth: int
    filter: str
    delta0: float
    error: float


def gradient_suite(
    configs: int = 20, depths=(3, 6, 9), modes=(SYMMETRIC, COLUMN), nodes: int = 10, seed: int = 0
) -> list[GradcheckRecord]:
    """Gradient checks over random small graphs, priors, groups, filters and parameter points.

    Odd trials under column normalization propagate on the column-normalized
    adjacency, so the transposed adjoint gets exercised as well.
    """
    rng = np.random.default_rng(seed)
    records = []
    for trial in range(configs):
        chain = [(i, i + 1) for i in range(nodes - 1)]
        extra = [tuple(rng.choice(nodes, 2, replace=False)) for _ in range(nodes)]
        graph = Graph.from_edges(nodes, chain + extra)
        q0 = np.zeros(nodes)
        support = rng.choice(nodes, max(2, nodes // 3), replace=False)
        q0[support] = rng.uniform(0.1, 1.0, len(support))
        sensitive = np.zeros(nodes, dtype=bool)
        sensitive[rng.choice(nodes, max(1, 2 * nodes // 5), replace=False)] = True
        spec = hk_coefficients(float(rng.choice([1.0, 3.0]))) if trial % 3 else ppr_coefficients(0.85)
        delta0 = float(rng.choice(DELTA0S))
        for mode in modes:
            prop = normalize(graph, COLUMN) if (mode == COLUMN and trial % 2) else None
            task = build_task(graph, q0, sensitive, spec, mode, propagation=prop)
            for depth in depths:
                model = random_parameters(task, depth, rng, delta0)
                err = gradcheck(model, task, delta0 * float(task.r0.max()))
                records.append(GradcheckRecord(trial, mode, depth, spec.name, delta0, err))
    return records
