"""Task x filter x method x seed experiment matrix with CSV results and Markdown reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import horizon_report
from .data import Dataset, community_task, diffusion_task, load_dataset, stable_seed, synth_biased_graph
from .filters import apply_filter, parse_filter_name
from .graph import normalize
from .metrics import auc, prule, target_phi, utility_loss
from .mitigation import lfpro, mult_transform
from .nsgff import build_task, fit

logger = logging.getLogger(__name__)

HEADER = ("graph", "community", "task", "fraction", "filter", "method", "seed", "metric", "value")
NO_COMMUNITY = "—"
SURROGATES = {"nsgff": "nsgff", "nsgff-nn": "nn", "nsgff-appnp": "appnp"}
METHODS = ("none", "mult", "lfpro", *SURROGATES)
OUT_OF_SCOPE = ("lfprp", "fp")
TASK_METRICS = {"community": ("prule", "auc"), "diffusion": ("prule", "util_loss")}
QUALITY = {"auc": max, "util_loss": min}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    datasets: tuple
    tasks: tuple
    filters: tuple
    methods: tuple
    seeds: tuple
    target_prule: float = 1.0
    seed: int = 0
    results: str = "results.csv"
    log: str | None = None
    report: str | None = None
    workers: int = 1

    def __post_init__(self):
        for name in self.filters:
            parse_filter_name(name)
        for m in self.methods:
            if m.lower() in OUT_OF_SCOPE:
                raise ConfigError(f"method {m!r} is out of scope: its definition lives in prior work not reproduced here")
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
        for t in self.tasks:
            if t.get("kind") not in TASK_METRICS:
                raise ConfigError(f"unknown task kind {t.get('kind')!r}")
            if not t.get("fractions"):
                raise ConfigError("every task needs a non-empty 'fractions' list")
        if not 0 < self.target_prule <= 1:
            raise ConfigError("target_prule must lie in (0, 1]")

    @classmethod
    def from_dict(cls, raw: dict, base: Path | None = None) -> "RunConfig":
        base = base or Path(".")
        raw = dict(raw)
        out = raw.pop("output", {}) or {}

        def resolve(p):
            return None if p is None else os.path.normpath(Path(p) if Path(p).is_absolute() else base / p)

        datasets = []
        for d in raw.pop("datasets"):
            d = dict(d)
            for key in ("edges", "attributes"):
                if key in d:
                    d[key] = resolve(d[key])
            datasets.append(d)
        known = {"tasks", "filters", "methods", "seeds", "target_prule", "seed", "workers"}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(
            datasets=tuple(datasets),
            tasks=tuple(dict(t) for t in raw["tasks"]),
            filters=tuple(raw["filters"]),
            methods=tuple(raw["methods"]),
            seeds=tuple(int(s) for s in raw["seeds"]),
            target_prule=float(raw.get("target_prule", 1.0)),
            seed=int(raw.get("seed", 0)),
            results=resolve(out.get("results", "results.csv")),
            log=resolve(out.get("log")),
            report=resolve(out.get("report")),
            workers=int(raw.get("workers", 1)),
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), path.parent)


@dataclass(frozen=True)
class Cell:
    graph: str
    community: str
    task: str
    fraction: float
    filter: str
    method: str
    seed: int

    def key(self) -> tuple:
        return (self.graph, self.community, self.task, _fmt(self.fraction), self.filter, self.method, str(self.seed))


@dataclass
class CellOutcome:
    cell: Cell
    rows: list
    metadata: dict = field(default_factory=dict)


def _fmt(x: float) -> str:
    return repr(float(x))


# --------------------------------------------------------------- datasets

_DATASETS: dict = {}


def build_dataset(entry: dict) -> Dataset:
    if "synth" in entry:
        params = dict(entry["synth"] or {})
        ds = synth_biased_graph(**params)
        if "name" in entry:
            ds = Dataset(entry["name"], ds.graph, ds.sensitive, ds.communities)
        return ds
    if "edges" in entry and "attributes" in entry:
        return load_dataset(entry["edges"], entry["attributes"], entry.get("name"))
    raise ConfigError(f"dataset entry needs 'synth' or 'edges' + 'attributes': {entry}")


def _dataset(entry: dict) -> Dataset:
    key = json.dumps(entry, sort_keys=True)
    if key not in _DATASETS:
        _DATASETS[key] = build_dataset(entry)
    return _DATASETS[key]


# ------------------------------------------------------------------ cells


def enumerate_cells(config: RunConfig) -> list[tuple[dict, Cell]]:
    """All cells in canonical order: graph, community, task, fraction, filter, method, seed."""
    cells = []
    for entry in config.datasets:
        ds = _dataset(entry)
        for task in config.tasks:
            kind = task["kind"]
            comms = (task.get("communities") or sorted(ds.communities)) if kind == "community" else [NO_COMMUNITY]
            for comm in comms:
                if kind == "community" and comm not in ds.communities:
                    raise ConfigError(f"dataset {ds.name!r} has no community {comm!r}")
                for frac in task["fractions"]:
                    for filt in config.filters:
                        for method in config.methods:
                            for seed in config.seeds:
                                cells.append((entry, Cell(ds.name, comm, kind, float(frac), filt, method, seed)))
    return cells


def task_seed(cell: Cell, config_seed: int) -> int:
    """Seed shared by every filter and method of one (graph, task, fraction, community, seed) split."""
    return stable_seed(cell.graph, cell.task, _fmt(cell.fraction), cell.community, cell.seed, config_seed) % 2**63


def make_task(ds: Dataset, cell: Cell, config_seed: int):
    seed = task_seed(cell, config_seed)
    if cell.task == "community":
        return community_task(ds, cell.community, cell.fraction, seed)
    return diffusion_task(ds, cell.fraction, seed)


def run_cell(entry: dict, cell: Cell, target_prule: float, config_seed: int) -> CellOutcome:
    """Execute one cell; any failure becomes a single ``error`` row."""
    start = time.perf_counter()
    try:
        rows, meta = _run_cell(_dataset(entry), cell, target_prule, config_seed)
    except Exception as exc:  # recorded, never aborts the matrix
        logger.warning("cell %s failed: %s", cell.key(), exc)
        rows = [(*cell.key(), "error", f"{type(exc).__name__}: {exc}")]
        meta = {"error": str(exc)}
    meta["elapsed_s"] = round(time.perf_counter() - start, 3)
    return CellOutcome(cell, rows, meta)


def _run_cell(ds: Dataset, cell: Cell, target_prule: float, config_seed: int):
    spec, mode = parse_filter_name(cell.filter)
    task = make_task(ds, cell, config_seed)
    r0 = apply_filter(spec, normalize(ds.graph, mode), task.q0, "l1")
    meta = {}
    if cell.method == "none":
        scores = r0
    elif cell.method == "mult":
        phi, _ = target_phi(r0, ds.sensitive, target_prule)
        scores = mult_transform(r0, ds.sensitive, phi)
    elif cell.method == "lfpro":
        res = lfpro(r0, ds.sensitive, target_prule)
        scores = res.scores
        meta = {"converged": res.converged, "iterations": res.iterations}
    else:
        surrogate = build_task(ds.graph, task.q0, ds.sensitive, spec, mode, target_prule, SURROGATES[cell.method])
        res = fit(surrogate, task_seed(cell, config_seed))
        scores = res.scores
        meta = res.metadata()
        meta["horizon"] = horizon_report(spec, ds.graph, res.delta0, prule(r0, ds.sensitive), target_prule).as_dict()
    values = {"prule": prule(scores, ds.sensitive)}
    if cell.task == "community":
        values["auc"] = auc(scores, task.positives, task.eval_mask)
    else:
        values["util_loss"] = utility_loss(scores, r0)
    rows = []
    for metric in TASK_METRICS[cell.task]:
        v = values[metric]
        if not np.isfinite(v):
            raise ValueError(f"{metric} is not finite")
        rows.append((*cell.key(), metric, _fmt(v)))
    return rows, meta


def _run_cell_star(args):
    return run_cell(*args)


# ------------------------------------------------------------------- run


def read_rows(path) -> list[tuple]:
    path = Path(path)
    if not path.exists():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if tuple(header) != HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [tuple(r) for r in reader if r]


def _write_rows(fh, rows):
    writer = csv.writer(fh, lineterminator="\n")
    for r in rows:
        writer.writerow(r)


def run(config: RunConfig, workers: int | None = None) -> Path:
    """Run every missing cell of ``config`` and write the results CSV in canonical order.

    Rows of finished cells are appended as they arrive, so an interrupted
    run resumes where it stopped; the file is rewritten sorted at the end,
    which makes it independent of scheduling and worker count.
    """
    workers = workers or config.workers
    results = Path(config.results)
    results.parent.mkdir(parents=True, exist_ok=True)
    cells = enumerate_cells(config)
    order = {cell.key(): i for i, (_, cell) in enumerate(cells)}

    existing = read_rows(results)
    done = defaultdict(list)
    for row in existing:
        key = tuple(row[:7])
        if key in order:
            done[key].append(row)
    todo = [(entry, cell) for entry, cell in cells if cell.key() not in done]
    logger.info("%d cells, %d already done, %d to run", len(cells), len(done), len(todo))

    if not existing:
        with open(results, "w", newline="", encoding="utf-8") as fh:
            _write_rows(fh, [HEADER])
    log_fh = open(config.log, "a", encoding="utf-8") if config.log else None
    try:
        args = [(entry, cell, config.target_prule, config.seed) for entry, cell in todo]
        if workers > 1 and len(args) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for outcome in pool.map(_run_cell_star, args):
                    _sink(outcome, results, log_fh, done)
        else:
            for a in args:
                _sink(run_cell(*a), results, log_fh, done)
    finally:
        if log_fh:
            log_fh.close()

    final = [row for key in sorted(done, key=order.__getitem__) for row in done[key]]
    tmp = results.with_suffix(results.suffix + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        _write_rows(fh, [HEADER, *final])
    os.replace(tmp, results)
    if config.report:
        Path(config.report).write_text(report(aggregate(final)), encoding="utf-8")
    return results


def _sink(outcome: CellOutcome, results: Path, log_fh, done) -> None:
    buf = io.StringIO()
    _write_rows(buf, outcome.rows)
    with open(results, "a", newline="", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
        fh.flush()
    done[outcome.cell.key()] = outcome.rows
    if log_fh:
        log_fh.write(json.dumps({"cell": list(outcome.cell.key()), **outcome.metadata}, default=float) + "\n")
        log_fh.flush()
    meta = outcome.metadata
    if "L" in meta:
        logger.info(
            "%s L=%d delta0=%g epochs=%d loss=%.6g", "/".join(outcome.cell.key()), meta["L"], meta["delta0"], meta["epochs"], meta["loss"]
        )


# -------------------------------------------------------- aggregate/report


def aggregate(rows) -> dict:
    """Means per (task, filter, method, metric), averaging within each graph first.

    Error rows are ignored.
    """
    per_graph = defaultdict(list)
    for row in rows:
        graph, _, task, _, filt, method, _, metric, value = row
        if metric == "error":
            continue
        per_graph[(task, filt, method, metric, graph)].append(float(value))
    graph_means = defaultdict(list)
    for (task, filt, method, metric, _), vals in per_graph.items():
        graph_means[(task, filt, method, metric)].append(float(np.mean(vals)))
    return {k: float(np.mean(v)) for k, v in graph_means.items()}


def _ordered(values, preferred):
    rank = {v: i for i, v in enumerate(preferred)}
    return sorted(set(values), key=lambda v: (rank.get(v, len(rank)), v))


def report(aggregates: dict) -> str:
    """Markdown tables, one per task kind: filters as rows, methods as (quality, prule) column pairs.

    The best quality value among fairness-aware methods is bolded in each row.
    """
    if not aggregates:
        return "| Filter |\n|---|\n"
    blocks = []
    for task in _ordered((k[0] for k in aggregates), list(TASK_METRICS)):
        quality = TASK_METRICS[task][1]
        keys = [k for k in aggregates if k[0] == task]
        filters = _ordered((k[1] for k in keys), [])
        methods = _ordered((k[2] for k in keys), METHODS)
        head = ["Filter"] + [f"{m} {metric}" for m in methods for metric in (quality, "prule")]
        lines = [f"**{task}**", "", "| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
        for filt in filters:
            aware = [aggregates[(task, filt, m, quality)] for m in methods if m != "none" and (task, filt, m, quality) in aggregates]
            best = QUALITY[quality](aware) if aware else None
            cells = [filt]
            for m in methods:
                for metric in (quality, "prule"):
                    v = aggregates.get((task, filt, m, metric))
                    text = "" if v is None else f"{v:.3f}"
                    if v is not None and metric == quality and m != "none" and v == best:
                        text = f"**{text}**"
                    cells.append(text)
            lines.append("| " + " | ".join(cells) + " |")
        blocks.append("\n".join(lines) + "\n")
    return "\n".join(blocks)


def report_file(path) -> str:
    return report(aggregate(read_rows(path)))
