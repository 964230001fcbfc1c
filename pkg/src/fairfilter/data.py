"""Datasets, task construction and the synthetic biased-graph generator."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import Graph, connected_components, load_edge_list


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    graph: Graph
    sensitive: np.ndarray
    communities: dict = field(default_factory=dict)

    def __post_init__(self):
        mask = np.asarray(self.sensitive, dtype=bool)
        if len(mask) != self.graph.node_count:
            raise ValueError("sensitive mask length does not match the graph")
        object.__setattr__(self, "sensitive", mask)
        for name, members in self.communities.items():
            if len(members) == 0:
                raise ValueError(f"community {name!r} is empty")


@dataclass(frozen=True, eq=False)
class TaskInstance:
    kind: str
    q0: np.ndarray
    seed: int
    fraction: float
    community: str | None = None
    seeds: np.ndarray | None = None
    positives: np.ndarray | None = None
    eval_mask: np.ndarray | None = None


def stable_seed(*parts) -> int:
    """64-bit seed derived from a tuple of plain values, independent of process and hash randomization."""
    digest = hashlib.blake2b(repr(tuple(parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def load_dataset(edges_path, attributes_path, name: str | None = None) -> Dataset:
    """Read an edge list plus a tab-separated attribute file.

    Attribute lines are ``token<TAB>0|1[<TAB>comm1,comm2]``. Every graph node
    needs a line; unknown tokens are rejected.
    """
    edges_path, attributes_path = Path(edges_path), Path(attributes_path)
    with open(edges_path, encoding="utf-8") as fh:
        graph = load_edge_list(fh)
    sensitive = np.zeros(graph.node_count, dtype=bool)
    seen = np.zeros(graph.node_count, dtype=bool)
    communities: dict[str, list[int]] = {}
    with open(attributes_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 2 or fields[1].strip() not in ("0", "1"):
                raise ValueError(f"{attributes_path}:{lineno}: expected token<TAB>0|1[<TAB>communities]")
            token = fields[0].strip()
            if token not in graph.labels:
                raise ValueError(f"{attributes_path}:{lineno}: unknown node token {token!r}")
            idx = graph.labels[token]
            seen[idx] = True
            sensitive[idx] = fields[1].strip() == "1"
            if len(fields) > 2:
                for comm in filter(None, (c.strip() for c in fields[2].split(","))):
                    communities.setdefault(comm, []).append(idx)
    if not seen.all():
        raise ValueError(f"{int((~seen).sum())} graph nodes have no attribute line")
    comms = {k: np.array(sorted(v), dtype=np.int64) for k, v in communities.items()}
    return Dataset(name or edges_path.stem, graph, sensitive, comms)


def save_dataset(dataset: Dataset, edges_path, attributes_path) -> None:
    tokens = {i: t for t, i in dataset.graph.labels.items()}
    with open(edges_path, "w", encoding="utf-8") as fh:
        for u, v in dataset.graph.edges:
            fh.write(f"{tokens[u]} {tokens[v]}\n")
    member_of: dict[int, list[str]] = {}
    for name, members in dataset.communities.items():
        for m in members:
            member_of.setdefault(int(m), []).append(name)
    with open(attributes_path, "w", encoding="utf-8") as fh:
        for i in range(dataset.graph.node_count):
            line = f"{tokens[i]}\t{int(dataset.sensitive[i])}"
            if i in member_of:
                line += "\t" + ",".join(member_of[i])
            fh.write(line + "\n")


def community_task(dataset: Dataset, community: str, fraction: float, seed: int) -> TaskInstance:
    """Binary priors on ceil(fraction * |community|) sampled members; the rest are test positives.

    Seed nodes are left out of the evaluation set entirely.
    """
    members = np.asarray(dataset.communities[community])
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    k = math.ceil(fraction * len(members))
    chosen = np.sort(rng.choice(members, size=k, replace=False))
    n = dataset.graph.node_count
    q0 = np.zeros(n)
    q0[chosen] = 1.0
    eval_mask = np.ones(n, dtype=bool)
    eval_mask[chosen] = False
    positives = np.zeros(n, dtype=bool)
    positives[members] = True
    positives &= eval_mask
    return TaskInstance("community", q0, seed, fraction, community, chosen, positives, eval_mask)


def diffusion_task(dataset: Dataset, fraction: float, seed: int) -> TaskInstance:
    """Uniform[0, 1] priors on floor(fraction * |V|) uniformly chosen nodes, zero elsewhere."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    n = dataset.graph.node_count
    k = math.floor(fraction * n)
    chosen = np.sort(rng.choice(n, size=k, replace=False))
    q0 = np.zeros(n)
    q0[chosen] = rng.uniform(0.0, 1.0, size=k)
    # Uniform(0, 1) can return exactly 0; keep the requested support
    q0[chosen] = np.where(q0[chosen] == 0, np.nextafter(0.0, 1.0), q0[chosen])
    return TaskInstance("diffusion", q0, seed, fraction, seeds=chosen)


def member_diffusion_task(dataset: Dataset, community: str, values: str = "binary", seed: int = 0) -> TaskInstance:
    """Priors on every member of ``community``: ones, or Uniform[0, 1] draws with ``values="uniform"``.

    Used for the ablation comparison, where the whole community diffuses its values.
    """
    members = np.asarray(dataset.communities[community])
    q0 = np.zeros(dataset.graph.node_count)
    if values == "binary":
        q0[members] = 1.0
    elif values == "uniform":
        draws = np.random.default_rng(seed).uniform(0.0, 1.0, size=len(members))
        q0[members] = np.where(draws == 0, np.nextafter(0.0, 1.0), draws)
    else:
        raise ValueError(f"values must be 'binary' or 'uniform', got {values!r}")
    return TaskInstance("diffusion", q0, seed, 1.0, community, seeds=members)


def synth_biased_graph(
    n_per_group: int = 100,
    p_intra: float = 0.1,
    p_inter: float = 0.01,
    seed: int = 0,
    community_size: int = 40,
    community_bias: float = 0.8,
    p_community: float = 0.15,
) -> Dataset:
    """Two-group stochastic block model with one planted community.

    Nodes ``n_per_group..2*n_per_group-1`` form the protected group. The
    community takes ``community_bias`` of its members from the other group
    and gets extra edges with probability ``p_community`` among its members.
    Disconnected components are chained to the first one with single edges.
    """
    rng = np.random.default_rng(seed)
    n = 2 * n_per_group
    group = np.repeat([0, 1], n_per_group)
    n_major = min(n_per_group, round(community_bias * community_size))
    n_minor = min(n_per_group, community_size - n_major)
    community = np.sort(
        np.concatenate(
            [
                rng.choice(n_per_group, size=n_major, replace=False),
                n_per_group + rng.choice(n_per_group, size=n_minor, replace=False),
            ]
        )
    )
    in_comm = np.zeros(n, dtype=bool)
    in_comm[community] = True

    iu, iv = np.triu_indices(n, k=1)
    prob = np.where(group[iu] == group[iv], p_intra, p_inter)
    both = in_comm[iu] & in_comm[iv]
    prob = np.where(both, 1 - (1 - prob) * (1 - p_community), prob)
    keep = rng.random(len(iu)) < prob
    pairs = np.column_stack([iu[keep], iv[keep]])
    graph = Graph.from_edges(n, pairs)

    labels = connected_components(graph)
    if labels.max() > 0:
        extra = []
        for comp in range(1, labels.max() + 1):
            node = int(np.flatnonzero(labels == comp)[0])
            anchor = int(rng.choice(np.flatnonzero(labels == 0)))
            extra.append((anchor, node))
        graph = Graph.from_edges(n, np.vstack([pairs, np.asarray(extra)]))

    name = f"synth{n_per_group}-{p_intra:g}-{p_inter:g}-s{seed}"
    return Dataset(name, graph, group == 1, {"planted": community})
