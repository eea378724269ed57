"""Pair-level network over retained topic-method pairs.

Two pairs are connected when they share their topic or their method.
Community structure is found by greedy modularity agglomeration: start from
singletons, repeatedly merge the connected pair of communities with the
largest modularity gain, and return the partition at the best point of the
merge history (Newman's fast greedy scheme). Edges are unweighted.
"""

from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, InputError
from .tmc import TmcPair, TmcTable

logger = logging.getLogger(__name__)

TOP_N_DEFAULT = 35


@dataclass
class TmcNetwork:
    nodes: list[TmcPair]
    edges: list[tuple[int, int, str]]  # (a, b, shared) with a < b

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def adjacency(self) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {i: set() for i in range(len(self.nodes))}
        for a, b, _ in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def plain_edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a, b, _ in self.edges]


def build_network(table: TmcTable) -> TmcNetwork:
    """Connect retained pairs that share a topic or share a method.

    Node order is the table's canonical order; two distinct pairs can share
    at most one element kind, so each unordered node pair gets at most one
    edge.
    """
    nodes = table.retained_pairs()
    if not nodes:
        raise InputError(
            "no retained pairs above the threshold; lower sigma to build a network"
        )
    by_topic: dict[int, list[int]] = defaultdict(list)
    by_method: dict[str, list[int]] = defaultdict(list)
    for i, p in enumerate(nodes):
        by_topic[p.topic].append(i)
        by_method[p.method].append(i)
    edges: list[tuple[int, int, str]] = []
    for members in by_topic.values():
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                edges.append((members[x], members[y], "topic"))
    for members in by_method.values():
        for x in range(len(members)):
            for y in range(x + 1, len(members)):
                edges.append((members[x], members[y], "method"))
    edges.sort()
    return TmcNetwork(nodes=nodes, edges=edges)


def rank_popularity(table: TmcTable, n: int = TOP_N_DEFAULT) -> list[TmcPair]:
    """Top-n retained pairs by co-occurrence count, intensity as tie-break."""
    if n < 1:
        raise ConfigError(f"top-n must be >= 1, got {n}")
    ranked = sorted(
        table.retained_pairs(), key=lambda p: (-p.d_ij, -p.c_ij, p.method, p.topic)
    )
    return ranked[:n]


def modularity_q(
    n_nodes: int, edges: Sequence[tuple[int, int]], assignment: Mapping[int, int]
) -> float:
    """Modularity Q = sum_c (e_cc - a_c^2) of a partition of a plain graph.

    e_cc is the fraction of edges with both ends in community c; a_c is the
    fraction of edge endpoints in c. Edges are unweighted.
    """
    m = len(edges)
    if m == 0:
        raise InputError("modularity is undefined for an edgeless graph")
    for v in range(n_nodes):
        if v not in assignment:
            raise ValueError(f"assignment missing node {v}")
    intra: dict[int, int] = defaultdict(int)
    degree_sum: dict[int, int] = defaultdict(int)
    for a, b in edges:
        ca, cb = assignment[a], assignment[b]
        degree_sum[ca] += 1
        degree_sum[cb] += 1
        if ca == cb:
            intra[ca] += 1
    q = 0.0
    for c in degree_sum:
        e_cc = intra.get(c, 0) / m
        a_c = degree_sum[c] / (2 * m)
        q += e_cc - a_c * a_c
    return q


@dataclass(frozen=True)
class MergeStep:
    a: int
    b: int
    delta_q: float
    q_after: float


@dataclass
class CommunityPartition:
    assignment: dict[int, int]
    q: float
    merge_history: list[MergeStep] = field(default_factory=list)
    n_communities: int = 0

    def __post_init__(self):
        if not self.n_communities and self.assignment:
            self.n_communities = len(set(self.assignment.values()))


def greedy_modularity(
    n_nodes: int, edges: Sequence[tuple[int, int]]
) -> CommunityPartition:
    """Agglomerative greedy modularity maximization on a plain graph.

    Starts from singleton communities and repeatedly merges the connected
    community pair with maximal gain dQ = 2*(e_ab - a_a*a_b); gain ties are
    broken by the lexicographically smallest (min id, max id) pair. The
    full dendrogram is recorded and the returned partition is the history
    point with maximal Q (ties -> fewer merges).
    """
    m = len(edges)
    if m == 0:
        raise InputError("community detection needs at least one edge")

    # community state, keyed by community id (initially the node index)
    a_frac: dict[int, float] = defaultdict(float)
    e_between: dict[tuple[int, int], float] = defaultdict(float)
    neighbors: dict[int, set[int]] = defaultdict(set)
    for x, y in edges:
        if x == y:
            raise ValueError("self-edges are not allowed")
        a_frac[x] += 1.0 / (2 * m)
        a_frac[y] += 1.0 / (2 * m)
        key = (min(x, y), max(x, y))
        e_between[key] += 1.0 / (2 * m)
        neighbors[x].add(y)
        neighbors[y].add(x)
    for v in range(n_nodes):
        a_frac.setdefault(v, 0.0)

    q = -sum(a * a for a in a_frac.values())  # singleton partition, e_vv = 0
    history: list[MergeStep] = []
    merges: list[tuple[int, int]] = []
    best_q = q
    best_step = 0  # number of merges applied at the best point

    while e_between:
        best_pair = None
        best_gain = None
        for (a, b), e_ab in e_between.items():
            gain = 2.0 * (e_ab - a_frac[a] * a_frac[b])
            if best_gain is None or gain > best_gain or (
                gain == best_gain and (a, b) < best_pair
            ):
                best_gain = gain
                best_pair = (a, b)
        a, b = best_pair
        q += best_gain
        merges.append((a, b))
        history.append(MergeStep(a=a, b=b, delta_q=best_gain, q_after=q))
        if q > best_q:
            best_q = q
            best_step = len(merges)

        # merge b into a (a < b by construction of the keys)
        a_frac[a] += a_frac.pop(b)
        e_between.pop((a, b))
        neighbors[a].discard(b)
        neighbors[b].discard(a)
        for x in sorted(neighbors[b]):
            key_bx = (min(b, x), max(b, x))
            w = e_between.pop(key_bx)
            key_ax = (min(a, x), max(a, x))
            e_between[key_ax] += w
            neighbors[x].discard(b)
            neighbors[x].add(a)
            neighbors[a].add(x)
        del neighbors[b]

    # rebuild the partition at the best history point
    parent = list(range(n_nodes))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in merges[:best_step]:
        parent[find(b)] = find(a)
    label: dict[int, int] = {}
    assignment: dict[int, int] = {}
    for v in range(n_nodes):
        root = find(v)
        if root not in label:
            label[root] = len(label)
        assignment[v] = label[root]

    final_q = modularity_q(n_nodes, edges, assignment)
    return CommunityPartition(
        assignment=assignment, q=final_q, merge_history=history
    )


def modularity(network: TmcNetwork, assignment: Mapping[int, int]) -> float:
    """Modularity of a community assignment over the pair network."""
    return modularity_q(network.n_nodes, network.plain_edges(), assignment)


def greedy_communities(network: TmcNetwork) -> CommunityPartition:
    """Greedy modularity communities of the pair network."""
    return greedy_modularity(network.n_nodes, network.plain_edges())


@dataclass
class CommunitySummary:
    community: int
    size: int
    members: list[str]
    distinct_topics: int
    distinct_methods: int
    internal_edge_fraction: float


def community_report(
    partition: CommunityPartition,
    network: TmcNetwork,
    table: TmcTable | None = None,
) -> list[CommunitySummary]:
    """Per-community membership and internal-edge summary, largest first."""
    members: dict[int, list[int]] = defaultdict(list)
    for node, community in sorted(partition.assignment.items()):
        members[community].append(node)
    m = len(network.edges)
    intra: dict[int, int] = defaultdict(int)
    for a, b, _ in network.edges:
        if partition.assignment[a] == partition.assignment[b]:
            intra[partition.assignment[a]] += 1
    out = []
    for community, nodes in members.items():
        pairs = [network.nodes[i] for i in nodes]
        out.append(
            CommunitySummary(
                community=community,
                size=len(nodes),
                members=[p.label for p in pairs],
                distinct_topics=len({p.topic for p in pairs}),
                distinct_methods=len({p.method for p in pairs}),
                internal_edge_fraction=intra.get(community, 0) / m if m else 0.0,
            )
        )
    out.sort(key=lambda s: (-s.size, s.community))
    return out


def network_graph_doc(
    network: TmcNetwork,
    partition: CommunityPartition | None = None,
    weighted: bool = False,
):
    """GraphDoc of the pair network for GraphML/GEXF export.

    Node attributes: tmc_label, d_ij and (when a partition is given) the
    community id. Edges carry the shared element kind; with ``weighted``
    they also carry min(intensity of the two endpoints) as weight. Community
    detection itself always runs on the unweighted graph.
    """
    from .graphio import GraphDoc

    doc = GraphDoc()
    for i, pair in enumerate(network.nodes):
        attrs = {"tmc_label": pair.label, "d_ij": pair.d_ij}
        if partition is not None:
            attrs["community"] = partition.assignment[i]
        doc.add_node(f"n{i}", **attrs)
    for a, b, shared in network.edges:
        attrs = {"shared": shared}
        if weighted:
            attrs["weight"] = min(network.nodes[a].c_ij, network.nodes[b].c_ij)
        doc.add_edge(f"n{a}", f"n{b}", **attrs)
    return doc


def write_communities_csv(
    partition: CommunityPartition, network: TmcNetwork, path: str | Path
) -> None:
    """Write CSV node,community keyed by the pair label."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "community"])
        for i, pair in enumerate(network.nodes):
            writer.writerow([pair.label, partition.assignment[i]])


def write_merge_history_csv(partition: CommunityPartition, path: str | Path) -> None:
    """Write CSV step,a,b,delta_q,q_after of the full dendrogram."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "a", "b", "delta_q", "q_after"])
        for step, ms in enumerate(partition.merge_history, start=1):
            writer.writerow([step, ms.a, ms.b, repr(ms.delta_q), repr(ms.q_after)])


def write_popularity_csv(pairs: Iterable[TmcPair], path: str | Path) -> None:
    """Write CSV rank,method,topic_id,d_ij,c_ij (rank is 1-based)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank", "method", "topic_id", "d_ij", "c_ij"])
        for rank, p in enumerate(pairs, start=1):
            writer.writerow([rank, p.method, p.topic, p.d_ij, repr(p.c_ij)])
