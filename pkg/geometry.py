"""Solution-space geometry: distances, overlaps, gamma-connectivity partitions,
expandability and the pure/blocking vertex structure around a set sigma."""
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from constants import FLOOR_EPS, NODE_BUDGET
from errors import BudgetExceeded, InvalidParameter
from graph_core import Graph
from iset_core import (Layer, VertexSet, greedy_mis, max_independent_within, max_is_exact,
                       min_degree_mis, require_independent)
from logger import logger

# rows of the pairwise-distance matrix materialized at once
DISTANCE_BLOCK = 1024
# cap on entries in one distance block (int32)
DISTANCE_CELLS = 1 << 22


@dataclass
class ClusterReport:
    """
    Partition of a layer into gamma-connected classes.

    ``classes`` holds (size, representative) ordered by each class's first member
    in layer order; ``labels[i]`` is the class index of ``layer.members[i]``.
    ``min_interclass_distance`` is None when there is at most one class.
    """
    k: int
    gamma: int
    classes: List[Tuple[int, VertexSet]]
    min_interclass_distance: Optional[int]
    max_class_fraction: float
    total: int
    truncated: bool = False
    labels: Tuple[int, ...] = field(default=(), repr=False)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    def to_dict(self) -> Dict:
        return {
            "k": self.k,
            "gamma": self.gamma,
            "classes": [{"size": size, "representative": rep.to_list()} for size, rep in self.classes],
            "min_interclass_distance": self.min_interclass_distance,
            "max_class_fraction": self.max_class_fraction,
            "total": self.total,
            "truncated": self.truncated,
        }


@dataclass
class ExpandWitness:
    tau: VertexSet
    gamma_achieved: float
    delta_achieved: float


def hamming(s: VertexSet, t: VertexSet) -> int:
    """|S xor T|."""
    if s.n != t.n:
        raise InvalidParameter(f"universe width mismatch: {s.n} vs {t.n}")
    return (s.bits ^ t.bits).bit_count()


def overlap(sigma: VertexSet, tau: VertexSet, n: int) -> float:
    """|sigma & tau| / n."""
    if sigma.n != tau.n:
        raise InvalidParameter(f"universe width mismatch: {sigma.n} vs {tau.n}")
    return (sigma.bits & tau.bits).bit_count() / n


def _membership(layer: Layer) -> np.ndarray:
    return np.stack([m.to_mask() for m in layer.members]).astype(np.int32)


def _block_rows(size: int) -> int:
    return max(1, min(DISTANCE_BLOCK, DISTANCE_CELLS // max(size, 1)))


def _distance_blocks(members: np.ndarray, k: int) -> Iterator[Tuple[int, np.ndarray]]:
    # equal-size sets: |A xor B| = 2k - 2|A & B|
    rows = _block_rows(members.shape[0])
    for start in range(0, members.shape[0], rows):
        block = members[start:start + rows]
        yield start, 2 * k - 2 * (block @ members.T)


def _partition(members: np.ndarray, k: int, gamma: int) -> np.ndarray:
    rows, cols = [], []
    for start, dist in _distance_blocks(members, k):
        r, c = np.nonzero(dist <= gamma)
        rows.append(r + start)
        cols.append(c)
    size = members.shape[0]
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    adjacency = sparse.coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(size, size))
    _, raw = connected_components(adjacency, directed=False)
    # relabel so classes are numbered by their first member in layer order
    _, first = np.unique(raw, return_index=True)
    order = np.argsort(first)
    relabel = np.empty_like(order)
    relabel[raw[first[order]]] = np.arange(order.size)
    return relabel[raw]


def _min_interclass(members: np.ndarray, k: int, labels: np.ndarray) -> Optional[int]:
    best = None
    for start, dist in _distance_blocks(members, k):
        differ = labels[start:start + dist.shape[0], None] != labels[None, :]
        if differ.any():
            value = int(dist[differ].min())
            best = value if best is None else min(best, value)
    return best


def gamma_components(layer: Layer, gamma: int) -> ClusterReport:
    """
    Connected components of the layer under "Hamming distance <= gamma".

    Raises:
        TruncatedLayer: If the layer is incomplete
    """
    layer.require_complete("gamma_components")
    if gamma < 0:
        raise InvalidParameter(f"gamma must be non-negative, got {gamma}")
    total = len(layer.members)
    if total == 0:
        return ClusterReport(layer.k, gamma, [], None, 0.0, 0)
    members = _membership(layer)
    labels = _partition(members, layer.k, gamma)
    sizes = np.bincount(labels)
    reps = {}
    for idx, label in enumerate(labels):
        reps.setdefault(int(label), layer.members[idx])
    classes = [(int(sizes[c]), reps[c]) for c in range(sizes.size)]
    min_dist = _min_interclass(members, layer.k, labels) if sizes.size > 1 else None
    assert min_dist is None or min_dist > gamma, f"classes at distance {min_dist} <= gamma={gamma}"
    return ClusterReport(
        k=layer.k,
        gamma=gamma,
        classes=classes,
        min_interclass_distance=min_dist,
        max_class_fraction=float(sizes.max()) / total,
        total=total,
        labels=tuple(int(x) for x in labels),
    )


def shattering_scan(layer: Layer, gamma_grid: Sequence[int]) -> List[ClusterReport]:
    """One ClusterReport per gamma; judging shattering is left to the caller."""
    reports = [gamma_components(layer, int(g)) for g in gamma_grid]
    for report in reports:
        logger.debug(f"gamma={report.gamma}: {report.class_count} classes, "
                     f"max fraction {report.max_class_fraction:.3f}")
    return reports


def _edges_inside(adj: Tuple[int, ...], bits: int) -> int:
    total = 0
    rest = bits
    while rest:
        low = rest & -rest
        rest ^= low
        total += (adj[low.bit_length() - 1] & bits).bit_count()
    return total // 2


def near_layer_count(graph: Graph, sigma: VertexSet, x: float, lam_edges: int) -> int:
    """
    Number of k-sets tau (k = |sigma|) with |sigma & tau| = floor(x n) and at most
    ``lam_edges`` graph edges inside tau. Exhaustive; meant for n <= 20.
    """
    n = graph.n
    if sigma.n != n:
        raise InvalidParameter("sigma width does not match the graph")
    k = sigma.size
    i = int(math.floor(x * n + FLOOR_EPS))
    if not 0 <= i <= k:
        return 0
    adj = graph.adjacency
    inside = sigma.members()
    outside = [v for v in range(n) if v not in sigma]
    count = 0
    for keep in combinations(inside, i):
        keep_bits = sum(1 << v for v in keep)
        for extra in combinations(outside, k - i):
            bits = keep_bits | sum(1 << v for v in extra)
            if _edges_inside(adj, bits) <= lam_edges:
                count += 1
    return count


def _closed_neighbourhood(adj: Tuple[int, ...], bits: int) -> int:
    out = bits
    rest = bits
    while rest:
        low = rest & -rest
        rest ^= low
        out |= adj[low.bit_length() - 1]
    return out


def is_expandable(graph: Graph, sigma: VertexSet, gamma: float, delta: float,
                  budget: int = NODE_BUDGET) -> Optional[ExpandWitness]:
    """
    Search for an independent tau with |tau| >= (1+gamma)|sigma| and
    |tau & sigma| >= (1-delta)|sigma|.

    Removal sets R from sigma are tried by increasing size (R empty first, which
    extends sigma by pure vertices only); for each, the best completion is found
    by branch-and-bound on the vertices free of sigma minus R.

    Returns:
        Optional[ExpandWitness]: A witness, or None when none exists (proven)

    Raises:
        BudgetExceeded: If the search needs more than ``budget`` nodes
    """
    require_independent(graph, sigma, "sigma")
    k = sigma.size
    if k == 0:
        return ExpandWitness(VertexSet.empty(graph.n), 0.0, 0.0)
    target = math.ceil((1 + gamma) * k - FLOOR_EPS)
    keep_min = max(0, math.ceil((1 - delta) * k - FLOOR_EPS))
    adj = graph.adjacency
    everything = (1 << graph.n) - 1
    used = 0
    for removed in range(0, k - keep_min + 1):
        for drop in combinations(sigma.members(), removed):
            kept = sigma.bits & ~sum(1 << v for v in drop)
            free = everything & ~_closed_neighbourhood(adj, kept)
            try:
                extra, nodes = max_independent_within(graph, free, budget - used)
            except BudgetExceeded:
                raise BudgetExceeded(f"is_expandable exceeded {budget} nodes")
            used += nodes
            tau_bits = kept | extra
            if tau_bits.bit_count() >= target:
                tau = VertexSet(tau_bits, graph.n)
                shared = (tau_bits & sigma.bits).bit_count()
                return ExpandWitness(tau, tau.size / k - 1.0, 1.0 - shared / k)
    return None


def _sigma_neighbour_counts(graph: Graph, sigma: VertexSet) -> np.ndarray:
    return graph.csr @ sigma.to_mask().astype(np.int32)


def pure_vertices(graph: Graph, sigma: VertexSet) -> VertexSet:
    """Vertices outside sigma with no neighbour in sigma."""
    require_independent(graph, sigma, "sigma")
    counts = _sigma_neighbour_counts(graph, sigma)
    return VertexSet.from_mask((counts == 0) & ~sigma.to_mask())


def pure_subgraph(graph: Graph, sigma: VertexSet) -> Tuple[Graph, np.ndarray]:
    """The subgraph induced on the sigma-pure vertices and the map back to original labels."""
    return graph.induced(pure_vertices(graph, sigma).indices())


EXPANSION_STRATEGIES = ("greedy", "min_degree", "exact")


def expand_via_pure(graph: Graph, sigma: VertexSet, strategy: str = "greedy", seed: int = 0) -> VertexSet:
    """
    sigma together with an independent set of its pure subgraph.

    Args:
        strategy: "greedy" (seeded random order), "min_degree" or "exact"
        seed: Order seed for the greedy strategy
    """
    if strategy not in EXPANSION_STRATEGIES:
        raise InvalidParameter(f"unknown expansion strategy {strategy!r}; choose from {EXPANSION_STRATEGIES}")
    sub, labels = pure_subgraph(graph, sigma)
    if strategy == "greedy":
        extra = greedy_mis(sub, seed)
    elif strategy == "min_degree":
        extra = min_degree_mis(sub)
    else:
        extra = max_is_exact(sub)
    added = VertexSet.from_indices(labels[extra.indices()], graph.n)
    logger.debug(f"expand_via_pure[{strategy}]: {sub.n} pure vertices, added {added.size}")
    return sigma | added


def default_blocking_threshold(graph: Graph) -> float:
    d = graph.average_degree
    return 0.1 * math.log(d) if d > 1 else 1.0


def blocking_vertices(graph: Graph, sigma: VertexSet, threshold: Optional[float] = None) -> VertexSet:
    """Vertices outside sigma with at least ``threshold`` neighbours in sigma (default 0.1 ln d)."""
    require_independent(graph, sigma, "sigma")
    if threshold is None:
        threshold = default_blocking_threshold(graph)
    counts = _sigma_neighbour_counts(graph, sigma)
    return VertexSet.from_mask((counts >= threshold) & ~sigma.to_mask())


def count_isolated(graph: Graph) -> int:
    return int(np.count_nonzero(graph.degrees == 0))
