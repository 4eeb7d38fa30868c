"""Independent-set primitives: validation, greedy, exact maximum, exhaustive
layer enumeration and uniform sampling from a layer S_k(G)."""
import heapq
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator, List, Optional, Tuple

import numpy as np

from constants import COUNT_TIME_BUDGET, ENUM_CAP, NODE_BUDGET
from errors import BudgetExceeded, InvalidParameter, TruncatedLayer
from graph_core import Graph
from logger import logger
from utils import bits_to_mask, iter_bits, lowest_bit, make_rng, mask_to_bits


@dataclass(frozen=True)
class VertexSet:
    """
    Fixed-width bit-vector over the vertex universe 0..n-1.

    Args:
        bits: Python int whose bit v is set iff v is a member
        n: Universe width
    """
    bits: int
    n: int
    size: int = field(init=False, compare=False)

    def __post_init__(self):
        if self.bits < 0:
            raise InvalidParameter("bit-vector must be non-negative")
        if self.bits >> self.n:
            raise InvalidParameter(f"member outside universe of width {self.n}")
        object.__setattr__(self, "size", self.bits.bit_count())

    @classmethod
    def empty(cls, n: int) -> "VertexSet":
        return cls(0, n)

    @classmethod
    def full(cls, n: int) -> "VertexSet":
        return cls((1 << n) - 1, n)

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "VertexSet":
        idx = np.asarray(list(indices) if not isinstance(indices, np.ndarray) else indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise InvalidParameter(f"vertex outside 0..{n - 1}")
        mask = np.zeros(n, dtype=bool)
        mask[idx] = True
        return cls(mask_to_bits(mask), n)

    @classmethod
    def from_mask(cls, mask: np.ndarray) -> "VertexSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(mask_to_bits(mask), int(mask.size))

    def to_mask(self) -> np.ndarray:
        return bits_to_mask(self.bits, self.n)

    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.to_mask())

    def members(self) -> Tuple[int, ...]:
        return tuple(iter_bits(self.bits))

    def sort_key(self) -> Tuple[int, ...]:
        """Lexicographic key on the sorted member tuple (the layer order)."""
        return self.members()

    def with_vertex(self, v: int) -> "VertexSet":
        return VertexSet(self.bits | (1 << v), self.n)

    def without_vertex(self, v: int) -> "VertexSet":
        return VertexSet(self.bits & ~(1 << v), self.n)

    def _check_width(self, other: "VertexSet") -> None:
        if self.n != other.n:
            raise InvalidParameter(f"universe width mismatch: {self.n} vs {other.n}")

    def __or__(self, other: "VertexSet") -> "VertexSet":
        self._check_width(other)
        return VertexSet(self.bits | other.bits, self.n)

    def __and__(self, other: "VertexSet") -> "VertexSet":
        self._check_width(other)
        return VertexSet(self.bits & other.bits, self.n)

    def __sub__(self, other: "VertexSet") -> "VertexSet":
        self._check_width(other)
        return VertexSet(self.bits & ~other.bits, self.n)

    def __xor__(self, other: "VertexSet") -> "VertexSet":
        self._check_width(other)
        return VertexSet(self.bits ^ other.bits, self.n)

    def __contains__(self, v: int) -> bool:
        return 0 <= v < self.n and bool(self.bits >> v & 1)

    def __iter__(self) -> Iterator[int]:
        return iter_bits(self.bits)

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        shown = self.members()
        if len(shown) > 12:
            return f"VertexSet(n={self.n}, size={self.size}, first={list(shown[:12])}...)"
        return f"VertexSet({set(shown) or '{}'}, n={self.n})"

    def to_list(self) -> List[int]:
        return list(self.members())


@dataclass
class Layer:
    """
    The independent sets of one size, in lexicographic order.

    ``truncated`` means enumeration stopped at ``cap`` while more members existed.
    """
    k: int
    members: List[VertexSet]
    truncated: bool
    cap: int

    def __len__(self) -> int:
        return len(self.members)

    @property
    def count(self) -> int:
        return len(self.members)

    def require_complete(self, what: str) -> None:
        if self.truncated:
            raise TruncatedLayer(f"{what} needs the complete layer S_{self.k}, enumeration stopped at cap={self.cap}")


def is_independent(graph: Graph, s: VertexSet) -> bool:
    if s.n != graph.n:
        raise InvalidParameter(f"set width {s.n} does not match graph order {graph.n}")
    if s.size < 2 or graph.edge_count == 0:
        return True
    mask = s.to_mask()
    e = graph.edges
    return not bool(np.any(mask[e[:, 0]] & mask[e[:, 1]]))


def require_independent(graph: Graph, s: VertexSet, name: str = "set") -> None:
    if not is_independent(graph, s):
        raise InvalidParameter(f"{name} is not independent in {graph!r}")


def is_maximal(graph: Graph, s: VertexSet) -> bool:
    """True iff s is independent and every outside vertex has a neighbour in s."""
    if not is_independent(graph, s):
        return False
    adj = graph.adjacency
    return all(adj[v] & s.bits for v in range(graph.n) if v not in s)


def _greedy(graph: Graph, rng: np.random.Generator) -> VertexSet:
    indptr, indices = graph.csr.indptr, graph.csr.indices
    blocked = np.zeros(graph.n, dtype=bool)
    chosen = np.zeros(graph.n, dtype=bool)
    for v in rng.permutation(graph.n):
        if blocked[v]:
            continue
        chosen[v] = True
        blocked[v] = True
        blocked[indices[indptr[v]:indptr[v + 1]]] = True
    return VertexSet.from_mask(chosen)


def greedy_mis(graph: Graph, seed: int) -> VertexSet:
    """Inclusion-maximal independent set scanning vertices in a seeded random order."""
    return _greedy(graph, make_rng(seed))


def min_degree_mis(graph: Graph) -> VertexSet:
    """
    Minimum-degree greedy: repeatedly take a vertex of least remaining degree
    (ties to the lowest index) and delete its closed neighbourhood.
    """
    indptr, indices = graph.csr.indptr, graph.csr.indices
    degree = graph.degrees.astype(np.int64).copy()
    alive = np.ones(graph.n, dtype=bool)
    chosen = np.zeros(graph.n, dtype=bool)
    heap = [(int(degree[v]), v) for v in range(graph.n)]
    heapq.heapify(heap)
    while heap:
        deg, v = heapq.heappop(heap)
        if not alive[v] or deg != degree[v]:
            continue
        chosen[v] = True
        alive[v] = False
        for u in indices[indptr[v]:indptr[v + 1]]:
            if not alive[u]:
                continue
            alive[u] = False
            for w in indices[indptr[u]:indptr[u + 1]]:
                if alive[w]:
                    degree[w] -= 1
                    heapq.heappush(heap, (int(degree[w]), int(w)))
    return VertexSet.from_mask(chosen)


def sample_greedy_subset(graph: Graph, k: int, seed: int) -> Optional[VertexSet]:
    """
    A random k-subset of a seeded greedy maximal independent set.

    Not uniform over S_k(G); used to pick pairs on graphs whose layers are too
    large to enumerate. Returns None when the greedy set has fewer than k members.
    """
    rng = make_rng(seed)
    base = _greedy(graph, rng)
    if base.size < k:
        return None
    picked = rng.choice(base.indices(), size=k, replace=False)
    return VertexSet.from_indices(picked, graph.n)


def _clique_cover_bound(adj: Tuple[int, ...], cand: int) -> int:
    """Number of cliques in a greedy clique cover of cand, an upper bound on alpha(G[cand])."""
    cliques = 0
    while cand:
        v = lowest_bit(cand)
        clique = 1 << v
        common = adj[v] & cand
        while common:
            w = lowest_bit(common)
            clique |= 1 << w
            common &= adj[w]
        cand &= ~clique
        cliques += 1
    return cliques


class _BranchAndBound:
    """Maximum independent set inside a candidate bitset, budgeted by node count."""

    def __init__(self, adj: Tuple[int, ...], node_budget: int, best: int = 0):
        self.adj = adj
        self.node_budget = node_budget
        self.nodes = 0
        self.best = best
        self.best_size = best.bit_count()

    def solve(self, cand: int) -> int:
        self._expand(cand, 0)
        return self.best

    def _expand(self, cand: int, current: int) -> None:
        self.nodes += 1
        if self.nodes > self.node_budget:
            raise BudgetExceeded(f"branch-and-bound exceeded {self.node_budget} nodes", partial=self.best)
        adj = self.adj
        # vertices of degree <= 1 inside cand always belong to some maximum set
        while True:
            forced = 0
            top_v, top_deg = -1, -1
            for v in iter_bits(cand):
                deg = (adj[v] & cand).bit_count()
                if deg <= 1:
                    forced = v
                    top_deg = -2
                    break
                if deg > top_deg:
                    top_v, top_deg = v, deg
            if top_deg != -2:
                break
            current |= 1 << forced
            cand &= ~(adj[forced] | (1 << forced))
        size = current.bit_count()
        if not cand:
            if size > self.best_size:
                self.best, self.best_size = current, size
            return
        if size + _clique_cover_bound(adj, cand) <= self.best_size:
            return
        v = top_v
        self._expand(cand & ~(adj[v] | (1 << v)), current | (1 << v))
        self._expand(cand & ~(1 << v), current)


def max_independent_within(graph: Graph, cand: int, node_budget: int = NODE_BUDGET) -> Tuple[int, int]:
    """
    Maximum independent set of the subgraph induced on the bitset ``cand``.

    Returns:
        Tuple[int, int]: The members as a bitset and the number of search nodes used

    Raises:
        BudgetExceeded: With ``partial`` holding the best set found so far
    """
    solver = _BranchAndBound(graph.adjacency, node_budget)
    best = solver.solve(cand)
    return best, solver.nodes


def max_is_exact(graph: Graph, node_budget: int = NODE_BUDGET) -> VertexSet:
    """
    A maximum independent set by branch-and-bound on the highest-degree vertex,
    pruned with a greedy clique cover.

    Raises:
        BudgetExceeded: When the node budget runs out; ``partial`` is a VertexSet
            that is only a lower bound on alpha(G)
    """
    seed_set = min_degree_mis(graph)
    solver = _BranchAndBound(graph.adjacency, node_budget, best=seed_set.bits)
    try:
        best = solver.solve((1 << graph.n) - 1)
    except BudgetExceeded as e:
        logger.warning(f"max_is_exact stopped after {solver.nodes} nodes; result is a lower bound")
        raise BudgetExceeded(str(e), partial=VertexSet(e.partial, graph.n))
    logger.debug(f"max_is_exact: alpha={best.bit_count()} in {solver.nodes} nodes")
    return VertexSet(best, graph.n)


class _CapReached(Exception):
    pass


def enumerate_layer(graph: Graph, k: int, cap: int = ENUM_CAP) -> Layer:
    """
    All independent sets of size exactly k in lexicographic order.

    Enumeration stops once ``cap`` members are stored and another one exists;
    the layer is then flagged truncated.
    """
    if k < 0:
        raise InvalidParameter(f"k must be non-negative, got {k}")
    if cap < 1:
        raise InvalidParameter(f"cap must be positive, got {cap}")
    adj = graph.adjacency
    n = graph.n
    out: List[VertexSet] = []

    def walk(cand: int, chosen: int, need: int) -> None:
        if need == 0:
            if len(out) == cap:
                raise _CapReached()
            out.append(VertexSet(chosen, n))
            return
        while cand and cand.bit_count() >= need:
            low = cand & -cand
            cand ^= low
            v = low.bit_length() - 1
            walk(cand & ~adj[v], chosen | low, need - 1)

    truncated = False
    if k <= n:
        try:
            walk((1 << n) - 1, 0, k)
        except _CapReached:
            truncated = True
            logger.warning(f"S_{k} enumeration truncated at cap={cap}")
    return Layer(k=k, members=out, truncated=truncated, cap=cap)


def count_layer(graph: Graph, k: int, time_budget: float = COUNT_TIME_BUDGET) -> int:
    """
    |S_k(G)| by counting-only enumeration (no cap, bounded by wall time).

    Raises:
        BudgetExceeded: If counting runs longer than ``time_budget`` seconds
    """
    if k < 0:
        raise InvalidParameter(f"k must be non-negative, got {k}")
    if k > graph.n:
        return 0
    adj = graph.adjacency
    deadline = time.monotonic() + time_budget
    ticks = [0]

    def walk(cand: int, need: int) -> int:
        if need == 0:
            return 1
        c = cand.bit_count()
        if c < need:
            return 0
        if need == 1:
            return c
        if need == 2:
            inside = sum((adj[v] & cand).bit_count() for v in iter_bits(cand)) // 2
            return c * (c - 1) // 2 - inside
        ticks[0] += 1
        if ticks[0] % 4096 == 0 and time.monotonic() > deadline:
            raise BudgetExceeded(f"count_layer(k={k}) exceeded {time_budget}s")
        total = 0
        while cand and cand.bit_count() >= need:
            low = cand & -cand
            cand ^= low
            total += walk(cand & ~adj[low.bit_length() - 1], need - 1)
        return total

    return walk((1 << graph.n) - 1, k)


def sample_uk(graph: Graph, k: int, seed: int, cap: int = ENUM_CAP) -> Optional[VertexSet]:
    """
    Uniform draw from S_k(G); None when the layer is empty (alpha(G) < k).

    Raises:
        TruncatedLayer: If S_k(G) does not fit under ``cap``
    """
    layer = enumerate_layer(graph, k, cap)
    layer.require_complete("sample_uk")
    if not layer.members:
        return None
    rng = make_rng(seed)
    return layer.members[int(rng.integers(len(layer.members)))]
