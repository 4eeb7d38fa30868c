"""Graph representation, the four random-graph distributions and graph I/O.

Vertices are 0-indexed everywhere. Graphs are immutable once built, so they
can be shared read-only between threads and worker processes.
"""
import json
from dataclasses import dataclass
from functools import cached_property
from math import comb
from pathlib import Path
from typing import Dict, List, Tuple, Union

import networkx as nx
import numpy as np
from scipy import sparse

from errors import GraphParseError, InvalidParameter
from logger import logger
from utils import make_rng, mask_to_bits


@dataclass(frozen=True, eq=False)
class Graph:
    """
    Simple undirected graph on vertices 0..n-1.

    The edge array is canonical: each row is (u, v) with u < v and rows are
    sorted lexicographically. Adjacency bit-rows, the CSR matrix and the degree
    vector are derived lazily from it.

    Args:
        n: Number of vertices
        edges: Array-like of shape (m, 2)

    Raises:
        InvalidParameter: On self-loops, duplicate edges or out-of-range endpoints
    """
    n: int
    edges: np.ndarray

    def __post_init__(self):
        n = int(self.n)
        if n < 0:
            raise InvalidParameter(f"vertex count must be non-negative, got {n}")
        e = np.asarray(self.edges, dtype=np.int64)
        if e.size == 0:
            e = np.empty((0, 2), dtype=np.int64)
        if e.ndim != 2 or e.shape[1] != 2:
            raise InvalidParameter(f"edges must have shape (m, 2), got {e.shape}")
        if e.size and (e.min() < 0 or e.max() >= n):
            raise InvalidParameter(f"edge endpoint outside 0..{n - 1}")
        if np.any(e[:, 0] == e[:, 1]):
            v = int(e[e[:, 0] == e[:, 1]][0, 0])
            raise InvalidParameter(f"self-loop at vertex {v}")
        e = np.sort(e, axis=1)
        keys = e[:, 0] * n + e[:, 1]
        order = np.argsort(keys, kind="stable")
        e, keys = e[order], keys[order]
        dup = np.flatnonzero(keys[1:] == keys[:-1])
        if dup.size:
            u, v = e[dup[0]]
            raise InvalidParameter(f"duplicate edge {{{u}, {v}}}")
        e.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", e)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:
        return hash((self.n, self.edges.tobytes()))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.edge_count})"

    @property
    def edge_count(self) -> int:
        return int(self.edges.shape[0])

    @property
    def average_degree(self) -> float:
        return 2.0 * self.edge_count / self.n if self.n else 0.0

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        """Symmetric 0/1 adjacency matrix (int32 so that A @ x counts neighbours)."""
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(rows.size, dtype=np.int32)
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.csr.indptr)

    @cached_property
    def adjacency(self) -> Tuple[int, ...]:
        """Per-vertex neighbourhood as an int bit-row (bit u of row v set iff uv is an edge)."""
        indptr, indices = self.csr.indptr, self.csr.indices
        rows = []
        row = np.zeros(self.n, dtype=bool)
        for v in range(self.n):
            nbrs = indices[indptr[v]:indptr[v + 1]]
            row[nbrs] = True
            rows.append(mask_to_bits(row))
            row[nbrs] = False
        return tuple(rows)

    def neighbors(self, v: int) -> np.ndarray:
        indptr = self.csr.indptr
        return np.sort(self.csr.indices[indptr[v]:indptr[v + 1]])

    def edge_list(self) -> List[Tuple[int, int]]:
        return [(int(u), int(v)) for u, v in self.edges]

    def induced(self, vertices) -> Tuple["Graph", np.ndarray]:
        """
        Subgraph induced on ``vertices``.

        Returns:
            Tuple[Graph, np.ndarray]: The subgraph on 0..len(vertices)-1 and the
            array mapping each new label back to its original vertex
        """
        labels = np.unique(np.asarray(vertices, dtype=np.int64))
        relabel = np.full(self.n, -1, dtype=np.int64)
        relabel[labels] = np.arange(labels.size)
        u, v = relabel[self.edges[:, 0]], relabel[self.edges[:, 1]]
        keep = (u >= 0) & (v >= 0)
        return Graph(int(labels.size), np.stack([u[keep], v[keep]], axis=1)), labels

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edge_list())
        return g


def empty_graph(n: int) -> Graph:
    return Graph(n, np.empty((0, 2), dtype=np.int64))


def complete_graph(n: int) -> Graph:
    u, v = np.triu_indices(n, k=1)
    return Graph(n, np.stack([u, v], axis=1))


def path_graph(n: int) -> Graph:
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise InvalidParameter("a cycle needs at least 3 vertices")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def pair_count(n: int) -> int:
    return comb(n, 2) if n >= 2 else 0


def decode_pairs(idx: np.ndarray, n: int) -> np.ndarray:
    """Map lexicographic pair indices in [0, C(n,2)) to rows (u, v) with u < v."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    b = 2 * n - 1
    u = np.floor((b - np.sqrt(float(b) * b - 8.0 * idx)) / 2).astype(np.int64)
    u = np.clip(u, 0, n - 2)
    # float rounding can leave u one row off in either direction
    u[u * (2 * n - u - 1) // 2 > idx] -= 1
    u[(u + 1) * (2 * n - u - 2) // 2 <= idx] += 1
    v = idx - u * (2 * n - u - 1) // 2 + u + 1
    return np.stack([u, v], axis=1)


def encode_pairs(edges: np.ndarray, n: int) -> np.ndarray:
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    u, v = edges.min(axis=1), edges.max(axis=1)
    return u * (2 * n - u - 1) // 2 + v - u - 1


def _first_distinct(rng: np.random.Generator, upper: int, m: int, accept=None) -> np.ndarray:
    """
    First ``m`` distinct values of an i.i.d. uniform stream on [0, upper).

    The distinct prefix of an i.i.d. stream is a uniform m-subset, so this is
    exact sampling without replacement. ``accept`` filters the stream, which
    keeps it i.i.d. uniform over the accepted values.
    """
    chosen = np.empty(0, dtype=np.int64)
    while chosen.size < m:
        need = m - chosen.size
        draw = rng.integers(0, upper, size=need + need // 8 + 16, dtype=np.int64)
        if accept is not None:
            draw = draw[accept(draw)]
        chosen = np.concatenate([chosen, draw])
        _, first = np.unique(chosen, return_index=True)
        chosen = chosen[np.sort(first)]
    return chosen[:m]


def _sample_pairs(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    total = pair_count(n)
    if m == 0:
        return np.empty((0, 2), dtype=np.int64)
    if m > total // 2:
        idx = rng.permutation(total)[:m]
    else:
        idx = _first_distinct(rng, total, m)
    return decode_pairs(np.sort(idx), n)


def _check_count(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 0:
        raise InvalidParameter(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def gen_gnm(n: int, m: int, seed: int) -> Graph:
    """
    Uniform random simple graph with exactly m edges (the G(n, m) model).

    Sparse requests use rejection from the pair space; when m exceeds half of
    C(n, 2) a shuffled prefix of all pairs is taken instead.

    Raises:
        InvalidParameter: If m > C(n, 2)
    """
    n, m = _check_count("n", n), _check_count("m", m)
    if m > pair_count(n):
        raise InvalidParameter(f"m={m} exceeds C({n},2)={pair_count(n)}")
    rng = make_rng(seed)
    return Graph(n, _sample_pairs(rng, n, m))


def gen_gnm_star(n: int, m: int, seed: int) -> Graph:
    """m endpoint pairs drawn with replacement; loops dropped and parallel edges merged."""
    n, m = _check_count("n", n), _check_count("m", m)
    if n < 1:
        raise InvalidParameter("G*(n, m) needs at least one vertex")
    rng = make_rng(seed)
    draws = rng.integers(0, n, size=(m, 2), dtype=np.int64)
    draws = draws[draws[:, 0] != draws[:, 1]]
    if draws.size == 0:
        return empty_graph(n)
    keys = np.unique(encode_pairs(draws, n))
    return Graph(n, decode_pairs(keys, n))


def gen_gnp(n: int, p: float, seed: int) -> Graph:
    """Each of the C(n, 2) pairs is an edge independently with probability p."""
    n = _check_count("n", n)
    if not 0.0 <= p <= 1.0:
        raise InvalidParameter(f"p must lie in [0, 1], got {p}")
    rng = make_rng(seed)
    # the edge count is Binomial(C(n,2), p); given it, the edge set is uniform
    m = int(rng.binomial(pair_count(n), p))
    return Graph(n, _sample_pairs(rng, n, m))


def gen_planted(n: int, m: int, k: int, seed: int):
    """
    Planted pair (G, sigma): sigma is a uniform k-subset and G is uniform over
    the m-edge graphs with no edge inside sigma.

    Returns:
        Tuple[Graph, VertexSet]: The graph and the planted independent set

    Raises:
        InvalidParameter: If k > n or m exceeds C(n,2) - C(k,2)
    """
    from iset_core import VertexSet

    n, m, k = _check_count("n", n), _check_count("m", m), _check_count("k", k)
    if k > n:
        raise InvalidParameter(f"k={k} exceeds n={n}")
    total = pair_count(n)
    pool = total - pair_count(k)
    if m > pool:
        raise InvalidParameter(f"m={m} exceeds the {pool} pairs not inside a {k}-set")
    rng = make_rng(seed)
    sigma = np.sort(rng.choice(n, size=k, replace=False)) if k else np.empty(0, dtype=np.int64)
    inside = np.zeros(n, dtype=bool)
    inside[sigma] = True

    def outside_sigma(idx):
        pairs = decode_pairs(idx, n)
        return ~(inside[pairs[:, 0]] & inside[pairs[:, 1]])

    if m == 0:
        idx = np.empty(0, dtype=np.int64)
    elif m > pool // 2:
        everything = np.arange(total, dtype=np.int64)
        allowed = everything[outside_sigma(everything)]
        idx = allowed[rng.permutation(allowed.size)[:m]]
    else:
        idx = _first_distinct(rng, total, m, accept=outside_sigma)
    graph = Graph(n, decode_pairs(np.sort(idx), n))
    return graph, VertexSet.from_indices(sigma, n)


def save_graph(graph: Graph, path: Union[str, Path]) -> None:
    """
    Write a graph as JSON (``.json`` suffix) or as the text edge-list format.

    The text format starts with a ``# n <N>`` header so isolated vertices
    survive a round trip, followed by one canonical ``u v`` line per edge.
    """
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".json":
        with open(path, "w") as f:
            json.dump({"n": graph.n, "edges": graph.edges.tolist()}, f)
    else:
        with open(path, "w") as f:
            f.write(f"# n {graph.n}\n")
            for u, v in graph.edges:
                f.write(f"{u} {v}\n")
    logger.debug(f"Saved {graph!r} to {path}")


def load_graph(path: Union[str, Path]) -> Graph:
    """
    Read a graph written by ``save_graph`` (or by hand in either format).

    Raises:
        FileNotFoundError: If the file does not exist
        GraphParseError: On malformed lines, self-loops or duplicate edges
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Graph file not found: {path}")
    if path.suffix.lower() == ".json":
        return _load_json(path)
    return _load_text(path)


def _load_text(path: Path) -> Graph:
    declared = None
    pairs: List[Tuple[int, int]] = []
    lines: List[int] = []
    seen: Dict[Tuple[int, int], int] = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "n":
                    try:
                        declared = int(parts[1])
                    except ValueError:
                        raise GraphParseError(f"bad vertex-count header {line!r}", lineno, str(path))
                continue
            parts = line.split()
            if len(parts) != 2:
                raise GraphParseError(f"expected 'u v', got {line!r}", lineno, str(path))
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphParseError(f"non-integer vertex in {line!r}", lineno, str(path))
            if u < 0 or v < 0:
                raise GraphParseError(f"negative vertex in {line!r}", lineno, str(path))
            if u == v:
                raise GraphParseError(f"self-loop at vertex {u}", lineno, str(path))
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphParseError(f"duplicate edge {key} (first on line {seen[key]})", lineno, str(path))
            seen[key] = lineno
            pairs.append(key)
            lines.append(lineno)
    top = max((v for _, v in pairs), default=-1)
    n = declared if declared is not None else top + 1
    if declared is not None:
        for (u, v), lineno in zip(pairs, lines):
            if v >= declared:
                raise GraphParseError(f"vertex {v} outside declared n={declared}", lineno, str(path))
    return Graph(n, np.array(pairs, dtype=np.int64).reshape(-1, 2))


def _load_json(path: Path) -> Graph:
    try:
        with open(path) as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise GraphParseError(e.msg, e.lineno, str(path))
    if not isinstance(payload, dict) or "n" not in payload or "edges" not in payload:
        raise GraphParseError('expected an object with "n" and "edges"', None, str(path))
    n = payload["n"]
    if not isinstance(n, int) or n < 0:
        raise GraphParseError(f'"n" must be a non-negative integer, got {n!r}', None, str(path))
    seen = set()
    pairs = []
    for i, item in enumerate(payload["edges"]):
        if not (isinstance(item, list) and len(item) == 2 and all(isinstance(x, int) for x in item)):
            raise GraphParseError(f"edge #{i} is not a pair of integers: {item!r}", None, str(path))
        u, v = item
        if u == v:
            raise GraphParseError(f"edge #{i} is a self-loop at vertex {u}", None, str(path))
        if min(u, v) < 0 or max(u, v) >= n:
            raise GraphParseError(f"edge #{i} leaves 0..{n - 1}", None, str(path))
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphParseError(f"edge #{i} duplicates {key}", None, str(path))
        seen.add(key)
        pairs.append(key)
    return Graph(n, np.array(pairs, dtype=np.int64).reshape(-1, 2))
