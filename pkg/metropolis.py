"""
The Metropolis process on independent sets at fugacity lambda >= 1.

One step picks a uniform vertex v: if v is in I it leaves with probability
1/lambda, if v and all its neighbours are outside I it joins, otherwise nothing
happens. The stationary law is pi(I) = lambda^|I| / Z.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from analytic import LogValue
from constants import (COUNT_TIME_BUDGET, DETAILED_BALANCE_TOL, MIX_BUDGET, MIX_HORIZON,
                       NORMALIZATION_TOL)
from errors import BudgetExceeded, InvalidParameter
from graph_core import Graph
from iset_core import VertexSet, count_layer, enumerate_layer, is_independent, require_independent
from logger import logger
from utils import derive_seed, make_rng

# random draws are made in blocks: BLOCK vertex indices, then BLOCK uniforms
BLOCK = 4096


@dataclass
class ChainTrace:
    """
    A seeded run. ``sizes[j]`` is |I_t| at t = j * stride; ``hit_times`` maps each
    registered target size to its first hitting step (None if never hit).
    """
    lam: float
    seed: int
    sizes: List[int]
    stride: int
    steps: int
    hit_times: Dict[int, Optional[int]]
    snapshots: Dict[int, VertexSet] = field(default_factory=dict)
    final: Optional[VertexSet] = None

    def records(self) -> Iterable[Dict]:
        for j, size in enumerate(self.sizes):
            t = j * self.stride
            row = {"t": t, "size": size}
            if t in self.snapshots:
                row["state"] = self.snapshots[t].to_list()
            yield row

    def summary(self) -> Dict:
        return {
            "lambda": self.lam,
            "seed": self.seed,
            "steps": self.steps,
            "stride": self.stride,
            "hit_times": {str(k): v for k, v in self.hit_times.items()},
            "final_size": self.final.size if self.final is not None else None,
        }


@dataclass
class StationaryTable:
    """
    Exact stationary quantities. ``weights[k]`` is R(k, lambda) = |S_k| lambda^k.
    ``states``/``pi`` are present only when every independent set fit the budget.
    """
    lam: float
    weights: List[LogValue]
    Z: LogValue
    mu: float
    states: Optional[List[VertexSet]] = None
    pi: Optional[np.ndarray] = None
    truncated: bool = False

    def to_dict(self) -> Dict:
        out = {
            "lambda": self.lam,
            "weights": [w.to_dict() for w in self.weights],
            "Z": self.Z.to_dict(),
            "mu": self.mu,
            "truncated": self.truncated,
        }
        if self.states is not None:
            out["pi"] = [{"state": s.to_list(), "p": float(p)} for s, p in zip(self.states, self.pi)]
        return out


@dataclass
class ConcentrationWindow:
    """Sizes k with |mu - k| <= 2n/d and the exact stationary mass outside them."""
    mu: float
    low: float
    high: float
    outside_probability: float


@dataclass
class MixingReport:
    """
    ``per_start[i]`` is tau for a start in ``states[i]``: the last t at which the
    distance to stationarity was still >= 1/e (0 if never). ``T`` is their max.
    Both are None when the chain did not get within 1/e before the horizon.
    """
    states: List[VertexSet]
    per_start: List[Optional[int]]
    T: Optional[int]
    converged: bool
    worst_distance: List[float]
    monotone: bool = True
    lazy: bool = False


def _check_lambda(lam: float) -> None:
    if not lam >= 1:
        raise InvalidParameter(f"lambda must be >= 1, got {lam}")


def _transition(adj: Tuple[int, ...], bits: int, v: int, u: float, inv_lam: float) -> int:
    bit = 1 << v
    if bits & bit:
        return bits ^ bit if u < inv_lam else bits
    if adj[v] & bits:
        return bits
    return bits | bit


def mp_step(graph: Graph, state: VertexSet, lam: float, rng: np.random.Generator) -> VertexSet:
    """
    One Metropolis step. Draws the vertex first, then one uniform variate,
    whether or not the variate ends up being used.
    """
    _check_lambda(lam)
    if graph.n == 0:
        return state
    v = int(rng.integers(graph.n))
    u = float(rng.random())
    return VertexSet(_transition(graph.adjacency, state.bits, v, u, 1.0 / lam), graph.n)


def mp_run(graph: Graph, start: VertexSet, lam: float, steps: int, stride: int = 1, seed: int = 0,
           targets: Sequence[int] = (), snapshot_every: int = 0) -> ChainTrace:
    """
    Run the chain for ``steps`` steps from ``start``.

    Draws come in blocks of BLOCK (the last block shortened): first the vertex
    indices, then the uniforms. Equal seeds and arguments give identical traces.

    Args:
        stride: Record |I_t| every ``stride`` steps
        targets: Sizes whose first hitting time is tracked
        snapshot_every: Keep full states every so many steps (0 keeps none)
    """
    _check_lambda(lam)
    require_independent(graph, start, "start state")
    if steps < 0 or stride < 1 or snapshot_every < 0:
        raise InvalidParameter("need steps >= 0, stride >= 1 and snapshot_every >= 0")
    rng = make_rng(seed)
    n = graph.n
    adj = graph.adjacency
    inv_lam = 1.0 / lam
    bits, size = start.bits, start.size
    sizes = [size]
    hits: Dict[int, Optional[int]] = {int(k): (0 if size == k else None) for k in targets}
    pending = {k for k, t in hits.items() if t is None}
    snapshots = {0: start} if snapshot_every else {}
    t = 0
    while t < steps and n:
        block = min(BLOCK, steps - t)
        vs = rng.integers(0, n, size=block).tolist()
        us = rng.random(block).tolist()
        for v, u in zip(vs, us):
            t += 1
            new = _transition(adj, bits, v, u, inv_lam)
            if new != bits:
                size += 1 if new > bits else -1
                bits = new
            if pending and size in pending:
                hits[size] = t
                pending.discard(size)
            if t % stride == 0:
                sizes.append(size)
            if snapshot_every and t % snapshot_every == 0:
                snap = VertexSet(bits, n)
                assert is_independent(graph, snap), f"chain left the independent sets at t={t}"
                snapshots[t] = snap
    if not n:
        sizes.extend([size] * (steps // stride))
    return ChainTrace(lam=lam, seed=seed, sizes=sizes, stride=stride, steps=steps,
                      hit_times=hits, snapshots=snapshots, final=VertexSet(bits, n))


def size_histogram(trace: ChainTrace, burn_in: int = 0) -> np.ndarray:
    """Empirical distribution of |I_t| over recorded t >= burn_in."""
    first = -(-burn_in // trace.stride)
    sizes = np.asarray(trace.sizes[first:], dtype=np.int64)
    if sizes.size == 0:
        raise InvalidParameter("no recorded steps after burn-in")
    counts = np.bincount(sizes)
    return counts / counts.sum()


def _enumerate_states(graph: Graph, budget: int) -> Tuple[List[VertexSet], List[int], bool]:
    states: List[VertexSet] = []
    counts: List[int] = []
    for k in range(graph.n + 1):
        room = budget - len(states)
        layer = enumerate_layer(graph, k, cap=max(1, room))
        if not layer.members:
            return states, counts, False
        if layer.truncated or len(layer.members) > room:
            return states, counts, True
        states.extend(layer.members)
        counts.append(len(layer.members))
    return states, counts, False


def _weights(counts: Sequence[int], lam: float) -> List[LogValue]:
    log_lam = math.log(lam)
    return [LogValue.from_log(math.log(c) + k * log_lam) if c else LogValue.zero() for k, c in enumerate(counts)]


def _partition_stats(weights: List[LogValue]) -> Tuple[LogValue, float]:
    logs = np.array([w.log_mag for w in weights])
    log_z = float(logsumexp(logs))
    probs = np.exp(logs - log_z)
    return LogValue.from_log(log_z), float(np.dot(np.arange(len(weights)), probs))


def stationary_exact(graph: Graph, lam: float, budget: int = MIX_BUDGET) -> StationaryTable:
    """
    Exact Z, mu, R(k, lambda) and pi by enumerating every independent set.

    When the state count exceeds ``budget`` the table covers only the layers that
    fit, and is flagged truncated (no pi).
    """
    _check_lambda(lam)
    states, counts, truncated = _enumerate_states(graph, budget)
    if truncated:
        logger.warning(f"stationary_exact: state space exceeds budget={budget}; per-size table covers k < {len(counts)}")
    weights = _weights(counts, lam)
    z, mu = _partition_stats(weights)
    table = StationaryTable(lam=lam, weights=weights, Z=z, mu=mu, truncated=truncated)
    if not truncated:
        sizes = np.array([s.size for s in states], dtype=float)
        table.states = states
        table.pi = np.exp(sizes * math.log(lam) - z.log_mag)
    return table


def _layer_counts(graph: Graph, time_budget: float) -> List[int]:
    counts = []
    for k in range(graph.n + 1):
        c = count_layer(graph, k, time_budget)
        if c == 0:
            break
        counts.append(c)
    return counts


def weight_profile(graph: Graph, lam: float, time_budget: float = COUNT_TIME_BUDGET) -> List[LogValue]:
    """R(k, lambda) = |S_k| lambda^k for k = 0 .. alpha(G)."""
    _check_lambda(lam)
    return _weights(_layer_counts(graph, time_budget), lam)


def lambda_sweep(graph: Graph, lambdas: Sequence[float],
                 time_budget: float = COUNT_TIME_BUDGET) -> List[Dict]:
    """Z and mu for each lambda on a grid, from one pass of layer counts."""
    counts = _layer_counts(graph, time_budget)
    rows = []
    for lam in lambdas:
        _check_lambda(lam)
        z, mu = _partition_stats(_weights(counts, lam))
        rows.append({"lambda": lam, "Z": z, "mu": mu})
    return rows


def concentration_window(graph: Graph, lam: float) -> ConcentrationWindow:
    """Exact stationary probability that |I| falls outside {k : |mu - k| <= 2n/d}."""
    weights = weight_profile(graph, lam)
    z, mu = _partition_stats(weights)
    d = graph.average_degree
    radius = 2 * graph.n / d if d > 0 else math.inf
    outside = [w for k, w in enumerate(weights) if abs(mu - k) > radius]
    mass = sum((w / z).to_float() for w in outside)
    return ConcentrationWindow(mu=mu, low=mu - radius, high=mu + radius, outside_probability=mass)


def tv_distance(p, q) -> float:
    """
    Total variation distance 0.5 * sum |p - q| over a shared support.

    Raises:
        InvalidParameter: On shape mismatch, negative mass or non-normalized input
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise InvalidParameter(f"support mismatch: {p.shape} vs {q.shape}")
    for name, dist in (("p", p), ("q", q)):
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > NORMALIZATION_TOL:
            raise InvalidParameter(f"{name} is not a probability distribution")
    return float(min(1.0, 0.5 * np.sum(np.abs(p - q))))


def transition_matrix(graph: Graph, lam: float, budget: int = MIX_BUDGET,
                      lazy: bool = False) -> Tuple[List[VertexSet], sparse.csr_matrix]:
    """
    The exact kernel over all independent sets, rows indexed like the returned states.
    ``lazy`` gives (I + K) / 2.

    Raises:
        BudgetExceeded: If there are more than ``budget`` independent sets
    """
    _check_lambda(lam)
    states, _, truncated = _enumerate_states(graph, budget)
    if truncated:
        raise BudgetExceeded(f"more than {budget} independent sets; exact kernel refused")
    n = graph.n
    size = len(states)
    if n == 0:
        return states, sparse.identity(1, format="csr")
    index = {s.bits: i for i, s in enumerate(states)}
    adj = graph.adjacency
    pick = 1.0 / n
    leave = 1.0 / lam
    rows, cols, data = [], [], []
    for i, s in enumerate(states):
        for v in range(n):
            bit = 1 << v
            if s.bits & bit:
                rows += [i, i]
                cols += [index[s.bits ^ bit], i]
                data += [pick * leave, pick * (1.0 - leave)]
            elif adj[v] & s.bits:
                rows.append(i)
                cols.append(i)
                data.append(pick)
            else:
                rows.append(i)
                cols.append(index[s.bits | bit])
                data.append(pick)
    kernel = sparse.coo_matrix((data, (rows, cols)), shape=(size, size)).tocsr()
    if lazy:
        kernel = (0.5 * (sparse.identity(size, format="csr") + kernel)).tocsr()
    return states, kernel


def stationary_vector(states: Sequence[VertexSet], lam: float) -> np.ndarray:
    logs = np.array([s.size for s in states], dtype=float) * math.log(lam)
    return np.exp(logs - logsumexp(logs))


def detailed_balance_residual(pi: np.ndarray, kernel: sparse.spmatrix) -> float:
    """max over state pairs of |pi(x) K(x,y) - pi(y) K(y,x)|."""
    flow = sparse.csr_matrix(kernel.multiply(np.asarray(pi)[:, None]))
    diff = flow - flow.T
    return float(abs(diff).max()) if diff.nnz else 0.0


def mixing_time_exact(graph: Graph, lam: float, budget: int = MIX_BUDGET,
                      horizon: int = MIX_HORIZON, lazy: bool = False) -> MixingReport:
    """
    Exact per-start mixing times with the 1/e threshold.

    Distributions from every start are pushed through the kernel until the worst
    distance to pi drops below 1/e; since the worst distance never increases, no
    start can climb back above the threshold afterwards.

    Raises:
        BudgetExceeded: If the state space exceeds ``budget``
    """
    states, kernel = transition_matrix(graph, lam, budget, lazy)
    pi = stationary_vector(states, lam)
    residual = detailed_balance_residual(pi, kernel)
    if residual > DETAILED_BALANCE_TOL:
        logger.warning(f"mixing_time_exact: detailed balance residual {residual:.3e}")
    threshold = math.exp(-1)
    kernel_t = kernel.T.tocsr()
    dist = np.eye(len(states))
    delta = 0.5 * np.abs(dist - pi).sum(axis=1)
    last_above = np.zeros(len(states), dtype=np.int64)
    worst = [float(delta.max())]
    monotone = True
    t = 0
    while worst[-1] >= threshold:
        if t >= horizon:
            logger.warning(f"mixing_time_exact: distance still {worst[-1]:.4f} at horizon {horizon}"
                           f"{' (periodic chain?)' if not lazy else ''}")
            return MixingReport(states, [None] * len(states), None, False, worst, monotone, lazy)
        t += 1
        dist = (kernel_t @ dist.T).T
        delta = 0.5 * np.abs(dist - pi).sum(axis=1)
        last_above[delta >= threshold] = t
        worst.append(float(delta.max()))
        if worst[-1] > worst[-2] + 1e-12:
            monotone = False
    if not monotone:
        logger.warning("mixing_time_exact: worst-case distance increased numerically")
    per_start = [int(x) for x in last_above]
    return MixingReport(states, per_start, max(per_start), True, worst, monotone, lazy)


def escape_experiment(graph: Graph, sigma0: VertexSet, lam: float, overlap_floor: float,
                      steps: int, seed: int) -> Optional[int]:
    """
    First step at which |sigma0 & I_t| / n falls below ``overlap_floor`` for the
    chain started at sigma0, or None if it stays above for ``steps`` steps.
    """
    _check_lambda(lam)
    require_independent(graph, sigma0, "sigma0")
    n = graph.n
    if overlap_floor <= 0 or n == 0:
        return None
    limit = overlap_floor * n
    shared = sigma0.size
    if shared < limit:
        return 0
    rng = make_rng(seed)
    adj = graph.adjacency
    inv_lam = 1.0 / lam
    home = sigma0.bits
    bits = home
    t = 0
    while t < steps:
        block = min(BLOCK, steps - t)
        vs = rng.integers(0, n, size=block).tolist()
        us = rng.random(block).tolist()
        for v, u in zip(vs, us):
            t += 1
            new = _transition(adj, bits, v, u, inv_lam)
            if new != bits and home >> v & 1:
                shared += 1 if new > bits else -1
                if shared < limit:
                    return t
            bits = new
    return None


def escape_medians(graph: Graph, sigma0: VertexSet, lambdas: Sequence[float], overlap_floor: float,
                   steps: int, runs: int, base_seed: int) -> Dict[float, float]:
    """Median escape step per lambda; runs that never escape count as +inf."""
    out = {}
    for lam in lambdas:
        times = []
        for r in range(runs):
            hit = escape_experiment(graph, sigma0, lam, overlap_floor, steps, derive_seed(base_seed, r))
            times.append(math.inf if hit is None else hit)
        out[lam] = float(np.median(times))
        logger.info(f"lambda={lam}: median escape step {out[lam]}")
    return out
