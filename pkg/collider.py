"""
Constructive connectivity between two independent sets of the same size.

An augmenting vertex v lets both sets absorb v at once: each side drops its
neighbours of v and takes in a terminal set that re-fills the gap (the
Collider step's first phase), then sheds one vertex not shared with the other
side (second phase). Each round grows the intersection by exactly one, so
repeating it until the sets meet yields a path inside S_k.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

from constants import NODE_BUDGET
from errors import BudgetExceeded, InvalidParameter, InvalidWitness
from graph_core import Graph
from iset_core import VertexSet, is_independent
from logger import logger
from utils import iter_bits, lowest_bit


@dataclass(frozen=True)
class AugmentingWitness:
    v: int
    case: str
    terminal_sigma: VertexSet
    terminal_tau: VertexSet


class ColliderStep(NamedTuple):
    sigma1: VertexSet
    sigma2: VertexSet
    tau1: VertexSet
    tau2: VertexSet


@dataclass
class PathCertificate:
    """
    A path sigma = steps[0], ..., steps[-1] = tau inside S_k.

    ``via_sets[j]`` is the size-(k+1) set between ``steps[j]`` and ``steps[j+1]``.
    """
    k: int
    rounds: int
    steps: List[VertexSet]
    via_sets: List[VertexSet]
    max_step_distance: int

    def to_dict(self) -> Dict:
        return {
            "k": self.k,
            "rounds": self.rounds,
            "steps": [s.to_list() for s in self.steps],
            "via": [s.to_list() for s in self.via_sets],
            "max_step_distance": self.max_step_distance,
        }


@dataclass
class PathFailure:
    """The pair connect_path got stuck on. A disconnectivity candidate, not a proof."""
    reason: str
    sigma: VertexSet
    tau: VertexSet
    rounds: int
    partial_steps: List[VertexSet] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "reason": self.reason,
            "sigma": self.sigma.to_list(),
            "tau": self.tau.to_list(),
            "rounds": self.rounds,
        }


def degree_bound(graph: Graph) -> int:
    """d = 2m/n rounded up, at least 1; the 7d and 20d radii are measured in it."""
    if graph.n == 0:
        return 1
    return max(1, math.ceil(2 * graph.edge_count / graph.n))


def _check_pair(graph: Graph, sigma: VertexSet, tau: VertexSet) -> None:
    if sigma.n != graph.n or tau.n != graph.n:
        raise InvalidParameter("set width does not match the graph")
    if sigma.size != tau.size:
        raise InvalidParameter(f"sizes differ: |sigma|={sigma.size}, |tau|={tau.size}")
    if not is_independent(graph, sigma):
        raise InvalidParameter("sigma is not independent")
    if not is_independent(graph, tau):
        raise InvalidParameter("tau is not independent")


def _terminal_candidates(adj, v: int, own: int, other: int, hit: int) -> Dict[int, List[int]]:
    """
    For each u in ``hit`` (= N_v & own), the vertices w whose only neighbour in
    ``own`` is u, that avoid v, N_v and both sets.
    """
    forbidden = adj[v] | (1 << v) | own | other
    out: Dict[int, List[int]] = {u: [] for u in iter_bits(hit)}
    for u in out:
        for w in iter_bits(adj[u] & ~forbidden):
            if adj[w] & own == 1 << u:
                out[u].append(w)
    return out


class _TerminalSearch:
    """
    Lexicographically first pair of terminal sets for a fixed v.

    Each u picks one candidate in increasing u order; picks on the same side must be
    pairwise non-adjacent, and the tau side must avoid the sigma side's picks.
    """

    def __init__(self, adj, sigma_cands: Dict[int, List[int]], tau_cands: Dict[int, List[int]], budget: int):
        self.adj = adj
        self.slots = [(0, u, c) for u, c in sigma_cands.items()] + [(1, u, c) for u, c in tau_cands.items()]
        self.budget = budget
        self.nodes = 0

    def run(self) -> Optional[Tuple[int, int]]:
        return self._place(0, 0, 0)

    def _place(self, idx: int, picked_sigma: int, picked_tau: int) -> Optional[Tuple[int, int]]:
        self.nodes += 1
        if self.nodes > self.budget:
            raise BudgetExceeded(f"terminal-set search exceeded {self.budget} nodes")
        if idx == len(self.slots):
            return picked_sigma, picked_tau
        side, _, cands = self.slots[idx]
        own = picked_sigma if side == 0 else picked_tau
        for w in cands:
            bit = 1 << w
            if self.adj[w] & own:
                continue
            if side == 1 and picked_sigma & bit:
                continue
            if side == 0:
                found = self._place(idx + 1, picked_sigma | bit, picked_tau)
            else:
                found = self._place(idx + 1, picked_sigma, picked_tau | bit)
            if found is not None:
                return found
        return None


def find_augmenting(graph: Graph, sigma: VertexSet, tau: VertexSet,
                    budget: int = NODE_BUDGET) -> Optional[AugmentingWitness]:
    """
    First augmenting vertex v outside sigma | tau, by lowest index.

    Case A: v has no neighbour in sigma | tau. Case B: v has no neighbour in
    sigma & tau, and each side's neighbours of v can be re-filled by a terminal
    set of the same size (at most 7d) whose vertices each have exactly one
    neighbour on that side, lying in N_v.

    Returns:
        Optional[AugmentingWitness]: The witness, or None if no vertex qualifies

    Raises:
        InvalidParameter: If the sets are not independent or differ in size
        BudgetExceeded: If one terminal-set search visits more than budget nodes
    """
    _check_pair(graph, sigma, tau)
    adj = graph.adjacency
    n = graph.n
    limit = 7 * degree_bound(graph)
    union = sigma.bits | tau.bits
    shared = sigma.bits & tau.bits
    empty = VertexSet.empty(n)
    for v in range(n):
        if union >> v & 1:
            continue
        nv = adj[v]
        if nv & union == 0:
            return AugmentingWitness(v, "A", empty, empty)
        if nv & shared:
            continue
        hit_sigma, hit_tau = nv & sigma.bits, nv & tau.bits
        if hit_sigma.bit_count() > limit or hit_tau.bit_count() > limit:
            continue
        sigma_cands = _terminal_candidates(adj, v, sigma.bits, tau.bits, hit_sigma)
        tau_cands = _terminal_candidates(adj, v, tau.bits, sigma.bits, hit_tau)
        if any(not c for c in sigma_cands.values()) or any(not c for c in tau_cands.values()):
            continue
        found = _TerminalSearch(adj, sigma_cands, tau_cands, budget).run()
        if found is not None:
            return AugmentingWitness(v, "B", VertexSet(found[0], n), VertexSet(found[1], n))
    return None


def validate_witness(graph: Graph, sigma: VertexSet, tau: VertexSet, w: AugmentingWitness) -> None:
    """
    Check every witness invariant against (graph, sigma, tau).

    Raises:
        InvalidWitness: Naming the first invariant that fails
    """
    adj = graph.adjacency
    n = graph.n
    v = w.v
    if not 0 <= v < n:
        raise InvalidWitness(f"vertex {v} outside the graph")
    if v in sigma or v in tau:
        raise InvalidWitness(f"vertex {v} already lies in sigma or tau")
    nv = adj[v]
    ts, tt = w.terminal_sigma.bits, w.terminal_tau.bits
    if w.case == "A":
        if ts or tt:
            raise InvalidWitness("case A carries non-empty terminal sets")
        if nv & (sigma.bits | tau.bits):
            raise InvalidWitness(f"vertex {v} has a neighbour in sigma or tau")
        return
    if w.case != "B":
        raise InvalidWitness(f"unknown case {w.case!r}")
    if nv & sigma.bits & tau.bits:
        raise InvalidWitness(f"vertex {v} has a neighbour in sigma & tau")
    limit = 7 * degree_bound(graph)
    for name, own, other, term in (("sigma", sigma.bits, tau.bits, ts), ("tau", tau.bits, sigma.bits, tt)):
        hit = nv & own
        if term.bit_count() != hit.bit_count():
            raise InvalidWitness(f"terminal set of {name} has {term.bit_count()} vertices, need {hit.bit_count()}")
        if term.bit_count() > limit:
            raise InvalidWitness(f"terminal set of {name} exceeds 7d={limit}")
        if term & (nv | (1 << v)):
            raise InvalidWitness(f"terminal set of {name} touches v={v}")
        if term & (own | other):
            raise InvalidWitness(f"terminal set of {name} meets sigma or tau")
        if not is_independent(graph, VertexSet(term, n)):
            raise InvalidWitness(f"terminal set of {name} is not independent")
        owners = 0
        for x in iter_bits(term):
            mine = adj[x] & own
            if mine.bit_count() != 1 or not mine & nv:
                raise InvalidWitness(f"terminal vertex {x} needs exactly one {name}-neighbour inside N_v")
            owners |= mine
        if owners != hit:
            raise InvalidWitness(f"terminal set of {name} does not cover N_v & {name}")
    if ts & tt:
        raise InvalidWitness("terminal sets overlap")


def collider_step(graph: Graph, sigma: VertexSet, tau: VertexSet, w: AugmentingWitness) -> ColliderStep:
    """
    Apply one Collider step.

    Phase 1 gives sigma1 = sigma - N_v + {v} + I_v(sigma) of size k+1 (tau1 alike).
    Phase 2 drops from sigma1 its lowest vertex outside {v} | (sigma & tau) | tau,
    falling back to the lowest outside {v} | (sigma & tau); tau1 mirrors it.

    Raises:
        InvalidParameter: If sigma equals tau
        InvalidWitness: If the witness does not validate
    """
    if sigma == tau:
        raise InvalidParameter("collider_step needs sigma != tau")
    validate_witness(graph, sigma, tau, w)
    nv = graph.adjacency[w.v]
    v_bit = 1 << w.v
    n = graph.n
    sigma1 = (sigma.bits & ~nv) | v_bit | w.terminal_sigma.bits
    tau1 = (tau.bits & ~nv) | v_bit | w.terminal_tau.bits
    keep = (sigma.bits & tau.bits) | v_bit

    def shed(own: int, other: int) -> int:
        pool = own & ~keep & ~other
        if not pool:
            pool = own & ~keep
        return own & ~(1 << lowest_bit(pool))

    return ColliderStep(
        sigma1=VertexSet(sigma1, n),
        sigma2=VertexSet(shed(sigma1, tau.bits), n),
        tau1=VertexSet(tau1, n),
        tau2=VertexSet(shed(tau1, sigma.bits), n),
    )


def connect_path(graph: Graph, sigma: VertexSet, tau: VertexSet,
                 max_rounds: Optional[int] = None, budget: int = NODE_BUDGET) -> Union[PathCertificate, PathFailure]:
    """
    Connect sigma to tau inside S_k by repeated Collider steps.

    Each round grows |sigma & tau| by one, so a success takes exactly
    k - |sigma & tau| rounds.

    Args:
        max_rounds: Round limit; defaults to k
        budget: Node budget for each terminal-set search

    Returns:
        Union[PathCertificate, PathFailure]: The certified path, or the stuck pair
    """
    _check_pair(graph, sigma, tau)
    k = sigma.size
    if max_rounds is None:
        max_rounds = k
    left, right = [sigma], [tau]
    via_left: List[VertexSet] = []
    via_right: List[VertexSet] = []
    s, t = sigma, tau
    rounds = 0
    while s != t:
        if rounds >= max_rounds:
            return PathFailure("max_rounds", s, t, rounds, left + right[::-1])
        try:
            w = find_augmenting(graph, s, t, budget)
        except BudgetExceeded as e:
            logger.warning(f"connect_path: {e}")
            return PathFailure("search_budget", s, t, rounds, left + right[::-1])
        if w is None:
            logger.debug(f"connect_path stuck after {rounds} rounds with |sigma & tau|={(s & t).size}")
            return PathFailure("no_augmenting_vertex", s, t, rounds, left + right[::-1])
        step = collider_step(graph, s, t, w)
        via_left.append(step.sigma1)
        via_right.append(step.tau1)
        s, t = step.sigma2, step.tau2
        left.append(s)
        right.append(t)
        rounds += 1
    steps = left + right[::-1][1:]
    via = via_left + via_right[::-1]
    max_dist = max(((a.bits ^ b.bits).bit_count() for a, b in zip(steps, steps[1:])), default=0)
    return PathCertificate(k=k, rounds=rounds, steps=steps, via_sets=via, max_step_distance=max_dist)


def certificate_violations(graph: Graph, cert: PathCertificate,
                           sigma: Optional[VertexSet] = None, tau: Optional[VertexSet] = None) -> List[str]:
    """Every broken PathCertificate invariant, as readable messages (empty when valid)."""
    problems = []
    radius = 20 * degree_bound(graph)
    if sigma is not None and cert.steps[0] != sigma:
        problems.append("path does not start at sigma")
    if tau is not None and cert.steps[-1] != tau:
        problems.append("path does not end at tau")
    for j, s in enumerate(cert.steps):
        if s.size != cert.k or not is_independent(graph, s):
            problems.append(f"step {j} is not an independent {cert.k}-set")
    if cert.via_sets and len(cert.via_sets) != len(cert.steps) - 1:
        problems.append("via-sets do not align with steps")
    observed = 0
    for j, (a, b) in enumerate(zip(cert.steps, cert.steps[1:])):
        dist = (a.bits ^ b.bits).bit_count()
        observed = max(observed, dist)
        if dist > radius:
            problems.append(f"steps {j}->{j + 1} are {dist} apart, over 20d={radius}")
    if observed != cert.max_step_distance:
        problems.append(f"max_step_distance {cert.max_step_distance} != observed {observed}")
    for j, via in enumerate(cert.via_sets):
        if via.size != cert.k + 1 or not is_independent(graph, via):
            problems.append(f"via-set {j} is not an independent {cert.k + 1}-set")
        elif j + 1 < len(cert.steps):
            for end in (cert.steps[j], cert.steps[j + 1]):
                if (via.bits ^ end.bits).bit_count() > radius:
                    problems.append(f"via-set {j} is over 20d from a neighbouring step")
    return problems
