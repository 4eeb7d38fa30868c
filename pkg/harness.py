"""Experiment orchestration: records, sweep specs, the worker pool and the
embedded oracle self-test."""
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from itertools import combinations, product
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from colorama import Fore, Style

from analytic import expected_count_gnm, second_moment_terms
from caller import Caller
from collider import collider_step, find_augmenting
from constants import ARTIFACT_VERSION
from errors import InvalidParameter
from graph_core import Graph, cycle_graph, empty_graph, path_graph
from iset_core import VertexSet, count_layer, enumerate_layer, max_is_exact
from logger import logger
from metropolis import mixing_time_exact, stationary_exact, tv_distance
from reporter import Reporter, dumps
from utils import check_seed, derive_seed


@dataclass
class ExperimentRecord:
    """
    One self-contained result. ``params`` includes the model tag and the cell seed,
    so a record can be re-run on its own.
    """
    experiment_id: str
    operation: str
    index: int
    params: Dict[str, Any]
    metrics: Dict[str, Any]
    status: str = "ok"
    error: Optional[str] = None
    artifact_version: str = ARTIFACT_VERSION
    timestamp: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return dumps(self.to_dict())


@dataclass
class SweepSpec:
    """
    A parameter grid crossed with ``replicas`` seeds per point.

    Args:
        operation: A Caller operation name
        grid: Parameter name -> list of values; an empty grid or axis yields no cells
        fixed: Parameters shared by every cell
        base_seed: Root of the per-cell seeds
        replicas: Seeds per grid point
        output: JSONL path for the records (optional)
        created_at: Timestamp stamped on every record; fixed values keep outputs byte-identical
    """
    operation: str
    grid: Dict[str, List[Any]] = field(default_factory=dict)
    fixed: Dict[str, Any] = field(default_factory=dict)
    base_seed: int = 0
    replicas: int = 1
    output: Optional[str] = None
    created_at: Optional[str] = None

    def __post_init__(self):
        if self.operation not in Caller().handlers:
            raise InvalidParameter(f"unknown sweep operation {self.operation!r}")
        check_seed(self.base_seed)
        if self.replicas < 1:
            raise InvalidParameter(f"replicas must be positive, got {self.replicas}")
        for name, values in self.grid.items():
            if not isinstance(values, list):
                raise InvalidParameter(f"grid axis {name!r} must be a list")

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "SweepSpec":
        known = {"operation", "grid", "fixed", "base_seed", "replicas", "output", "created_at"}
        unknown = set(payload) - known
        if unknown:
            raise InvalidParameter(f"unknown sweep spec keys: {sorted(unknown)}")
        if "operation" not in payload:
            raise InvalidParameter("sweep spec needs an operation")
        return cls(**payload)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SweepSpec":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Sweep spec not found: {path}")
        try:
            payload = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise InvalidParameter(f"{path}:{e.lineno}: {e.msg}")
        return cls.from_dict(payload)

    def cells(self) -> List[Tuple[int, Dict[str, Any]]]:
        """(cell index, parameters) in a fixed order: sorted axis names, then replica."""
        if not self.grid or any(len(v) == 0 for v in self.grid.values()):
            return []
        keys = sorted(self.grid)
        out = []
        for combo in product(*(self.grid[k] for k in keys)):
            for replica in range(self.replicas):
                params = {**self.fixed, **dict(zip(keys, combo)), "replica": replica}
                out.append((len(out), params))
        return out


def _run_cell(job: Tuple[str, int, int, Dict[str, Any], int, str]) -> ExperimentRecord:
    operation, base_seed, index, params, seed, timestamp = job
    record = ExperimentRecord(
        experiment_id=f"{operation}-{base_seed}-{index}",
        operation=operation,
        index=index,
        params={**params, "seed": seed},
        metrics={},
        timestamp=timestamp,
    )
    try:
        record.metrics = Caller().call(operation, params, seed)
    except Exception as e:
        # a failing cell is recorded, the sweep goes on
        record.status = "error"
        record.error = f"{type(e).__name__}: {e}"
    return record


def run_sweep(spec: SweepSpec, workers: int = 1) -> List[ExperimentRecord]:
    """
    Run every cell of a sweep. Cell seeds depend only on (base_seed, cell index),
    and records come back in cell order, so the output does not depend on ``workers``.
    """
    timestamp = spec.created_at or datetime.now(timezone.utc).isoformat(timespec="seconds")
    jobs = [(spec.operation, spec.base_seed, idx, params, derive_seed(spec.base_seed, idx), timestamp)
            for idx, params in spec.cells()]
    logger.info(f"{Fore.CYAN}Sweep {spec.operation}: {len(jobs)} cells on {workers} worker(s){Style.RESET_ALL}")
    if workers <= 1 or len(jobs) <= 1:
        records = [_run_cell(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, jobs))
    failed = sum(r.status != "ok" for r in records)
    if failed:
        logger.warning(f"{Fore.YELLOW}{failed} of {len(records)} cells failed{Style.RESET_ALL}")
    if spec.output:
        Reporter().write_jsonl(spec.output, (r.to_dict() for r in records))
    return records


def _oracle_expected_count() -> Tuple[bool, str]:
    pairs = list(combinations(range(4), 2))
    counts = [count_layer(Graph(4, list(edges)), 2) for edges in combinations(pairs, 2)]
    brute = sum(counts) / len(counts)
    formula = expected_count_gnm(4, 2, 2).to_float()
    return abs(brute - 4) < 1e-12 and abs(formula - 4) < 1e-9, f"brute={brute} formula={formula:.12f}"


def _oracle_cycle_alpha() -> Tuple[bool, str]:
    alpha = max_is_exact(cycle_graph(5)).size
    return alpha == 2, f"alpha(C5)={alpha}"


def _oracle_path_stationary() -> Tuple[bool, str]:
    table = stationary_exact(path_graph(3), 2.0)
    z = table.Z.to_float()
    return abs(z - 11) < 1e-9 and abs(table.mu - 14 / 11) < 1e-12, f"Z={z:.12f} mu={table.mu:.12f}"


def _oracle_edgeless_layer() -> Tuple[bool, str]:
    layer = enumerate_layer(empty_graph(4), 2)
    return len(layer) == 6 and not layer.truncated, f"|S_2|={len(layer)}"


def _oracle_collider() -> Tuple[bool, str]:
    g = empty_graph(3)
    sigma, tau = VertexSet.from_indices([0], 3), VertexSet.from_indices([1], 3)
    w = find_augmenting(g, sigma, tau)
    step = collider_step(g, sigma, tau, w)
    got = [s.to_list() for s in step]
    return got == [[0, 2], [2], [1, 2], [2]], f"step={got}"


def _oracle_tv() -> Tuple[bool, str]:
    value = tv_distance([0.5, 0.5], [1.0, 0.0])
    return value == 0.5, f"tv={value}"


def _oracle_two_state_mixing() -> Tuple[bool, str]:
    report = mixing_time_exact(empty_graph(1), 1.0, lazy=True)
    return report.T == 0 and report.converged, f"T={report.T}"


def _oracle_second_moment() -> Tuple[bool, str]:
    ratio = second_moment_terms(6, 4, 2).ratio.to_float()
    return abs(ratio - 1.05860) < 1e-4, f"ratio={ratio:.6f}"


ORACLES: Dict[str, Callable[[], Tuple[bool, str]]] = {
    "expected count G(4,2), k=2": _oracle_expected_count,
    "alpha of the 5-cycle": _oracle_cycle_alpha,
    "P3 stationary table at lambda=2": _oracle_path_stationary,
    "edgeless layer S_2 on 4 vertices": _oracle_edgeless_layer,
    "collider step on 3 isolated vertices": _oracle_collider,
    "total variation example": _oracle_tv,
    "lazy two-state mixing time": _oracle_two_state_mixing,
    "second-moment ratio (6,4,2)": _oracle_second_moment,
}


def selftest() -> List[Tuple[str, bool, str]]:
    """Run the embedded oracles; returns (name, passed, detail) per check."""
    results = []
    for name, check in ORACLES.items():
        try:
            ok, detail = check()
        except Exception as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        colour = Fore.GREEN if ok else Fore.RED
        logger.info(f"{colour}[{'ok' if ok else 'FAIL'}] {name}: {detail}{Style.RESET_ALL}")
        results.append((name, ok, detail))
    return results
