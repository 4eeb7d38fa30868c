import math
from typing import Any, Callable, Dict, List, Tuple

from colorama import Fore, Style

from analytic import expected_count_gnm, expected_count_star
from collider import PathCertificate, connect_path
from errors import InvalidParameter
from geometry import count_isolated, expand_via_pure, gamma_components, pure_subgraph
from graph_core import Graph, gen_gnm, gen_gnm_star, gen_gnp, gen_planted
from iset_core import count_layer, enumerate_layer, greedy_mis, max_is_exact, sample_greedy_subset
from logger import logger
from metropolis import escape_experiment, mixing_time_exact
from utils import derive_seed


def edges_for(params: Dict[str, Any]) -> int:
    """Edge count from ``m`` or from the average degree ``d`` (m = round(d n / 2))."""
    if "m" in params:
        return int(params["m"])
    if "d" in params:
        return int(round(float(params["d"]) * int(params["n"]) / 2))
    raise InvalidParameter("need either m or d")


def size_for(params: Dict[str, Any], n: int, m: int) -> int:
    """Set size from ``k`` or from ``k_factor`` times (ln d / d) n."""
    if "k" in params:
        return int(params["k"])
    if "k_factor" in params:
        d = 2 * m / n
        if d <= 1:
            raise InvalidParameter("k_factor needs average degree d > 1")
        return int(math.floor(float(params["k_factor"]) * math.log(d) / d * n))
    raise InvalidParameter("need either k or k_factor")


def build_graph(params: Dict[str, Any], seed: int) -> Tuple[Graph, Any]:
    """
    Generate the graph a cell describes. Returns (graph, planted set or None).

    ``params["model"]`` is one of gnm, gnm_star, gnp, planted; ``graph_seed``
    overrides the cell seed so that many cells can share one instance.
    """
    model = params.get("model", "gnm")
    n = int(params["n"])
    seed = int(params.get("graph_seed", seed))
    if model == "gnp":
        p = float(params["p"]) if "p" in params else float(params["d"]) / n
        return gen_gnp(n, p, seed), None
    m = edges_for(params)
    if model == "gnm":
        return gen_gnm(n, m, seed), None
    if model == "gnm_star":
        return gen_gnm_star(n, m, seed), None
    if model == "planted":
        return gen_planted(n, m, size_for(params, n, m), seed)
    raise InvalidParameter(f"unknown model {model!r}")


class Caller:
    """
    Routes operation names to handlers.

    Each handler turns a parameter dict and a cell seed into a JSON-ready
    metrics dict. Sweeps and the CLI both go through ``call``.
    """

    def __init__(self) -> None:
        self.handlers: Dict[str, Callable[[Dict[str, Any], int], Dict[str, Any]]] = {
            "gen": self.gen,
            "greedy": self.greedy,
            "exact": self.exact,
            "count_layer": self.count,
            "expected_count": self.expected_count,
            "cluster": self.cluster,
            "collider": self.collider,
            "expand": self.expand,
            "mixing": self.mixing,
            "escape": self.escape,
        }

    def operations(self) -> List[str]:
        return sorted(self.handlers)

    def call(self, operation: str, params: Dict[str, Any], seed: int) -> Dict[str, Any]:
        """
        Execute one operation.

        Raises:
            InvalidParameter: If the operation is unknown or its parameters are invalid
        """
        handler = self.handlers.get(operation)
        if handler is None:
            raise InvalidParameter(f"unknown operation {operation!r}; choose from {self.operations()}")
        logger.debug(f"{Fore.GREEN}Running operation: {operation} {params} seed={seed}{Style.RESET_ALL}")
        return handler(dict(params), seed)

    def gen(self, params, seed):
        graph, _ = build_graph(params, seed)
        return {"edges": graph.edge_count, "isolated": count_isolated(graph),
                "average_degree": graph.average_degree}

    def greedy(self, params, seed):
        graph, _ = build_graph(params, seed)
        size = greedy_mis(graph, seed).size
        d = graph.average_degree
        scale = graph.n * math.log(d) / d if d > 1 else None
        return {"size": size, "relative_size": size / scale if scale else None}

    def exact(self, params, seed):
        graph, _ = build_graph(params, seed)
        return {"alpha": max_is_exact(graph).size}

    def count(self, params, seed):
        graph, _ = build_graph(params, seed)
        return {"count": str(count_layer(graph, int(params["k"])))}

    def expected_count(self, params, seed):
        n, m, k = int(params["n"]), edges_for(params), int(params["k"])
        value = expected_count_star(n, m, k) if params.get("model") == "gnm_star" else expected_count_gnm(n, m, k)
        return {"sign": value.sign, "log_mag": value.log_mag}

    def cluster(self, params, seed):
        graph, _ = build_graph(params, seed)
        layer = enumerate_layer(graph, int(params["k"]), int(params.get("cap", 10**6)))
        report = gamma_components(layer, int(params["gamma"]))
        return {"total": report.total, "classes": report.class_count,
                "max_class_fraction": report.max_class_fraction,
                "min_interclass_distance": report.min_interclass_distance}

    def collider(self, params, seed):
        graph, _ = build_graph(params, seed)
        k = size_for(params, graph.n, max(graph.edge_count, 1))
        sigma = sample_greedy_subset(graph, k, derive_seed(seed, 1))
        tau = sample_greedy_subset(graph, k, derive_seed(seed, 2))
        if sigma is None or tau is None:
            return {"k": k, "outcome": "no_pair"}
        result = connect_path(graph, sigma, tau)
        if isinstance(result, PathCertificate):
            return {"k": k, "outcome": "connected", "rounds": result.rounds,
                    "path_length": len(result.steps), "max_step_distance": result.max_step_distance}
        return {"k": k, "outcome": result.reason, "rounds": result.rounds}

    def expand(self, params, seed):
        graph, sigma = build_graph({**params, "model": "planted"}, seed)
        sub, _ = pure_subgraph(graph, sigma)
        grown = expand_via_pure(graph, sigma, params.get("strategy", "min_degree"), seed)
        k = sigma.size
        return {"k": k, "pure_vertices": sub.n, "pure_edges": sub.edge_count,
                "expanded_size": grown.size, "gamma_achieved": grown.size / k - 1 if k else 0.0}

    def mixing(self, params, seed):
        graph, _ = build_graph(params, seed)
        report = mixing_time_exact(graph, float(params.get("lam", 1.0)), lazy=bool(params.get("lazy", False)))
        return {"states": len(report.states), "T": report.T, "converged": report.converged}

    def escape(self, params, seed):
        graph, sigma = build_graph({**params, "model": "planted"}, seed)
        floor = float(params.get("floor_factor", 0.5)) * sigma.size / graph.n
        step = escape_experiment(graph, sigma, float(params["lam"]), floor, int(params["steps"]), seed)
        return {"escape_step": step, "censored": step is None}
