import math
from typing import Dict, List, Sequence

import numpy as np


class Summarizer:
    """
    Condenses sweep records into one row per parameter group.

    Records with ``status != "ok"`` count as errors and are left out of the
    median. A missing metric value (for example an escape that never happened)
    counts as +inf when ``censored_as_inf`` is set.

    Args:
        metric: Name of the metric to aggregate
        censored_as_inf: Treat None values as +inf instead of dropping them
    """

    def __init__(self, metric: str, censored_as_inf: bool = True) -> None:
        self.metric = metric
        self.censored_as_inf = censored_as_inf

    def summarize(self, records: Sequence[Dict], by: Sequence[str]) -> List[Dict]:
        """
        Args:
            records: Record dicts with ``params``, ``metrics`` and ``status``
            by: Parameter names to group on

        Returns:
            List[Dict]: Groups in order of first appearance with median, count and errors
        """
        groups: Dict[tuple, Dict] = {}
        for record in records:
            key = tuple(record["params"].get(name) for name in by)
            group = groups.setdefault(key, {"values": [], "errors": 0})
            if record.get("status") != "ok":
                group["errors"] += 1
                continue
            value = record["metrics"].get(self.metric)
            if value is None:
                if not self.censored_as_inf:
                    continue
                value = math.inf
            group["values"].append(float(value))
        rows = []
        for key, group in groups.items():
            values = group["values"]
            row = dict(zip(by, key))
            row["median"] = float(np.median(values)) if values else None
            row["count"] = len(values)
            row["errors"] = group["errors"]
            rows.append(row)
        return rows

    @staticmethod
    def is_nondecreasing(values: Sequence[float]) -> bool:
        clean = [v for v in values if v is not None]
        return all(a <= b for a, b in zip(clean, clean[1:]))
