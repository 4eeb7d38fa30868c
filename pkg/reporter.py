import csv
import json
import os
import sys
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Union

from constants import RESULTS_DIR
from iset_core import Layer
from logger import logger


def dumps(row: Dict) -> str:
    """Canonical one-line JSON (sorted keys) so equal records are equal bytes."""
    return json.dumps(row, sort_keys=True, separators=(",", ":"))


class Reporter:
    """
    Writes experiment outputs: JSONL streams, JSON documents, CSV tables and
    markdown sweep summaries.

    Args:
        results_dir: Directory for summaries and default outputs
    """

    def __init__(self, results_dir: str = RESULTS_DIR):
        self.results_dir = results_dir

    def _open(self, path: Union[str, Path]) -> TextIO:
        parent = os.path.dirname(str(path))
        if parent:
            os.makedirs(parent, exist_ok=True)
        return open(path, "w")

    def write_jsonl(self, path: Union[str, Path], rows: Iterable[Dict]) -> int:
        written = 0
        with self._open(path) as f:
            for row in rows:
                f.write(dumps(row) + "\n")
                written += 1
        logger.info(f"Wrote {written} lines to {path}")
        return written

    def emit_jsonl(self, rows: Iterable[Dict], stream: Optional[TextIO] = None) -> None:
        stream = stream or sys.stdout
        for row in rows:
            stream.write(dumps(row) + "\n")

    def write_json(self, path: Union[str, Path], payload: Dict) -> None:
        with self._open(path) as f:
            json.dump(payload, f, indent=2, sort_keys=True)
        logger.info(f"Wrote {path}")

    @staticmethod
    def layer_rows(layer: Layer) -> Iterable[Dict]:
        for member in layer.members:
            yield {"k": layer.k, "set": member.to_list()}

    @staticmethod
    def count_row(k: int, count: int) -> Dict:
        # counts can exceed 64 bits
        return {"k": k, "count": str(count)}

    def write_csv(self, header: Sequence[str], rows: Iterable[Sequence], stream: Optional[TextIO] = None) -> None:
        writer = csv.writer(stream or sys.stdout, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)

    def write_summary(self, name: str, by: Sequence[str], metric: str, rows: List[Dict],
                      trend: Optional[bool] = None) -> str:
        """Markdown table of per-group medians at ``results/{name}_summary.md``."""
        os.makedirs(self.results_dir, exist_ok=True)
        path = os.path.join(self.results_dir, f"{name}_summary.md")
        lines = [f"# {name}", "", f"Median `{metric}` per group.", ""]
        lines.append("| " + " | ".join(list(by) + ["median", "cells", "errors"]) + " |")
        lines.append("|" + "---|" * (len(by) + 3))
        for row in rows:
            cells = [str(row[key]) for key in by] + [str(row["median"]), str(row["count"]), str(row["errors"])]
            lines.append("| " + " | ".join(cells) + " |")
        if trend is not None:
            lines += ["", f"Medians nondecreasing: **{'yes' if trend else 'no'}**"]
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
        logger.info(f"Wrote summary {path}")
        return path
