"""Report writers: JSON-lines traces, CSV aggregates, and figures.

Simulation results flow out in two machine-readable forms that diff
cleanly: one JSON document per execution and one CSV aggregate with a row
per execution (columns ``schedule-id``, ``distinct-decisions``, ``valid``,
``agreed``).  When an output directory is given, the same report is written
there as files with a small set of matplotlib figures next to them.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable

from .objects import value_to_json
from .simulator import Execution, ProtocolSpec

AGGREGATE_COLUMNS = ("schedule-id", "distinct-decisions", "valid", "agreed")


def trace_document(protocol: ProtocolSpec, execution: Execution) -> dict:
    """One JSON document describing a single execution."""
    return {
        "protocol": protocol.name,
        "k": protocol.k,
        "inputs": [value_to_json(protocol.inputs[pid]) for pid in protocol.pids],
        "schedule": [pid for pid, _ in execution.schedule],
        "events": [event.to_json() for event in execution.events],
        "decisions": {
            str(pid): value_to_json(value)
            for pid, value in execution.decisions.items()
        },
        "crashed": [str(pid) for pid in execution.crashed],
        "violations": list(execution.violations),
    }


def aggregate_row(
    schedule_id, decisions: dict, valid: bool, agreed: bool
) -> dict:
    return {
        "schedule-id": schedule_id,
        "distinct-decisions": len(set(decisions.values())),
        "valid": int(valid),
        "agreed": int(agreed),
    }


def write_aggregate_csv(rows: Iterable[dict], stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=AGGREGATE_COLUMNS)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)


def aggregate_csv_text(rows: Iterable[dict]) -> str:
    buffer = io.StringIO()
    write_aggregate_csv(rows, buffer)
    return buffer.getvalue()


def write_json_lines(documents: Iterable[dict], stream) -> None:
    for doc in documents:
        stream.write(json.dumps(doc, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_decision_histogram(rows: list[dict], path: Path, title: str) -> Path:
    """Bar chart of how many executions produced each distinct-decision count."""
    plt = _pyplot()
    counts: dict[int, int] = {}
    for row in rows:
        counts[row["distinct-decisions"]] = counts.get(row["distinct-decisions"], 0) + 1
    fig, ax = plt.subplots(figsize=(5, 3.2))
    keys = sorted(counts)
    ax.bar([str(k) for k in keys], [counts[k] for k in keys], color="#3a6ea5")
    ax.set_xlabel("distinct decisions")
    ax.set_ylabel("executions")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def render_outcome_bars(
    labels_counts: dict[str, int], path: Path, title: str, color: str = "#3a6ea5"
) -> Path:
    """Generic labeled bar chart (valence tags, verdicts, accept/reject)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    labels = sorted(labels_counts)
    ax.bar(labels, [labels_counts[label] for label in labels], color=color)
    ax.set_ylabel("count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def write_report_directory(
    out_dir: Path,
    aggregate_rows: list[dict],
    trace_docs: Iterable[dict] | None = None,
    figure_title: str = "distinct decisions per execution",
) -> list[Path]:
    """Write aggregate.csv (+traces.jsonl) and render figures next to them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    csv_path = out_dir / "aggregate.csv"
    with csv_path.open("w", newline="") as stream:
        write_aggregate_csv(aggregate_rows, stream)
    written.append(csv_path)
    if trace_docs is not None:
        trace_path = out_dir / "traces.jsonl"
        with trace_path.open("w") as stream:
            write_json_lines(trace_docs, stream)
        written.append(trace_path)
    if aggregate_rows:
        written.append(
            render_decision_histogram(
                aggregate_rows, out_dir / "distinct_decisions.png", figure_title
            )
        )
    return written
