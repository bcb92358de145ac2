"""Presentation layer: aligned query blocks, a JSONL sidecar, figure files.

Values are rounded to four decimal places for human output only; sidecar
records keep full precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .oracle import McResult


@dataclass(frozen=True)
class QueryRecord:
    """One rendered result row, optionally carrying its MC cross-check."""

    query: str
    value: float
    mc: McResult | None = None

    @property
    def mc_pass(self) -> bool | None:
        if self.mc is None:
            return None
        return self.mc.agrees_with(self.value)


def render_posteriors(records: Sequence[QueryRecord]) -> str:
    """One aligned text block: query label, value, optional mc column."""
    if not records:
        return ""
    width = max(len(r.query) for r in records)
    lines = []
    for r in records:
        line = f"{r.query:<{width}}  {r.value:.4f}"
        if r.mc is not None:
            if r.mc.estimate is None:
                line += f"  mc=no-acceptance({r.mc.total} samples)  FAIL"
            else:
                verdict = "pass" if r.mc_pass else "FAIL"
                line += f"  mc={r.mc.estimate:.4f}±{r.mc.stderr:.4f}  {verdict}"
        lines.append(line)
    return "\n".join(lines)


def sidecar_record(record: QueryRecord) -> dict:
    doc: dict = {"query": record.query, "value": record.value}
    if record.mc is not None:
        doc["mc_value"] = record.mc.estimate
        doc["mc_stderr"] = record.mc.stderr
        doc["pass"] = record.mc_pass
    return doc


def write_sidecar(path: str | Path, records: Sequence[QueryRecord]) -> None:
    """One JSON record per line; an empty record list yields an empty file."""
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(sidecar_record(record)) + "\n")


def render_figures(
    outdir: str | Path,
    trajectories: Mapping[str, Sequence[float]] | None = None,
    next_dist: Mapping[str | None, float] | None = None,
) -> list[Path]:
    """Render report figures to ``outdir``; returns the files written.

    ``trajectories`` maps a task name to its posterior after each event (index
    0 is the prior); ``next_dist`` is a next-event distribution.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if trajectories:
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        for task in sorted(trajectories):
            series = trajectories[task]
            ax.plot(range(len(series)), series, marker="o", label=task)
        ax.set_xlabel("observed events")
        ax.set_ylabel("posterior probability of intent")
        ax.set_ylim(-0.05, 1.05)
        ax.legend(loc="best", fontsize=8)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        target = outdir / "posterior_trajectory.png"
        fig.savefig(target, dpi=120)
        plt.close(fig)
        written.append(target)

    if next_dist:
        labels = sorted((k for k in next_dist if k is not None))
        labels.append(None)
        values = [next_dist.get(k, 0.0) for k in labels]
        names = [k if k is not None else "none" for k in labels]
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        ax.bar(range(len(names)), values)
        ax.set_xticks(range(len(names)))
        ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel("probability of next event")
        fig.tight_layout()
        target = outdir / "next_distribution.png"
        fig.savefig(target, dpi=120)
        plt.close(fig)
        written.append(target)

    return written
