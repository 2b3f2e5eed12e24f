"""Output writers: CSV tables, two-column plot data, JSON manifests,
rendered figures and the discrepancy ledger.

Numbers are written with 12 significant digits, in scientific notation
when ``|v| < 1e-4`` or ``|v| > 1e6`` and positional otherwise, so output is
byte-identical for identical inputs. Figures are rendered with the Agg
backend; matplotlib is imported only when a figure is requested.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

__all__ = [
    "Check",
    "Finding",
    "format_number",
    "write_csv",
    "write_plot_data",
    "write_manifest",
    "render_figure",
    "emit_discrepancy_ledger",
    "versions",
]


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: str

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": _jsonable(self.value), "threshold": self.threshold}


@dataclass
class Finding:
    """One formula tested against the numerics, for the discrepancy ledger."""

    formula: str
    anchor: str
    verdict: str
    numbers: dict[str, float] = field(default_factory=dict)

    def to_dict(self):
        return {"formula": self.formula, "anchor": self.anchor, "verdict": self.verdict,
                "numbers": {k: _jsonable(v) for k, v in self.numbers.items()}}


def format_number(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == 0:
        return "0"
    a = abs(v)
    if a < 1e-4 or a > 1e6:
        return f"{v:.11e}"
    return f"{v:.12g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def write_plot_data(path: Path, x, y, labels=("x", "y")) -> Path:
    lines = [f"# {labels[0]} {labels[1]}"]
    lines += [f"{format_number(a)} {format_number(b)}" for a, b in zip(np.asarray(x), np.asarray(y))]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def versions() -> dict[str, str]:
    import scipy

    from . import __version__

    out = {"bsflow": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}
    return out


def write_manifest(path: Path, payload: dict[str, Any]) -> Path:
    body = _jsonable(payload)
    body["versions"] = versions()
    body["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def render_figure(path: Path, series, title: str, xlabel: str, ylabel: str, logy: bool = False) -> Path:
    """Draw ``series`` (``[(label, x, y), ...]``) into a PNG at ``path``."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, x, y, *style in series:
        ax.plot(x, y, *(style or ["-"]), label=label, lw=1.4)
    if logy:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(alpha=0.3)
    if len(series) > 1:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def emit_discrepancy_ledger(findings: Sequence[Finding]) -> str:
    """Plain-text table of formulas tested, their verdicts and key numbers."""
    lines = [
        "DISCREPANCY LEDGER",
        "formula | anchor | verdict | numbers",
        "--------+--------+---------+--------",
    ]
    for f in findings:
        nums = ", ".join(f"{k}={format_number(v)}" for k, v in f.numbers.items())
        lines.append(f"{f.formula} | {f.anchor} | {f.verdict} | {nums}")
    return "\n".join(lines) + "\n"
