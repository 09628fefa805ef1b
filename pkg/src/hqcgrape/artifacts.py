"""On-disk formats: trace CSV, controls/state JSON, run summary JSON, budget CSV."""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .encoding import ControlGrid
from .optimizer import ErrorBudget, OptimizationTrace

TRACE_COLUMNS = ["iteration", "qfi", "qfi_std_over_repeats", "grad_norm", "lambda", "accepted", "cumulative_evolutions"]


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def trace_csv(trace: OptimizationTrace) -> str:
    """Render a trace; rejected trials carry an empty ``qfi_std_over_repeats``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for r in trace.records:
        std = r.qfi_std if r.accepted else None
        w.writerow([_fmt(v) for v in (r.iteration, r.qfi, std, r.grad_norm, r.lam, r.accepted, r.evolutions)])
    return buf.getvalue()


def read_trace_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def controls_to_json(u: ControlGrid, labels: list[str]) -> dict:
    return {
        "units": "rad/s",
        "T": u.T,
        "M": u.M,
        "labels": list(labels),
        "amplitudes": [[float(a) for a in row] for row in u.amplitudes],
    }


def controls_from_json(d: dict) -> ControlGrid:
    try:
        u = ControlGrid(np.array(d["amplitudes"], dtype=float), float(d["T"]))
    except KeyError as exc:
        raise ValueError(f"controls file lacks field {exc.args[0]!r}") from None
    if "M" in d and int(d["M"]) != u.M:
        raise ValueError("controls file: M does not match the amplitude array")
    return u


def state_to_json(rho) -> dict:
    rho = np.asarray(rho)
    return {
        "dim": int(rho.shape[0]),
        "entries": [[{"re": float(z.real), "im": float(z.imag)} for z in row] for row in rho],
    }


def state_from_json(d: dict) -> np.ndarray:
    return np.array([[e["re"] + 1j * e["im"] for e in row] for row in d["entries"]], dtype=complex)


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def summary_schema() -> dict:
    return json.loads(resources.files("hqcgrape").joinpath("schemas/summary.schema.json").read_text())


def validate_summary(summary: dict) -> None:
    import jsonschema

    jsonschema.validate(summary, summary_schema())


def budget_csv(budget: ErrorBudget, measured: dict[str, float] | None = None) -> str:
    """Bar data for the error-compensation plot.

    Rows are the isolated and accumulated contributions; for every measured
    final QFI given, its value and the value with the uncorrectable losses
    (initial state, decoherence) added back are appended.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "label", "qfi", "drop", "std"])
    for e in budget.isolated:
        w.writerow(["isolated", e.label, _fmt(e.qfi), _fmt(e.drop), _fmt(e.std)])
    for e in budget.cumulative:
        w.writerow(["cumulative", e.label, _fmt(e.qfi), _fmt(e.drop), _fmt(e.std)])
    for name, value in (measured or {}).items():
        w.writerow(["measured", name, _fmt(value), _fmt(budget.ideal - value), ""])
        comp = budget.compensate(value)
        w.writerow(["compensated", name, _fmt(comp), _fmt(budget.ideal - comp), ""])
    return buf.getvalue()
