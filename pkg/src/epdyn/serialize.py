"""File formats: trajectory/sweep CSV and JSON, table renderings.

CSV uses comma separators, '.' decimals, a header row, LF line endings, and
17 significant digits for reals, so identical inputs always serialize to
byte-identical files. JSON output is emitted with sorted keys for the same
reason.
"""

from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .analysis import SweepResult, Table1Result
from .loops import Direction, StaticDrive
from .model import SystemParams
from .propagation import IntegratorConfig, TrajectoryRecord

__all__ = [
    "TRAJECTORY_COLUMNS",
    "SWEEP_COLUMNS",
    "fmt",
    "params_to_dict",
    "loop_to_dict",
    "config_to_dict",
    "trajectory_to_csv",
    "trajectory_to_json",
    "sweep_to_csv",
    "sweep_to_json",
    "table_to_text",
    "table_to_json",
]

TRAJECTORY_COLUMNS = ("t", "re_c1", "im_c1", "re_c2", "im_c2", "norm_sq", "log_scale", "W1", "W2")
SWEEP_COLUMNS = (
    "i",
    "j",
    "T",
    "amp_scale",
    "rho",
    "ratio",
    "dominant",
    "survival",
    "pass_ratio",
    "pass_survival",
    "error",
)


def fmt(x: float) -> str:
    """17-significant-digit decimal representation (round-trip exact)."""
    return format(float(x), ".17g")


def params_to_dict(params: SystemParams) -> dict:
    d12 = complex(params.d12)
    return {
        "e1": params.e1,
        "e2": params.e2,
        "gamma1": params.gamma1,
        "gamma2": params.gamma2,
        "d12_re": d12.real,
        "d12_im": d12.imag,
    }


def loop_to_dict(loop) -> dict:
    if isinstance(loop, StaticDrive):
        return {
            "static_omega": loop.field.omega,
            "static_eps0": loop.field.eps0,
            "duration_T": loop.duration_T,
        }
    return {
        "center_omega": loop.center.omega,
        "center_eps0": loop.center.eps0,
        "semi_axis_omega": loop.semi_axis_omega,
        "semi_axis_eps": loop.semi_axis_eps,
        "direction": loop.direction.value,
        "duration_T": loop.duration_T,
        "start_phase": loop.start_phase,
    }


def config_to_dict(config: IntegratorConfig) -> dict:
    return {
        "rel_tol": config.rel_tol,
        "abs_tol": config.abs_tol,
        "max_step": config.max_step,
        "initial_step": config.initial_step,
    }


def _trajectory_rows(traj: TrajectoryRecord):
    pop1 = np.abs(traj.states[:, 0]) ** 2
    w1 = pop1 / traj.norms_sq
    for k in range(len(traj.times)):
        c1, c2 = traj.states[k]
        yield (
            traj.times[k],
            c1.real,
            c1.imag,
            c2.real,
            c2.imag,
            traj.norms_sq[k],
            traj.log_scale[k],
            w1[k],
            1.0 - w1[k],
        )


def trajectory_to_csv(traj: TrajectoryRecord) -> str:
    lines = [",".join(TRAJECTORY_COLUMNS)]
    for row in _trajectory_rows(traj):
        lines.append(",".join(fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def _meta_dict(traj: TrajectoryRecord) -> dict:
    meta = traj.meta
    out = {"method": meta.get("method", "")}
    if "params" in meta:
        out["system"] = params_to_dict(meta["params"])
    if "drive" in meta:
        out["loop"] = loop_to_dict(meta["drive"])
    if "config" in meta:
        out["integrator"] = config_to_dict(meta["config"])
    return out


def trajectory_to_json(traj: TrajectoryRecord) -> str:
    doc = {
        "meta": _meta_dict(traj),
        "columns": list(TRAJECTORY_COLUMNS),
        "rows": [[float(fmt(x)) for x in row] for row in _trajectory_rows(traj)],
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _sweep_row(cell) -> list[str]:
    def opt(x, f=fmt):
        return "" if x is None else f(x)

    return [
        str(cell.i),
        str(cell.j),
        fmt(cell.duration_T),
        fmt(cell.amp_scale),
        fmt(cell.rho),
        opt(cell.ratio),
        "" if cell.dominant_state is None else str(cell.dominant_state),
        opt(cell.survival),
        "" if cell.pass_ratio is None else str(cell.pass_ratio).lower(),
        "" if cell.pass_survival is None else str(cell.pass_survival).lower(),
        cell.error or "",
    ]


def sweep_row_csv(cell) -> str:
    """One CSV line for a finished cell (lets callers flush incrementally)."""
    return ",".join(_sweep_row(cell))


def sweep_header_csv() -> str:
    return ",".join(SWEEP_COLUMNS)


def sweep_to_csv(result: SweepResult) -> str:
    lines = [sweep_header_csv()]
    lines.extend(sweep_row_csv(c) for c in result.cells)
    return "\n".join(lines) + "\n"


def sweep_to_json(result: SweepResult) -> str:
    spec = result.spec
    doc = {
        "spec": {
            "template": loop_to_dict(spec.template),
            "durations": list(spec.durations),
            "amp_scales": list(spec.amp_scales),
            "direction": spec.direction.value,
            "ratio_min": spec.ratio_min,
            "survival_levels": list(spec.survival_levels),
            "dominant_target": spec.dominant_target,
        },
        "cells": [
            {
                "i": c.i,
                "j": c.j,
                "T": c.duration_T,
                "amp_scale": c.amp_scale,
                "rho": c.rho,
                "ratio": c.ratio,
                "dominant": c.dominant_state,
                "survival": c.survival,
                "pass_ratio": c.pass_ratio,
                "pass_survival": c.pass_survival,
                "error": c.error,
            }
            for c in result.cells
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def _state_name(index: Optional[int]) -> str:
    return "-" if index is None else f"state{index}"


def table_to_text(table: Table1Result) -> str:
    header = ("direction", "initial", "final (adiabatic)", "final (exact)")
    body = [
        (
            row.direction.value,
            _state_name(row.initial_state),
            _state_name(row.adiabatic_final),
            _state_name(row.exact_final),
        )
        for row in table.rows
    ]
    widths = [max(len(h), *(len(r[k]) for r in body)) for k, h in enumerate(header)]
    lines = [
        "  ".join(h.ljust(widths[k]) for k, h in enumerate(header)),
        "  ".join("-" * w for w in widths),
    ]
    lines.extend("  ".join(r[k].ljust(widths[k]) for k in range(4)) for r in body)
    return "\n".join(lines) + "\n"


def table_to_json(table: Table1Result) -> str:
    doc = {
        "swapped": table.swapped,
        "rows": [
            {
                "direction": row.direction.value,
                "initial": row.initial_state,
                "adiabatic_final": row.adiabatic_final,
                "exact_final": row.exact_final,
                "ratio": row.report.ratio,
                "survival": row.report.survival,
            }
            for row in table.rows
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def table_from_json(text: str) -> Table1Result:
    """Rebuild the table structure from its JSON rendering (round-trip aid)."""
    from .analysis import AsymmetryReport, Table1Row

    doc = json.loads(text)
    rows = []
    for r in doc["rows"]:
        report = AsymmetryReport(
            dominant_state=r["exact_final"],
            ratio=r["ratio"],
            survival=r["survival"],
            direction=Direction(r["direction"]),
            initial_label=f"state{r['initial']}",
        )
        rows.append(
            Table1Row(
                direction=Direction(r["direction"]),
                initial_state=r["initial"],
                adiabatic_final=r["adiabatic_final"],
                exact_final=r["exact_final"],
                report=report,
            )
        )
    return Table1Result(rows=tuple(rows), swapped=doc["swapped"])
