"""
Module for writing run and comparison artifacts.

Every CSV is UTF-8 with LF line endings and minimal RFC-4180 quoting; every
row of a run artifact starts with the config hash and the seed. Floats are
written with `repr`, so reading a file back gives the exact values.
Nothing time-dependent is written, which keeps artifacts byte-identical
across runs with the same configuration.
"""

import csv
import logging
import os
from datetime import datetime
from typing import Dict, Iterable, List, Optional, Sequence

from openpyxl import Workbook

from .config import config_to_ini
from .doe import Design
from .engine import ComparisonReport, RunState
from .problems import Problem
from .utils.constants import (
    COMPARISON_CURVE_COLUMNS,
    COMPARISON_CURVES_FILE,
    COMPARISON_SUMMARY_COLUMNS,
    COMPARISON_SUMMARY_FILE,
    COMPARISON_WORKBOOK_FILE,
    CONFIG_FILE,
    EVALUATIONS_FILE,
    FRONT_FILE_TEMPLATE,
    HV_TRAJECTORY_COLUMNS,
    HV_TRAJECTORY_FILE,
    PARETO_FRONT_FILE,
    PREDICTED_FRONT_FILE,
    PROVENANCE_COLUMNS,
    SUMMARY_FILE,
    VERIFICATION_FILE,
    WORKBOOK_TIMESTAMP,
)


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def _write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def display_columns(problem: Problem) -> List[str]:
    """Headers of the objectives in display units (maximization when the sign is -1)."""
    return [f"display_{name}" for name in problem.display_names]


def _display(problem: Problem, f1: float, f2: float) -> List[float]:
    sign_1, sign_2 = problem.display_sign
    return [float(sign_1 * f1), float(sign_2 * f2)]


def _x_columns(problem: Problem) -> List[str]:
    return list(problem.variable_names)


def write_run_artifacts(state: RunState, out_dir: str) -> Dict[str, str]:
    """
    Write every artifact of one run into `out_dir`.

    Args:
        state: A finished run
        out_dir: Target directory, created if missing

    Returns:
        Mapping of artifact kind to written path
    """
    os.makedirs(out_dir, exist_ok=True)
    problem = state.problem
    provenance = [state.config_hash, state.config.seed]
    x_columns = _x_columns(problem)
    shown = display_columns(problem)
    paths: Dict[str, str] = {}

    paths["config"] = os.path.join(out_dir, CONFIG_FILE)
    with open(paths["config"], "w", encoding="utf-8", newline="\n") as f:
        f.write(config_to_ini(state.config))

    paths["evaluations"] = os.path.join(out_dir, EVALUATIONS_FILE)
    _write_csv(
        paths["evaluations"],
        PROVENANCE_COLUMNS + ["index", "source", "iteration"] + x_columns
        + ["f1", "f2", "g", "feasible"] + shown,
        (
            provenance + [i, e.source, e.iteration] + list(e.point)
            + [e.f1, e.f2, e.g, e.feasible] + _display(problem, e.f1, e.f2)
            for i, e in enumerate(state.evaluations)
        ),
    )

    paths["pareto_front"] = os.path.join(out_dir, PARETO_FRONT_FILE)
    _write_csv(
        paths["pareto_front"],
        PROVENANCE_COLUMNS + ["position"] + x_columns + ["f1", "f2", "g"] + shown,
        (
            provenance + [i] + list(entry.point) + [*entry.objectives, entry.constraint]
            + _display(problem, *entry.objectives)
            for i, entry in enumerate(state.final_front.sorted_entries())
        ),
    )

    paths["hv_trajectory"] = os.path.join(out_dir, HV_TRAJECTORY_FILE)
    _write_csv(
        paths["hv_trajectory"],
        HV_TRAJECTORY_COLUMNS,
        (
            provenance + [int(p["iteration"]), int(p["evaluations"]), float(p["hypervolume"])]
            for p in state.hv_history
        ),
    )

    if state.config.workflow == "optim1":
        paths["verification"] = os.path.join(out_dir, VERIFICATION_FILE)
        _write_csv(
            paths["verification"],
            PROVENANCE_COLUMNS + ["index"] + x_columns
            + ["predicted_f1", "predicted_f2", "predicted_g"]
            + ["simulated_f1", "simulated_f2", "simulated_g"]
            + ["abs_error_f1", "abs_error_f2", "discrepancy"],
            (
                provenance + [i] + list(r.point)
                + [*r.predicted, r.predicted_constraint]
                + [r.evaluation.f1, r.evaluation.f2, r.evaluation.g]
                + [*r.absolute_errors, r.discrepancy]
                for i, r in enumerate(state.verification)
            ),
        )

        paths["predicted_front"] = os.path.join(out_dir, PREDICTED_FRONT_FILE)
        _write_csv(
            paths["predicted_front"],
            PROVENANCE_COLUMNS + ["position"] + x_columns
            + ["predicted_f1", "predicted_f2", "predicted_g"] + shown,
            (
                provenance + [i] + list(ind.x) + [*ind.objectives, ind.constraint]
                + _display(problem, *ind.objectives)
                for i, ind in enumerate(state.predicted_front)
            ),
        )

    paths["summary"] = os.path.join(out_dir, SUMMARY_FILE)
    with open(paths["summary"], "w", encoding="utf-8", newline="\n") as f:
        f.write("# Run Summary\n")
        for key, value in state.summary().items():
            f.write(f"# {key}: {_cell(value)}\n")

    logging.info(f"Export completed: {len(paths)} artifacts in {out_dir}")
    return paths


def write_design_csv(
    path: str, design: Design, names: Optional[Sequence[str]] = None
) -> str:
    """Write a DOE, one row per point; headers are variable names when given."""
    names = list(names) if names else [f"x{i + 1}" for i in range(design.dimension)]
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    _write_csv(path, names, (list(map(float, row)) for row in design.points))
    logging.info(f"Design written: {path} ({design.size} x {design.dimension})")
    return path


def _safe_label(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label)


def write_comparison(
    report: ComparisonReport, out_dir: str, problem: Problem
) -> Dict[str, str]:
    """
    Write a comparison: summary table, one front CSV per workflow, HV curves
    and a workbook holding the same tables.
    """
    os.makedirs(out_dir, exist_ok=True)
    shown = display_columns(problem)
    paths: Dict[str, str] = {}
    summary = report.table()

    paths["summary"] = os.path.join(out_dir, COMPARISON_SUMMARY_FILE)
    _write_csv(
        paths["summary"],
        COMPARISON_SUMMARY_COLUMNS,
        ([record[c] for c in COMPARISON_SUMMARY_COLUMNS] for record in summary),
    )

    front_header = ["label", "repetition", "seed", "f1", "f2"] + shown
    seeds = {(row.label, row.repetition): row.seed for row in report.rows}
    front_rows: Dict[str, List[list]] = {}
    for label in report.labels:
        rows = []
        for r in range(report.repetitions):
            for f1, f2 in report.fronts[(label, r)]:
                rows.append(
                    [label, r, seeds[(label, r)], float(f1), float(f2)]
                    + _display(problem, f1, f2)
                )
        front_rows[label] = rows
        path = os.path.join(out_dir, FRONT_FILE_TEMPLATE.format(label=_safe_label(label)))
        _write_csv(path, front_header, rows)
        paths[f"front_{label}"] = path

    curve_rows = [
        [label, r, seeds[(label, r)], iteration, float(value)]
        for (label, r), curve in sorted(report.curves.items())
        for iteration, value in enumerate(curve)
    ]
    paths["curves"] = os.path.join(out_dir, COMPARISON_CURVES_FILE)
    _write_csv(paths["curves"], COMPARISON_CURVE_COLUMNS, curve_rows)

    workbook = Workbook()
    sheet = workbook.active
    sheet.title = "Summary"
    sheet.append(COMPARISON_SUMMARY_COLUMNS)
    for record in summary:
        sheet.append([record[c] for c in COMPARISON_SUMMARY_COLUMNS])
    for label in report.labels:
        # Sheet titles are capped at 31 characters
        front_sheet = workbook.create_sheet(_safe_label(label)[:31])
        front_sheet.append(front_header)
        for row in front_rows[label]:
            front_sheet.append(row)
    workbook.properties.created = datetime(*WORKBOOK_TIMESTAMP)
    workbook.properties.modified = datetime(*WORKBOOK_TIMESTAMP)
    paths["workbook"] = os.path.join(out_dir, COMPARISON_WORKBOOK_FILE)
    workbook.save(paths["workbook"])

    logging.info(f"Comparison exported: {len(paths)} files in {out_dir}")
    return paths
