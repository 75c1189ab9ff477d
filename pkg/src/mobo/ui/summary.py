"""
Rich renderables summarizing runs, comparisons and designs.
"""

from typing import Dict, Optional

from rich.console import Group
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from ..doe import Design
from ..engine import ComparisonReport, RunState
from ..utils.constants import ICONS


def _format(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple)):
        return "(" + ", ".join(_format(v) for v in value) + ")"
    return str(value)


def _stats_table(record: Dict[str, object]) -> Table:
    table = Table(show_header=False, show_edge=False, padding=(0, 1), box=None, expand=True)
    for key, value in record.items():
        table.add_row(Text(key.replace("_", " ") + ":", style="dim"), Text(_format(value), style="cyan bold"))
    return table


def run_panel(state: RunState, paths: Optional[Dict[str, str]] = None) -> Group:
    """Statistics of a finished run, its front and, when given, the written files."""
    problem = state.problem
    sign_1, sign_2 = problem.display_sign
    name_1, name_2 = problem.display_names

    front_table = Table(show_edge=False, padding=(0, 1), box=None, expand=True)
    front_table.add_column(name_1, style="cyan")
    front_table.add_column(name_2, style="cyan")
    front_table.add_column("g", style="dim")
    for entry in state.final_front.sorted_entries():
        f1, f2 = entry.objectives
        front_table.add_row(f"{sign_1 * f1:.6g}", f"{sign_2 * f2:.6g}", f"{entry.constraint:.4g}")

    panels = [
        Panel(
            _stats_table(state.summary()),
            title=f"[bold white]{ICONS['run']} {state.config.workflow} on {problem.name}[/]",
            title_align="left",
            padding=(0, 1),
        ),
        Panel(
            front_table if len(state.final_front) else Text("No feasible design found", style="dim"),
            title=f"[bold white]{ICONS['front']} Pareto Front[/]",
            title_align="left",
            padding=(0, 1),
        ),
    ]
    ratio = state.extrapolation_ratio
    if ratio is not None and ratio >= 2.0:
        panels.append(
            Panel(
                f"[yellow]{ICONS['warning']} Verified front error is {ratio:.1f}x the "
                f"leave-one-out error of the surrogates[/]",
                title="Extrapolation Gap",
                title_align="left",
                padding=(0, 1),
            )
        )
    if paths:
        panels.append(_paths_panel(paths))
    return Group(*panels)


def _paths_panel(paths: Dict[str, str]) -> Panel:
    table = Table(show_header=False, show_edge=False, padding=(0, 0), box=None, expand=True)
    for kind, path in paths.items():
        table.add_row(Text("•", style="dim"), Text(" " + kind, style="cyan"), Text(path, style="dim"))
    return Panel(
        table,
        title=f"[bold white]{ICONS['export']} Artifacts[/]",
        title_align="left",
        padding=(0, 1),
    )


def comparison_panel(report: ComparisonReport, paths: Optional[Dict[str, str]] = None) -> Group:
    table = Table(show_edge=False, padding=(0, 1), box=None, expand=True)
    for column in ("workflow", "runs", "median HV", "mean HV", "min HV", "max HV", "wins"):
        table.add_column(column, style="cyan" if column != "workflow" else "bold")
    for record in report.table():
        table.add_row(
            record["label"],
            str(record["runs"]),
            f"{record['median_hv']:.6g}",
            f"{record['mean_hv']:.6g}",
            f"{record['min_hv']:.6g}",
            f"{record['max_hv']:.6g}",
            str(record["wins"]),
        )
    panels = [
        Panel(
            table,
            title=f"[bold white]{ICONS['stats']} Comparison over {report.repetitions} repetitions[/]",
            title_align="left",
            padding=(0, 1),
        )
    ]
    if paths:
        panels.append(_paths_panel(paths))
    return Group(*panels)


def design_panel(design: Design, path: str) -> Panel:
    return Panel(
        _stats_table(
            {
                "points": design.size,
                "dimension": design.dimension,
                "seed": design.seed,
                "maximin_distance": design.maximin_distance,
                "output": path,
            }
        ),
        title="[bold white]LHS Maximin Design[/]",
        title_align="left",
        padding=(0, 1),
    )
