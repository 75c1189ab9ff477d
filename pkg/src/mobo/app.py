"""
mobo - command-line front end for constrained multi-objective Bayesian optimization.

Subcommands:
    run      execute one workflow and write its artifacts
    compare  run several workflows under one budget and compare their fronts
    doe      write a maximin Latin Hypercube design
"""

import argparse
import logging
import os
import sys
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

from rich.console import Console

from .config import ExperimentConfig, load_config, output_root, run_name
from .doe import lhs_maximin
from .engine import (
    CHECKPOINT_FILE_NAME,
    build_problem,
    compare_workflows,
    resume_bo,
    run_workflow,
)
from .errors import ConfigError, InputError, MoboError, RunAborted
from .exporter import write_comparison, write_design_csv, write_run_artifacts
from .problems import get_problem
from .ui.summary import comparison_panel, design_panel, run_panel
from .utils.constants import COMPARISON_DIR_TEMPLATE
from .utils.logging import setup_logging

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", help="INI configuration file")
    parser.add_argument("--problem", help="built-in problem: bnh, srn, synrel-toy")
    parser.add_argument("--external-cmd", help="external simulator command (JSON lines)")
    parser.add_argument("--external-dim", type=int, help="dimension of the external problem")
    parser.add_argument("--doe", type=int, help="initial design size")
    parser.add_argument("--iters", type=int, help="BO iterations")
    parser.add_argument("--q", type=int, help="batch size per iteration")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--mc-samples", type=int, help="Monte-Carlo samples per criterion")
    parser.add_argument("--restarts", type=int, help="restarts of the infill maximization")
    parser.add_argument("--workers", type=int, help="concurrent evaluations")
    parser.add_argument("--out", help="output root (default: $MOBO_OUT_DIR or ./mobo_runs)")
    parser.add_argument("--log-level", default="INFO", help="logging level")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mobo",
        description="Constrained multi-objective Bayesian optimization experiments",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one workflow")
    _add_experiment_flags(run)
    run.add_argument("--workflow", choices=["optim1", "optim2", "optim3"], help="workflow")
    run.add_argument("--resume", metavar="CHECKPOINT", help="continue an aborted BO run")

    compare = commands.add_parser("compare", help="compare workflows under one budget")
    _add_experiment_flags(compare)
    compare.add_argument(
        "--workflows",
        default="optim1,optim2,optim3",
        help="comma-separated workflows to compare",
    )
    compare.add_argument("--repetitions", type=int, default=1, help="repetitions (seeds)")

    doe = commands.add_parser("doe", help="write a maximin LHS design")
    doe.add_argument("--n", type=int, required=True, help="number of points")
    doe.add_argument("--d", type=int, help="dimension (defaults to the problem's)")
    doe.add_argument("--problem", help="name the columns after this problem's variables")
    doe.add_argument("--seed", type=int, default=0, help="seed")
    doe.add_argument("--proposals", type=int, help="swap proposals (default: 10000 x dimension)")
    doe.add_argument("--out", required=True, help="output CSV path")
    doe.add_argument("--log-level", default="INFO", help="logging level")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    return {
        "problem": args.problem,
        "workflow": getattr(args, "workflow", None),
        "initial_doe_size": args.doe,
        "iterations": args.iters,
        "batch_size": args.q,
        "seed": args.seed,
        "workers": args.workers,
        "external.command": args.external_cmd,
        "external.dimension": args.external_dim,
        "acquisition.mc_samples": args.mc_samples,
        "acquisition.restarts": args.restarts,
    }


def _log_level(name: str) -> int:
    level = logging.getLevelName(name.upper())
    if not isinstance(level, int):
        raise ConfigError(f"unknown log level '{name}'")
    return level


def cmd_run(args: argparse.Namespace, console: Console) -> int:
    root = args.out or output_root()
    setup_logging(root, _log_level(args.log_level))
    if args.resume:
        state = resume_bo(args.resume)
    else:
        config = load_config(args.config, _overrides(args))
        out_dir = os.path.join(root, run_name(config))
        state = run_workflow(config, checkpoint_path=os.path.join(out_dir, CHECKPOINT_FILE_NAME))
    out_dir = os.path.join(root, run_name(state.config))
    paths = write_run_artifacts(state, out_dir)
    console.print(run_panel(state, paths))
    return EXIT_OK


def workflow_configs(base: ExperimentConfig, workflows: Sequence[str]) -> List[ExperimentConfig]:
    """
    One configuration per workflow sharing the BO budget doe + iterations * q;
    optim1 spends the whole budget on its initial design.
    """
    budget = base.initial_doe_size + base.iterations * base.batch_size
    configs = []
    for workflow in workflows:
        if workflow == "optim1":
            config = replace(base, workflow=workflow, initial_doe_size=budget, total_budget=0)
        else:
            config = replace(base, workflow=workflow, total_budget=0)
        configs.append(config.validate())
    return configs


def cmd_compare(args: argparse.Namespace, console: Console) -> int:
    if args.repetitions < 1:
        raise ConfigError(f"--repetitions must be >= 1, got {args.repetitions}")
    root = args.out or output_root()
    setup_logging(root, _log_level(args.log_level))
    base = load_config(args.config, _overrides(args))
    workflows = [w.strip() for w in args.workflows.split(",") if w.strip()]
    configs = workflow_configs(base, workflows)

    report = compare_workflows(configs, args.repetitions)
    out_dir = os.path.join(
        root, COMPARISON_DIR_TEMPLATE.format(problem=base.problem_label, seed=base.seed)
    )
    paths = write_comparison(report, out_dir, build_problem(base))
    console.print(comparison_panel(report, paths))
    return EXIT_OK


def cmd_doe(args: argparse.Namespace, console: Console) -> int:
    setup_logging(os.path.dirname(os.path.abspath(args.out)), _log_level(args.log_level))
    names = None
    dimension = args.d
    if args.problem:
        problem = get_problem(args.problem)
        names = problem.variable_names
        if dimension is not None and dimension != problem.dimension:
            raise InputError(f"--d {dimension} does not match {problem.name} ({problem.dimension})")
        dimension = problem.dimension
    if dimension is None:
        raise InputError("doe needs --d or --problem")
    design = lhs_maximin(args.n, dimension, args.seed, iterations=args.proposals)
    path = write_design_csv(args.out, design, names)
    console.print(design_panel(design, path))
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point for the mobo command."""
    args = build_parser().parse_args(argv)
    console = Console()
    handlers = {"run": cmd_run, "compare": cmd_compare, "doe": cmd_doe}
    try:
        return handlers[args.command](args, console)
    except InputError as e:
        logging.error(f"Invalid configuration: {e}")
        console.print(f"[red]❌ {e}[/]")
        return EXIT_CONFIG
    except RunAborted as e:
        logging.error(str(e))
        console.print(f"[red]❌ {e}[/]")
        return EXIT_RUNTIME
    except MoboError as e:
        logging.error(f"Run failed: {e}")
        console.print(f"[red]❌ Run failed: {e}[/]")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
