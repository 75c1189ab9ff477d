"""
Workflow orchestration: the two batch Bayesian-optimization loops (qParEGO,
qEHVI), the fixed-surrogate NSGA-II workflow with a-posteriori verification,
checkpoint/resume, and equal-budget comparisons.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .acquisition import AcquisitionContext, BatchSelection, qehvi_select, qparego_select
from .config import (
    ExperimentConfig,
    config_from_ini,
    config_hash,
    config_to_ini,
    output_root,
    run_name,
)
from .doe import lhs_maximin
from .errors import ConfigError, EvaluationError, InputError, NumericalError, RunAborted
from .gp import ModelSet, fit_model_set, leave_one_out, training_targets_original
from .moea import (
    Individual,
    Population,
    VariationSettings,
    VerificationRecord,
    nsga2_run,
    select_for_verification,
    verify_front,
)
from .pareto import ParetoArchive, compromise_index, hypervolume_2d, reference_point_from
from .problems import Evaluation, Problem, external_adapter, get_problem

logger = logging.getLogger(__name__)

STREAM_NAMES = ("doe", "acquisition", "fantasies", "moea")
CHECKPOINT_FORMAT = "mobo-checkpoint"
CHECKPOINT_VERSION = 1
CHECKPOINT_FILE_NAME = "checkpoint.json"

__all__ = [
    "ExperimentConfig",
    "RunState",
    "ComparisonReport",
    "build_problem",
    "initialize_run",
    "run_bo",
    "resume_bo",
    "run_fixed_surrogate",
    "run_workflow",
    "compare_workflows",
    "save_checkpoint",
    "load_checkpoint",
]


@dataclass
class RunState:
    """Everything a run has produced so far; the BO part is checkpointable."""

    config: ExperimentConfig
    problem: Problem
    evaluations: List[Evaluation]
    archive: ParetoArchive
    streams: Dict[str, np.random.Generator]
    iteration: int = 0
    models: Optional[ModelSet] = None
    hv_history: List[Dict[str, float]] = field(default_factory=list)
    selections: List[Dict[str, Any]] = field(default_factory=list)
    population: Optional[Population] = None
    predicted_front: List[Individual] = field(default_factory=list)
    verification: List[VerificationRecord] = field(default_factory=list)
    verified_archive: Optional[ParetoArchive] = None
    loo_error: Optional[float] = None
    checkpoint_path: Optional[str] = None

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    @property
    def budget_used(self) -> int:
        """True evaluations spent by the workflow itself (verification excluded)."""
        return len(self.evaluations)

    @property
    def reference_point(self) -> np.ndarray:
        return self.archive.reference_point

    @property
    def final_front(self) -> ParetoArchive:
        """The archive a comparison scores: the verified front for optim1."""
        if self.config.workflow == "optim1":
            return self.verified_archive or ParetoArchive(self.reference_point)
        return self.archive

    @property
    def verification_error(self) -> Optional[float]:
        """Mean absolute predicted-vs-true objective error over the verified designs."""
        if not self.verification:
            return None
        return float(np.mean([r.absolute_errors for r in self.verification]))

    @property
    def extrapolation_ratio(self) -> Optional[float]:
        if self.verification_error is None or not self.loo_error:
            return None
        return self.verification_error / self.loo_error

    def arrays(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        x = np.array([e.point for e in self.evaluations])
        objectives = np.array([e.objectives for e in self.evaluations])
        constraints = np.array([e.g for e in self.evaluations])
        return x, objectives, constraints

    def summary(self) -> Dict[str, Any]:
        feasible = sum(1 for e in self.evaluations if e.feasible)
        record: Dict[str, Any] = {
            "problem": self.config.problem_label,
            "workflow": self.config.workflow,
            "seed": self.config.seed,
            "config_hash": self.config_hash,
            "evaluations": self.budget_used,
            "feasible_evaluations": feasible,
            "iterations": self.iteration,
            "reference_point": [float(v) for v in self.reference_point],
            "archive_size": len(self.archive),
            "archive_hypervolume": self.archive.hypervolume,
        }
        if self.config.workflow == "optim1":
            record.update(
                {
                    "predicted_front_size": len(self.predicted_front),
                    "verification_evaluations": len(self.verification),
                    "verified_front_size": len(self.final_front),
                    "verified_hypervolume": self.final_front.hypervolume,
                    "loo_error": self.loo_error,
                    "verification_error": self.verification_error,
                    "extrapolation_ratio": self.extrapolation_ratio,
                }
            )
        front = self.final_front.sorted_entries()
        if front:
            chosen = front[compromise_index([e.objectives for e in front])]
            record["compromise_objectives"] = [float(v) for v in chosen.objectives]
        return record


def build_problem(config: ExperimentConfig) -> Problem:
    if config.external.command:
        return external_adapter(
            config.external.command,
            timeout=config.external.timeout,
            dimension=config.external.dimension,
        )
    return get_problem(config.problem)


def _spawn_streams(seed: int) -> Dict[str, np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(child) for name, child in zip(STREAM_NAMES, children)}


def _draw_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(2**63))


def evaluate_batch(
    problem: Problem, points: np.ndarray, source: str, workers: int = 1
) -> List[Evaluation]:
    """Evaluate several designs, concurrently when `workers` > 1; order is preserved."""
    points = [np.asarray(p, dtype=float) for p in points]
    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(points))) as executor:
            return list(executor.map(lambda p: problem.evaluate(p, source=source), points))
    return [problem.evaluate(p, source=source) for p in points]


def _default_checkpoint_path(config: ExperimentConfig) -> str:
    return os.path.join(output_root(), run_name(config), CHECKPOINT_FILE_NAME)


def _record_hypervolume(state: RunState) -> None:
    state.hv_history.append(
        {
            "iteration": state.iteration,
            "evaluations": state.budget_used,
            "hypervolume": state.archive.hypervolume,
        }
    )


def initialize_run(
    config: ExperimentConfig,
    problem: Optional[Problem] = None,
    checkpoint_path: Optional[str] = None,
) -> RunState:
    """Draw the maximin LHS design, evaluate it and freeze the reference point."""
    config.validate()
    problem = problem or build_problem(config)
    streams = _spawn_streams(config.seed)
    design = lhs_maximin(
        config.initial_doe_size,
        problem.dimension,
        _draw_seed(streams["doe"]),
        iterations=config.doe.proposals_per_dimension * problem.dimension,
    )
    logger.info(
        f"Initial design: {design.size} points in {design.dimension} dimensions, "
        f"maximin distance {design.maximin_distance:.6g}"
    )
    try:
        evaluations = evaluate_batch(problem, design.points, "doe", config.workers)
    except EvaluationError as e:
        raise RunAborted(f"initial design evaluation failed: {e}")

    objectives = np.array([e.objectives for e in evaluations])
    feasible = np.array([e.feasible for e in evaluations])
    if not feasible.any():
        logger.warning("No feasible point in the initial design; reference uses all points")
    reference = reference_point_from(objectives, feasible, config.reference.margin)
    archive = ParetoArchive(reference)
    for e in evaluations:
        archive.add(e.point, e.objectives, e.g)

    state = RunState(
        config=config,
        problem=problem,
        evaluations=evaluations,
        archive=archive,
        streams=streams,
        checkpoint_path=checkpoint_path or _default_checkpoint_path(config),
    )
    _record_hypervolume(state)
    logger.info(
        f"Initial design evaluated: {int(feasible.sum())}/{len(evaluations)} feasible, "
        f"reference point {np.round(reference, 6).tolist()}, archive HV {archive.hypervolume:.6g}"
    )
    return state


def _fit(state: RunState) -> ModelSet:
    config = state.config
    x, objectives, constraints = state.arrays()
    return fit_model_set(
        x,
        objectives,
        constraints,
        kernel_families=config.gp.kernels,
        noise_variance=config.gp.noise_variance,
        restarts=config.gp.fit_restarts,
        seed=config.seed,
        max_evaluations=config.gp.fit_max_evaluations or None,
        workers=min(config.workers, 3),
        options=config.gp.fit_options(),
    )


def _acquisition_context(state: RunState, models: ModelSet) -> AcquisitionContext:
    settings = state.config.acquisition
    _, objectives, constraints = state.arrays()
    return AcquisitionContext.from_observations(
        models,
        objectives,
        constraints,
        state.reference_point,
        state.archive.objectives(),
        temperature_scale=settings.tau_scale,
        mc_sample_count=settings.mc_samples,
        final_mc_sample_count=settings.final_mc_samples,
        restarts=settings.restarts,
        raw_samples=settings.raw_samples,
        alpha=settings.alpha,
    )


def _select(state: RunState, context: AcquisitionContext) -> BatchSelection:
    selector = qparego_select if state.config.workflow == "optim2" else qehvi_select
    return selector(
        context,
        state.config.batch_size,
        seed=_draw_seed(state.streams["acquisition"]),
        fantasy_seed=_draw_seed(state.streams["fantasies"]),
    )


def _stream_states(state: RunState) -> Dict[str, Any]:
    return {name: rng.bit_generator.state for name, rng in state.streams.items()}


def _abort(state: RunState, stream_states: Dict[str, Any], reason: str) -> RunAborted:
    path = save_checkpoint(state, stream_states=stream_states)
    logger.error(f"Run aborted at iteration {state.iteration + 1}: {reason}")
    return RunAborted(f"Run aborted at iteration {state.iteration + 1}: {reason}", path)


def _continue_bo(state: RunState) -> RunState:
    config = state.config
    total = config.iterations
    while state.iteration < total:
        k = state.iteration + 1
        # Stream positions at iteration start make an aborted iteration replayable
        before = _stream_states(state)
        try:
            models = _fit(state)
        except NumericalError as e:
            raise _abort(state, before, f"surrogate refit failed: {e}")
        state.models = models

        try:
            selection = _select(state, _acquisition_context(state, models))
        except NumericalError as e:
            raise _abort(state, before, f"infill selection failed: {e}")
        try:
            batch = evaluate_batch(
                state.problem, selection.points, f"bo-iteration-{k}", config.workers
            )
        except EvaluationError as e:
            raise _abort(state, before, str(e))

        for e in batch:
            state.archive.add(e.point, e.objectives, e.g)
        state.evaluations.extend(batch)
        state.iteration = k
        state.selections.append(
            {
                "iteration": k,
                "values": list(selection.values),
                "weights": list(selection.weights),
                "fallbacks": list(selection.fallbacks),
            }
        )
        _record_hypervolume(state)
        logger.info(
            f"Iteration {k}/{total}: points={[list(np.round(e.point, 4)) for e in batch]} "
            f"objectives={[(round(e.f1, 6), round(e.f2, 6)) for e in batch]} "
            f"constraint={[round(e.g, 6) for e in batch]} archive HV={state.archive.hypervolume:.6g}"
        )
    return state


def run_bo(
    config: ExperimentConfig,
    problem: Optional[Problem] = None,
    checkpoint_path: Optional[str] = None,
) -> RunState:
    """
    Batch Bayesian optimization (optim2: qParEGO, optim3: qEHVI).

    DOE, then `iterations` rounds of: full refit of the three GPs, greedy
    selection of `batch_size` points, concurrent true evaluation, archive
    update. An evaluation or refit failure writes a checkpoint and raises
    RunAborted.
    """
    if not config.is_bo:
        raise ConfigError(f"run_bo needs optim2 or optim3, got {config.workflow}")
    state = initialize_run(config, problem, checkpoint_path)
    return _continue_bo(state)


def _json_ready(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def save_checkpoint(
    state: RunState, path: Optional[str] = None, stream_states: Optional[Dict[str, Any]] = None
) -> str:
    """Write the resumable part of a BO run as versioned JSON; returns the path."""
    path = path or state.checkpoint_path or _default_checkpoint_path(state.config)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config_to_ini(state.config),
        "config_hash": state.config_hash,
        "iteration": state.iteration,
        "reference_point": [float(v) for v in state.reference_point],
        "evaluations": [
            {
                "point": list(e.point),
                "f1": e.f1,
                "f2": e.f2,
                "g": e.g,
                "source": e.source,
                "wall_time": e.wall_time,
            }
            for e in state.evaluations
        ],
        "hv_history": state.hv_history,
        "selections": state.selections,
        "streams": stream_states or _stream_states(state),
    }
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_json_ready(payload), f, indent=2)
    logger.info(f"Checkpoint written: {path}")
    return path


def load_checkpoint(path: str, problem: Optional[Problem] = None) -> RunState:
    """Rebuild a RunState from a checkpoint written by `save_checkpoint`."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise InputError(f"could not read checkpoint {path}: {e}")
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise InputError(f"{path} is not a mobo checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise InputError(f"unsupported checkpoint version {payload.get('version')}")

    config = config_from_ini(payload["config"])
    problem = problem or build_problem(config)
    evaluations = [
        Evaluation(
            tuple(item["point"]),
            item["f1"],
            item["f2"],
            item["g"],
            source=item["source"],
            wall_time=item["wall_time"],
        )
        for item in payload["evaluations"]
    ]
    archive = ParetoArchive(payload["reference_point"])
    for e in evaluations:
        archive.add(e.point, e.objectives, e.g)
    problem.restore_budget(len(evaluations))

    streams = {}
    for name in STREAM_NAMES:
        rng = np.random.default_rng()
        rng.bit_generator.state = payload["streams"][name]
        streams[name] = rng

    return RunState(
        config=config,
        problem=problem,
        evaluations=evaluations,
        archive=archive,
        streams=streams,
        iteration=int(payload["iteration"]),
        hv_history=payload["hv_history"],
        selections=payload["selections"],
        checkpoint_path=path,
    )


def resume_bo(checkpoint_path: str, problem: Optional[Problem] = None) -> RunState:
    """Continue a checkpointed BO run; the remaining iterations replay exactly."""
    state = load_checkpoint(checkpoint_path, problem)
    logger.info(
        f"Resuming {state.config.workflow} at iteration {state.iteration + 1} "
        f"with {state.budget_used} evaluations"
    )
    return _continue_bo(state)


def _loo_error(models: ModelSet) -> float:
    """Mean absolute leave-one-out error of the two objective models."""
    errors = []
    for model in (models.f1, models.f2):
        means, _ = leave_one_out(model)
        errors.append(np.abs(means - training_targets_original(model)))
    return float(np.mean(errors))


def run_fixed_surrogate(
    config: ExperimentConfig,
    problem: Optional[Problem] = None,
    checkpoint_path: Optional[str] = None,
) -> RunState:
    """
    Fixed-surrogate workflow (optim1).

    The whole budget goes into the initial design; the three GPs are fitted
    once and NSGA-II runs on their posterior means. Selected feasible rank-0
    designs are then re-evaluated on the true problem, outside the budget.
    """
    if config.workflow != "optim1":
        raise ConfigError(f"run_fixed_surrogate needs optim1, got {config.workflow}")
    state = initialize_run(config, problem, checkpoint_path)
    try:
        state.models = _fit(state)
    except NumericalError as e:
        raise RunAborted(f"surrogate fit failed: {e}")
    state.loo_error = _loo_error(state.models)

    moea = config.moea
    state.population = nsga2_run(
        state.models,
        pop_size=moea.pop_size,
        generations=moea.generations,
        seed=_draw_seed(state.streams["moea"]),
        settings=VariationSettings(
            crossover_eta=moea.crossover_eta,
            crossover_prob=moea.crossover_prob,
            mutation_eta=moea.mutation_eta,
            mutation_prob=moea.mutation_prob,
        ),
    )
    state.predicted_front = state.population.front(0, feasible_only=True)
    if not state.predicted_front:
        logger.warning("NSGA-II found no design predicted feasible; nothing to verify")

    chosen = select_for_verification(
        [ind.objectives for ind in state.predicted_front], moea.verification_points
    )
    state.verification = verify_front(
        [state.predicted_front[i] for i in chosen], state.problem, config.workers
    )
    state.verified_archive = ParetoArchive(state.reference_point)
    for record in state.verification:
        e = record.evaluation
        state.verified_archive.add(e.point, e.objectives, e.g)

    logger.info(
        f"Fixed-surrogate run: LOO error {state.loo_error:.6g}, verification error "
        f"{state.verification_error if state.verification_error is not None else float('nan'):.6g}, "
        f"verified HV {state.verified_archive.hypervolume:.6g}"
    )
    return state


def run_workflow(
    config: ExperimentConfig,
    problem: Optional[Problem] = None,
    checkpoint_path: Optional[str] = None,
) -> RunState:
    if config.workflow == "optim1":
        return run_fixed_surrogate(config, problem, checkpoint_path)
    return run_bo(config, problem, checkpoint_path)


def hv_trajectory(evaluations: Sequence[Evaluation], reference: Sequence[float]) -> List[float]:
    """Archive hypervolume after the initial design and after every BO iteration."""
    archive = ParetoArchive(reference)
    curve: List[float] = []
    last_iteration = 0
    for e in evaluations:
        if e.iteration != last_iteration:
            curve.append(archive.hypervolume)
            last_iteration = e.iteration
        archive.add(e.point, e.objectives, e.g)
    curve.append(archive.hypervolume)
    return curve


@dataclass
class ComparisonRow:
    label: str
    workflow: str
    repetition: int
    seed: int
    evaluations: int
    front_size: int
    hypervolume: float


@dataclass
class ComparisonReport:
    """Outcome of an equal-budget comparison under a common reference per repetition."""

    labels: List[str]
    repetitions: int
    rows: List[ComparisonRow]
    references: List[Tuple[float, float]]
    fronts: Dict[Tuple[str, int], np.ndarray]
    curves: Dict[Tuple[str, int], List[float]]
    wins: Dict[str, int]
    states: Dict[Tuple[str, int], RunState] = field(default_factory=dict)

    def hypervolumes(self, label: str) -> List[float]:
        return [row.hypervolume for row in self.rows if row.label == label]

    def median(self, label: str) -> float:
        return float(np.median(self.hypervolumes(label)))

    def table(self) -> List[Dict[str, Any]]:
        """One summary record per label."""
        records = []
        for label in self.labels:
            values = np.array(self.hypervolumes(label))
            records.append(
                {
                    "label": label,
                    "runs": len(values),
                    "median_hv": float(np.median(values)),
                    "mean_hv": float(values.mean()),
                    "min_hv": float(values.min()),
                    "max_hv": float(values.max()),
                    "wins": self.wins[label],
                }
            )
        return records


def _labels(configs: Sequence[ExperimentConfig]) -> List[str]:
    labels: List[str] = []
    for config in configs:
        label = config.workflow
        suffix = 2
        while label in labels:
            label = f"{config.workflow}-{suffix}"
            suffix += 1
        labels.append(label)
    return labels


def compare_workflows(
    configs: Sequence[ExperimentConfig],
    repetitions: int,
    problem_factory: Optional[Callable[[ExperimentConfig], Problem]] = None,
) -> ComparisonReport:
    """
    Run every workflow once per repetition (seed + r) and score final fronts.

    Per repetition all runs share one reference point, the componentwise
    maximum of their own frozen references, so hypervolumes are comparable.
    """
    if repetitions < 1:
        raise ConfigError(f"repetitions must be >= 1, got {repetitions}")
    if not configs:
        raise ConfigError("compare_workflows needs at least one configuration")
    problems = {c.problem_label for c in configs}
    budgets = {c.budget for c in configs}
    if len(problems) != 1 or len(budgets) != 1:
        raise ConfigError(
            f"compared workflows must share problem and budget, got {sorted(problems)} / {sorted(budgets)}"
        )

    factory = problem_factory or build_problem
    labels = _labels(configs)
    rows: List[ComparisonRow] = []
    references: List[Tuple[float, float]] = []
    fronts: Dict[Tuple[str, int], np.ndarray] = {}
    curves: Dict[Tuple[str, int], List[float]] = {}
    states: Dict[Tuple[str, int], RunState] = {}
    wins = {label: 0 for label in labels}

    for r in range(repetitions):
        runs = {}
        for label, config in zip(labels, configs):
            config = replace(config, seed=config.seed + r)
            logger.info(f"Comparison repetition {r + 1}/{repetitions}: {label} (seed {config.seed})")
            runs[label] = run_workflow(config, factory(config))
        reference = np.max([state.reference_point for state in runs.values()], axis=0)
        references.append((float(reference[0]), float(reference[1])))

        scores = {}
        for label, state in runs.items():
            entries = state.final_front.sorted_entries()
            front = np.array([e.objectives for e in entries]).reshape(-1, 2)
            scores[label] = hypervolume_2d(front, reference)
            fronts[(label, r)] = front
            if state.config.is_bo:
                curves[(label, r)] = hv_trajectory(state.evaluations, reference)
            states[(label, r)] = state
            rows.append(
                ComparisonRow(
                    label=label,
                    workflow=state.config.workflow,
                    repetition=r,
                    seed=state.config.seed,
                    evaluations=state.budget_used,
                    front_size=len(front),
                    hypervolume=scores[label],
                )
            )
        best = max(scores.values())
        for label, score in scores.items():
            if score == best:
                wins[label] += 1

    return ComparisonReport(
        labels=labels,
        repetitions=repetitions,
        rows=rows,
        references=references,
        fronts=fronts,
        curves=curves,
        wins=wins,
        states=states,
    )
