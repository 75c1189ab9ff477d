"""
Black-box problems: variable normalization, analytic benchmarks and an
external-process simulator adapter.

Optimizers work in the unit hypercube. A unit coordinate u is first mapped
into the variable's search box [min_norm, max_norm] and then into physical
units with the linear map X_real = X_real_min + (X_real_max - X_real_min) * X_norm.
"""

import itertools
import json
import logging
import math
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import EvaluationError, InputError

logger = logging.getLogger(__name__)

BOX_TOLERANCE = 1e-12
FEM_THRESHOLD = 650.0
DEFAULT_EXTERNAL_TIMEOUT = 600.0


@dataclass(frozen=True)
class VariableSpec:
    """One design variable with physical bounds and a normalized search box."""

    name: str
    min_real: float
    max_real: float
    min_norm: float = 0.0
    max_norm: float = 1.0
    unit: str = ""

    def __post_init__(self) -> None:
        if not self.min_real < self.max_real:
            raise InputError(f"{self.name}: min_real must be below max_real")
        if not 0.0 <= self.min_norm < self.max_norm <= 1.0:
            raise InputError(f"{self.name}: need 0 <= min_norm < max_norm <= 1")


def denormalize(spec: VariableSpec, x_norm: float) -> float:
    """Normalized value (inside the search box) to physical units."""
    if not spec.min_norm - BOX_TOLERANCE <= x_norm <= spec.max_norm + BOX_TOLERANCE:
        raise InputError(
            f"{spec.name}: normalized value {x_norm} outside [{spec.min_norm}, {spec.max_norm}]"
        )
    return spec.min_real + (spec.max_real - spec.min_real) * x_norm


def normalize(spec: VariableSpec, x_real: float) -> float:
    """Physical value back to its normalized coordinate."""
    return (x_real - spec.min_real) / (spec.max_real - spec.min_real)


def to_search_box(spec: VariableSpec, u: float) -> float:
    """Unit-hypercube coordinate to the normalized search box."""
    return spec.min_norm + (spec.max_norm - spec.min_norm) * u


def from_search_box(spec: VariableSpec, x_norm: float) -> float:
    return (x_norm - spec.min_norm) / (spec.max_norm - spec.min_norm)


@dataclass(frozen=True)
class Evaluation:
    """One true evaluation of a design."""

    point: Tuple[float, ...]
    f1: float
    f2: float
    g: float
    source: str = "doe"
    wall_time: float = 0.0

    @property
    def objectives(self) -> Tuple[float, float]:
        return self.f1, self.f2

    @property
    def feasible(self) -> bool:
        return self.g <= 0.0

    @property
    def iteration(self) -> int:
        """BO iteration that produced the point, 0 for the initial design."""
        if self.source.startswith("bo-iteration-"):
            return int(self.source.rsplit("-", 1)[1])
        return 0


class Problem:
    """
    Constrained bi-objective black box: minimize (f1, f2) subject to g <= 0.

    Subclasses implement `response` on physical values (or override
    `_respond` to work on unit coordinates). `evaluate` is safe to call from
    several threads.
    """

    name = "problem"
    objective_names: Tuple[str, str] = ("f1", "f2")
    constraint_name = "g"
    # Multiplier applied to internal objectives for display
    display_sign: Tuple[float, float] = (1.0, 1.0)

    def __init__(self, variables: Sequence[VariableSpec]) -> None:
        if not variables:
            raise InputError("a problem needs at least one variable")
        self.variables: Tuple[VariableSpec, ...] = tuple(variables)
        self._lock = threading.Lock()
        self._evaluations = 0

    @property
    def dimension(self) -> int:
        return len(self.variables)

    @property
    def variable_names(self) -> List[str]:
        return [v.name for v in self.variables]

    @property
    def evaluations_used(self) -> int:
        return self._evaluations

    def restore_budget(self, used: int) -> None:
        """Count evaluations already spent in an earlier session (resume)."""
        with self._lock:
            self._evaluations = max(self._evaluations, int(used))

    @property
    def display_names(self) -> Tuple[str, str]:
        return self.objective_names

    def to_physical(self, point: Sequence[float]) -> np.ndarray:
        return np.array(
            [denormalize(v, to_search_box(v, u)) for v, u in zip(self.variables, point)]
        )

    def response(self, x_real: np.ndarray) -> Tuple[float, float, float]:
        raise NotImplementedError(f"No response defined for problem {self.name}")

    def known_front(self, samples: int = 200) -> Optional[np.ndarray]:
        """Analytic Pareto front as (samples, 2) objective pairs, when known."""
        return None

    def _respond(self, point: np.ndarray) -> Tuple[float, float, float]:
        return self.response(self.to_physical(point))

    def check_point(self, point: Sequence[float]) -> np.ndarray:
        u = np.asarray(point, dtype=float).ravel()
        if u.shape != (self.dimension,):
            raise InputError(f"{self.name} expects {self.dimension} coordinates, got {u.shape}")
        if np.any(u < -BOX_TOLERANCE) or np.any(u > 1.0 + BOX_TOLERANCE):
            raise InputError(f"{self.name}: point outside the unit hypercube: {u.tolist()}")
        return np.clip(u, 0.0, 1.0)

    def evaluate(self, point: Sequence[float], source: str = "doe") -> Evaluation:
        u = self.check_point(point)
        start = time.perf_counter()
        values = self._respond(u)
        wall_time = time.perf_counter() - start
        if len(values) != 3 or not all(math.isfinite(float(v)) for v in values):
            raise EvaluationError(f"{self.name} returned non-finite output {values}", u)
        with self._lock:
            self._evaluations += 1
        f1, f2, g = (float(v) for v in values)
        return Evaluation(tuple(u.tolist()), f1, f2, g, source=source, wall_time=wall_time)


def evaluate(problem: Problem, point: Sequence[float], source: str = "doe") -> Evaluation:
    """Evaluate `point` (unit hypercube) on `problem`; counts against the budget."""
    return problem.evaluate(point, source=source)


class BNH(Problem):
    """Binh and Korn: two variables, two constraints aggregated into g = max(g1, g2)."""

    name = "bnh"

    def __init__(self) -> None:
        super().__init__([VariableSpec("x1", 0.0, 5.0), VariableSpec("x2", 0.0, 3.0)])

    def response(self, x_real: np.ndarray) -> Tuple[float, float, float]:
        x1, x2 = x_real
        f1 = 4.0 * x1**2 + 4.0 * x2**2
        f2 = (x1 - 5.0) ** 2 + (x2 - 5.0) ** 2
        g1 = (x1 - 5.0) ** 2 + x2**2 - 25.0
        g2 = 7.7 - (x1 - 8.0) ** 2 - (x2 + 3.0) ** 2
        return f1, f2, max(g1, g2)

    def known_front(self, samples: int = 200) -> Optional[np.ndarray]:
        half = max(samples // 2, 2)
        diagonal = np.linspace(0.0, 3.0, half)
        ridge = np.linspace(3.0, 5.0, samples - half + 1)[1:]
        designs = np.vstack(
            [np.column_stack([diagonal, diagonal]), np.column_stack([ridge, np.full_like(ridge, 3.0)])]
        )
        return np.array([self.response(x)[:2] for x in designs])


class SRN(Problem):
    """Srinivas and Deb: two variables on [-20, 20], two constraints."""

    name = "srn"

    def __init__(self) -> None:
        super().__init__([VariableSpec("x1", -20.0, 20.0), VariableSpec("x2", -20.0, 20.0)])

    def response(self, x_real: np.ndarray) -> Tuple[float, float, float]:
        x1, x2 = x_real
        f1 = 2.0 + (x1 - 2.0) ** 2 + (x2 - 1.0) ** 2
        f2 = 9.0 * x1 - (x2 - 1.0) ** 2
        g1 = x1**2 + x2**2 - 225.0
        g2 = x1 - 3.0 * x2 + 10.0
        return f1, f2, max(g1, g2)

    def known_front(self, samples: int = 200) -> Optional[np.ndarray]:
        x2 = np.linspace(2.5, 14.79, samples)
        designs = np.column_stack([np.full_like(x2, -2.5), x2])
        return np.array([self.response(x)[:2] for x in designs])


SYNREL_VARIABLES = (
    VariableSpec("Rad_PM_L1", 40.0, 90.0, 0.6, 0.9, "mm"),
    VariableSpec("Rad_PM_L2", 40.0, 90.0, 0.1, 0.9, "mm"),
    VariableSpec("Rad_PM_L3", 40.0, 90.0, 0.1, 0.9, "mm"),
    VariableSpec("Rad_Brid_L1", 0.5, 3.0, 0.1, 0.9, "mm"),
    VariableSpec("Rad_Brid_L2", 0.5, 3.0, 0.1, 0.9, "mm"),
    VariableSpec("Rad_Brid_L3", 0.5, 3.0, 0.1, 0.9, "mm"),
    VariableSpec("Beta_L1", 10.0, 60.0, 0.1, 0.9, "deg"),
    VariableSpec("Beta_L2", 10.0, 60.0, 0.1, 0.9, "deg"),
    VariableSpec("Beta_L3", 10.0, 60.0, 0.1, 0.9, "deg"),
    VariableSpec("PM_Len_L1", 5.0, 25.0, 0.1, 0.9, "mm"),
    VariableSpec("PM_Len_L2", 5.0, 25.0, 0.1, 0.9, "mm"),
    VariableSpec("PM_Len_L3", 5.0, 25.0, 0.1, 0.9, "mm"),
)


class SynRelToy(Problem):
    """
    Analytic 12-variable stand-in for a three-layer assisted reluctance rotor.

    f1 is the negated torque analogue (product of smooth concave terms),
    f2 the negated power ratio (ratio of two quadratics in (0, 1]), and
    g = back_emf - 650. Torque and back-EMF both grow with magnet length and
    shrink with the first opening angle, so the constraint is active at the
    high-torque end of the front; the power ratio pulls the other way.
    """

    name = "synrel-toy"
    objective_names = ("couple", "power_ratio")
    constraint_name = "fem"
    display_sign = (-1.0, -1.0)

    def __init__(self) -> None:
        super().__init__(SYNREL_VARIABLES)

    def _features(self, x_real: np.ndarray) -> Tuple[float, float, float, float]:
        z = np.array([normalize(v, x) for v, x in zip(self.variables, x_real)])
        magnet = 0.5 * z[9] + 0.3 * z[10] + 0.2 * z[11]
        radius = z[0:3].mean()
        bridge = z[3:6].mean()
        opening = 0.5 * z[6] + 0.3 * z[7] + 0.2 * z[8]
        return magnet, radius, bridge, opening

    def torque(self, x_real: np.ndarray) -> float:
        magnet, radius, bridge, opening = self._features(x_real)
        return float(
            380.0
            * (0.55 + 0.45 * np.sqrt(magnet))
            * (1.0 - 0.35 * opening**2)
            * (0.8 + 0.2 * np.sin(np.pi * radius))
            * (1.0 - 0.15 * bridge)
        )

    def power_ratio(self, x_real: np.ndarray) -> float:
        magnet, radius, bridge, opening = self._features(x_real)
        numerator = 0.4 + (opening + 0.5 * bridge) ** 2
        return float(numerator / (numerator + 1.2 * (magnet - 0.25 * radius) ** 2))

    def back_emf(self, x_real: np.ndarray) -> float:
        magnet, radius, bridge, opening = self._features(x_real)
        return float(
            484.0 + 250.0 * magnet + 90.0 * (1.0 - opening) ** 2 + 40.0 * radius * magnet
            - 30.0 * bridge
        )

    @staticmethod
    def constraint_from_emf(back_emf: float) -> float:
        return back_emf - FEM_THRESHOLD

    def response(self, x_real: np.ndarray) -> Tuple[float, float, float]:
        return (
            -self.torque(x_real),
            -self.power_ratio(x_real),
            self.constraint_from_emf(self.back_emf(x_real)),
        )


class ExternalSimulator(Problem):
    """
    Problem backed by an external command speaking newline-delimited JSON.

    Every evaluation launches its own child process, writes one request
    {"id", "x"} to its stdin and reads one response {"id", "f1", "f2", "g"}
    from its stdout, so up to q evaluations can be in flight at once.
    """

    name = "external"

    def __init__(
        self,
        command: Union[str, Sequence[str]],
        variables: Sequence[VariableSpec],
        timeout: float = DEFAULT_EXTERNAL_TIMEOUT,
    ) -> None:
        super().__init__(variables)
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        if not self.command:
            raise InputError("external simulator command is empty")
        self.timeout = float(timeout)
        self._ids = itertools.count(1)
        self._id_lock = threading.Lock()

    def _next_id(self) -> int:
        with self._id_lock:
            return next(self._ids)

    def _respond(self, point: np.ndarray) -> Tuple[float, float, float]:
        request_id = self._next_id()
        request = json.dumps({"id": request_id, "x": [float(v) for v in point]}) + "\n"
        try:
            completed = subprocess.run(
                self.command,
                input=request,
                capture_output=True,
                text=True,
                encoding="utf-8",
                timeout=self.timeout,
                check=False,
            )
        except subprocess.TimeoutExpired:
            raise EvaluationError(f"simulator timed out after {self.timeout:g} s", point)
        except OSError as e:
            raise EvaluationError(f"could not launch simulator: {e}", point)

        if completed.returncode != 0:
            raise EvaluationError(
                f"simulator exited with status {completed.returncode}: {completed.stderr.strip()}",
                point,
            )
        lines = [line for line in completed.stdout.splitlines() if line.strip()]
        if len(lines) != 1:
            raise EvaluationError(f"expected one response record, got {len(lines)}", point)
        try:
            record = json.loads(lines[0])
            if record["id"] != request_id:
                raise EvaluationError(
                    f"response id {record['id']} does not match request id {request_id}", point
                )
            return float(record["f1"]), float(record["f2"]), float(record["g"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise EvaluationError(f"malformed simulator response {lines[0]!r}: {e}", point)


def external_adapter(
    command: Union[str, Sequence[str]],
    timeout: float = DEFAULT_EXTERNAL_TIMEOUT,
    dimension: Optional[int] = None,
    variables: Optional[Sequence[VariableSpec]] = None,
) -> ExternalSimulator:
    """Wrap an external simulator command as a Problem."""
    if variables is None:
        if not dimension or dimension < 1:
            raise InputError("external_adapter needs a dimension or explicit variables")
        variables = [VariableSpec(f"x{i + 1}", 0.0, 1.0) for i in range(dimension)]
    return ExternalSimulator(command, variables, timeout=timeout)


_CATALOG: Dict[str, Callable[[], Problem]] = {
    BNH.name: BNH,
    SRN.name: SRN,
    SynRelToy.name: SynRelToy,
}


def builtin_problems() -> Dict[str, Callable[[], Problem]]:
    """Catalog of built-in problem factories keyed by name."""
    return dict(_CATALOG)


def get_problem(name: str) -> Problem:
    """Fresh instance of a built-in problem (its own budget counter)."""
    try:
        factory = _CATALOG[name.lower()]
    except KeyError:
        raise InputError(f"unknown problem '{name}'; available: {sorted(_CATALOG)}")
    return factory()
