import os
import shlex
import sys
from dataclasses import replace

import numpy as np
import pytest

from mobo.config import (
    AcquisitionSettings,
    DoeSettings,
    ExperimentConfig,
    GPSettings,
    MoeaSettings,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
MOCK_SIMULATOR = os.path.join(FIXTURES, "mock_simulator.py")

SMALL_INI = """\
[experiment]
problem = bnh
workflow = optim3
initial_doe_size = 8
iterations = 2
batch_size = 2
seed = 3
workers = 2

[gp]
fit_restarts = 2
fit_max_evaluations = 60

[doe]
proposals_per_dimension = 200

[acquisition]
mc_samples = 64
final_mc_samples = 256
restarts = 2
raw_samples = 16

[moea]
pop_size = 12
generations = 5
verification_points = 4
"""


def mock_command(*mode: str) -> str:
    return " ".join(shlex.quote(part) for part in [sys.executable, MOCK_SIMULATOR, *mode])


@pytest.fixture(autouse=True)
def isolated_output(tmp_path, monkeypatch):
    """Keep default output roots (checkpoints, logs) inside the test's tmp dir."""
    monkeypatch.setenv("MOBO_OUT_DIR", str(tmp_path / "default_out"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    """Factory for cheap experiment configurations."""

    def build(**changes) -> ExperimentConfig:
        config = ExperimentConfig(
            problem="bnh",
            workflow="optim3",
            initial_doe_size=8,
            iterations=2,
            batch_size=2,
            seed=3,
            workers=2,
            gp=GPSettings(fit_restarts=2, fit_max_evaluations=60),
            doe=DoeSettings(proposals_per_dimension=200),
            acquisition=AcquisitionSettings(
                mc_samples=64, final_mc_samples=256, restarts=2, raw_samples=16
            ),
            moea=MoeaSettings(pop_size=12, generations=5, verification_points=4),
        )
        return replace(config, **changes).validate()

    return build


@pytest.fixture
def small_ini(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL_INI, encoding="utf-8")
    return str(path)
