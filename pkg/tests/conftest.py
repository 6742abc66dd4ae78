from __future__ import annotations

from dataclasses import dataclass
import math
from pathlib import Path

import pytest

from gl_rolls.dynamics import Grid
from gl_rolls.experiments import ExperimentConfig
from gl_rolls.symbol import RollParams


@dataclass
class SmallRunConfig:
    """Settings of a run small enough for the default test session.

    :param L: length of the periodic domain
    :param N: number of grid points
    :param dt: time step
    :param T: final time
    :param eps: initial perturbation size
    :param out: output directory of the run
    """

    L: float = 40 * math.pi
    N: int = 256
    dt: float = 0.05
    T: float = 5.0
    eps: float = 0.01
    out: Path = Path("results")

    @property
    def grid(self) -> Grid:
        return Grid(self.L, self.N)

    def experiment(self, **updates) -> ExperimentConfig:
        values = {"L": self.L, "N": self.N, "dt": self.dt, "T": self.T, "eps": self.eps, "out": str(self.out)}
        values.update(updates)
        return ExperimentConfig(**values)


@pytest.fixture
def small_run(tmp_path: Path) -> SmallRunConfig:
    return SmallRunConfig(out=tmp_path / "results")


@pytest.fixture
def grid(small_run: SmallRunConfig) -> Grid:
    return small_run.grid


@pytest.fixture
def stable_params() -> RollParams:
    """The default modified-equation parameter point, spectrally stable."""
    return RollParams(0.3, 1.0, 0.5)


@pytest.fixture
def real_params() -> RollParams:
    """A stable roll of the real equation (no coupling)."""
    return RollParams(0.2, 1.0, 0.0)


@pytest.fixture
def eckhaus_params() -> RollParams:
    return RollParams(0.6, 1.0, 0.0)
