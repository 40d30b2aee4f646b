"""Run configuration shared by every CLI subcommand."""

import os
from pathlib import Path
from typing import Literal

from loguru import logger
from pydantic import BaseModel, Field, field_validator, model_validator

from anderson_lab.classify import CLASSIFIERS, DEFAULT_T_SAMPLES, ClassifyParams
from anderson_lab.errors import ConfigError
from anderson_lab.grid import TorusGrid, build_torus
from anderson_lab.probability import PotentialDistribution
from anderson_lab.services.runner import TrialRunner
from anderson_lab.spectral import DEFAULT_ENTRY_TOL, default_solver

LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")


def default_log_level() -> str:
    return os.getenv("ANDERSON_LAB_LOG_LEVEL", "WARNING").strip().upper() or "WARNING"


class RunConfig(BaseModel):
    """Validated flags of one run; nothing is computed before this passes."""

    dims: tuple[int, ...] | None = None
    p: float = Field(default=0.5, ge=0.0, le=1.0)
    dist: str | None = None
    t_grid: list[float] | None = None
    t_samples: int = Field(default=DEFAULT_T_SAMPLES, ge=1)
    gap_tol: float | None = Field(default=None, gt=0)
    entry_tol: float = Field(default=DEFAULT_ENTRY_TOL, gt=0)
    seed: int = Field(default=0, ge=0)
    trials: int = Field(default=1000, ge=1)
    out: Path | None = None
    format: Literal["json", "csv"] = "json"
    potential: list[float] | None = None
    L: int | None = None
    k: int | None = None
    classifier: str = "full"
    solver: Literal["jacobi", "lapack"] = Field(default_factory=default_solver)
    threads: int | None = Field(default=None, ge=1)
    log_level: str = Field(default_factory=default_log_level, validate_default=True)

    @field_validator("dims")
    @classmethod
    def check_dims(cls, dims: tuple[int, ...] | None) -> tuple[int, ...] | None:
        if dims is not None:
            build_torus(dims)
        return dims

    @field_validator("dist")
    @classmethod
    def check_dist(cls, dist: str | None) -> str | None:
        if dist is not None:
            PotentialDistribution.parse(dist)
        return dist

    @field_validator("classifier")
    @classmethod
    def check_classifier(cls, name: str) -> str:
        if name not in CLASSIFIERS:
            raise ValueError(f"Unknown classifier {name!r}; expected one of {sorted(CLASSIFIERS)}")
        return name

    @field_validator("log_level")
    @classmethod
    def check_log_level(cls, level: str) -> str:
        level = level.upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"Unknown log level {level!r}")
        return level

    @field_validator("t_grid")
    @classmethod
    def check_t_grid(cls, t_grid: list[float] | None) -> list[float] | None:
        if t_grid is not None and not t_grid:
            raise ValueError("t grid must be nonempty")
        return t_grid

    @model_validator(mode="after")
    def check_potential_length(self) -> "RunConfig":
        if self.potential is not None and self.dims is not None:
            n = self.grid().n
            if len(self.potential) != n:
                raise ValueError(
                    f"Potential has {len(self.potential)} entries but dims "
                    f"{list(self.dims)} need {n}"
                )
        return self

    def grid(self) -> TorusGrid:
        if self.dims is None:
            raise ConfigError("This command needs --dims")
        return build_torus(self.dims)

    def distribution(self) -> PotentialDistribution:
        """--dist if given, else Bernoulli with --p."""
        if self.dist is not None:
            return PotentialDistribution.parse(self.dist)
        return PotentialDistribution.parse(f"bernoulli:{self.p}")

    def classify_params(self) -> ClassifyParams:
        return ClassifyParams(
            t_samples=self.t_samples,
            seed=self.seed,
            gap_tol=self.gap_tol,
            entry_tol=self.entry_tol,
            solver=self.solver,
        )

    def runner(self) -> TrialRunner:
        return TrialRunner(self.threads)

    def log_summary(self) -> None:
        logger.info(
            f"Run config: dims={self.dims} seed={self.seed} solver={self.solver} "
            f"classifier={self.classifier} threads={self.threads or 'auto'}"
        )
