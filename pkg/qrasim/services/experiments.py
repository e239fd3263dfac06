"""Monte Carlo sweeps over one scenario parameter."""

import math
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from qrasim.config import get_settings
from qrasim.core.engine import episode_rng, run_episode
from qrasim.core.logging import setup_logging
from qrasim.core.model import Scheme, SimConfig
from qrasim.core.rewards import RewardScheme
from qrasim.services.metrics import (
    AsymptoticEstimate,
    MetricRecord,
    asymptotic_throughput_estimate,
    episode_metrics,
)


class Axis(str, Enum):
    """Parameter varied by a sweep."""

    LOADING_FACTOR = "loading_factor"
    PACKETS_PER_DEVICE = "packets_per_device"
    PAYLOAD_BITS = "payload_bits"
    QUANT_BITS = "quant_bits"
    LEARNING_RATE = "learning_rate"
    NONE = "none"


def devices_for_load(loading_factor: float, n_slots: int) -> int:
    """N = round(loading_factor * K), halves rounded up."""
    return int(math.floor(loading_factor * n_slots + 0.5))


class SweepSpec(BaseModel):
    """A grid of scenarios: base config, one varied axis, schemes and reps."""

    model_config = ConfigDict(frozen=True)

    base: SimConfig
    axis: Axis
    grid: list[float] = Field(..., min_length=1)
    schemes: list[RewardScheme] = Field(..., min_length=1)
    reps: int = Field(default=200, ge=1)
    loading_factors: list[float] | None = Field(
        default=None, description="Extra load axis crossed with the grid"
    )

    @field_validator("grid")
    @classmethod
    def check_increasing(cls, v: list[float]) -> list[float]:
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("grid must be strictly increasing")
        return v

    @model_validator(mode="after")
    def check_points(self) -> "SweepSpec":
        """Every grid point must produce a valid SimConfig."""
        if self.axis is Axis.LOADING_FACTOR and self.loading_factors:
            raise ValueError("loading_factors cannot be crossed with a loading_factor axis")
        for scheme, value, load in self.points():
            build_point(self, scheme, value, load)
        return self

    def points(self) -> list[tuple[RewardScheme, float, float | None]]:
        loads = self.loading_factors or [None]
        return [
            (scheme, value, load)
            for scheme in self.schemes
            for value in self.grid
            for load in loads
        ]


def build_point(
    spec: SweepSpec, scheme: RewardScheme, value: float, load: float | None = None
) -> SimConfig:
    """SimConfig of one grid point.

    Raises:
        ValueError: Naming the point if the resulting config is invalid
    """
    fields: dict[str, Any] = spec.base.model_dump()
    fields["scheme"] = scheme.kind
    fields["header_bits"] = scheme.quant_bits if scheme.kind is Scheme.COLLABORATIVE else 1
    k = fields["n_slots"]
    match spec.axis:
        case Axis.LOADING_FACTOR:
            fields["n_devices"] = devices_for_load(value, k)
        case Axis.PACKETS_PER_DEVICE:
            fields["packets_per_device"] = int(value)
        case Axis.PAYLOAD_BITS:
            fields["payload_bits"] = int(value)
        case Axis.QUANT_BITS:
            if scheme.kind is Scheme.COLLABORATIVE:
                fields["header_bits"] = int(value)
        case Axis.LEARNING_RATE:
            fields["learning_rate"] = value
        case Axis.NONE:
            pass
    if load is not None:
        fields["n_devices"] = devices_for_load(load, k)
    try:
        return SimConfig(**fields)
    except ValidationError as e:
        where = f"{scheme.label} {spec.axis.value}={value:g}"
        if load is not None:
            where += f" loading_factor={load:g}"
        raise ValueError(f"Invalid sweep point {where}: {e}") from e


class SweepRow(BaseModel):
    """Aggregated metrics of one (scheme, grid point)."""

    scheme: str
    kind: Scheme
    quant_bits: int | None
    axis_value: float
    n_devices: int
    mean_throughput: float
    std_throughput: float
    mean_latency_slots: float
    std_latency_slots: float
    mean_finish_std: float
    mean_collision_prob: float
    nonconverged: int
    reps: int
    throughput_ceiling: float

    @property
    def converged(self) -> int:
        return self.reps - self.nonconverged

    def throughput_stderr(self) -> float:
        return self.std_throughput / math.sqrt(max(self.converged, 1))

    def latency_stderr(self) -> float:
        return self.std_latency_slots / math.sqrt(max(self.converged, 1))


class SweepResult(BaseModel):
    """All rows of a sweep, ordered by (scheme, axis value, load)."""

    axis: Axis
    master_seed: int
    rows: list[SweepRow]

    @property
    def nonconverged_total(self) -> int:
        return sum(row.nonconverged for row in self.rows)

    def for_scheme(self, label: str) -> list[SweepRow]:
        return [row for row in self.rows if row.scheme == label]

    def row(self, label: str, axis_value: float, n_devices: int | None = None) -> SweepRow:
        for r in self.for_scheme(label):
            if math.isclose(r.axis_value, axis_value) and n_devices in (None, r.n_devices):
                return r
        raise KeyError(f"No row for {label} at {self.axis.value}={axis_value}")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.model_dump() for row in self.rows])


def _run_task(task: tuple[SimConfig, int]) -> MetricRecord:
    config, episode = task
    outcome = run_episode(config, episode_rng(config.seed, episode))
    return episode_metrics(outcome.stats, config)


def init_worker_logging(log_level: str, log_dir: Path | None) -> None:
    """Replace loguru's default handler in a freshly started worker process."""
    setup_logging(log_level, log_dir)


def _aggregate(records: pd.DataFrame) -> dict[str, float]:
    done = records[records["converged"]]
    n = len(done)

    def stat(column: str, fn: str) -> float:
        if n == 0 or (fn == "std" and n < 2):
            return float("nan") if n == 0 else 0.0
        return float(getattr(done[column], fn)())

    return {
        "mean_throughput": stat("normalized_throughput", "mean"),
        "std_throughput": stat("normalized_throughput", "std"),
        "mean_latency_slots": stat("latency_slots", "mean"),
        "std_latency_slots": stat("latency_slots", "std"),
        "mean_finish_std": stat("finish_std", "mean"),
        "mean_collision_prob": stat("collision_probability", "mean"),
        "nonconverged": int(len(records) - n),
    }


class SweepRunner:
    """Run every episode of a sweep, in-process or across worker processes."""

    def __init__(self, workers: int | None = None, log_level: str | None = None):
        """Initialize sweep runner.

        Args:
            workers: Worker processes (defaults to settings.workers)
            log_level: Loguru level for worker processes (defaults to settings.log_level)
        """
        settings = get_settings()
        self.workers = settings.workers if workers is None else workers
        self.log_level = log_level or settings.log_level
        self.log_dir = settings.log_dir
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def _map(self, tasks: list[tuple[SimConfig, int]]) -> list[MetricRecord]:
        if self.workers == 1:
            return [_run_task(task) for task in tasks]
        chunksize = max(1, len(tasks) // (self.workers * 4))
        with ProcessPoolExecutor(
            max_workers=self.workers,
            initializer=init_worker_logging,
            initargs=(self.log_level, self.log_dir),
        ) as pool:
            return list(pool.map(_run_task, tasks, chunksize=chunksize))

    def run(self, spec: SweepSpec) -> SweepResult:
        """Run all reps of every grid point and aggregate per point.

        Episode i of each point uses stream i of the master seed, and
        reduction follows (scheme, grid value, load, episode) order, so
        results do not depend on the worker count.
        """
        points = [
            (scheme, value, load, build_point(spec, scheme, value, load))
            for scheme, value, load in spec.points()
        ]
        logger.info(
            f"Sweep over {spec.axis.value}: {len(points)} points x {spec.reps} reps "
            f"on {self.workers} worker(s), seed={spec.base.seed}"
        )
        tasks = [(config, episode) for *_, config in points for episode in range(spec.reps)]
        records = self._map(tasks)

        rows = []
        for i, (_, value, _, config) in enumerate(points):
            # a quant_bits axis overrides the scheme's own header width
            scheme = RewardScheme.from_config(config)
            chunk = records[i * spec.reps : (i + 1) * spec.reps]
            frame = pd.DataFrame([r.model_dump() for r in chunk])
            summary = _aggregate(frame)
            if summary["nonconverged"]:
                logger.warning(
                    f"{scheme.label} {spec.axis.value}={value:g} N={config.n_devices}: "
                    f"{summary['nonconverged']}/{spec.reps} episodes hit max_frames"
                )
            logger.info(
                f"{scheme.label} {spec.axis.value}={value:g} N={config.n_devices}: "
                f"throughput={summary['mean_throughput']:.5f} latency={summary['mean_latency_slots']:.1f}"
            )
            rows.append(
                SweepRow(
                    scheme=scheme.label,
                    kind=scheme.kind,
                    quant_bits=scheme.quant_bits,
                    axis_value=value,
                    n_devices=config.n_devices,
                    reps=spec.reps,
                    throughput_ceiling=config.throughput_ceiling,
                    **summary,
                )
            )

        rows.sort(key=lambda r: (r.kind.value, r.quant_bits or 0, r.axis_value, r.n_devices))
        result = SweepResult(axis=spec.axis, master_seed=spec.base.seed, rows=rows)
        logger.info(f"Sweep finished: {len(rows)} rows, {result.nonconverged_total} non-converged episodes")
        return result


def run_sweep(spec: SweepSpec, workers: int | None = None, log_level: str | None = None) -> SweepResult:
    """Run a sweep with a fresh runner."""
    return SweepRunner(workers, log_level).run(spec)


def asymptotic_from_sweep(result: SweepResult, label: str) -> AsymptoticEstimate:
    """Asymptotic throughput of one scheme from a packets-per-device sweep."""
    if result.axis is not Axis.PACKETS_PER_DEVICE:
        raise ValueError("asymptotic estimate needs a packets_per_device sweep")
    curve = [(int(r.axis_value), r.mean_throughput) for r in result.for_scheme(label)]
    return asymptotic_throughput_estimate(curve)


def pooled_stderr(a: SweepRow, b: SweepRow, column: str = "throughput") -> float:
    """Standard error of the difference of two row means."""
    ea = a.throughput_stderr() if column == "throughput" else a.latency_stderr()
    eb = b.throughput_stderr() if column == "throughput" else b.latency_stderr()
    return float(np.hypot(ea, eb))
