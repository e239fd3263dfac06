"""Figures of merit computed from episode statistics."""

from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, Field

from qrasim.core.model import EpisodeStats, SimConfig


class MetricRecord(BaseModel):
    """Per-episode figures of merit."""

    normalized_throughput: float = Field(..., ge=0.0, le=1.0)
    latency_slots: int = Field(..., ge=0, description="T, total slots elapsed")
    finish_mean: float | None = Field(None, description="Mean finish frame (converged only)")
    finish_std: float | None = Field(None, description="Std of finish frames (converged only)")
    collision_probability: float = Field(..., ge=0.0, le=1.0)
    converged: bool


class AsymptoticEstimate(NamedTuple):
    value: float
    delta: float


def normalized_throughput(successes: int, total_slots: int, payload_bits: int, header_bits: int) -> float:
    """Delivered packets per slot, discounted by header overhead: p/(b+p) * S/T.

    Raises:
        ValueError: If total_slots is zero or a parameter is out of range
    """
    if total_slots < 1:
        raise ValueError("total_slots must be at least 1")
    if successes < 0 or payload_bits < 1 or header_bits < 1:
        raise ValueError("successes must be >= 0 and payload/header bits >= 1")
    return payload_bits / (header_bits + payload_bits) * successes / total_slots


def latency(stats: EpisodeStats) -> int:
    """Total slots spent; for a capped episode this is max_frames * K."""
    return stats.total_slots


def completion_spread(finish_frames: Sequence[int]) -> tuple[float, float]:
    """Sample mean and standard deviation (n - 1) of per-device finish frames.

    A single device has zero spread.

    Raises:
        ValueError: If the sequence is empty or any device is unfinished
    """
    frames = np.asarray(finish_frames, dtype=np.float64)
    if frames.size == 0:
        raise ValueError("completion_spread needs at least one device")
    if np.any(frames < 0):
        raise ValueError("completion_spread needs every device finished")
    std = float(frames.std(ddof=1)) if frames.size > 1 else 0.0
    return float(frames.mean()), std


def collision_probability(failures: int, transmissions: int) -> float:
    """Share of device transmissions that collided."""
    if transmissions == 0:
        return 0.0
    return failures / transmissions


def asymptotic_throughput_estimate(curve: Sequence[tuple[int, float]]) -> AsymptoticEstimate:
    """Throughput at the largest packet count, plus the last-step change.

    Args:
        curve: (L, mean throughput) points with strictly increasing L

    Returns:
        Throughput at the largest L and its change from the previous point

    Raises:
        ValueError: If fewer than two points or L is not increasing
    """
    if len(curve) < 2:
        raise ValueError("curve needs at least two points")
    packets = [point[0] for point in curve]
    if any(b <= a for a, b in zip(packets, packets[1:])):
        raise ValueError("curve must have strictly increasing L")
    last, previous = curve[-1][1], curve[-2][1]
    return AsymptoticEstimate(value=float(last), delta=float(last - previous))


def episode_metrics(stats: EpisodeStats, config: SimConfig) -> MetricRecord:
    """Collect all per-episode metrics; spread is only defined at convergence."""
    finish_mean = finish_std = None
    if stats.converged:
        finish_mean, finish_std = completion_spread(stats.finish_frames)
    return MetricRecord(
        normalized_throughput=normalized_throughput(
            stats.total_successes,
            max(stats.total_slots, 1),
            config.payload_bits,
            config.header_bits,
        ),
        latency_slots=latency(stats),
        finish_mean=finish_mean,
        finish_std=finish_std,
        collision_probability=collision_probability(
            stats.total_failures, stats.total_transmissions
        ),
        converged=stats.converged,
    )
