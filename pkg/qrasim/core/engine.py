"""Episode engine: the frame loop shared by all reward schemes."""

from dataclasses import dataclass

import numpy as np
from loguru import logger

from qrasim.core.model import (
    DeviceState,
    EpisodeStats,
    FrameResult,
    QTable,
    SimConfig,
    select_slots,
)
from qrasim.core.rewards import RewardScheme, UpdateBatch


@dataclass
class EpisodeOutcome:
    """Statistics of one episode and, on request, its final Q-table."""

    stats: EpisodeStats
    q_final: QTable | None = None


def episode_rng(master_seed: int, episode_index: int) -> np.random.Generator:
    """Independent stream for one episode, derived from the master seed.

    The stream depends only on (master_seed, episode_index), so the order in
    which workers run episodes cannot change any result.
    """
    if episode_index < 0:
        raise ValueError("episode_index must be non-negative")
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(episode_index,))
    return np.random.default_rng(seq)


def run_frame(
    q: QTable,
    devices: DeviceState,
    config: SimConfig,
    rng: np.random.Generator,
    scheme: RewardScheme | None = None,
) -> tuple[FrameResult, UpdateBatch]:
    """Play one frame without touching q or devices.

    Every active device picks a slot from its Q-row; each transmitting
    device gets exactly one update target computed from the frame outcome
    and its remaining packets before the frame.

    Raises:
        ValueError: If no device has packets left
    """
    scheme = scheme or RewardScheme.from_config(config)
    active = devices.active()
    if active.size == 0:
        raise ValueError("run_frame needs at least one active device")

    choices = select_slots(q.values[active], rng)
    counts = np.bincount(choices, minlength=config.n_slots)
    targets = scheme.targets(
        counts[choices],
        devices.remaining[active],
        config.n_devices,
        config.packets_per_device,
    )
    result = FrameResult(
        n_devices=config.n_devices, devices=active, choices=choices, counts=counts
    )
    return result, UpdateBatch(devices=active, slots=choices, targets=targets)


def run_episode(
    config: SimConfig, rng: np.random.Generator, keep_q: bool = False
) -> EpisodeOutcome:
    """Run frames until every device has delivered its packets or the cap is hit.

    Args:
        config: Scenario parameters
        rng: Random stream of this episode
        keep_q: Return the final Q-table as well

    Returns:
        Episode outcome; a capped episode reports converged=False
    """
    scheme = RewardScheme.from_config(config)
    q = QTable.zeros(config.n_devices, config.n_slots)
    devices = DeviceState.fresh(config.n_devices, config.packets_per_device)

    successes = failures = frames = 0
    while devices.total_remaining > 0 and frames < config.max_frames:
        frames += 1
        result, batch = run_frame(q, devices, config, rng, scheme)
        batch.apply(q.values, config.learning_rate)
        successes += result.successes
        failures += result.collided_transmissions
        devices.deliver(result.devices[result.counts[result.choices] == 1], frames)

    converged = devices.total_remaining == 0
    stats = EpisodeStats(
        total_successes=successes,
        total_failures=failures,
        total_slots=frames * config.n_slots,
        frames_used=frames,
        n_slots=config.n_slots,
        finish_frames=devices.finish_frame.tolist(),
        converged=converged,
    )
    if converged:
        logger.debug(
            f"Episode converged: {scheme.label} N={config.n_devices} K={config.n_slots} "
            f"frames={frames} S={successes} F={failures}"
        )
    else:
        logger.warning(
            f"Episode hit max_frames={config.max_frames} with "
            f"{devices.total_remaining} packets left ({scheme.label}, N={config.n_devices})"
        )
    return EpisodeOutcome(stats=stats, q_final=q if keep_q else None)
