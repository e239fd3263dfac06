"""Tests for the episode engine."""

import numpy as np
import pytest

from qrasim.core.engine import episode_rng, run_episode, run_frame
from qrasim.core.model import DeviceState, QTable, Scheme, SimConfig
from qrasim.core.rewards import RewardScheme

ALL_SCHEMES = [Scheme.INDEPENDENT, Scheme.COLLABORATIVE, Scheme.PACKET_BASED]


def mean_slots(config: SimConfig, episodes: int) -> float:
    total = 0
    for i in range(episodes):
        total += run_episode(config, episode_rng(config.seed, i)).stats.total_slots
    return total / episodes


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
def test_lone_device_never_collides(scheme):
    config = SimConfig(n_devices=1, n_slots=1, packets_per_device=5, scheme=scheme)

    stats = run_episode(config, episode_rng(0, 0)).stats

    assert stats.converged
    assert stats.frames_used == 5
    assert stats.total_successes == 5
    assert stats.total_failures == 0
    assert stats.total_slots == 5
    assert stats.finish_frames == [5]


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
def test_two_devices_one_slot_never_converge(scheme):
    config = SimConfig(
        n_devices=2, n_slots=1, packets_per_device=1, scheme=scheme, max_frames=50
    )

    stats = run_episode(config, episode_rng(0, 0)).stats

    assert not stats.converged
    assert stats.frames_used == 50
    assert stats.total_slots == 50
    assert stats.total_successes == 0
    assert stats.total_failures == 100
    assert stats.finish_frames == [-1, -1]


def test_packet_based_single_packet_expected_latency():
    """Two devices, two slots, one packet: E[T] = 4 slots."""
    config = SimConfig(n_devices=2, n_slots=2, packets_per_device=1, scheme="packet", seed=3)

    assert mean_slots(config, 10_000) == pytest.approx(4.0, rel=0.03)


def test_independent_single_packet_expected_latency():
    """A collision forces one more collision before the Q-values tie again: E[T] = 6."""
    config = SimConfig(n_devices=2, n_slots=2, packets_per_device=1, scheme="independent", seed=3)

    assert mean_slots(config, 10_000) == pytest.approx(6.0, rel=0.03)


def test_packet_based_single_packet_keeps_q_at_zero():
    """With L = 1 every collision target is 0, so Q never leaves 0 before success."""
    config = SimConfig(n_devices=2, n_slots=2, packets_per_device=1, scheme="packet", learning_rate=0.3)

    for i in range(50):
        outcome = run_episode(config, episode_rng(11, i), keep_q=True)
        q = outcome.q_final.values
        assert np.all((q == 0.0) | np.isclose(q, 0.3))
        assert outcome.stats.finish_frames[0] == outcome.stats.finish_frames[1]


def test_episode_is_deterministic(small_config):
    first = run_episode(small_config, episode_rng(small_config.seed, 4)).stats
    second = run_episode(small_config, episode_rng(small_config.seed, 4)).stats

    assert first == second


def test_episode_streams_differ(small_config):
    a = [run_episode(small_config, episode_rng(1, i)).stats.total_slots for i in range(20)]

    assert len(set(a)) > 1


def test_episode_rng_rejects_negative_index():
    with pytest.raises(ValueError):
        episode_rng(0, -1)


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
def test_episode_invariants(scheme):
    config = SimConfig(
        n_devices=30, n_slots=20, packets_per_device=6, scheme=scheme, learning_rate=0.2, seed=5
    )

    outcome = run_episode(config, episode_rng(config.seed, 0), keep_q=True)
    stats = outcome.stats

    assert stats.converged
    assert stats.total_successes == config.n_devices * config.packets_per_device
    assert stats.total_slots == stats.frames_used * config.n_slots
    assert stats.total_successes <= stats.frames_used * min(config.n_devices, config.n_slots)
    assert all(1 <= f <= stats.frames_used for f in stats.finish_frames)
    assert max(stats.finish_frames) == stats.frames_used
    assert np.all(np.abs(outcome.q_final.values) <= 1.0)


@pytest.mark.parametrize("scheme", ALL_SCHEMES)
def test_frame_by_frame_invariants(scheme):
    """Occupancy covers every active device; remaining drops by at most one per frame."""
    config = SimConfig(n_devices=12, n_slots=8, packets_per_device=5, scheme=scheme, seed=9)
    reward = RewardScheme.from_config(config)
    rng = episode_rng(config.seed, 0)
    q = QTable.zeros(config.n_devices, config.n_slots)
    devices = DeviceState.fresh(config.n_devices, config.packets_per_device)

    frame = 0
    while devices.total_remaining and frame < 1000:
        frame += 1
        before = devices.remaining.copy()
        result, batch = run_frame(q, devices, config, rng, reward)

        assert sum(len(slot) for slot in result.occupancy) == devices.active().size
        assert len(batch) == devices.active().size
        assert result.successes <= min(config.n_slots, devices.active().size)

        batch.apply(q.values, config.learning_rate)
        devices.deliver(result.devices[result.counts[result.choices] == 1], frame)

        drop = before - devices.remaining
        assert np.all((drop == 0) | (drop == 1))
        assert np.all(np.abs(q.values) <= 1.0)

    assert devices.total_remaining == 0


def test_run_frame_reproducible_choices():
    config = SimConfig(n_devices=8, n_slots=6, packets_per_device=3, seed=42)
    q = QTable.zeros(8, 6)
    devices = DeviceState.fresh(8, 3)

    first, _ = run_frame(q, devices, config, episode_rng(42, 0))
    second, _ = run_frame(q, devices, config, episode_rng(42, 0))

    assert first.choices.tolist() == second.choices.tolist()


def test_run_frame_single_active_device_succeeds():
    config = SimConfig(n_devices=3, n_slots=4, packets_per_device=2, scheme="independent")
    devices = DeviceState(remaining=np.array([0, 2, 0]))

    result, batch = run_frame(QTable.zeros(3, 4), devices, config, episode_rng(0, 0))
    targets = list(batch)

    assert result.successes == 1
    assert len(targets) == 1
    assert targets[0].device == 1
    assert targets[0].target == 1.0


def test_run_frame_forced_collision():
    config = SimConfig(n_devices=2, n_slots=3, packets_per_device=4, scheme="independent")
    q = QTable.zeros(2, 3)
    q.values[:, 1] = 0.5

    result, batch = run_frame(q, DeviceState.fresh(2, 4), config, episode_rng(0, 0))

    assert result.collisions == 1
    assert [t.slot for t in batch] == [1, 1]
    assert [t.target for t in batch] == [-1.0, -1.0]


def test_run_frame_collaborative_penalty():
    config = SimConfig(n_devices=4, n_slots=3, packets_per_device=4, scheme="collaborative", header_bits=2)
    q = QTable.zeros(4, 3)
    q.values[:2, 0] = 0.5  # devices 0 and 1 collide in slot 0
    q.values[2, 1] = 0.5
    q.values[3, 2] = 0.5

    _, batch = run_frame(q, DeviceState.fresh(4, 4), config, episode_rng(0, 0))

    assert [t.target for t in batch] == [-0.5, -0.5, 1.0, 1.0]


def test_run_frame_packet_based_uses_prior_remaining():
    config = SimConfig(n_devices=2, n_slots=2, packets_per_device=4, scheme="packet")
    q = QTable.zeros(2, 2)
    q.values[:, 0] = 0.5

    _, batch = run_frame(q, DeviceState(remaining=np.array([1, 3])), config, episode_rng(0, 0))

    assert [t.target for t in batch] == [-0.75, -0.25]


def test_run_frame_needs_active_device():
    config = SimConfig(n_devices=2, n_slots=2, packets_per_device=1)

    with pytest.raises(ValueError, match="active"):
        run_frame(QTable.zeros(2, 2), DeviceState(remaining=np.array([0, 0])), config, episode_rng(0, 0))
