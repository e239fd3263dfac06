"""Tests for reward rules and the Q update."""

import numpy as np
import pytest

from qrasim.core.model import Scheme, SimConfig, SlotOutcome
from qrasim.core.rewards import (
    RewardScheme,
    UpdateBatch,
    UpdateTarget,
    apply_update,
    collaborative_reward,
    congestion_level,
    epsilon_factor,
    independent_reward,
    packet_based_target,
    quantize_congestion,
)

SUCCESS = SlotOutcome.SUCCESS
COLLISION = SlotOutcome.COLLISION


def test_independent_reward():
    assert independent_reward(SUCCESS) == 1.0
    assert independent_reward(COLLISION) == -1.0


def test_independent_reward_applied():
    assert apply_update(0.0, 0.1, independent_reward(COLLISION)) == pytest.approx(-0.1)


def test_independent_reward_rejects_idle():
    with pytest.raises(ValueError, match="Idle"):
        independent_reward(SlotOutcome.IDLE)


@pytest.mark.parametrize(
    "occupants, n, expected",
    [(2, 8, 0.25), (8, 8, 1.0), (3, 400, 0.0075)],
)
def test_congestion_level(occupants, n, expected):
    assert congestion_level(occupants, n) == pytest.approx(expected)


def test_congestion_level_idle_slot():
    with pytest.raises(ValueError, match="idle"):
        congestion_level(0, 8)


def test_quantizer_level_set():
    """Two bits give the levels 0.25, 0.5, 0.75 and 1."""
    levels = {quantize_congestion(c, 2) for c in np.linspace(0.01, 1.0, 200)}

    assert levels == {0.25, 0.5, 0.75, 1.0}


def test_quantizer_rounds_up():
    assert quantize_congestion(0.25, 2) == 0.25
    assert quantize_congestion(0.26, 2) == 0.5


@pytest.mark.parametrize("c", [0.0, -0.2, 1.01])
def test_quantizer_rejects_out_of_range(c):
    with pytest.raises(ValueError, match=r"\(0, 1\]"):
        quantize_congestion(c, 4)


def test_quantizer_monotone_and_conservative():
    c = np.linspace(1e-4, 1.0, 5000)
    for bits in (1, 2, 4, 8, 16):
        q = quantize_congestion(c, bits)
        assert np.all(np.diff(q) >= 0)
        assert np.all(q >= c)


def test_collaborative_reward():
    assert collaborative_reward(SUCCESS, 0.5, 4) == 1.0
    assert collaborative_reward(COLLISION, 2 / 8, 2) == -0.25
    for bits in (1, 4, 16):
        assert collaborative_reward(COLLISION, 1.0, bits) == -1.0


def test_collaborative_penalty_never_exceeds_independent():
    """Only a collision of all N devices earns the full -1 penalty."""
    n = 12
    for occupants in range(2, n + 1):
        penalty = abs(collaborative_reward(COLLISION, congestion_level(occupants, n), 4))
        assert penalty <= abs(independent_reward(COLLISION))
        assert (penalty == 1.0) == (occupants == n)


@pytest.mark.parametrize(
    "remaining, total, expected",
    [(100, 100, 0.0), (0, 100, 1.0), (25, 100, 0.75)],
)
def test_epsilon_factor(remaining, total, expected):
    assert epsilon_factor(remaining, total) == pytest.approx(expected)


def test_packet_based_collision_with_full_queue_keeps_q():
    target = packet_based_target(COLLISION, 100, 100)

    assert target == 0.0
    assert apply_update(0.0, 0.1, target) == 0.0
    assert apply_update(0.4, 0.1, target) == pytest.approx(0.9 * 0.4)


def test_packet_based_collision_arithmetic():
    target = packet_based_target(COLLISION, 25, 100)

    assert apply_update(0.5, 0.1, target) == pytest.approx(0.375)


def test_packet_based_success():
    assert apply_update(0.0, 0.1, packet_based_target(SUCCESS, 10, 100)) == pytest.approx(0.1)


def test_packet_based_favours_longer_queue():
    """Equal Q, more packets left: smaller penalty, higher Q after collision."""
    q, alpha, total = 0.2, 0.1, 100
    for fewer in range(0, total):
        more = fewer + 1
        after_more = apply_update(q, alpha, packet_based_target(COLLISION, more, total))
        after_fewer = apply_update(q, alpha, packet_based_target(COLLISION, fewer, total))
        assert after_more > after_fewer


@pytest.mark.parametrize(
    "q, alpha, target, expected",
    [(0.0, 0.1, 1.0, 0.1), (0.1, 0.1, -1.0, -0.01), (0.73, 1.0, -0.4, -0.4)],
)
def test_apply_update(q, alpha, target, expected):
    assert apply_update(q, alpha, target) == pytest.approx(expected)


def test_apply_update_contracts_toward_target(rng):
    q = rng.uniform(-1, 1, 1000)
    target = rng.uniform(-1, 1, 1000)
    alpha = rng.uniform(0.01, 1, 1000)

    updated = apply_update(q, alpha, target)

    assert np.allclose(np.abs(updated - target), (1 - alpha) * np.abs(q - target))


def test_apply_update_stays_in_unit_interval(rng):
    """Any sequence of updates toward targets in [-1, 1] keeps Q in [-1, 1]."""
    q = np.zeros(500)
    for _ in range(2000):
        alpha = rng.uniform(1e-3, 1.0)
        target = rng.choice([-1.0, 1.0, 0.0]) * rng.uniform(0, 1, q.size)
        q = apply_update(q, alpha, target)
        assert np.all(np.abs(q) <= 1.0)


def test_reward_scheme_from_config():
    col = RewardScheme.from_config(SimConfig(n_devices=4, scheme="collaborative", header_bits=8))
    pac = RewardScheme.from_config(SimConfig(n_devices=4, scheme="packet"))

    assert col.quant_bits == 8
    assert col.label == "collaborative(b=8)"
    assert pac.quant_bits is None
    assert pac.label == "packet"


def test_reward_scheme_requires_bits_for_collaborative():
    with pytest.raises(ValueError, match="quant_bits"):
        RewardScheme(kind=Scheme.COLLABORATIVE)


@pytest.mark.parametrize(
    "scheme",
    [
        RewardScheme(kind=Scheme.INDEPENDENT),
        RewardScheme(kind=Scheme.COLLABORATIVE, quant_bits=2),
        RewardScheme(kind=Scheme.PACKET_BASED),
    ],
)
def test_batch_targets_match_scalar_rule(scheme):
    n, total = 8, 10
    occupants = np.array([1, 2, 2, 3, 1, 8])
    remaining = np.array([10, 7, 3, 1, 5, 10])

    batch = scheme.targets(occupants, remaining, n, total)

    for occ, rem, target in zip(occupants, remaining, batch):
        outcome = SUCCESS if occ == 1 else COLLISION
        assert target == pytest.approx(scheme.target(outcome, occ, rem, n, total))
        assert -1.0 <= target <= 1.0


def test_update_batch_applies_and_iterates():
    values = np.zeros((3, 2))
    batch = UpdateBatch(
        devices=np.array([0, 2]), slots=np.array([1, 0]), targets=np.array([1.0, -1.0])
    )

    batch.apply(values, 0.5)

    assert len(batch) == 2
    assert list(batch) == [UpdateTarget(0, 1, 1.0), UpdateTarget(2, 0, -1.0)]
    assert values.tolist() == [[0.0, 0.5], [0.0, 0.0], [-0.5, 0.0]]
