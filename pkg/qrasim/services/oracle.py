"""Exact expected latency of tiny single-packet scenarios.

With one packet per device, an active device has only ever collided, so each
of its Q-values is a function of how often that slot collided. When every
collision carries the same penalty the Q order, and with it the argmax set,
depends only on which slots sit one collision above the row minimum. The
chain state is that bitmask per device (or "finished"), and the expected
number of frames to absorption follows from one linear solve.
"""

import itertools
import math
from collections.abc import Iterator

import numpy as np
from loguru import logger
from scipy.linalg import solve

from qrasim.core.model import Scheme
from qrasim.core.rewards import RewardScheme

MAX_DEVICES = 3
MAX_SLOTS = 3
FINISHED = -1

State = tuple[int, ...]


def _candidates(mask: int, n_slots: int) -> list[int]:
    if mask == (1 << n_slots) - 1:
        return list(range(n_slots))
    return [k for k in range(n_slots) if not mask & (1 << k)]


def _collision_penalty(scheme: RewardScheme, n_devices: int) -> float:
    """The single collision penalty of the scenario, if there is one."""
    penalties = [
        scheme.collision_penalty(occupants, n_devices, remaining=1, total=1)
        for occupants in range(2, n_devices + 1)
    ]
    if not penalties:
        return 0.0
    if not np.allclose(penalties, penalties[0]):
        raise ValueError(
            f"Collision penalties {penalties} differ by collision size; "
            "slot order is not captured by collision counts"
        )
    return penalties[0]


def _transitions(
    state: State, n_slots: int, penalized: bool, full_step: bool
) -> Iterator[tuple[State, float]]:
    full = (1 << n_slots) - 1
    active = [n for n, mask in enumerate(state) if mask != FINISHED]
    options = [_candidates(state[n], n_slots) for n in active]
    weight = 1.0 / float(np.prod([len(o) for o in options]))

    for picks in itertools.product(*options):
        counts = np.bincount(picks, minlength=n_slots)
        nxt = list(state)
        for device, slot in zip(active, picks):
            if counts[slot] == 1:
                nxt[device] = FINISHED
            elif penalized:
                mask = state[device] | (1 << slot)
                # a full step leaves every collided slot at the same value
                nxt[device] = 0 if mask == full and not full_step else mask
        yield tuple(nxt), weight


def _absorbing_from_all(
    index: dict[State, int], edges: list[tuple[int, State, float]], done: State
) -> bool:
    """True when every transient state can reach the all-finished state."""
    states = {row: state for state, row in index.items()}
    parents: dict[State, set[State]] = {}
    for row, nxt, _ in edges:
        parents.setdefault(nxt, set()).add(states[row])
    reached = {done}
    frontier = [done]
    while frontier:
        for parent in parents.get(frontier.pop(), ()):
            if parent not in reached:
                reached.add(parent)
                frontier.append(parent)
    return all(state in reached for state in index)


def markov_oracle(
    n_devices: int,
    n_slots: int,
    packets_per_device: int = 1,
    scheme: Scheme | str = Scheme.PACKET_BASED,
    alpha: float = 0.1,
    quant_bits: int = 4,
) -> float:
    """Exact expected total slots T until every device has delivered.

    Every alpha in (0, 1) gives the same result, since the slot order for a
    given collision history does not depend on it. With alpha = 1 a slot
    that collided once ties with one that collided many times.

    Args:
        n_devices: N, at most 3
        n_slots: K, at most 3
        packets_per_device: L, must be 1
        scheme: Reward scheme
        alpha: Learning rate in (0, 1]
        quant_bits: Quantizer bits of the collaborative scheme

    Returns:
        Expected total slots, K times the expected number of frames

    Raises:
        ValueError: If the scenario is outside the exactly solvable range
    """
    if not 1 <= n_devices <= MAX_DEVICES or not 1 <= n_slots <= MAX_SLOTS:
        raise ValueError(
            f"State space too large: oracle supports N <= {MAX_DEVICES} and K <= {MAX_SLOTS}"
        )
    if packets_per_device != 1:
        raise ValueError("State space too large: oracle supports L = 1 only")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")

    kind = Scheme.parse(scheme)
    reward = RewardScheme(
        kind=kind, quant_bits=quant_bits if kind is Scheme.COLLABORATIVE else None
    )
    penalized = _collision_penalty(reward, n_devices) > 0.0

    start: State = (0,) * n_devices
    done: State = (FINISHED,) * n_devices
    index: dict[State, int] = {}
    edges: list[tuple[int, State, float]] = []
    queue = [start]
    while queue:
        state = queue.pop()
        if state in index or state == done:
            continue
        index[state] = len(index)
        for nxt, p in _transitions(state, n_slots, penalized, full_step=alpha == 1.0):
            edges.append((index[state], nxt, p))
            if nxt not in index and nxt != done:
                queue.append(nxt)

    if not _absorbing_from_all(index, edges, done):
        logger.warning(f"Oracle {reward.label} N={n_devices} K={n_slots}: some state never converges")
        return math.inf

    size = len(index)
    system = np.eye(size)
    for row, nxt, p in edges:
        if nxt != done:
            system[row, index[nxt]] -= p
    frames = solve(system, np.ones(size))
    expected = n_slots * float(frames[index[start]])
    logger.debug(
        f"Oracle {reward.label} N={n_devices} K={n_slots}: {size} transient states, E[T]={expected:.6f}"
    )
    return expected
