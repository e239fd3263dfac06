"""Reward rules and the Q-value update shared by all schemes.

Every scheme reduces to a target value in [-1, 1] per transmitting device;
the update then steps the device's Q-value for its chosen slot toward that
target. Functions accept scalars or numpy arrays.
"""

from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from pydantic import BaseModel, ConfigDict, Field, model_validator

from qrasim.core.model import Scheme, SimConfig, SlotOutcome

SUCCESS_TARGET = 1.0


def _is_success(outcome: SlotOutcome) -> bool:
    if outcome is SlotOutcome.IDLE:
        raise ValueError("Idle is not an outcome of a transmission")
    return outcome is SlotOutcome.SUCCESS


def independent_reward(outcome: SlotOutcome) -> float:
    """+1 on success, -1 on collision."""
    return SUCCESS_TARGET if _is_success(outcome) else -1.0


def congestion_level(occupants: ArrayLike, n_devices: int) -> np.ndarray | float:
    """Share of all devices that chose the slot, |psi_k| / N.

    Raises:
        ValueError: If occupants is outside [1, n_devices]
    """
    occ = np.asarray(occupants)
    if np.any(occ < 1) or np.any(occ > n_devices):
        raise ValueError(f"occupants must lie in [1, {n_devices}]; idle slots have no congestion")
    level = occ / n_devices
    return float(level) if level.ndim == 0 else level


def quantize_congestion(c: ArrayLike, bits: int) -> np.ndarray | float:
    """Round a congestion level up onto the 2**bits levels i / 2**bits, i >= 1.

    Raises:
        ValueError: If bits < 1 or c is outside (0, 1]
    """
    if bits < 1:
        raise ValueError("bits must be at least 1")
    arr = np.asarray(c, dtype=np.float64)
    if np.any(arr <= 0.0) or np.any(arr > 1.0):
        raise ValueError("congestion level must lie in (0, 1]")
    levels = float(2**bits)
    quantized = np.ceil(arr * levels) / levels
    return float(quantized) if quantized.ndim == 0 else quantized


def collaborative_reward(outcome: SlotOutcome, c: float, bits: int) -> float:
    """+1 on success, minus the quantized congestion level on collision."""
    if _is_success(outcome):
        return SUCCESS_TARGET
    return -quantize_congestion(c, bits)


def epsilon_factor(remaining: ArrayLike, total: int) -> np.ndarray | float:
    """Share of a device's packets already delivered, 1 - remaining / total."""
    if total < 1:
        raise ValueError("total packets must be at least 1")
    rem = np.asarray(remaining)
    if np.any(rem < 0) or np.any(rem > total):
        raise ValueError(f"remaining must lie in [0, {total}]")
    eps = 1.0 - rem / total
    return float(eps) if eps.ndim == 0 else eps


def packet_based_target(outcome: SlotOutcome, remaining: int, total: int) -> float:
    """+1 on success; -epsilon on collision, using the pre-frame remaining count."""
    if _is_success(outcome):
        return SUCCESS_TARGET
    return -epsilon_factor(remaining, total)


def apply_update(q: ArrayLike, alpha: float, target: ArrayLike) -> np.ndarray | float:
    """Step q toward target by a fraction alpha: q + alpha * (target - q)."""
    q_arr = np.asarray(q, dtype=np.float64)
    updated = q_arr + alpha * (np.asarray(target, dtype=np.float64) - q_arr)
    return float(updated) if updated.ndim == 0 else updated


class RewardScheme(BaseModel):
    """Scheme selector plus the quantizer resolution of the collaborative rule."""

    model_config = ConfigDict(frozen=True)

    kind: Scheme
    quant_bits: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def check_bits(self) -> "RewardScheme":
        if self.kind is Scheme.COLLABORATIVE and self.quant_bits is None:
            raise ValueError("collaborative scheme needs quant_bits")
        return self

    @classmethod
    def from_config(cls, config: SimConfig) -> "RewardScheme":
        bits = config.header_bits if config.scheme is Scheme.COLLABORATIVE else None
        return cls(kind=config.scheme, quant_bits=bits)

    @property
    def label(self) -> str:
        if self.kind is Scheme.COLLABORATIVE:
            return f"{self.kind.value}(b={self.quant_bits})"
        return self.kind.value

    def target(
        self, outcome: SlotOutcome, occupants: int, remaining: int, n_devices: int, total: int
    ) -> float:
        """Target for one transmitting device."""
        match self.kind:
            case Scheme.INDEPENDENT:
                return independent_reward(outcome)
            case Scheme.COLLABORATIVE:
                if _is_success(outcome):
                    return SUCCESS_TARGET
                return collaborative_reward(
                    outcome, congestion_level(occupants, n_devices), self.quant_bits
                )
            case Scheme.PACKET_BASED:
                return packet_based_target(outcome, remaining, total)
            case _:
                raise ValueError(f"Unsupported scheme: {self.kind}")

    def targets(
        self,
        occupants: np.ndarray,
        remaining: np.ndarray,
        n_devices: int,
        total: int,
    ) -> np.ndarray:
        """Targets for a batch of transmitting devices.

        Args:
            occupants: |psi_k| of the slot each device chose
            remaining: Each device's remaining packets before this frame
            n_devices: N, the congestion denominator
            total: L, packets per device

        Returns:
            One target per device
        """
        success = occupants == 1
        match self.kind:
            case Scheme.INDEPENDENT:
                penalty = np.ones(occupants.shape)
            case Scheme.COLLABORATIVE:
                penalty = quantize_congestion(congestion_level(occupants, n_devices), self.quant_bits)
            case Scheme.PACKET_BASED:
                penalty = epsilon_factor(remaining, total)
            case _:
                raise ValueError(f"Unsupported scheme: {self.kind}")
        return np.where(success, SUCCESS_TARGET, -np.asarray(penalty, dtype=np.float64))

    def collision_penalty(self, occupants: int, n_devices: int, remaining: int, total: int) -> float:
        """Magnitude of the collision target for one device."""
        return -self.target(SlotOutcome.COLLISION, occupants, remaining, n_devices, total)


@dataclass(frozen=True)
class UpdateTarget:
    """One Q-table step: move Q[device, slot] toward target."""

    device: int
    slot: int
    target: float


@dataclass(frozen=True)
class UpdateBatch:
    """Update targets of one frame, stored column-wise."""

    devices: np.ndarray
    slots: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return int(self.devices.size)

    def __iter__(self) -> Iterator[UpdateTarget]:
        for device, slot, target in zip(
            self.devices.tolist(), self.slots.tolist(), self.targets.tolist()
        ):
            yield UpdateTarget(device=device, slot=slot, target=target)

    def apply(self, values: np.ndarray, alpha: float) -> None:
        """Apply every update in place; each (device, slot) appears at most once."""
        values[self.devices, self.slots] = apply_update(
            values[self.devices, self.slots], alpha, self.targets
        )
