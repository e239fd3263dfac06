"""Domain types and frame mechanics of the slotted random access channel.

Slot and device indices are 0-based in code; documentation and CSV output
count from 1.
"""

from collections.abc import Collection, Sequence
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

DEFAULT_COLLABORATIVE_BITS = 4
MAX_SEED = 2**64 - 1


class Scheme(str, Enum):
    """Reward rule used by the central node and the devices."""

    INDEPENDENT = "independent"
    COLLABORATIVE = "collaborative"
    PACKET_BASED = "packet"

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        """Parse a scheme name, accepting a few spellings."""
        if isinstance(value, Scheme):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "ind": cls.INDEPENDENT,
            "independent": cls.INDEPENDENT,
            "col": cls.COLLABORATIVE,
            "collaborative": cls.COLLABORATIVE,
            "pac": cls.PACKET_BASED,
            "packet": cls.PACKET_BASED,
            "packet_based": cls.PACKET_BASED,
            "packetbased": cls.PACKET_BASED,
        }
        if key not in aliases:
            raise ValueError(f"Unknown scheme: {value!r}")
        return aliases[key]


class SlotOutcome(str, Enum):
    """What happened in one time-slot."""

    IDLE = "idle"
    SUCCESS = "success"
    COLLISION = "collision"


class SimConfig(BaseModel):
    """All parameters of one simulated scenario."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_devices: int = Field(..., ge=1, description="Number of devices N")
    n_slots: int = Field(default=400, ge=1, description="Time-slots per frame K")
    packets_per_device: int = Field(default=100, ge=1, description="Packets per device L")
    learning_rate: float = Field(default=0.1, description="Learning rate alpha in (0, 1]")
    payload_bits: int = Field(default=64, ge=1, description="Payload bits p")
    header_bits: int = Field(default=1, ge=1, description="Reward header bits b")
    scheme: Scheme = Field(default=Scheme.PACKET_BASED, description="Reward scheme")
    max_frames: int = Field(default=1_000_000, ge=1, description="Frame cap per episode")
    seed: int = Field(default=0, ge=0, le=MAX_SEED, description="Master seed")

    @model_validator(mode="before")
    @classmethod
    def default_header_bits(cls, data: Any) -> Any:
        """Collaborative defaults to a 4-bit header, the other schemes to 1 bit."""
        if isinstance(data, dict) and data.get("header_bits") is None:
            data = dict(data)
            scheme = Scheme.parse(data.get("scheme", Scheme.PACKET_BASED))
            data["header_bits"] = (
                DEFAULT_COLLABORATIVE_BITS if scheme is Scheme.COLLABORATIVE else 1
            )
        return data

    @field_validator("scheme", mode="before")
    @classmethod
    def parse_scheme(cls, v: Any) -> Scheme:
        """Accept scheme aliases such as 'pac' or 'packet_based'."""
        return Scheme.parse(v)

    @field_validator("learning_rate")
    @classmethod
    def check_learning_rate(cls, v: float) -> float:
        """learning_rate must lie in (0, 1]."""
        if not (0.0 < v <= 1.0):
            raise ValueError("learning_rate must lie in (0, 1]")
        return v

    @model_validator(mode="after")
    def check_binary_reward(self) -> "SimConfig":
        """Independent and packet-based rewards are a single bit."""
        if self.scheme is not Scheme.COLLABORATIVE and self.header_bits != 1:
            raise ValueError(
                f"header_bits must be 1 for the {self.scheme.value} scheme (binary reward)"
            )
        return self

    @property
    def loading_factor(self) -> float:
        """Devices per slot, N / K."""
        return self.n_devices / self.n_slots

    @property
    def throughput_ceiling(self) -> float:
        """Payload share of each transmission, p / (b + p)."""
        return self.payload_bits / (self.header_bits + self.payload_bits)


@dataclass
class QTable:
    """Per-device slot preferences, one row per device."""

    values: np.ndarray

    @classmethod
    def zeros(cls, n_devices: int, n_slots: int) -> "QTable":
        """Create an all-zero table."""
        if n_devices < 1 or n_slots < 1:
            raise ValueError("QTable needs at least one device and one slot")
        return cls(np.zeros((n_devices, n_slots), dtype=np.float64))

    @property
    def n_devices(self) -> int:
        return self.values.shape[0]

    @property
    def n_slots(self) -> int:
        return self.values.shape[1]


@dataclass
class DeviceState:
    """Remaining packets per device and the frame each device finished in."""

    remaining: np.ndarray
    finish_frame: np.ndarray | None = None  # -1 while unfinished

    def __post_init__(self) -> None:
        if self.finish_frame is None:
            self.finish_frame = np.full(self.remaining.shape, -1, dtype=np.int64)

    @classmethod
    def fresh(cls, n_devices: int, packets_per_device: int) -> "DeviceState":
        """All devices hold their full packet load."""
        return cls(np.full(n_devices, packets_per_device, dtype=np.int64))

    def active(self) -> np.ndarray:
        """Indices of devices with packets left."""
        return np.flatnonzero(self.remaining > 0)

    @property
    def total_remaining(self) -> int:
        return int(self.remaining.sum())

    def deliver(self, devices: np.ndarray, frame: int) -> None:
        """Record one delivered packet for each listed device."""
        if devices.size == 0:
            return
        if np.any(self.remaining[devices] <= 0):
            raise RuntimeError("Finished device cannot deliver another packet")
        self.remaining[devices] -= 1
        done = devices[self.remaining[devices] == 0]
        self.finish_frame[done] = frame


@dataclass(frozen=True)
class FrameResult:
    """Outcome of one frame: who chose which slot and how each slot ended."""

    n_devices: int
    devices: np.ndarray  # active device indices
    choices: np.ndarray  # chosen slot per active device
    counts: np.ndarray  # |psi_k| per slot

    @property
    def successes(self) -> int:
        return int(np.count_nonzero(self.counts == 1))

    @property
    def collisions(self) -> int:
        return int(np.count_nonzero(self.counts > 1))

    @property
    def collided_transmissions(self) -> int:
        return int(self.counts[self.counts > 1].sum())

    @cached_property
    def occupancy(self) -> list[list[int]]:
        per_device: list[int | None] = [None] * self.n_devices
        for device, slot in zip(self.devices.tolist(), self.choices.tolist()):
            per_device[device] = slot
        return build_occupancy(per_device, len(self.counts))


class EpisodeStats(BaseModel):
    """Counters collected until convergence or the frame cap."""

    model_config = ConfigDict(frozen=True)

    total_successes: int = Field(..., ge=0, description="S")
    total_failures: int = Field(..., ge=0, description="F, collided transmissions")
    total_slots: int = Field(..., ge=0, description="T")
    frames_used: int = Field(..., ge=0)
    n_slots: int = Field(..., ge=1)
    finish_frames: list[int] = Field(default_factory=list, description="-1 if unfinished")
    converged: bool

    @model_validator(mode="after")
    def check_slot_count(self) -> "EpisodeStats":
        if self.total_slots != self.frames_used * self.n_slots:
            raise ValueError("total_slots must equal frames_used * n_slots")
        return self

    @property
    def total_transmissions(self) -> int:
        """S + F."""
        return self.total_successes + self.total_failures


def select_slots(q_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Pick the argmax slot of every row, breaking ties uniformly at random."""
    q_rows = np.asarray(q_rows, dtype=np.float64)
    if q_rows.ndim != 2 or q_rows.shape[1] == 0:
        raise ValueError("Q rows must be a 2-D array with at least one slot")
    ties = q_rows == q_rows.max(axis=1, keepdims=True)
    choices = ties.argmax(axis=1)
    tied = np.count_nonzero(ties, axis=1) > 1
    if tied.any():
        candidates = ties[tied]
        keys = rng.random(candidates.shape)
        keys[~candidates] = -1.0
        choices[tied] = keys.argmax(axis=1)
    return choices


def select_slot(q_row: Sequence[float] | np.ndarray, rng: np.random.Generator) -> int:
    """Pick the slot with the highest Q-value; ties are uniform.

    Args:
        q_row: Q-values of one device, one entry per slot
        rng: Random stream

    Returns:
        Index of the chosen slot

    Raises:
        ValueError: If the row is empty or holds non-finite values
    """
    row = np.asarray(q_row, dtype=np.float64)
    if row.ndim != 1 or row.size == 0:
        raise ValueError("Q row must hold at least one slot")
    if not np.all(np.isfinite(row)):
        raise ValueError("Q row must hold finite values")
    return int(select_slots(row[np.newaxis, :], rng)[0])


def build_occupancy(choices: Sequence[int | None], n_slots: int) -> list[list[int]]:
    """Group devices by chosen slot; devices without a choice appear nowhere.

    Raises:
        ValueError: If a choice falls outside [0, n_slots)
    """
    occupancy: list[list[int]] = [[] for _ in range(n_slots)]
    for device, slot in enumerate(choices):
        if slot is None:
            continue
        if not 0 <= slot < n_slots:
            raise ValueError(f"Device {device} chose slot {slot}, outside [0, {n_slots})")
        occupancy[slot].append(device)
    return occupancy


def classify_count(occupants: int) -> SlotOutcome:
    if occupants == 0:
        return SlotOutcome.IDLE
    if occupants == 1:
        return SlotOutcome.SUCCESS
    return SlotOutcome.COLLISION


def classify_slot(occupants: Collection[int]) -> SlotOutcome:
    """Idle, success or collision, from the number of occupants alone."""
    return classify_count(len(occupants))
