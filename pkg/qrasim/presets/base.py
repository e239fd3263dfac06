"""Figure preset loading and management utilities."""

from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field

from qrasim.config import get_settings
from qrasim.core.model import SimConfig
from qrasim.core.rewards import RewardScheme
from qrasim.services.experiments import Axis, SweepSpec, devices_for_load

PRESET_NAMES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7")


class PresetTemplate(BaseModel):
    """Sweep preset as stored in YAML."""

    name: str = Field(..., description="Preset name")
    version: str = Field(..., description="Preset version")
    description: str | None = Field(None, description="Preset description")
    axis: Axis = Field(..., description="Swept parameter")
    grid: list[float] = Field(..., description="Axis values")
    schemes: list[RewardScheme] = Field(..., description="Reward schemes to compare")
    base: dict[str, Any] = Field(default_factory=dict, description="SimConfig fields")
    loading_factor: float | None = Field(1.0, description="Load of the base config")
    loading_factors: list[float] | None = Field(None, description="Extra load axis")
    reps: int | None = Field(None, ge=1, description="Episodes per point")

    def to_spec(
        self, reps: int | None = None, seed: int | None = None, max_frames: int | None = None
    ) -> SweepSpec:
        """Build the sweep spec, applying overrides.

        Args:
            reps: Episodes per grid point (defaults to the preset, then settings)
            seed: Master seed
            max_frames: Frame cap per episode
        """
        settings = get_settings()
        fields = dict(self.base)
        k = fields.get("n_slots", 400)
        fields["n_devices"] = devices_for_load(self.loading_factor or 1.0, k)
        fields.setdefault("max_frames", settings.default_max_frames)
        if seed is not None:
            fields["seed"] = seed
        if max_frames is not None:
            fields["max_frames"] = max_frames
        return SweepSpec(
            base=SimConfig(**fields),
            axis=self.axis,
            grid=self.grid,
            schemes=self.schemes,
            reps=reps or self.reps or settings.default_reps,
            loading_factors=self.loading_factors,
        )


class PresetLoader:
    """Load and manage sweep presets from YAML files."""

    def __init__(self, templates_dir: Path | str | None = None):
        """Initialize preset loader.

        Args:
            templates_dir: Directory containing preset YAML files.
                          Defaults to qrasim/presets/templates.
        """
        if templates_dir is None:
            templates_dir = Path(__file__).parent / "templates"
        self.templates_dir = Path(templates_dir)
        self._cache: dict[str, PresetTemplate] = {}

    def load(self, preset_name: str) -> PresetTemplate:
        """Load a preset by name.

        Args:
            preset_name: Name of the preset file (without .yaml extension)

        Returns:
            Loaded preset

        Raises:
            FileNotFoundError: If preset file doesn't exist
            ValueError: If preset YAML is invalid
        """
        if preset_name in self._cache:
            return self._cache[preset_name]

        preset_path = self.templates_dir / f"{preset_name}.yaml"
        if not preset_path.exists():
            raise FileNotFoundError(f"Preset not found: {preset_path}")

        with open(preset_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)

        template = PresetTemplate(**data)
        self._cache[preset_name] = template
        return template

    def clear_cache(self) -> None:
        """Clear the preset cache."""
        self._cache.clear()


# Global preset loader instance
_preset_loader: PresetLoader | None = None


def get_preset_loader() -> PresetLoader:
    """Get the global preset loader instance."""
    global _preset_loader
    if _preset_loader is None:
        _preset_loader = PresetLoader()
    return _preset_loader


def preset(
    name: str, reps: int | None = None, seed: int | None = None, max_frames: int | None = None
) -> SweepSpec:
    """Sweep spec of a figure preset.

    Raises:
        ValueError: If name is not a known preset
    """
    if name not in PRESET_NAMES:
        raise ValueError(f"Unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    return get_preset_loader().load(name).to_spec(reps=reps, seed=seed, max_frames=max_frames)
