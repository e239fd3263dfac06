"""Run manifest embedded in every result file."""

from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path
from typing import Any

import yaml
from jinja2 import Template
from pydantic import BaseModel, Field

from qrasim import __version__
from qrasim.services.experiments import SweepSpec

TEMPLATES_DIR = Path(__file__).parent / "templates"


class HeaderTemplate(BaseModel):
    """Jinja2 template for the comment header of a result file."""

    name: str = Field(..., description="Template name")
    version: str = Field(..., description="Template version")
    description: str | None = Field(None, description="Template description")
    template: str = Field(..., description="Jinja2 template string")
    variables: list[str] = Field(default_factory=list, description="Required variables")

    def render(self, **kwargs: Any) -> str:
        """Render the template with provided variables."""
        missing_vars = set(self.variables) - set(kwargs.keys())
        if missing_vars:
            raise ValueError(f"Missing required variables: {missing_vars}")
        return Template(self.template).render(**kwargs)


@lru_cache
def load_header_template(name: str = "manifest") -> HeaderTemplate:
    """Load a header template by name.

    Raises:
        FileNotFoundError: If the template file doesn't exist
    """
    path = TEMPLATES_DIR / f"{name}.yaml"
    if not path.exists():
        raise FileNotFoundError(f"Template not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        return HeaderTemplate(**yaml.safe_load(f))


class RunManifest(BaseModel):
    """What was run, with which seed and tool version."""

    command: str = Field(..., description="CLI command line")
    spec: SweepSpec = Field(..., description="Sweep as parsed")
    master_seed: int = Field(..., description="Master seed")
    tool_version: str = Field(default=__version__)
    timestamp: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))

    @classmethod
    def for_spec(cls, spec: SweepSpec, command: str) -> "RunManifest":
        return cls(command=command, spec=spec, master_seed=spec.base.seed)

    def scenario(self) -> dict[str, Any]:
        fields: dict[str, Any] = self.spec.base.model_dump(mode="json")
        fields["schemes"] = ", ".join(s.label for s in self.spec.schemes)
        fields["grid"] = ", ".join(f"{v:g}" for v in self.spec.grid)
        if self.spec.loading_factors:
            fields["loading_factors"] = ", ".join(f"{v:g}" for v in self.spec.loading_factors)
        return fields

    def header_lines(self) -> list[str]:
        """Manifest rendered as '#'-prefixed comment lines."""
        text = load_header_template().render(
            tool="qrasim",
            version=self.tool_version,
            timestamp=self.timestamp.isoformat().replace("+00:00", "Z"),
            command=self.command,
            seed=self.master_seed,
            reps=self.spec.reps,
            axis=self.spec.axis.value,
            scenario=self.scenario(),
        )
        return [f"# {line}".rstrip() for line in text.splitlines() if line.strip()]
