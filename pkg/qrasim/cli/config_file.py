"""Flat `key = value` scenario files."""

from pathlib import Path
from typing import Any

from loguru import logger
from pydantic import ValidationError

from qrasim.config import get_settings
from qrasim.core.model import Scheme, SimConfig
from qrasim.core.rewards import RewardScheme
from qrasim.services.experiments import Axis, SweepSpec, devices_for_load

INT_KEYS = {
    "n_devices",
    "n_slots",
    "packets_per_device",
    "payload_bits",
    "header_bits",
    "max_frames",
    "reps",
    "seed",
}
FLOAT_KEYS = {"loading_factor", "learning_rate"}
TEXT_KEYS = {"scheme", "axis", "grid", "schemes"}
KNOWN_KEYS = INT_KEYS | FLOAT_KEYS | TEXT_KEYS

DEFAULT_SLOTS = 400


class ConfigError(ValueError):
    """Scenario file problem, tied to a field and, when known, a line."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


def _convert(key: str, raw: str, line: int) -> Any:
    try:
        if key in INT_KEYS:
            number = float(raw)
            if not number.is_integer():
                raise ValueError
            return int(number)
        if key in FLOAT_KEYS:
            return float(raw)
    except ValueError:
        kind = "an integer" if key in INT_KEYS else "a number"
        raise ConfigError(f"expected {kind}, got {raw!r}", field=key, line=line) from None
    return raw


def read_pairs(text: str) -> tuple[dict[str, Any], dict[str, int]]:
    """Parse `key = value` lines; '#' starts a comment.

    Returns:
        Values by key and the line each key was found on
    """
    values: dict[str, Any] = {}
    lines: dict[str, int] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        content = raw_line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"expected 'key = value', got {content!r}", line=number)
        key, raw = (part.strip() for part in content.split("=", 1))
        key = key.lower()
        if key not in KNOWN_KEYS:
            raise ConfigError("unknown key", field=key, line=number)
        if key in values:
            raise ConfigError(f"duplicate key (first on line {lines[key]})", field=key, line=number)
        if not raw:
            raise ConfigError("missing value", field=key, line=number)
        values[key] = _convert(key, raw, number)
        lines[key] = number
    return values, lines


def _scheme_list(raw: str, line: int | None) -> list[RewardScheme]:
    """'independent, collaborative:4, packet' -> schemes; bits default to 4."""
    schemes = []
    for item in (part.strip() for part in raw.split(",")):
        if not item:
            continue
        name, _, bits = item.partition(":")
        try:
            kind = Scheme.parse(name)
            quant = int(bits) if bits else 4
            schemes.append(
                RewardScheme(kind=kind, quant_bits=quant if kind is Scheme.COLLABORATIVE else None)
            )
        except (ValueError, ValidationError) as e:
            raise ConfigError(str(e), field="schemes", line=line) from e
    return schemes


def _validation_error(e: ValidationError, lines: dict[str, int]) -> ConfigError:
    first = e.errors()[0]
    field = str(first["loc"][0]) if first["loc"] else None
    message = first["msg"].removeprefix("Value error, ")
    if field is None and "header_bits" in message:
        field = "header_bits"
    return ConfigError(message, field=field, line=lines.get(field or ""))


def parse_scenario(text: str) -> SimConfig | SweepSpec:
    """Validate the contents of a scenario file.

    Files naming an `axis` or `reps` describe a sweep (a single point for
    `axis = none`); any other file describes one SimConfig.

    Raises:
        ConfigError: Naming the field and line of the problem
    """
    values, lines = read_pairs(text)
    settings = get_settings()

    if "n_devices" in values and "loading_factor" in values:
        raise ConfigError("give n_devices or loading_factor, not both", field="loading_factor",
                          line=lines["loading_factor"])
    if "loading_factor" in values:
        load = values.pop("loading_factor")
        if load <= 0:
            raise ConfigError("must be positive", field="loading_factor", line=lines["loading_factor"])
        values["n_devices"] = devices_for_load(load, values.get("n_slots", DEFAULT_SLOTS))
        lines["n_devices"] = lines["loading_factor"]
    if "n_devices" not in values:
        raise ConfigError("n_devices or loading_factor is required", field="n_devices")

    sweep = {key: values.pop(key) for key in ("axis", "grid", "schemes", "reps") if key in values}
    values.setdefault("max_frames", settings.default_max_frames)
    try:
        config = SimConfig(**values)
    except ValidationError as e:
        raise _validation_error(e, lines) from e

    if not sweep:
        return config

    try:
        axis = Axis(sweep.get("axis", Axis.NONE.value).strip().lower())
    except ValueError:
        raise ConfigError(
            f"unknown axis; choose from {', '.join(a.value for a in Axis)}",
            field="axis", line=lines.get("axis"),
        ) from None
    if "grid" in sweep:
        try:
            grid = [float(v) for v in sweep["grid"].split(",") if v.strip()]
        except ValueError:
            raise ConfigError("grid must be comma-separated numbers", field="grid",
                              line=lines["grid"]) from None
    elif axis is Axis.NONE:
        grid = [0.0]
    else:
        raise ConfigError("a sweep axis needs a grid", field="grid")
    schemes = (
        _scheme_list(sweep["schemes"], lines.get("schemes"))
        if "schemes" in sweep
        else [RewardScheme.from_config(config)]
    )
    try:
        return SweepSpec(
            base=config,
            axis=axis,
            grid=grid,
            schemes=schemes,
            reps=sweep.get("reps", settings.default_reps),
        )
    except (ValidationError, ValueError) as e:
        raise ConfigError(str(e), field="grid", line=lines.get("grid")) from e


def parse_config(path: Path | str) -> SimConfig | SweepSpec:
    """Read and validate a scenario file.

    Raises:
        ConfigError: If the file is unreadable or invalid
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from e
    logger.debug(f"Parsing scenario file {path}")
    return parse_scenario(text)


def emit_config(config: SimConfig, path: Path | str, reps: int | None = None) -> Path:
    """Write a SimConfig in the scenario file format."""
    path = Path(path)
    lines = ["# qrasim scenario"]
    for key, value in config.model_dump(mode="json").items():
        lines.append(f"{key} = {value}")
    if reps is not None:
        lines.append(f"reps = {reps}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
