"""CSV output of sweep results."""

import io
from pathlib import Path

from loguru import logger

from qrasim.cli.schemas import RunManifest
from qrasim.services.experiments import SweepResult

COLUMNS = [
    "scheme",
    "axis_name",
    "axis_value",
    "n_devices",
    "mean_throughput",
    "std_throughput",
    "mean_latency_slots",
    "std_latency_slots",
    "mean_finish_std",
    "mean_collision_prob",
    "nonconverged",
    "reps",
]
FLOAT_FORMAT = "%.10g"


def format_csv(result: SweepResult, manifest: RunManifest | None = None) -> str:
    """Manifest comment lines, a header row, then one row per (scheme, point).

    Raises:
        ValueError: If the result has no rows
    """
    if not result.rows:
        raise ValueError("Cannot write an empty sweep result")
    frame = result.to_frame()
    frame["axis_name"] = result.axis.value
    buffer = io.StringIO()
    if manifest is not None:
        buffer.write("\n".join(manifest.header_lines()) + "\n")
    frame[COLUMNS].to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()


def emit_csv(result: SweepResult, path: Path | str, manifest: RunManifest | None = None) -> Path:
    """Write the result CSV to path.

    Raises:
        OSError: Naming the path if it cannot be written
    """
    path = Path(path)
    text = format_csv(result, manifest)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise OSError(f"Cannot write {path}: {e.strerror or e}") from e
    logger.info(f"Wrote {len(result.rows)} rows to {path}")
    return path
