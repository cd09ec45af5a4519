"""CSV and JSON writers for command output"""

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence

import click
import numpy as np

# Significant digits of every number written to CSV
CSV_DIGITS = 17


def format_number(value: Any) -> str:
    """Render a number with 17 significant digits; other values via str()."""
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), f'.{CSV_DIGITS}g')
    return str(value)


def to_jsonable(value: Any) -> Any:
    """Convert numpy containers and scalars to plain JSON types; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]],
               meta: Optional[Dict[str, Any]] = None) -> str:
    """CSV text; each meta entry comes first as a "# key: {json}" comment line."""
    buffer = io.StringIO()
    for key, value in (meta or {}).items():
        buffer.write(f"# {key}: {json.dumps(to_jsonable(value), allow_nan=False)}\n")
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buffer.getvalue()


def render_json(payload: Dict[str, Any]) -> str:
    """JSON text; floats use the shortest repr that round-trips to the same double."""
    return json.dumps(to_jsonable(payload), indent=2, allow_nan=False) + '\n'


def write_text(text: str, out: Optional[str]) -> None:
    """Write to a UTF-8 file, or to stdout when out is None."""
    if out is None:
        click.echo(text, nl=False)
        return
    path = Path(out)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(text)


def emit(fmt: str, payload: Dict[str, Any], header: Sequence[str],
         rows: Iterable[Sequence[Any]], out: Optional[str] = None) -> None:
    """Write command output as CSV rows or as the JSON payload with config/data/stats.

    CSV output carries the config and stats blocks as leading comment lines.
    """
    if fmt == 'json':
        write_text(render_json(payload), out)
    else:
        meta = {key: payload[key] for key in ('config', 'stats') if key in payload}
        write_text(render_csv(header, rows, meta), out)
