from __future__ import annotations

import csv
import io
import json
from typing import Any, Iterable, Mapping, Optional, Sequence

import click

from virialkit.utils.scalars import HardCore, format_scalar


def jsonable(value: Any) -> Any:
    """Recursively convert scalars (Fractions, complex, HARD_CORE) for JSON."""
    if isinstance(value, Mapping):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return value if value == value and abs(value) != float("inf") else format_scalar(value)
    if isinstance(value, HardCore):
        return "inf"
    if hasattr(value, "to_dict"):
        return jsonable(value.to_dict())
    return format_scalar(value)


def render_table(
    rows: Iterable[Mapping[str, Any]],
    columns: Sequence[str],
    fmt: str = "csv",
    meta: Optional[Mapping[str, Any]] = None,
) -> str:
    rows = list(rows)
    if fmt == "json":
        payload = {"columns": list(columns), "rows": [{c: jsonable(r.get(c)) for c in columns} for r in rows]}
        if meta:
            payload["meta"] = jsonable(meta)
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow(["" if r.get(c) is None else _cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _cell(value: Any) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (list, tuple)):
        return " ".join(_cell(v) for v in value)
    return format_scalar(value)


def emit(text: str, out: Optional[str] = None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)
