"""File formats: long-format curve CSV, shift tables, JSON reports, TOML configs."""

from __future__ import annotations

import csv
import json
import math
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import tomli
from jsonschema import Draft202012Validator

from .errors import ConfigError, EmptyInput, GridMismatch, ParseError
from .fcurve import Grid, MultiCurveSample

LONG_HEADER = ("subject_id", "component", "t", "value")


def read_long_csv(path, group_by: Optional[tuple[str, str]] = None) -> MultiCurveSample:
    """Load ``subject_id,component,t,value`` rows into a sample.

    Subjects and components keep their order of first appearance. Every
    (subject, component) series must use the grid of the first series; the
    error names the first offending row otherwise. ``group_by=(column, value)``
    keeps only rows whose extra ``column`` equals ``value``.
    """
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    series: "OrderedDict[tuple[str, str], list]" = OrderedDict()
    subjects: "OrderedDict[str, None]" = OrderedDict()
    components: "OrderedDict[str, None]" = OrderedDict()
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in LONG_HEADER if c not in header]
        if missing:
            raise ParseError(f"{path}: header lacks {', '.join(missing)}")
        if group_by and group_by[0] not in header:
            raise ParseError(f"{path}: no column {group_by[0]!r} to group by")
        for row in reader:
            line = reader.line_num
            if group_by and row[group_by[0]] != group_by[1]:
                continue
            try:
                t, v = float(row["t"]), float(row["value"])
            except (TypeError, ValueError):
                raise ParseError(f"{path}:{line}: t/value not numeric") from None
            if not (math.isfinite(t) and math.isfinite(v)):
                raise ParseError(f"{path}:{line}: non-finite t/value")
            sid, comp = row["subject_id"], row["component"]
            subjects.setdefault(sid)
            components.setdefault(comp)
            series.setdefault((sid, comp), []).append((t, v, line))
    if not series:
        raise EmptyInput(f"{path}: no data rows")

    ref_key = next(iter(series))
    ref_t = np.array(sorted(t for t, _, _ in series[ref_key]))
    values = np.empty((len(subjects), len(components), ref_t.size))
    sidx = {s: i for i, s in enumerate(subjects)}
    cidx = {c: j for j, c in enumerate(components)}
    for (sid, comp), rows in series.items():
        rows.sort(key=lambda r: r[0])
        ts = np.array([r[0] for r in rows])
        if ts.size != ref_t.size or not np.array_equal(ts, ref_t):
            bad = next(
                (r for r, u in zip(rows, ref_t) if r[0] != u),
                rows[min(len(rows), ref_t.size) - 1],
            )
            raise GridMismatch(
                f"subject {sid} component {comp}: grid differs from subject {ref_key[0]} "
                f"at row {bad[2]} (t={bad[0]:g})"
            )
        values[sidx[sid], cidx[comp]] = [r[1] for r in rows]
    for sid in subjects:
        absent = [c for c in components if (sid, c) not in series]
        if absent:
            raise GridMismatch(f"subject {sid} has no rows for component(s) {', '.join(absent)}")
    try:
        grid = Grid(ref_t)
    except ValueError as exc:
        raise GridMismatch(f"subject {ref_key[0]}: {exc}") from exc
    return MultiCurveSample(
        grid, values, tuple(components), tuple(subjects), meta={"source": str(path)}
    )


def write_long_csv(path, sample: MultiCurveSample, values: Optional[np.ndarray] = None, extra: Mapping = None):
    """Write a sample (or ``values`` on its grid) in long format."""
    values = sample.values if values is None else values
    extra = dict(extra or {})
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(LONG_HEADER) + list(extra))
        tail = list(extra.values())
        for i, sid in enumerate(sample.subject_ids):
            for j, comp in enumerate(sample.component_names):
                for t, v in zip(sample.grid.points, values[i, j]):
                    w.writerow([sid, comp, repr(float(t)), repr(float(v))] + tail)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def write_shift_table(path, component_names: Sequence[str], theta_hat) -> None:
    write_rows(path, ["component", "theta_hat"], zip(component_names, map(float, theta_hat)))


def read_intervals(path) -> list[tuple[float, float]]:
    """Per-subject landmark intervals from a CSV with columns ``a,b``."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or not {"a", "b"} <= set(reader.fieldnames):
            raise ParseError(f"{path}: header must contain a,b")
        out = []
        for row in reader:
            try:
                out.append((float(row["a"]), float(row["b"])))
            except (TypeError, ValueError):
                raise ParseError(f"{path}:{reader.line_num}: a/b not numeric") from None
    return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dump_json(path, obj, schema: Optional[dict] = None) -> dict:
    data = _jsonable(obj)
    if schema is not None:
        Draft202012Validator(schema).validate(data)
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    return data


# -- TOML config --------------------------------------------------------------


def load_toml(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def check_keys(data: Mapping, allowed: Mapping, where: str = "") -> None:
    """Reject keys absent from ``allowed``; nested dicts in ``allowed`` recurse."""
    for key, value in data.items():
        loc = f"{where}.{key}" if where else key
        if key not in allowed:
            raise ConfigError(f"unknown key {loc!r}")
        sub = allowed[key]
        if isinstance(sub, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{loc!r} must be a table")
            check_keys(value, sub, loc)


# -- report schemas -----------------------------------------------------------

_num = {"type": ["number", "null"]}

REGISTER_SCHEMA = {
    "type": "object",
    "required": ["components", "theta_hat", "tau_hat_stacked", "residuals", "pairwise", "warnings", "xd"],
    "properties": {
        "components": {"type": "array", "items": {"type": "string"}},
        "theta_hat": {"type": "array", "items": {"type": "number"}},
        "tau_hat_stacked": {"type": "array", "items": {"type": "number"}},
        "residuals": {"type": "array", "items": {"type": "number"}},
        "warnings": {"type": "array", "items": {"type": "string"}},
        "pairwise": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["j", "k", "tau_hat", "criterion_at_min", "censored", "multimodal", "trace"],
                "properties": {
                    "tau_hat": {"type": "number"},
                    "criterion_at_min": {"type": "number", "minimum": 0},
                    "censored": {"type": "boolean"},
                    "multimodal": {"type": "array", "items": {"type": "number"}},
                    "trace": {"type": "array", "items": {"type": "array", "items": _num}},
                },
            },
        },
        "xd": {"type": "object"},
    },
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "required": ["kind", "config", "summary", "records", "seeds"],
    "properties": {
        "kind": {"enum": ["imse", "rates", "xd"]},
        "config": {"type": "object"},
        "summary": {"type": "object"},
        "records": {"type": "array", "items": {"type": "object"}},
        "seeds": {"type": "array", "items": {"type": "integer"}},
    },
}
