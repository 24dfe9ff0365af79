"""Loaders for chart tables, task annotations and fixture directories.

Tables are ``category,value`` CSV files or ChartQA annotation JSON. Tasks are
JSON objects ``{"type", "targets", "question"}``. A fixture directory holds
``<chart_id>.csv`` (or ``.json``) next to ``<chart_id>.task.json``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .chart_model import SpecError, DataTable, TaskSpec, default_spec, task_from_dict, task_to_dict

log = logging.getLogger(__name__)

TASK_SUFFIX = ".task.json"


class TableFormatError(ValueError):
    pass


class FixtureError(ValueError):
    pass


def _number(text: str, where: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise TableFormatError(f"{where}: non-numeric value {text!r}") from None
    if not math.isfinite(value):
        raise TableFormatError(f"{where}: non-finite value {text!r}")
    return value


def _check_rows(rows: list[tuple[str, float]], source: str) -> DataTable:
    seen = set()
    for cat, _ in rows:
        if cat in seen:
            raise TableFormatError(f"{source}: duplicate category {cat!r}")
        seen.add(cat)
    return DataTable(tuple(rows))


def _read_csv_table(path: Path) -> DataTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["category", "value"]:
            raise TableFormatError(f"{path.name}: header must be 'category,value', got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise TableFormatError(f"{path.name} row {lineno}: expected 2 fields, got {len(row)}")
            cat = row[0].strip()
            if not cat:
                raise TableFormatError(f"{path.name} row {lineno}: empty category")
            rows.append((cat, _number(row[1].strip(), f"{path.name} row {lineno}")))
    return _check_rows(rows, path.name)


def _read_chartqa_json(path: Path) -> DataTable:
    # ChartQA annotation layout: {"models": [{"x": [...], "y": [...]}], ...};
    # one of x/y carries labels, the other numbers (h_bar and v_bar differ)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        model = doc["models"][0]
        xs, ys = model["x"], model["y"]
    except (KeyError, IndexError, TypeError):
        raise TableFormatError(f"{path.name}: expected ChartQA layout with models[0].x and models[0].y") from None
    if len(xs) != len(ys):
        raise TableFormatError(f"{path.name}: x and y lengths differ")

    def numeric(seq):
        try:
            [float(v) for v in seq]
            return True
        except (TypeError, ValueError):
            return False

    labels, values = (xs, ys) if numeric(ys) else (ys, xs)
    rows = [
        (str(c).strip(), _number(v, f"{path.name} row {i}")) for i, (c, v) in enumerate(zip(labels, values))
    ]
    table = _check_rows(rows, path.name)
    unit = (doc.get("general_figure_info") or {}).get("value_unit")
    return DataTable(table.rows, unit) if unit else table


def load_table(path) -> DataTable:
    """Parse a table file, keyed by extension (``.csv`` or ChartQA ``.json``)."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        return _read_chartqa_json(path)
    return _read_csv_table(path)


def save_table(table: DataTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["category", "value"])
        for cat, val in table.rows:
            writer.writerow([cat, repr(float(val)) if not float(val).is_integer() else int(val)])


def load_task(path) -> TaskSpec:
    with open(path, encoding="utf-8") as fh:
        task = task_from_dict(json.load(fh))
    issues = task.issues()
    if issues:
        raise SpecError(issues)
    return task


def save_task(task: TaskSpec, path) -> None:
    Path(path).write_text(json.dumps(task_to_dict(task)) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class FixtureEntry:
    chart_id: str
    table: DataTable
    task: TaskSpec
    saliency_path: Path | None = None


@dataclass(frozen=True)
class FixtureSet:
    entries: tuple[FixtureEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, chart_id: str) -> FixtureEntry:
        for e in self.entries:
            if e.chart_id == chart_id:
                return e
        raise KeyError(chart_id)


def _chart_id(path: Path) -> str | None:
    name = path.name
    if name.endswith(TASK_SUFFIX):
        return name[: -len(TASK_SUFFIX)]
    if path.suffix.lower() in (".csv", ".json"):
        return path.stem
    return None


def load_fixtures(directory) -> FixtureSet:
    """Pair every table with its task file; entries sorted by chart id."""
    directory = Path(directory)
    tables: dict[str, Path] = {}
    tasks: dict[str, Path] = {}
    for path in sorted(directory.iterdir()):
        cid = _chart_id(path)
        if cid is None or not path.is_file():
            continue
        bucket = tasks if path.name.endswith(TASK_SUFFIX) else tables
        if cid in bucket:
            raise FixtureError(f"two table files for chart id {cid!r}: {bucket[cid].name}, {path.name}")
        bucket[cid] = path
    orphans = sorted(p.name for cid, p in tables.items() if cid not in tasks)
    orphans += sorted(p.name for cid, p in tasks.items() if cid not in tables)
    if orphans:
        raise FixtureError(f"orphan fixture file(s) without a partner: {', '.join(orphans)}")
    if not tables:
        log.warning("no fixtures found in %s", directory)
    entries = []
    for cid in sorted(tables):
        table, task = load_table(tables[cid]), load_task(tasks[cid])
        sal = directory / f"{cid}.{task.task_type}.png"
        entries.append(FixtureEntry(cid, table, task, sal if sal.exists() else None))
        default_spec(table, task)  # every entry must validate
    return FixtureSet(tuple(entries))


def save_fixtures(fixtures: FixtureSet, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for e in fixtures:
        save_table(e.table, directory / f"{e.chart_id}.csv")
        save_task(e.task, directory / f"{e.chart_id}{TASK_SUFFIX}")


def bundled_fixture_dir() -> Path:
    return Path(str(resources.files("chartopt") / "fixtures"))


def bundled_fixtures() -> FixtureSet:
    return load_fixtures(bundled_fixture_dir())
