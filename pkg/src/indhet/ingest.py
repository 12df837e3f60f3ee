"""Firm-survey CSV parsing, panel construction and descriptive tables."""

from __future__ import annotations

import csv
import io
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping, Sequence

from .errors import EmptyPanel, MalformedCsv, MissingColumn

REQUIRED_FIELDS = ("country", "year", "isic", "d2", "n7a", "n2a")
OPTIONAL_FIELDS = ("firm_id", "fiscal_close_month")
DEFAULT_COLUMN_MAP = {name: name for name in REQUIRED_FIELDS + OPTIONAL_FIELDS}

# survey variable -> SurveyRecord attribute
MONETARY_FIELDS = {"d2": "sales", "n7a": "capital", "n2a": "labor_cost"}
# production variable -> SurveyRecord attribute
VARIABLE_FIELDS = {"Y": "sales", "K": "capital", "L": "labor_cost"}


@dataclass(frozen=True)
class SurveyRecord:
    firm_id: str
    country: str
    year: int
    isic: str
    fiscal_close_month: int | None = None
    sales: float | None = None
    capital: float | None = None
    labor_cost: float | None = None

    def __post_init__(self):
        if not 1900 <= self.year <= 2100:
            raise MalformedCsv(f"year {self.year} outside [1900, 2100]")
        if len(self.isic) != 2 or not self.isic.isdigit():
            raise MalformedCsv(f"isic {self.isic!r} is not a 2-digit division code")
        if self.fiscal_close_month is not None and not 1 <= self.fiscal_close_month <= 12:
            raise MalformedCsv(f"fiscal_close_month {self.fiscal_close_month} outside 1-12")
        for name in MONETARY_FIELDS.values():
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise MalformedCsv(f"{name}={v!r} must be finite and >= 0")

    def get(self, variable: str) -> float | None:
        """Value of production variable ``Y``, ``K`` or ``L``."""
        return getattr(self, VARIABLE_FIELDS[variable])


@dataclass(frozen=True)
class FirmObservation:
    y: float
    k: float
    l: float

    def get(self, variable: str) -> float:
        return getattr(self, variable.lower())


@dataclass(frozen=True, order=True)
class PanelKey:
    # field order gives the (isic, country, year) sort order
    isic: str
    country: str
    year: int

    def label(self) -> str:
        return f"{self.isic}:{self.country}:{self.year}"


@dataclass
class AvailabilityTable:
    cells: dict[PanelKey, int]
    threshold: float
    variable: str = "Y"

    @property
    def total(self) -> int:
        return sum(self.cells.values())

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "variable": self.variable,
            "total": self.total,
            "cells": [
                {"isic": k.isic, "country": k.country, "year": k.year, "count": n}
                for k, n in sorted(self.cells.items())
            ],
        }

    csv_header = ("isic", "country", "year", "count")

    def csv_rows(self):
        for k, n in sorted(self.cells.items()):
            yield (k.isic, k.country, k.year, n)

    def pivot(self) -> tuple[list[str], list[tuple[str, int]], list[list[int]]]:
        """Rows = isic, columns = (country, year), zero where absent."""
        rows = sorted({k.isic for k in self.cells})
        cols = sorted({(k.country, k.year) for k in self.cells})
        grid = [[self.cells.get(PanelKey(r, c, y), 0) for c, y in cols] for r in rows]
        return rows, cols, grid


@dataclass(frozen=True)
class SummaryStats:
    variable: str
    count: int
    mean: float
    std_dev: float
    min: float
    max: float

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "count": self.count,
            "mean": self.mean,
            "std_dev": self.std_dev,
            "min": self.min,
            "max": self.max,
        }


def _parse_money(text: str) -> float | None:
    text = text.strip()
    if not text:
        return None
    try:
        v = float(text)
    except ValueError:
        return None
    if not math.isfinite(v) or v < 0:
        return None
    return v


def _parse_isic(text: str, line: int) -> str:
    text = text.strip()
    if text.isdigit() and len(text) <= 2:
        return text.zfill(2)
    try:
        as_float = float(text)
    except ValueError:
        raise MalformedCsv(f"line {line}: isic {text!r} is not a 2-digit code") from None
    if as_float.is_integer() and 0 <= as_float < 100:
        return f"{int(as_float):02d}"
    raise MalformedCsv(f"line {line}: isic {text!r} is not a 2-digit code")


def _parse_int(text: str, what: str, line: int) -> int:
    try:
        v = float(text.strip())
    except ValueError:
        raise MalformedCsv(f"line {line}: {what} {text!r} is not an integer") from None
    if not v.is_integer():
        raise MalformedCsv(f"line {line}: {what} {text!r} is not an integer")
    return int(v)


def _open_text(source) -> IO[str]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8")
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline="")
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def parse_survey_csv(source, column_map: Mapping[str, str] | None = None) -> list[SurveyRecord]:
    """Parse a long-format firm-survey CSV (one firm-year per row).

    ``source`` may be a path, raw bytes, or a binary/text stream.
    ``column_map`` maps logical names (``country``, ``year``, ``isic``,
    ``d2``, ``n7a``, ``n2a`` and optionally ``firm_id``,
    ``fiscal_close_month``) to header names; unmapped names default to
    themselves.  Negative or non-numeric monetary cells become missing.
    """
    cmap = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        cmap.update(column_map)
    fh = _open_text(source)
    try:
        reader = csv.reader(fh, strict=True)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedCsv("empty CSV: no header row") from None
        except csv.Error as exc:
            raise MalformedCsv(f"header: {exc}") from None
        header = [h.strip() for h in header]
        index = {}
        for logical in REQUIRED_FIELDS:
            col = cmap[logical]
            if col not in header:
                raise MissingColumn(col, logical)
            index[logical] = header.index(col)
        for logical in OPTIONAL_FIELDS:
            col = cmap[logical]
            if col in header:
                index[logical] = header.index(col)

        records = []
        try:
            for row in reader:
                line = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise MalformedCsv(
                        f"line {line}: expected {len(header)} fields, got {len(row)}"
                    )
                month = None
                if "fiscal_close_month" in index and row[index["fiscal_close_month"]].strip():
                    month = _parse_int(row[index["fiscal_close_month"]], "fiscal_close_month", line)
                firm_id = row[index["firm_id"]].strip() if "firm_id" in index else str(len(records))
                try:
                    rec = SurveyRecord(
                        firm_id=firm_id,
                        country=row[index["country"]].strip(),
                        year=_parse_int(row[index["year"]], "year", line),
                        isic=_parse_isic(row[index["isic"]], line),
                        fiscal_close_month=month,
                        **{attr: _parse_money(row[index[var]]) for var, attr in MONETARY_FIELDS.items()},
                    )
                except MalformedCsv as exc:
                    if str(exc).startswith("line"):
                        raise
                    raise MalformedCsv(f"line {line}: {exc}") from None
                records.append(rec)
        except csv.Error as exc:
            raise MalformedCsv(f"line {reader.line_num}: {exc}") from None
        return records
    finally:
        if fh is not source:
            fh.close()


def write_survey_csv(records: Iterable[SurveyRecord], fh: IO[str]) -> None:
    """Write records back in the default column layout."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["firm_id", "country", "year", "isic", "fiscal_close_month", "d2", "n7a", "n2a"])

    def fmt(v):
        return "" if v is None else repr(float(v))

    for r in records:
        writer.writerow([
            r.firm_id, r.country, r.year, r.isic,
            "" if r.fiscal_close_month is None else r.fiscal_close_month,
            fmt(r.sales), fmt(r.capital), fmt(r.labor_cost),
        ])


def build_panels(
    records: Iterable[SurveyRecord],
) -> tuple[dict[PanelKey, list[FirmObservation]], int]:
    """Group complete records by (country, isic, year).

    Returns the panels (sorted by key) and the number of records dropped
    because Y, K or L was missing or not strictly positive.
    """
    groups: dict[PanelKey, list[FirmObservation]] = defaultdict(list)
    dropped = 0
    for r in records:
        vals = (r.sales, r.capital, r.labor_cost)
        if any(v is None or not v > 0 for v in vals):
            dropped += 1
            continue
        groups[PanelKey(r.isic, r.country, r.year)].append(FirmObservation(*vals))
    return {k: groups[k] for k in sorted(groups)}, dropped


def availability_table(
    panels: Mapping[PanelKey, Sequence[FirmObservation]],
    threshold: float = 100,
    variable: str = "Y",
) -> AvailabilityTable:
    """Count observations per panel whose ``variable`` exceeds ``threshold``.

    Panels with no qualifying observation are left out, which also drops
    all-zero rows and columns of the pivoted view.
    """
    cells = {}
    for key in sorted(panels):
        n = sum(1 for obs in panels[key] if obs.get(variable) > threshold)
        if n > 0:
            cells[key] = n
    return AvailabilityTable(cells=cells, threshold=threshold, variable=variable)


def summarize(panel: Sequence[FirmObservation], variable: str) -> SummaryStats:
    """Population statistics (denominator n) of Y, K or L over a panel."""
    if variable not in VARIABLE_FIELDS:
        raise ValueError(f"variable must be one of Y, K, L, got {variable!r}")
    values = sorted(obs.get(variable) for obs in panel)
    if not values:
        raise EmptyPanel("cannot summarize an empty panel")
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / n
    # rounding can push the mean a hair outside [min, max] for constant data
    mean = min(max(mean, values[0]), values[-1])
    return SummaryStats(variable, n, mean, math.sqrt(var), values[0], values[-1])
