"""Currency conversion to real USD and 3-sigma outlier trimming."""

from __future__ import annotations

import csv
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

from .errors import MalformedCsv, MissingColumn, RateNotFound
from .ingest import VARIABLE_FIELDS, SurveyRecord


@dataclass(frozen=True)
class Rate:
    exchange_rate: float  # LCU per USD
    deflator: float  # index, base year = 1

    def __post_init__(self):
        if not (self.exchange_rate > 0 and math.isfinite(self.exchange_rate)):
            raise ValueError(f"exchange_rate must be > 0, got {self.exchange_rate}")
        if not (self.deflator > 0 and math.isfinite(self.deflator)):
            raise ValueError(f"deflator must be > 0, got {self.deflator}")


@dataclass
class RateTable:
    """Exchange rates and deflators keyed by (country, year, month).

    ``month=None`` is the annual entry.  A lookup with a fiscal closing
    month prefers the month-specific entry and falls back to the annual one.
    """

    entries: dict[tuple[str, int, int | None], Rate] = field(default_factory=dict)

    def add(self, country: str, year: int, exchange_rate: float, deflator: float,
            month: int | None = None) -> None:
        self.entries[(country, int(year), month)] = Rate(float(exchange_rate), float(deflator))

    def lookup(self, country: str, year: int, month: int | None = None) -> Rate:
        if month is not None:
            hit = self.entries.get((country, year, month))
            if hit is not None:
                return hit
        hit = self.entries.get((country, year, None))
        if hit is None:
            raise RateNotFound((country, year, month))
        return hit

    @classmethod
    def from_csv(cls, source) -> "RateTable":
        """Columns: country, year, month (blank = annual), exchange_rate, deflator."""
        own = isinstance(source, (str, os.PathLike))
        fh = open(source, newline="", encoding="utf-8") if own else source
        try:
            reader = csv.DictReader(fh)
            needed = ("country", "year", "exchange_rate", "deflator")
            for col in needed:
                if reader.fieldnames is None or col not in reader.fieldnames:
                    raise MissingColumn(col)
            table = cls()
            for row in reader:
                try:
                    month_text = (row.get("month") or "").strip()
                    table.add(
                        row["country"].strip(),
                        int(float(row["year"])),
                        float(row["exchange_rate"]),
                        float(row["deflator"]),
                        int(float(month_text)) if month_text else None,
                    )
                except (TypeError, ValueError) as exc:
                    raise MalformedCsv(f"rate table line {reader.line_num}: {exc}") from None
            return table
        finally:
            if own:
                fh.close()


@dataclass
class OutlierPolicy:
    sd_multiplier: float = 3.0
    ratio_set: tuple[tuple[str, str], ...] = (("Y", "L"), ("K", "L"))
    # isic -> broad sector; None puts every division in "manufacturing"
    sector_of: Callable[[str], str] | None = None

    def __post_init__(self):
        if not self.sd_multiplier > 0:
            raise ValueError("sd_multiplier must be > 0")
        for num, den in self.ratio_set:
            if num not in VARIABLE_FIELDS or den not in VARIABLE_FIELDS:
                raise ValueError(f"ratio {num}/{den}: variables must be Y, K or L")
            if num == den:
                raise ValueError(f"ratio {num}/{den} is identically 1")

    def sector(self, isic: str) -> str:
        return "manufacturing" if self.sector_of is None else self.sector_of(isic)


def parse_ratios(text: str) -> tuple[tuple[str, str], ...]:
    """``"Y/L,K/L"`` -> ``(("Y", "L"), ("K", "L"))``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        num, sep, den = part.partition("/")
        if not sep:
            raise ValueError(f"ratio {part!r} must look like NUM/DEN")
        out.append((num.strip().upper(), den.strip().upper()))
    return tuple(out)


@dataclass
class PreprocessReport:
    converted: int = 0
    level_outliers_nulled: dict[str, int] = field(default_factory=dict)
    ratio_outliers_nulled: dict[str, int] = field(default_factory=dict)

    def merge(self, other: "PreprocessReport") -> "PreprocessReport":
        levels = dict(self.level_outliers_nulled)
        for k, v in other.level_outliers_nulled.items():
            levels[k] = levels.get(k, 0) + v
        ratios = dict(self.ratio_outliers_nulled)
        for k, v in other.ratio_outliers_nulled.items():
            ratios[k] = ratios.get(k, 0) + v
        return PreprocessReport(self.converted + other.converted, levels, ratios)

    def to_dict(self) -> dict:
        return {
            "converted": self.converted,
            "level_outliers_nulled": dict(sorted(self.level_outliers_nulled.items())),
            "ratio_outliers_nulled": dict(sorted(self.ratio_outliers_nulled.items())),
        }


def to_usd_real(records: Sequence[SurveyRecord], rates: RateTable
                ) -> tuple[list[SurveyRecord], PreprocessReport]:
    """Divide each monetary field by the exchange rate, then by the deflator."""
    out = []
    for r in records:
        rate = rates.lookup(r.country, r.year, r.fiscal_close_month)

        def conv(x):
            return None if x is None else (x / rate.exchange_rate) / rate.deflator

        out.append(replace(r, sales=conv(r.sales), capital=conv(r.capital),
                           labor_cost=conv(r.labor_cost)))
    return out, PreprocessReport(converted=len(out))


def _flag_outliers(values: Sequence[float], multiplier: float) -> list[bool]:
    """True where |v - mean| > multiplier * sd (sample sd, ddof=1)."""
    n = len(values)
    if n < 2:
        return [False] * n
    mean = math.fsum(values) / n
    sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    if sd == 0:
        return [False] * n
    return [abs(v - mean) > multiplier * sd for v in values]


def trim_level_outliers(records: Sequence[SurveyRecord], policy: OutlierPolicy | None = None
                        ) -> tuple[list[SurveyRecord], PreprocessReport]:
    """Null values whose ln(x+1) is an outlier within (economy, broad sector)."""
    policy = policy or OutlierPolicy()
    groups = defaultdict(list)
    for i, r in enumerate(records):
        groups[(r.country, policy.sector(r.isic))].append(i)

    nulls: dict[int, set[str]] = defaultdict(set)
    counts = {}
    for var, attr in VARIABLE_FIELDS.items():
        counts[var] = 0
        for key in sorted(groups):
            idx = [i for i in groups[key] if getattr(records[i], attr) is not None]
            logs = [math.log1p(getattr(records[i], attr)) for i in idx]
            for i, bad in zip(idx, _flag_outliers(logs, policy.sd_multiplier)):
                if bad:
                    nulls[i].add(attr)
                    counts[var] += 1

    out = [replace(r, **{a: None for a in nulls[i]}) if i in nulls else r
           for i, r in enumerate(records)]
    return out, PreprocessReport(level_outliers_nulled=counts)


def trim_ratio_outliers(records: Sequence[SurveyRecord], policy: OutlierPolicy | None = None
                        ) -> tuple[list[SurveyRecord], PreprocessReport]:
    """Null both fields of ratios whose ln value is an outlier within industry.

    All ratios are evaluated on the input snapshot, so the result does not
    depend on the order of ``policy.ratio_set``.
    """
    policy = policy or OutlierPolicy()
    groups = defaultdict(list)
    for i, r in enumerate(records):
        groups[r.isic].append(i)

    nulls: dict[int, set[str]] = defaultdict(set)
    counts = {}
    for num, den in policy.ratio_set:
        a_num, a_den = VARIABLE_FIELDS[num], VARIABLE_FIELDS[den]
        label = f"{num}/{den}"
        counts[label] = 0
        for key in sorted(groups):
            idx = []
            logs = []
            for i in groups[key]:
                x, z = getattr(records[i], a_num), getattr(records[i], a_den)
                if x is not None and z is not None and x > 0 and z > 0:
                    idx.append(i)
                    logs.append(math.log(x) - math.log(z))
            for i, bad in zip(idx, _flag_outliers(logs, policy.sd_multiplier)):
                if bad:
                    nulls[i].update((a_num, a_den))
                    counts[label] += 1

    out = [replace(r, **{a: None for a in nulls[i]}) if i in nulls else r
           for i, r in enumerate(records)]
    return out, PreprocessReport(ratio_outliers_nulled=counts)


def preprocess(records: Sequence[SurveyRecord], rates: RateTable | None = None,
               policy: OutlierPolicy | None = None
               ) -> tuple[list[SurveyRecord], PreprocessReport]:
    """Convert (if ``rates`` given), then trim levels, then ratios: one pass each."""
    report = PreprocessReport()
    recs = list(records)
    if rates is not None:
        recs, rep = to_usd_real(recs, rates)
        report = report.merge(rep)
    recs, rep = trim_level_outliers(recs, policy)
    report = report.merge(rep)
    recs, rep = trim_ratio_outliers(recs, policy)
    return recs, report.merge(rep)
