"""Per-panel metric bundles and deterministic JSON/CSV emission."""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .entropy import DEFAULT_BINS, DEFAULT_CLUSTERS, DEFAULT_SEED, MEReport, me_report
from .ingest import FirmObservation, PanelKey
from .zonotope import (DEFAULT_SAMPLES, GeneratorSet, TangentReport, ZonotopeMetrics,
                       gini_volume, tangent_angles)

METRICS = ("gini", "me", "tangent")
INPUT_AXES = ("K", "L")


@dataclass(frozen=True)
class PanelMetrics:
    n_firms: int
    gini: ZonotopeMetrics | None = None
    me: MEReport | None = None
    tangent: TangentReport | None = None

    def to_dict(self) -> dict:
        out = {"n_firms": self.n_firms}
        if self.gini is not None:
            out["gini"] = self.gini.to_dict()
        if self.me is not None:
            out["me"] = self.me.to_dict()
        if self.tangent is not None:
            out["tangent"] = self.tangent.to_dict()
        return out


METRICS_CSV_HEADER = (
    "isic", "country", "year", "n_firms",
    "volume", "volume_mode", "volume_std_error", "parallelotope_volume", "gini", "degenerate",
    "h_max", "h_star", "h_norm", "bins", "seed",
    "tangent_K", "tangent_L",
)


@dataclass
class MetricsBundle:
    panels: dict[PanelKey, PanelMetrics] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {key.label(): self.panels[key].to_dict() for key in sorted(self.panels)}

    csv_header = METRICS_CSV_HEADER

    def csv_rows(self):
        for key in sorted(self.panels):
            m = self.panels[key]
            row = [key.isic, key.country, key.year, m.n_firms]
            if m.gini is not None:
                v = m.gini.volume
                row += [v.value, v.mode, "" if v.std_error is None else v.std_error,
                        m.gini.parallelotope_volume, m.gini.gini, m.gini.degenerate]
            else:
                row += [""] * 6
            if m.me is not None:
                row += [m.me.h_max, m.me.h_star, m.me.h_norm, m.me.bins,
                        "" if m.me.seed is None else m.me.seed]
            else:
                row += [""] * 5
            for axis in INPUT_AXES:
                row.append("" if m.tangent is None else m.tangent.angles.get(axis, ""))
            yield tuple(row)


def panel_metrics(panel: Sequence[FirmObservation], which: Iterable[str] = METRICS,
                  clusters: int = DEFAULT_CLUSTERS, bins: int = DEFAULT_BINS,
                  seed: int = DEFAULT_SEED, volume_mode: str = "exact",
                  samples: int = DEFAULT_SAMPLES) -> PanelMetrics:
    which = set(which)
    unknown = which - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    G = GeneratorSet.from_observations(panel)
    gini = me = tangent = None
    if "gini" in which:
        kw = {"sample_count": samples, "seed": seed} if volume_mode == "sampled" else {}
        gini = gini_volume(G, volume_mode, **kw)
    if "me" in which:
        me = me_report(panel, k=clusters, seed=seed, bins=bins)
    if "tangent" in which:
        tangent = tangent_angles(G)
    return PanelMetrics(len(panel), gini, me, tangent)


def compute_metrics(panels: Mapping[PanelKey, Sequence[FirmObservation]], **kwargs) -> MetricsBundle:
    """Metrics for every panel; keys end up sorted by (isic, country, year)."""
    return MetricsBundle({key: panel_metrics(panels[key], **kwargs) for key in sorted(panels)})


def _csv_cell(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    return x


def render(report, fmt: str = "json") -> str:
    """Serialize anything with ``to_dict`` (JSON) or ``csv_header``/``csv_rows`` (CSV)."""
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, allow_nan=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.csv_header)
        for row in report.csv_rows():
            w.writerow([_csv_cell(x) for x in row])
        return buf.getvalue()
    raise ValueError(f"format must be 'json' or 'csv', got {fmt!r}")


def emit_report(report, fmt: str = "json", path=None, stream=None) -> int:
    """Write the rendered report to ``path`` (or ``stream``); returns bytes written."""
    text = render(report, fmt)
    data = text.encode("utf-8")
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    else:
        out = stream if stream is not None else sys.stdout
        out.write(text)
        out.flush()
    return len(data)
