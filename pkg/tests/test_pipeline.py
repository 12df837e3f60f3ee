"""End to end on the three-firm stylized tables."""

import json
import math

import numpy as np

from indhet.cli import main
from indhet.ingest import PanelKey, build_panels, parse_survey_csv
from indhet.preprocess import preprocess
from indhet.report import compute_metrics, render


def test_library_pipeline(stylized_survey):
    records, report = preprocess(parse_survey_csv(stylized_survey))
    assert sum(report.level_outliers_nulled.values()) == 0
    panels, dropped = build_panels(records)
    assert dropped == 0
    bundle = compute_metrics(panels)
    m = bundle.panels[PanelKey("10", "Stylland", 2023)]
    assert m.n_firms == 3
    assert m.gini.volume.value == 0.0 and m.gini.gini == 0.0
    # diagonal (K, L, Y) = (30, 300, 3600)
    assert m.tangent.angles["K"] == math.atan2(math.hypot(300, 3600), 30)
    assert 0.0 <= m.me.h_norm <= 1.0
    text = render(bundle, "json")
    assert json.loads(text) == bundle.to_dict()
    assert render(bundle, "csv").count("\n") == 3


def test_cli_pipeline(stylized_survey, tmp_path, capsys):
    clean = tmp_path / "clean.csv"
    assert main(["preprocess", "--input", str(stylized_survey), "--output", str(clean)]) == 0
    out = tmp_path / "metrics.json"
    assert main(["metrics", "all", "--input", str(clean), "--output", str(out)]) == 0
    assert main(["summary", "--input", str(clean), "--format", "csv"]) == 0
    capsys.readouterr()
    data = json.loads(out.read_text())
    for label in ("10:Stylland:2006", "10:Stylland:2023"):
        assert data[label]["gini"]["gini"] == 0.0
        assert np.isfinite(data[label]["me"]["h_norm"])
