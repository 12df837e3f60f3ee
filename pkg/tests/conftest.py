import pytest

from indhet.ingest import FirmObservation, PanelKey

# Stylized three-firm tables (L, K, Y per firm); both years print identically.
STYLIZED = {
    2006: [(100, 10, 1200), (100, 10, 1300), (100, 10, 1100)],
    2023: [(100, 10, 1200), (100, 10, 1300), (100, 10, 1100)],
}

SURVEY_HEADER = "firm_id,country,year,isic,fiscal_close_month,d2,n7a,n2a\n"


def stylized_panel(year):
    return [FirmObservation(y=float(y), k=float(k), l=float(l)) for l, k, y in STYLIZED[year]]


def stylized_csv() -> str:
    lines = [SURVEY_HEADER]
    for year, rows in STYLIZED.items():
        for i, (l, k, y) in enumerate(rows, 1):
            lines.append(f"f{year}-{i},Stylland,{year},10,,{y},{k},{l}\n")
    return "".join(lines)


@pytest.fixture
def stylized_panels():
    return {PanelKey("10", "Stylland", yr): stylized_panel(yr) for yr in STYLIZED}


@pytest.fixture
def stylized_survey(tmp_path):
    path = tmp_path / "stylized.csv"
    path.write_text(stylized_csv(), encoding="utf-8")
    return path


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Record and print one PASS/FAIL line, then assert it."""

    def emit(criterion: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
