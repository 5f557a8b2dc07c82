from dkt.formatters import format_cell, format_recovery, format_report
from dkt.stats import CellStats, EvalReport, RecoveryReport


def _report(reference: str | None = "dkt") -> EvalReport:
    cells = {
        ("dkt", "k0"): CellStats(point=0.8, mean=0.774, std=0.113, n=40),
        ("dkt", "k1"): CellStats(point=0.6, mean=0.61, std=0.09, n=40),
        ("linear", "k0"): CellStats(point=0.3, mean=0.312, std=0.2, n=40, p_raw=0.001, significant=True),
    }
    return EvalReport(models=["dkt", "linear"], regions=["k0", "k1"], cells=cells, bootstrap=500, reference=reference)


def test_format_cell_basic():
    assert format_cell(CellStats(point=0.8, mean=0.774, std=0.113, n=40)) == "0.77 ± 0.11"


def test_format_cell_significant():
    cell = CellStats(point=0.8, mean=0.774, std=0.113, n=40, significant=True)
    assert format_cell(cell) == "0.77 ± 0.11*"


def test_format_cell_decimals():
    assert format_cell(CellStats(point=0.0, mean=-0.1, std=0.05, n=10), decimals=3) == "-0.100 ± 0.050"


def test_format_report_with_reference():
    lines = format_report(_report()).splitlines()
    assert lines[0] == "Spearman correlation, mean ± std over 500 bootstrap resamples"
    assert lines[1] == "* p < 0.05 against dkt (Welch t-test, Bonferroni corrected)"
    assert lines[3].split() == ["model", "k0", "k1"]
    assert lines[5].startswith("dkt")
    assert "0.31 ± 0.20*" in lines[6]


def test_format_report_marks_missing_cells():
    last = format_report(_report()).splitlines()[-1]
    assert last.split()[0] == "linear"
    assert last.endswith("-")


def test_format_report_without_reference():
    text = format_report(_report(reference=None))
    assert "Bonferroni" not in text
    assert text.endswith("\n")


def test_format_report_columns_are_aligned():
    lines = format_report(_report()).splitlines()[3:]
    starts = {line.index("0.") for line in lines[2:]}
    assert len(starts) == 1
    assert lines[0].index("k0") in starts


def test_format_recovery():
    recovery = RecoveryReport(
        theta_mae={"k0": 0.01, "k1": 0.03},
        lambda_mae={"AD": 0.05},
        shift_r2={"AD": 0.97},
    )
    assert format_recovery(recovery).splitlines() == [
        "trajectory MAE: 0.0200",
        "  theta k0: 0.0100",
        "  theta k1: 0.0300",
        "  lambda AD: 0.0500",
        "time-shift R² AD: 0.9700",
    ]


def test_format_report_appends_recovery():
    report = _report()
    report.recovery = RecoveryReport(theta_mae={"k0": 0.01}, lambda_mae={}, shift_r2={})
    assert format_report(report).splitlines()[-1] == "  theta k0: 0.0100"
