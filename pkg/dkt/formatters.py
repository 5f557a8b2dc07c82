"""Formatters for evaluation reports (reports to strings)."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .stats import CellStats, EvalReport, RecoveryReport

SIGNIFICANCE_MARK = "*"


def format_cell(cell: CellStats, decimals: int = 2) -> str:
    """Render one table cell as "mean ± std", marked when significant.

    Args:
    ----
        cell: statistics of a (model, region) cell.

        decimals: digits after the decimal point.

    Returns:
    -------
        The cell text, e.g. "0.77 ± 0.11*".

    """
    text = f"{cell.mean:.{decimals}f} ± {cell.std:.{decimals}f}"
    return text + SIGNIFICANCE_MARK if cell.significant else text


def format_recovery(recovery: RecoveryReport) -> str:
    lines = [f"trajectory MAE: {recovery.trajectory_mae:.4f}"]
    lines += [f"  theta {name}: {value:.4f}" for name, value in recovery.theta_mae.items()]
    lines += [f"  lambda {name}: {value:.4f}" for name, value in recovery.lambda_mae.items()]
    lines += [f"time-shift R² {name}: {value:.4f}" for name, value in recovery.shift_r2.items()]
    return "\n".join(lines)


def format_report(report: EvalReport) -> str:
    """Render a report as an aligned plain-text table, one row per model.

    The header names the number of bootstrap resamples. With a reference
    model, "*" marks cells that differ from it after Bonferroni correction.
    """
    header = ["model", *report.regions]
    rows = [
        [model] + [format_cell(report.cells[(model, r)]) if (model, r) in report.cells else "-" for r in report.regions]
        for model in report.models
    ]
    widths = [max(len(row[j]) for row in [header, *rows]) for j in range(len(header))]

    def line(cells: list[str]) -> str:
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths, strict=True)).rstrip()

    out = [f"Spearman correlation, mean ± std over {report.bootstrap} bootstrap resamples"]
    if report.reference is not None:
        out.append(f"{SIGNIFICANCE_MARK} p < 0.05 against {report.reference} (Welch t-test, Bonferroni corrected)")
    out += ["", line(header), line(["-" * w for w in widths])]
    out += [line(row) for row in rows]
    if report.recovery is not None:
        out += ["", format_recovery(report.recovery)]
    return "\n".join(out) + "\n"
