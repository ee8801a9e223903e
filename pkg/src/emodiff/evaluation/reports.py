"""
Report files: flat CSV rows, full JSON, confusion heatmaps and console tables.

CSV numbers are percentages with two decimals; JSON keeps raw reals.
"""
import csv
import io
import logging
import re
from pathlib import Path
from typing import Dict, List, Sequence

from tabulate import tabulate

from ..audio.images import write_confusion_pgm
from ..autodiff.serialization import dumps_json
from ..models.condition import EMOTIONS
from ..models.report import ExperimentReport
from ..utils.files import PathLike, atomic_write_text
from .metrics import TOTAL_KEY

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ("protocol", "condition", "fold", "seed", "uar") + tuple(f"recall_{e}" for e in EMOTIONS)
MAD_COLUMNS = ("emotion", "mad")


def report_csv(reports: Sequence[ExperimentReport]) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        for result in report.folds:
            writer.writerow(result.csv_row())
    return buffer.getvalue()


def write_report_csv(path: PathLike, reports: Sequence[ExperimentReport]) -> None:
    atomic_write_text(path, report_csv(reports))
    logger.info(f"Wrote {sum(len(r.folds) for r in reports)} result rows to {path}")


def write_report_json(path: PathLike, reports: Sequence[ExperimentReport]) -> None:
    atomic_write_text(path, dumps_json({"reports": [r.to_dict() for r in reports]}))


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", text.lower().replace("+", " plus ")).strip("_")


def write_confusion_heatmaps(directory: PathLike, reports: Sequence[ExperimentReport]) -> List[Path]:
    """One row-normalized PGM per report, named after protocol and condition."""
    directory = Path(directory)
    written = []
    for report in reports:
        percentage = report.folds[0].extra.get("percentage") if report.folds else None
        suffix = f"_p{percentage:g}" if percentage is not None else ""
        path = directory / f"confusion_{_slug(report.protocol)}_{_slug(report.condition)}{suffix}.pgm"
        write_confusion_pgm(path, report.confusion)
        written.append(path)
    return written


def write_reports(directory: PathLike, name: str, reports: Sequence[ExperimentReport]) -> Dict[str, Path]:
    directory = Path(directory)
    paths = {"csv": directory / f"{name}.csv", "json": directory / f"{name}.json"}
    write_report_csv(paths["csv"], reports)
    write_report_json(paths["json"], reports)
    write_confusion_heatmaps(directory / "confusion", reports)
    return paths


def mad_csv(table: Dict[str, float]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(MAD_COLUMNS)
    for emotion, value in table.items():
        writer.writerow([emotion, f"{value:.6f}"])
    return buffer.getvalue()


def write_mad_csv(path: PathLike, table: Dict[str, float]) -> None:
    atomic_write_text(path, mad_csv(table))


def format_reports_table(reports: Sequence[ExperimentReport]) -> str:
    rows = []
    for report in reports:
        percentage = report.folds[0].extra.get("percentage") if report.folds else None
        rows.append(
            [
                report.protocol,
                report.condition if percentage is None else f"{report.condition} @ {percentage:g}%",
                len(report.folds),
                f"{100 * report.uar_mean:.2f} ± {100 * report.uar_std:.2f}",
            ]
        )
    return tabulate(rows, headers=["Protocol", "Condition", "Runs", "UAR (%)"], tablefmt="simple")


def format_mad_table(table: Dict[str, float]) -> str:
    rows = [[emotion.capitalize() if emotion != TOTAL_KEY else "Total", f"{value:.4f}"] for emotion, value in table.items()]
    return tabulate(rows, headers=["Emotion", "MAD"], tablefmt="simple")
