"""Chart assets written next to the report tables"""
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from app.core.errors import ReportError  # noqa: E402
from app.core.log import get_logger  # noqa: E402

logger = get_logger(__name__)

PathLike = Union[str, Path]


class ReportChartManager:
    """Renders the bar charts of the benchmark report as PNG files"""

    FIGURE_SIZE = (8, 4.5)
    DPI = 120
    IMPROVED_COLOR = "#2a9d8f"
    DEGRADED_COLOR = "#e76f51"
    NEUTRAL_COLOR = "#264653"

    @staticmethod
    def _save(fig, path: PathLike) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.tight_layout()
        # no creation timestamp in the PNG metadata
        fig.savefig(path, dpi=ReportChartManager.DPI, metadata={"Software": None})
        plt.close(fig)
        logger.debug("wrote chart %s", path)
        return path

    @staticmethod
    def delta_chart(improvements: pd.DataFrame, dataset: str, path: PathLike) -> Path:
        """
        Bar chart of mean accuracy delta per technique on one dataset

        Args:
            improvements: rows of the per-dataset improvement table
            dataset: dataset whose rows are drawn
            path: PNG destination

        Returns:
            The written path
        """
        rows = improvements[(improvements["dataset"] == dataset) & (improvements["technique"] != "baseline")]
        if rows.empty:
            raise ReportError(f"no technique rows to chart for dataset {dataset}")
        fig, ax = plt.subplots(figsize=ReportChartManager.FIGURE_SIZE)
        colors = [
            ReportChartManager.IMPROVED_COLOR if d > 0 else ReportChartManager.DEGRADED_COLOR
            for d in rows["delta_mean"]
        ]
        ax.bar(rows["technique"], rows["delta_mean"], color=colors)
        ax.axhline(0.0, color="black", linewidth=0.8)
        ax.set_ylabel("accuracy delta vs baseline [pp]")
        ax.set_title(f"{dataset}: improvement over baseline")
        ax.tick_params(axis="x", rotation=45)
        return ReportChartManager._save(fig, path)

    @staticmethod
    def summary_chart(summary: pd.DataFrame, path: PathLike) -> Path:
        """Datasets improved per technique (bars) with the maximum improvement (markers)"""
        if summary.empty:
            raise ReportError("summary table is empty")
        fig, ax = plt.subplots(figsize=ReportChartManager.FIGURE_SIZE)
        ax.bar(summary["technique"], summary["datasets_improved"], color=ReportChartManager.NEUTRAL_COLOR)
        ax.set_ylabel("datasets improved")
        ax.tick_params(axis="x", rotation=45)
        twin = ax.twinx()
        twin.plot(summary["technique"], summary["max_improvement"], "o", color=ReportChartManager.IMPROVED_COLOR)
        twin.set_ylabel("max improvement [pp]")
        ax.set_title("techniques across datasets")
        return ReportChartManager._save(fig, path)

    @staticmethod
    def class_time_chart(table: pd.DataFrame, dataset: str, path: PathLike) -> Path:
        fig, ax = plt.subplots(figsize=ReportChartManager.FIGURE_SIZE)
        ax.bar(table["class"], table["minutes"], color=ReportChartManager.NEUTRAL_COLOR)
        ax.set_ylabel("minutes")
        ax.set_title(f"{dataset}: recorded time per class")
        ax.tick_params(axis="x", rotation=30)
        return ReportChartManager._save(fig, path)
