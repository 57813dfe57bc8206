"""
SVG plots from result CSVs.

Plots are a view over results.csv, never a data source. Output bytes are
reproducible: the SVG hash salt is fixed and no date is embedded.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from cdkit.errors import ConfigError  # noqa: E402
from utils.constants import PLOT_DPI, PLOT_HASHSALT  # noqa: E402
from utils.io import read_results_csv  # noqa: E402

logger = logging.getLogger(__name__)

STYLE = {
    'font.family': 'sans-serif',
    'font.sans-serif': ['DejaVu Sans'],
    'font.size': 10,
    'axes.labelsize': 12,
    'axes.titlesize': 13,
    'legend.fontsize': 9,
    'figure.dpi': PLOT_DPI,
    'svg.hashsalt': PLOT_HASHSALT,
    'svg.fonttype': 'path',
}


def emit_plot(
    csv_path: Union[str, Path],
    x: str,
    y: str,
    output: Union[str, Path],
    logx: bool = True,
    logy: bool = True,
    title: Optional[str] = None,
) -> Path:
    """
    Plot column ``y`` against column ``x`` of a results CSV as SVG.

    Rows whose x or y is missing, non-numeric, or non-positive on a log
    axis are dropped.

    Parameters
    ----------
    csv_path : str or Path
        Results table written by the harness
    x, y : str
        Column names
    output : str or Path
        SVG file to write
    logx, logy : bool
        Logarithmic axes

    Returns
    -------
    Path
        The written file

    Raises
    ------
    ConfigError
        Missing or empty CSV, unknown column, or nothing left to plot. No
        file is written in that case.
    """
    df = read_results_csv(csv_path)
    missing = [column for column in (x, y) if column not in df.columns]
    if missing:
        raise ConfigError(
            f"Column(s) {', '.join(missing)} not in {csv_path}; available: {', '.join(df.columns)}"
        )

    data = pd.DataFrame({
        x: pd.to_numeric(df[x], errors='coerce'),
        y: pd.to_numeric(df[y], errors='coerce'),
    }).dropna()
    if logx:
        data = data[data[x] > 0]
    if logy:
        data = data[data[y] > 0]
    if data.empty:
        raise ConfigError(f"No plottable rows for {y} vs {x} in {csv_path}")
    data = data.sort_values(x)

    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        ax.plot(data[x], data[y], marker='o', linewidth=1.5, color='#1f77b4')
        ax.set_xscale('log' if logx else 'linear')
        ax.set_yscale('log' if logy else 'linear')
        ax.set_xlabel(x)
        ax.set_ylabel(y)
        ax.set_title(title or f"{y} vs {x}")
        ax.grid(True, which='both', alpha=0.3)
        fig.tight_layout()
        fig.savefig(output, format='svg', metadata={'Date': None})
        plt.close(fig)

    logger.info(f"Saved plot ({len(data)} points) to {output}")
    return output
