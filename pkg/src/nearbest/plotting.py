"""SVG line charts of run CSV columns."""

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from nearbest.exceptions import ParameterRangeError  # noqa: E402
from nearbest.logger import get_logger  # noqa: E402
from nearbest.result_store import read_csv  # noqa: E402

logger = get_logger(__name__)

matplotlib.rcParams["svg.hashsalt"] = "nearbest"


def plot_columns(csv_path: str, columns: Sequence[str], out_path: str, x: str = "n", logy: bool = True) -> str:
    """
    Line chart of ``columns`` against ``x``; empty cells and non-positive values (log scale) are skipped.

    Raises:
        ParameterRangeError: If a column is missing from the CSV
    """
    rows = read_csv(csv_path)
    if not rows:
        raise ParameterRangeError(f"{csv_path} has no rows")
    for name in [x, *columns]:
        if name not in rows[0]:
            raise ParameterRangeError(f"Column {name!r} not in {csv_path}; have {', '.join(rows[0])}")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xs = np.array([row[x] for row in rows])
    for name in columns:
        ys = np.array([row[name] for row in rows])
        keep = np.isfinite(ys) & np.isfinite(xs)
        if logy:
            keep &= ys > 0
        ax.plot(xs[keep], ys[keep], marker="o", markersize=3, label=name)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Plotted {', '.join(columns)} from {csv_path} to {out_path}")
    return out_path
