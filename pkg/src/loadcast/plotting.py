"""SVG rendering of window-MAPE evolution with holiday spans shaded.

Output is byte-deterministic: figure hashes are salted with a fixed string
and the SVG date metadata is suppressed, so reruns of the same evaluation
produce identical files.
"""

from __future__ import annotations

from datetime import timedelta
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.dates as mdates  # noqa: E402
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .data import HolidayCalendar  # noqa: E402
from .evaluation import EvalReport  # noqa: E402

plt.rcParams["svg.hashsalt"] = "loadcast"


def _holiday_spans(report: EvalReport, cal: HolidayCalendar):
    """Contiguous [start, end) day intervals of flagged civil dates."""
    days = sorted(
        {ts.astype("datetime64[D]").item() for w in report.windows for ts in (w.issued_at,)}
    )
    flagged = [d for d in days if cal.is_holiday(d)]
    spans = []
    for d in flagged:
        if spans and spans[-1][1] == d:
            spans[-1] = (spans[-1][0], d + timedelta(days=1))
        else:
            spans.append((d, d + timedelta(days=1)))
    return spans


def mape_evolution_svg(
    report: EvalReport,
    path: str | Path,
    cal: HolidayCalendar | None = None,
    title: str | None = None,
) -> Path:
    """Plot per-window MAPE over issue time; shade holiday days; mark the threshold."""
    path = Path(path)
    times = [w.issued_at.astype("datetime64[s]").item() for w in report.windows]
    mapes = [w.mape if w.mape is not None else np.nan for w in report.windows]

    fig, ax = plt.subplots(figsize=(9, 3.2), dpi=100)
    ax.plot(times, mapes, lw=0.9, color="#1f6fb2", label="window MAPE")
    ax.axhline(report.mape_threshold, color="#b22222", lw=1.0, ls="--",
               label=f"threshold {report.mape_threshold:g}%")
    if cal is not None:
        for lo, hi in _holiday_spans(report, cal):
            ax.axvspan(lo, hi, color="#f5c469", alpha=0.35, lw=0)
    ax.set_ylabel("MAPE [%]")
    ax.set_xlabel("forecast issue time")
    ax.set_title(title or f"{report.consumer_id} — {report.task} window MAPE")
    ax.legend(loc="upper right", fontsize=8)
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%Y-%m-%d"))
    fig.autofmt_xdate()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
