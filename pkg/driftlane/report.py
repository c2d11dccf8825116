# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

import io
import os
import re
from logging import getLogger

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from driftlane.core import CongestionLevel, DriftlaneError  # noqa: E402
from driftlane.evaluation import RESULT_COLUMNS, SUMMARY_CLASS  # noqa: E402
from driftlane.utils import atomic_write  # noqa: E402

logger = getLogger(__name__)

MODES = ("offline", "online")
CLASSES = [level.label for level in CongestionLevel]
NUMERIC = ("horizon", "seed", "precision", "recall", "f1", "umf1", "n_eval", "runtime_s")

# Fixed salt and no date so that identical results give identical SVG bytes.
matplotlib.rcParams["svg.hashsalt"] = "driftlane"


class ReportError(DriftlaneError):
    pass


def load_results(path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype={"method": str, "location": str, "mode": str, "class": str})
    except FileNotFoundError:
        raise ReportError(f"{path} does not exist")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ReportError(f"Cannot parse {path}: {e}")

    if list(frame.columns) != RESULT_COLUMNS:
        raise ReportError(f"{path} header {list(frame.columns)} differs from {RESULT_COLUMNS}")

    frame["location"] = frame["location"].fillna("")
    for column in NUMERIC:
        values = pd.to_numeric(frame[column], errors="coerce")
        bad = frame.index[values.isna()]
        if len(bad) > 0:
            # Data rows start on file line 2.
            raise ReportError(
                f"Row {int(bad[0]) + 2}: {column} value {frame[column][bad[0]]!r} is not a number"
            )
        frame[column] = values

    checks = [
        ("mode", frame["mode"].isin(MODES)),
        ("class", frame["class"].isin(CLASSES + [SUMMARY_CLASS])),
        ("f1", frame["f1"].between(0, 1)),
        ("umf1", frame["umf1"].between(0, 1)),
    ]
    for column, valid in checks:
        if not valid.all():
            row = int(frame.index[~valid][0])
            raise ReportError(f"Row {row + 2}: invalid {column} value {frame[column][row]!r}")

    return frame


def umf1_table(frame: pd.DataFrame) -> str:
    """Markdown UMF1 table at the smallest horizon, methods by location and
    mode, averaged over seeds."""
    summary = frame[frame["class"] == SUMMARY_CLASS]
    summary = summary[summary["horizon"] == summary["horizon"].min()]
    pivot = summary.pivot_table(
        index="method", columns=["location", "mode"], values="umf1", aggfunc="mean", sort=True
    )

    columns = list(pivot.columns)
    header = ["method"] + [f"{location} {mode}".strip() for location, mode in columns]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] * len(header)) + "|",
    ]
    for method, row in pivot.iterrows():
        cells = ["" if pd.isna(row[c]) else f"{row[c]:.3f}" for c in columns]
        lines.append("| " + " | ".join([method] + cells) + " |")
    return "\n".join(lines) + "\n"


def _slug(text):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text) or "all"


def f1_chart(frame: pd.DataFrame, location, level) -> str:
    """SVG of F1 against horizon for one location and class, one line per
    method and mode, averaged over seeds."""
    rows = frame[(frame["location"] == location) & (frame["class"] == level)]
    curves = rows.groupby(["method", "mode", "horizon"], sort=True)["f1"].mean()

    fig, ax = plt.subplots(figsize=(6, 4))
    for (method, mode), curve in curves.groupby(level=["method", "mode"], sort=True):
        horizons = curve.index.get_level_values("horizon")
        ax.plot(
            horizons,
            curve.values,
            marker="o",
            linestyle="--" if mode == "offline" else "-",
            label=f"{method} {mode}",
        )
    ax.set_xlabel("horizon")
    ax.set_ylabel("F1")
    ax.set_ylim(0, 1)
    ax.set_title(f"{location} {level}".strip())
    ax.legend(fontsize="small")

    out = io.StringIO()
    fig.savefig(out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out.getvalue()


def render_report(results_path, out_dir):
    frame = load_results(results_path)
    os.makedirs(out_dir, exist_ok=True)

    written = []
    table_path = os.path.join(out_dir, "umf1_table.md")
    atomic_write(table_path, umf1_table(frame))
    written.append(table_path)

    for location in sorted(frame["location"].unique()):
        for level in CLASSES:
            path = os.path.join(out_dir, f"f1_{_slug(location)}_{level}.svg")
            atomic_write(path, f1_chart(frame, location, level))
            written.append(path)

    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written
