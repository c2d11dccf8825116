# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from logging import getLogger
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from driftlane.core import CongestionLevel, DriftlaneError, LabeledInstance
from driftlane.utils import atomic_write

logger = getLogger(__name__)

MAX_SPEED = 150.0
MAX_NEIGHBOR_SPAN = 6.0
WEEK_SLOTS = 7 * 24 * 12


class FormatError(DriftlaneError):
    pass


class ValueRangeError(DriftlaneError, ValueError):
    pass


class MetadataError(DriftlaneError):
    pass


class InsufficientNeighborsError(DriftlaneError):
    def __init__(self, side, found, needed):
        super().__init__(f"Only {found} {side} sensors available, {needed} needed")
        self.side = side


class EmptyStreamError(DriftlaneError):
    pass


class InsufficientDataError(DriftlaneError):
    pass


@dataclass
class LoopMatrix:
    speeds: np.ndarray
    sensor_ids: List[str]
    timestamps: List[str] = field(default_factory=list)

    @property
    def n_rows(self):
        return self.speeds.shape[0]

    def column_indices(self, sensor_ids):
        position = {sensor_id: i for i, sensor_id in enumerate(self.sensor_ids)}
        try:
            return [position[sensor_id] for sensor_id in sensor_ids]
        except KeyError as e:
            raise MetadataError(f"Sensor {e.args[0]} is not a column of the matrix")

    def select(self, sensor_ids):
        """Copy holding only the `sensor_ids` columns, without timestamps."""
        return LoopMatrix(self.speeds[:, self.column_indices(sensor_ids)], list(sensor_ids))


@dataclass(frozen=True)
class AtrMeta:
    sensor_id: str
    route: str
    milepost: float


@dataclass(frozen=True)
class NeighborSet:
    sensor_ids: Tuple[str, ...]
    target: str
    span: float
    flagged: bool = False

    @property
    def target_index(self):
        return self.sensor_ids.index(self.target)


@dataclass(frozen=True)
class WindowSpec:
    n_lags: int = 5
    horizon: int = 1

    def __post_init__(self):
        if self.n_lags < 1:
            raise ValueError(f"n_lags must be >= 1, got {self.n_lags}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")

    def n_features(self, n_sensors=9):
        return n_sensors * self.n_lags


@dataclass(frozen=True)
class LabelThresholds:
    free_flow_above: float = 42.0
    bottleneck_below: float = 22.0

    def __post_init__(self):
        if self.bottleneck_below <= 0 or self.free_flow_above <= 0:
            raise ValueError("Label thresholds must be positive")
        if not self.bottleneck_below < self.free_flow_above:
            raise ValueError(
                f"bottleneck_below ({self.bottleneck_below}) must be lower than "
                f"free_flow_above ({self.free_flow_above})"
            )


def _parse_speed(text, row, sensor_id):
    try:
        value = float(text)
    except ValueError:
        raise ValueRangeError(
            f"Row {row}, sensor {sensor_id}: {text!r} is not a number"
        )
    if not math.isfinite(value) or value < 0 or value > MAX_SPEED:
        raise ValueRangeError(
            f"Row {row}, sensor {sensor_id}: speed {value} outside [0, {MAX_SPEED}]"
        )
    return value


def parse_meta_csv(meta_path) -> List[AtrMeta]:
    try:
        frame = pd.read_csv(meta_path, dtype={"sensor_id": str, "route": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FormatError(f"Cannot parse metadata file {meta_path}: {e}")

    missing = {"sensor_id", "route", "milepost"} - set(frame.columns)
    if missing:
        raise MetadataError(f"Metadata file lacks columns {sorted(missing)}")

    mileposts = pd.to_numeric(frame["milepost"], errors="coerce")
    bad = frame.index[mileposts.isna() | (mileposts < 0)]
    if len(bad) > 0:
        raise MetadataError(
            f"Invalid milepost on metadata row {int(bad[0]) + 2}: {frame['milepost'][bad[0]]!r}"
        )

    meta = [
        AtrMeta(str(sensor_id), str(route), float(milepost))
        for sensor_id, route, milepost in zip(
            frame["sensor_id"], frame["route"], mileposts
        )
    ]

    seen = set()
    for m in meta:
        if (m.route, m.milepost) in seen:
            raise MetadataError(
                f"Duplicate position {m.route} @ {m.milepost} (sensor {m.sensor_id})"
            )
        seen.add((m.route, m.milepost))

    return meta


def parse_loop_csv(path, meta_path) -> Tuple[LoopMatrix, List[AtrMeta]]:
    meta = parse_meta_csv(meta_path)
    known = {m.sensor_id for m in meta}

    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path} is empty")

        sensor_ids = [h.strip() for h in header[1:]]
        unknown = [s for s in sensor_ids if s not in known]
        if unknown:
            raise MetadataError(f"Sensors missing from metadata: {unknown[:5]}")

        width = len(header)
        timestamps = []
        rows = []
        # Row numbers are 1-based file lines, the header being line 1.
        for row_number, row in enumerate(reader, start=2):
            if len(row) != width:
                raise FormatError(
                    f"Row {row_number} has {len(row)} fields, expected {width}"
                )
            timestamps.append(row[0])
            rows.append(
                [
                    _parse_speed(cell, row_number, sensor_id)
                    for cell, sensor_id in zip(row[1:], sensor_ids)
                ]
            )

    speeds = np.array(rows, dtype=float).reshape(len(rows), len(sensor_ids))
    logger.info(f"Parsed {speeds.shape[0]} slots for {speeds.shape[1]} sensors")
    return LoopMatrix(speeds, sensor_ids, timestamps), meta


def write_loop_csv(matrix: LoopMatrix, path):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["timestamp"] + list(matrix.sensor_ids))
    timestamps = matrix.timestamps or [str(i) for i in range(matrix.n_rows)]
    for timestamp, row in zip(timestamps, matrix.speeds):
        writer.writerow([timestamp] + [repr(float(v)) for v in row])
    atomic_write(path, out.getvalue())


def write_meta_csv(meta: Sequence[AtrMeta], path):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["sensor_id", "route", "milepost"])
    for m in meta:
        writer.writerow([m.sensor_id, m.route, repr(float(m.milepost))])
    atomic_write(path, out.getvalue())


def select_neighbors(meta: Sequence[AtrMeta], target, k=4) -> NeighborSet:
    by_id = {m.sensor_id: m for m in meta}
    if target not in by_id:
        raise MetadataError(f"Unknown target sensor {target}")

    route = by_id[target].route
    same_route = sorted(
        (m for m in meta if m.route == route), key=lambda m: m.milepost
    )
    i = next(j for j, m in enumerate(same_route) if m.sensor_id == target)

    if i < k:
        raise InsufficientNeighborsError("upstream", i, k)
    downstream = len(same_route) - i - 1
    if downstream < k:
        raise InsufficientNeighborsError("downstream", downstream, k)

    members = same_route[i - k : i + k + 1]
    span = max(abs(m.milepost - by_id[target].milepost) for m in members)
    flagged = span > MAX_NEIGHBOR_SPAN
    if flagged:
        logger.warning(
            f"Neighbourhood of {target} spans {span:.2f} miles (> {MAX_NEIGHBOR_SPAN})"
        )

    return NeighborSet(tuple(m.sensor_id for m in members), target, span, flagged)


def label_speed(s, th: LabelThresholds = LabelThresholds()) -> CongestionLevel:
    if s > th.free_flow_above:
        return CongestionLevel.FREE_FLOW
    if s < th.bottleneck_below:
        return CongestionLevel.BOTTLENECK
    return CongestionLevel.CONGESTION


def label_speeds(speeds, th: LabelThresholds = LabelThresholds()) -> np.ndarray:
    speeds = np.asarray(speeds, dtype=float)
    labels = np.full(speeds.shape, int(CongestionLevel.CONGESTION), dtype=np.int64)
    labels[speeds > th.free_flow_above] = int(CongestionLevel.FREE_FLOW)
    labels[speeds < th.bottleneck_below] = int(CongestionLevel.BOTTLENECK)
    return labels


def build_instances(
    m: LoopMatrix,
    nb: NeighborSet,
    spec: WindowSpec = WindowSpec(),
    th: LabelThresholds = LabelThresholds(),
) -> List[LabeledInstance]:
    """Slide the lag window over the neighbourhood columns.

    The window for target slot t covers slots t-h-n_lags+1 .. t-h, flattened
    sensor-major (milepost ascending) and lag-minor (oldest first).
    """
    n_lags, h = spec.n_lags, spec.horizon
    if m.n_rows < n_lags + h:
        raise EmptyStreamError(
            f"{m.n_rows} slots cannot feed {n_lags} lags at horizon {h}"
        )

    columns = m.speeds[:, m.column_indices(nb.sensor_ids)]
    target_column = m.speeds[:, m.column_indices([nb.target])[0]]

    n_instances = m.n_rows - n_lags - h + 1
    # (n_windows, n_sensors, n_lags), window w starting at slot w.
    windows = sliding_window_view(columns, n_lags, axis=0)[:n_instances]
    features = np.ascontiguousarray(windows).reshape(n_instances, -1)

    first_target = n_lags + h - 1
    target_speeds = target_column[first_target:]
    targets = label_speeds(target_speeds, th)

    return [
        LabeledInstance(
            features=features[i],
            target=CongestionLevel(int(targets[i])),
            target_time=first_target + i,
            location_id=nb.target,
            target_speed=float(target_speeds[i]),
        )
        for i in range(n_instances)
    ]


def split_warm_start(stream: Sequence[LabeledInstance], n_init=WEEK_SLOTS):
    if len(stream) <= n_init:
        raise InsufficientDataError(
            f"Stream of {len(stream)} instances cannot hold a warm start of {n_init}"
        )
    return stream[:n_init], stream[n_init:]
