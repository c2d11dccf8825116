# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

import concurrent.futures
import csv
import enum
import io
import itertools
import time
import traceback
from dataclasses import dataclass, field, replace
from logging import getLogger
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from driftlane.core import (
    N_CLASSES,
    CongestionLevel,
    DriftlaneError,
    InvalidInputError,
    argmax_class,
)
from driftlane.ingest import (
    WEEK_SLOTS,
    InsufficientDataError,
    LabelThresholds,
    WindowSpec,
    build_instances,
)
from driftlane.utils import atomic_write

logger = getLogger(__name__)

RESULT_COLUMNS = [
    "method",
    "location",
    "mode",
    "horizon",
    "seed",
    "class",
    "precision",
    "recall",
    "f1",
    "umf1",
    "n_eval",
    "runtime_s",
]
SUMMARY_CLASS = "ALL"
METRIC_WINDOW = WEEK_SLOTS


class Mode(enum.Enum):
    OFFLINE = "offline"
    ONLINE = "online"


class Strategy(enum.Enum):
    CLASSIFICATION = "classification"
    NAIVE_REGRESSION = "naive-regression"


@dataclass(frozen=True)
class RunConfig:
    method: str
    mode: Mode = Mode.ONLINE
    horizon: int = 1
    location: str = ""
    seed: int = 0
    n_init: int = WEEK_SLOTS
    thresholds: LabelThresholds = LabelThresholds()
    strategy: Strategy = Strategy.CLASSIFICATION
    record_runtime: bool = True

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.n_init < 1:
            raise ValueError(f"n_init must be >= 1, got {self.n_init}")
        if self.strategy is Strategy.NAIVE_REGRESSION and self.method != "NM":
            raise ValueError(
                f"Strategy {self.strategy.value} is only defined for NM, not {self.method}"
            )

    @property
    def label(self):
        return f"{self.method}/{self.mode.value}/h={self.horizon}/seed={self.seed}"


class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    def __init__(self):
        self.counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)

    def add(self, true, predicted):
        self.counts[int(true), int(predicted)] += 1

    @property
    def total(self):
        return int(self.counts.sum())

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(
            self.counts, other.counts
        )

    def __repr__(self):  # pragma: no cover
        return f"ConfusionMatrix({self.counts.tolist()})"


def _ratio(numerator, denominator):
    return np.divide(
        numerator,
        denominator,
        out=np.zeros(N_CLASSES),
        where=denominator > 0,
    )


def f1_scores(cm: ConfusionMatrix):
    """One-vs-rest precision, recall and F1 per class; 0/0 counts as 0."""
    counts = cm.counts.astype(float)
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    true = counts.sum(axis=1)

    precision = _ratio(tp, predicted)
    recall = _ratio(tp, true)
    f1 = _ratio(2 * precision * recall, precision + recall)
    return precision, recall, f1


def umf1(f1) -> float:
    f1 = np.asarray(f1, dtype=float)
    if f1.shape != (N_CLASSES,) or np.any(f1 < 0) or np.any(f1 > 1):
        raise ValueError(f"Expected {N_CLASSES} F1 values in [0, 1], got {f1.tolist()}")
    return float(np.mean(f1))


@dataclass
class EvalReport:
    config: RunConfig
    confusion: ConfusionMatrix
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    umf1: float
    n_eval: int
    runtime_s: float = 0.0
    window_umf1: List[float] = field(default_factory=list)

    ok = True

    @classmethod
    def from_confusion(cls, config, confusion, runtime_s=0.0, window_umf1=()):
        precision, recall, f1 = f1_scores(confusion)
        return cls(
            config=config,
            confusion=confusion,
            precision=precision,
            recall=recall,
            f1=f1,
            umf1=umf1(f1),
            n_eval=confusion.total,
            runtime_s=runtime_s,
            window_umf1=list(window_umf1),
        )

    def same_scores(self, other):
        return self.confusion == other.confusion and self.umf1 == other.umf1


@dataclass(frozen=True)
class RunFailure:
    config: RunConfig
    error: str
    index: Optional[int] = None

    ok = False


class AbortedRunError(DriftlaneError):
    def __init__(self, message, partial_report, index):
        super().__init__(message)
        self.partial_report = partial_report
        self.index = index


def _training_target(instance, strategy):
    if strategy is Strategy.CLASSIFICATION:
        return instance.target
    if instance.target_speed is None:
        raise InvalidInputError(
            f"Instance at slot {instance.target_time} carries no target speed"
        )
    return instance.target_speed


def prequential_run(stream: Sequence, learner, cfg: RunConfig, progress=False) -> EvalReport:
    """Warm-start on the first `cfg.n_init` instances, then test-then-train.

    In offline mode the learner is frozen after the warm start. Metrics only
    cover the instances after the warm start.
    """
    if len(stream) <= cfg.n_init:
        raise InsufficientDataError(
            f"Stream of {len(stream)} instances cannot hold a warm start of {cfg.n_init}"
        )

    learner.reset(cfg.seed)
    for instance in stream[: cfg.n_init]:
        learner.learn_one(instance.features, _training_target(instance, cfg.strategy))
    learner.end_warm_start()

    online = cfg.mode is Mode.ONLINE
    confusion = ConfusionMatrix()
    window = ConfusionMatrix()
    window_scores = []

    test = stream[cfg.n_init :]
    if progress:
        test = tqdm(test, desc=cfg.label)

    start = time.perf_counter()
    for i, instance in enumerate(test):
        try:
            predicted = argmax_class(learner.predict_one(instance.features))
            confusion.add(instance.target, predicted)
            window.add(instance.target, predicted)
            if online:
                learner.learn_one(
                    instance.features, _training_target(instance, cfg.strategy)
                )
        except Exception as e:
            partial = EvalReport.from_confusion(cfg, confusion, window_umf1=window_scores)
            index = cfg.n_init + i
            raise AbortedRunError(
                f"{cfg.label} failed at instance {index}: {e}", partial, index
            ) from e

        if window.total == METRIC_WINDOW:
            window_scores.append(umf1(f1_scores(window)[2]))
            window = ConfusionMatrix()

    runtime = round(time.perf_counter() - start, 3) if cfg.record_runtime else 0.0
    return EvalReport.from_confusion(cfg, confusion, runtime, window_scores)


def execute_run(cfg: RunConfig, data, nb, learner_factory, n_lags=5) -> EvalReport:
    stream = build_instances(data, nb, WindowSpec(n_lags, cfg.horizon), cfg.thresholds)
    report = prequential_run(stream, learner_factory(cfg), cfg)
    logger.info(f"{cfg.label}: UMF1 {report.umf1:.4f} over {report.n_eval} instances")
    return report


def _guarded_run(cfg, data, nb, learner_factory, n_lags):
    try:
        return execute_run(cfg, data, nb, learner_factory, n_lags)
    except Exception as e:
        logger.error(f"Run {cfg.label} failed: {e}")
        traceback.print_exc()
        return RunFailure(cfg, str(e), getattr(e, "index", None))


def run_all(configs, data, nb, learner_factory, n_lags=5, workers=1, progress=False):
    """Execute every config, keeping their order in the result list.

    A failing run is recorded as a RunFailure and the remaining runs go on.
    """
    configs = list(configs)
    # Every task carries its own copy of the matrix to the workers.
    data = data.select(nb.sensor_ids)
    args = (
        configs,
        itertools.repeat(data),
        itertools.repeat(nb),
        itertools.repeat(learner_factory),
        itertools.repeat(n_lags),
    )

    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
            results = executor.map(_guarded_run, *args)
            if progress:
                results = tqdm(results, total=len(configs))
            results = list(results)
    else:
        results = map(_guarded_run, *args)
        if progress:
            results = tqdm(results, total=len(configs))
        results = list(results)

    failures = [r for r in results if not r.ok]
    if failures:
        logger.warning(f"{len(failures)} of {len(results)} runs failed")
    return results


def horizon_sweep(
    base: RunConfig, horizons, data, nb, learner_factory, n_lags=5, workers=1
):
    horizons = list(horizons)
    if not horizons or any(h < 1 for h in horizons):
        raise ValueError(f"Horizons must be a non-empty list of counts >= 1, got {horizons}")
    configs = [replace(base, horizon=h) for h in horizons]
    return run_all(configs, data, nb, learner_factory, n_lags, workers)


def run_lengths(labels):
    """(label, length) of every maximal run of equal consecutive labels."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        return np.array([], dtype=labels.dtype), np.array([], dtype=np.int64)
    boundaries = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [len(labels)]))
    return labels[starts], ends - starts


def class_profile(stream) -> pd.DataFrame:
    labels = np.array([int(instance.target) for instance in stream], dtype=np.int64)
    return profile_labels(labels)


def profile_labels(labels) -> pd.DataFrame:
    labels = np.asarray(labels, dtype=np.int64)
    run_labels, lengths = run_lengths(labels)
    rows = []
    for level in CongestionLevel:
        level_runs = lengths[run_labels == int(level)]
        count = int(np.sum(labels == int(level)))
        rows.append(
            {
                "class": level.label,
                "count": count,
                "fraction": count / len(labels) if len(labels) else 0.0,
                "mean_run": float(level_runs.mean()) if len(level_runs) else 0.0,
                "median_run": float(np.median(level_runs)) if len(level_runs) else 0.0,
            }
        )
    return pd.DataFrame(rows, columns=["class", "count", "fraction", "mean_run", "median_run"])


def report_rows(report: EvalReport):
    cfg = report.config
    common = {
        "method": cfg.method,
        "location": cfg.location,
        "mode": cfg.mode.value,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
    }
    tail = {
        "umf1": f"{report.umf1:.6f}",
        "n_eval": report.n_eval,
        "runtime_s": f"{report.runtime_s:.3f}",
    }

    rows = []
    for level in CongestionLevel:
        rows.append(
            {
                **common,
                "class": level.label,
                "precision": f"{report.precision[level]:.6f}",
                "recall": f"{report.recall[level]:.6f}",
                "f1": f"{report.f1[level]:.6f}",
                **tail,
            }
        )
    rows.append(
        {
            **common,
            "class": SUMMARY_CLASS,
            "precision": f"{report.precision.mean():.6f}",
            "recall": f"{report.recall.mean():.6f}",
            "f1": f"{report.umf1:.6f}",
            **tail,
        }
    )
    return rows


def results_csv_text(reports) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=RESULT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for report in reports:
        if report.ok:
            writer.writerows(report_rows(report))
    return out.getvalue()


def write_results_csv(reports, path):
    atomic_write(path, results_csv_text(reports))
