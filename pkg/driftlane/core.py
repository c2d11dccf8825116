# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

import abc
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

N_CLASSES = 3


class DriftlaneError(Exception):
    pass


class InvalidScoreError(DriftlaneError, ValueError):
    pass


class ShapeError(DriftlaneError, ValueError):
    pass


class InvalidInputError(DriftlaneError, ValueError):
    pass


class CongestionLevel(enum.IntEnum):
    FREE_FLOW = 0
    CONGESTION = 1
    BOTTLENECK = 2

    @property
    def label(self):
        return _LABELS[self]

    @classmethod
    def from_label(cls, text):
        for level, label in _LABELS.items():
            if label == text:
                return level
        raise ValueError(f"Unknown congestion level: {text!r}")


_LABELS = {
    CongestionLevel.FREE_FLOW: "free-flow",
    CongestionLevel.CONGESTION: "congestion",
    CongestionLevel.BOTTLENECK: "bottleneck",
}


@dataclass(frozen=True)
class LabeledInstance:
    features: np.ndarray
    target: CongestionLevel
    target_time: int
    location_id: str
    target_speed: Optional[float] = None


def argmax_class(scores) -> CongestionLevel:
    """Decode a score vector, breaking ties toward the lowest ordinal."""
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (N_CLASSES,):
        raise InvalidScoreError(f"Expected {N_CLASSES} scores, got shape {scores.shape}")
    if not np.all(np.isfinite(scores)):
        raise InvalidScoreError(f"Non-finite score in {scores.tolist()}")
    # np.argmax returns the first maximum.
    return CongestionLevel(int(np.argmax(scores)))


def one_hot(level) -> np.ndarray:
    scores = np.zeros(N_CLASSES)
    scores[int(CongestionLevel(level))] = 1.0
    return scores


class Classifier(abc.ABC):
    """Single-instance incremental classifier.

    `predict_one` must leave the learner untouched, `learn_one` consumes
    exactly one instance, and `reset(seed)` brings the learner back to a
    state from which identical call sequences give identical outputs.
    """

    name = "classifier"

    def __init__(self, seed=0):
        self.seed = seed

    @abc.abstractmethod
    def predict_one(self, x) -> np.ndarray:
        pass

    @abc.abstractmethod
    def learn_one(self, x, y) -> None:
        pass

    @abc.abstractmethod
    def reset(self, seed=None) -> None:
        pass

    def end_warm_start(self):
        pass

    def __repr__(self):  # pragma: no cover
        return f"<{type(self).__name__} {self.name} seed={self.seed}>"
