# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

import numpy as np
import pytest

from driftlane.core import Classifier, CongestionLevel, LabeledInstance, one_hot
from driftlane.ingest import AtrMeta

BOUNDARY = 35.0


def instances(X, y, speeds=None):
    return [
        LabeledInstance(
            features=np.asarray(x, dtype=float),
            target=CongestionLevel(int(label)),
            target_time=t,
            location_id="S4",
            target_speed=None if speeds is None else float(speeds[t]),
        )
        for t, (x, label) in enumerate(zip(X, y))
    ]


def boundary_data(n, seed=0, n_features=5, flip_at=None):
    """x0 uniform in [10, 70) decides the label (free-flow above 35,
    congestion below); the other features are noise. From `flip_at` on the
    two labels are swapped."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(10, 70, size=(n, n_features))
    y = np.where(X[:, 0] > BOUNDARY, 0, 1)
    if flip_at is not None:
        y[flip_at:] = 1 - y[flip_at:]
    return X, y


def boundary_stream(n, seed=0, n_features=5, flip_at=None):
    return instances(*boundary_data(n, seed, n_features, flip_at))


def prequential_accuracy(learner, X, y, start=0, end=None):
    """Test-then-train over the whole stream, accuracy over [start, end)."""
    end = len(y) if end is None else end
    correct = 0
    for i, (x, label) in enumerate(zip(X, y)):
        predicted = int(np.argmax(learner.predict_one(x)))
        if start <= i < end:
            correct += predicted == label
        learner.learn_one(x, label)
    return correct / (end - start)


def corridor_meta(n=9, spacing=1.0, route="I5"):
    return [AtrMeta(f"S{i}", route, i * spacing) for i in range(n)]


class ConstantLearner(Classifier):
    name = "const"

    def __init__(self, level=0, seed=0):
        super().__init__(seed)
        self.level = level

    def predict_one(self, x):
        return one_hot(self.level)

    def learn_one(self, x, y, weight=1.0):
        pass

    def reset(self, seed=None):
        pass


class CountingLearner(ConstantLearner):
    name = "count"

    def __init__(self, level=0, seed=0):
        super().__init__(level, seed)
        self.n_learned = 0

    def learn_one(self, x, y, weight=1.0):
        self.n_learned += 1

    def reset(self, seed=None):
        self.n_learned = 0


class RecordingLearner(Classifier):
    """Logs ("predict" | "learn", features[0]) calls."""

    name = "rec"

    def __init__(self, seed=0):
        super().__init__(seed)
        self.calls = []

    def predict_one(self, x):
        self.calls.append(("predict", int(x[0])))
        return one_hot(CongestionLevel.FREE_FLOW)

    def learn_one(self, x, y):
        self.calls.append(("learn", int(x[0])))

    def reset(self, seed=None):
        self.calls = []


class OracleLearner(Classifier):
    """Reads the label off the second feature."""

    name = "oracle"

    def predict_one(self, x):
        return one_hot(int(x[1]))

    def learn_one(self, x, y):
        pass

    def reset(self, seed=None):
        pass


@pytest.fixture
def meta_nine():
    return corridor_meta()
