# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

import numpy as np
from scipy.special import expit

from driftlane.core import (
    N_CLASSES,
    Classifier,
    CongestionLevel,
    ShapeError,
    argmax_class,
    one_hot,
)
from driftlane.drift import AdwinDetector
from driftlane.ingest import LabelThresholds, label_speed

VARIANCE_FLOOR = 1e-6
# Score of a class that was never observed; finite so argmax stays defined.
ABSENT_CLASS_SCORE = -1e300


class NaiveModel(Classifier):
    """Predicts the label of the last example seen."""

    name = "NM"

    def __init__(self, seed=0):
        super().__init__(seed)
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self.last_label = None

    def predict_one(self, x):
        if self.last_label is None:
            return one_hot(CongestionLevel.FREE_FLOW)
        return one_hot(self.last_label)

    def learn_one(self, x, y):
        self.last_label = CongestionLevel(y)


class NaiveSpeedModel(Classifier):
    """Regression flavour of the naive model: carries the last speed forward
    and labels it. It learns from speeds, not labels."""

    name = "NM"

    def __init__(self, thresholds=LabelThresholds(), seed=0):
        super().__init__(seed)
        self.thresholds = thresholds
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self.last_speed = None

    def predict_speed(self, x):
        return self.last_speed

    def predict_one(self, x):
        if self.last_speed is None:
            return one_hot(CongestionLevel.FREE_FLOW)
        return one_hot(label_speed(self.last_speed, self.thresholds))

    def learn_one(self, x, y):
        self.last_speed = float(y)


class GaussianStats:
    """Per-class weighted running mean/M2 of every feature, plus observed range."""

    def __init__(self, n_features):
        self.n_features = n_features
        self.weight = np.zeros(N_CLASSES)
        self.mean = np.zeros((N_CLASSES, n_features))
        self.m2 = np.zeros((N_CLASSES, n_features))
        self.lo = np.full(n_features, np.inf)
        self.hi = np.full(n_features, -np.inf)

    @property
    def total(self):
        return float(self.weight.sum())

    def update(self, x, y, w=1.0):
        self.weight[y] += w
        delta = x - self.mean[y]
        self.mean[y] += delta * (w / self.weight[y])
        self.m2[y] += w * delta * (x - self.mean[y])
        np.minimum(self.lo, x, out=self.lo)
        np.maximum(self.hi, x, out=self.hi)

    def variance(self):
        seen = self.weight > 0
        variance = np.zeros_like(self.m2)
        variance[seen] = self.m2[seen] / self.weight[seen, None]
        return variance

    def log_posterior(self, x):
        seen = self.weight > 0
        scores = np.full(N_CLASSES, ABSENT_CLASS_SCORE)
        if not seen.any():
            return scores
        variance = np.maximum(self.variance()[seen], VARIANCE_FLOOR)
        log_likelihood = -0.5 * np.sum(
            np.log(2.0 * np.pi * variance) + (x - self.mean[seen]) ** 2 / variance,
            axis=1,
        )
        scores[seen] = np.log(self.weight[seen] / self.total) + log_likelihood
        return scores


class GaussianNaiveBayes(Classifier):
    name = "NB"

    def __init__(self, seed=0):
        super().__init__(seed)
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self.stats = None

    def _check(self, x):
        if self.stats is not None and x.shape != (self.stats.n_features,):
            raise ShapeError(
                f"Expected {self.stats.n_features} features, got shape {x.shape}"
            )

    def learn_one(self, x, y):
        x = np.asarray(x, dtype=float)
        if self.stats is None:
            self.stats = GaussianStats(x.shape[0])
        self._check(x)
        self.stats.update(x, int(y))

    def predict_one(self, x):
        x = np.asarray(x, dtype=float)
        if self.stats is None:
            return np.full(N_CLASSES, ABSENT_CLASS_SCORE)
        self._check(x)
        return self.stats.log_posterior(x)


class OnlineStandardizer:
    def __init__(self, n_features):
        self.count = 0
        self.mean = np.zeros(n_features)
        self.m2 = np.zeros(n_features)

    def update(self, x):
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def transform(self, x):
        if self.count < 2:
            return np.asarray(x, dtype=float)
        std = np.sqrt(np.maximum(self.m2 / self.count, VARIANCE_FLOOR))
        return (x - self.mean) / std


def pa_update(w, x, y, C=1.0):
    """One PA-I step on a binary problem, y in {-1, +1}; returns the new weights."""
    loss = max(0.0, 1.0 - y * float(np.dot(w, x)))
    norm = float(np.dot(x, x))
    if loss == 0.0 or norm == 0.0:
        return w
    tau = min(C, loss / norm)
    return w + tau * y * x


class LinearModel(Classifier):
    """One row of weights per class over online-standardised features."""

    def __init__(self, seed=0):
        super().__init__(seed)
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self.weights = None
        self.bias = np.zeros(N_CLASSES)
        self.scaler = None

    def _ensure(self, n_features):
        if self.weights is None:
            self.weights = np.zeros((N_CLASSES, n_features))
            self.scaler = OnlineStandardizer(n_features)
        elif self.weights.shape[1] != n_features:
            raise ShapeError(
                f"Expected {self.weights.shape[1]} features, got {n_features}"
            )

    def _margins(self, z):
        return self.weights @ z + self.bias

    def predict_one(self, x):
        if self.weights is None:
            return np.zeros(N_CLASSES)
        x = np.asarray(x, dtype=float)
        return self._margins(self.scaler.transform(x))

    def learn_one(self, x, y):
        x = np.asarray(x, dtype=float)
        self._ensure(x.shape[0])
        self.scaler.update(x)
        self._step(self.scaler.transform(x), int(y))

    def _step(self, z, y):
        raise NotImplementedError


class Perceptron(LinearModel):
    name = "P"

    def _step(self, z, y):
        predicted = int(argmax_class(self._margins(z)))
        if predicted == y:
            return
        self.weights[y] += z
        self.weights[predicted] -= z
        self.bias[y] += 1.0
        self.bias[predicted] -= 1.0


class PassiveAggressive(LinearModel):
    name = "PA"

    def __init__(self, C=1.0, seed=0):
        self.C = C
        super().__init__(seed)

    def _step(self, z, y):
        for c in range(N_CLASSES):
            sign = 1.0 if c == y else -1.0
            self.weights[c] = pa_update(self.weights[c], z, sign, self.C)


class SGDClassifier(LinearModel):
    """One-vs-rest logistic regression trained with a constant learning rate."""

    name = "SGD"

    def __init__(self, learning_rate=0.01, seed=0):
        self.learning_rate = learning_rate
        super().__init__(seed)

    def _step(self, z, y):
        targets = np.zeros(N_CLASSES)
        targets[y] = 1.0
        residual = expit(self._margins(z)) - targets
        self.weights -= self.learning_rate * np.outer(residual, z)
        self.bias -= self.learning_rate * residual


class KNNClassifier(Classifier):
    """Sliding-window k nearest neighbours, optionally shrunk by ADWIN."""

    name = "KNN"

    def __init__(self, k=5, max_window=1000, use_adwin=False, seed=0):
        super().__init__(seed)
        self.k = k
        self.max_window = max_window
        self.use_adwin = use_adwin
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self.buffer_x = None
        self.buffer_y = np.zeros(self.max_window, dtype=np.int64)
        self.start = 0
        self.size = 0
        self.detector = AdwinDetector() if self.use_adwin else None

    def _order(self):
        # Buffer slots in chronological order, oldest first.
        return (self.start + np.arange(self.size)) % self.max_window

    def predict_one(self, x):
        if self.size == 0:
            return one_hot(CongestionLevel.FREE_FLOW)
        x = np.asarray(x, dtype=float)
        order = self._order()
        distances = np.sum((self.buffer_x[order] - x) ** 2, axis=1)
        # A stable sort keeps the older entry first among equal distances.
        nearest = order[np.argsort(distances, kind="stable")[: self.k]]
        votes = np.bincount(self.buffer_y[nearest], minlength=N_CLASSES)
        return votes / len(nearest)

    def learn_one(self, x, y):
        x = np.asarray(x, dtype=float)
        if self.detector is not None:
            error = int(argmax_class(self.predict_one(x)) != int(y))
            changed = self.detector.insert(error)
        else:
            changed = False

        if self.buffer_x is None:
            self.buffer_x = np.zeros((self.max_window, x.shape[0]))

        if self.size == self.max_window:
            slot = self.start
            self.start = (self.start + 1) % self.max_window
        else:
            slot = (self.start + self.size) % self.max_window
            self.size += 1
        self.buffer_x[slot] = x
        self.buffer_y[slot] = int(y)

        if changed and self.detector.width < self.size:
            evicted = self.size - self.detector.width
            self.start = (self.start + evicted) % self.max_window
            self.size -= evicted

    def __len__(self):
        return self.size


class KNNAdwin(KNNClassifier):
    name = "KNNA"

    def __init__(self, k=5, max_window=1000, seed=0):
        super().__init__(k=k, max_window=max_window, use_adwin=True, seed=seed)
