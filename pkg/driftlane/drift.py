# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

import math

import numpy as np

from driftlane.core import InvalidInputError

DEFAULT_DELTA = 0.002
MAX_BUCKETS = 5


def cut_threshold(n0, n1, width, delta=DEFAULT_DELTA):
    m = n0 * n1 / (n0 + n1)
    return math.sqrt(math.log(4.0 * width / delta) / (2.0 * m))


class AdwinDetector:
    """Adaptive windowing change detector over values in [0, 1].

    The window is kept as an exponential histogram: row i holds at most
    `max_buckets` buckets of capacity 2**i, each bucket storing the sum and
    the variance accumulator of the items it summarises. Row 0 holds the
    newest items; inside a row the oldest bucket comes first.
    """

    def __init__(self, delta=DEFAULT_DELTA, max_buckets=MAX_BUCKETS, clock=1):
        if not 0 < delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {delta}")
        self.delta = delta
        self.max_buckets = max_buckets
        self.clock = clock
        self.reset()

    def reset(self):
        self.rows = [[]]
        self.width = 0
        self.total = 0.0
        self.variance_sum = 0.0
        self.n_detections = 0
        self._ticks = 0

    @property
    def mean(self):
        return self.total / self.width if self.width > 0 else 0.0

    @property
    def variance(self):
        return self.variance_sum / self.width if self.width > 0 else 0.0

    def insert(self, x):
        x = float(x)
        if not math.isfinite(x):
            raise InvalidInputError(f"ADWIN input must be finite, got {x}")
        x = min(1.0, max(0.0, x))

        if self.width > 0:
            mean = self.total / self.width
            self.variance_sum += self.width * (x - mean) ** 2 / (self.width + 1)
        self.width += 1
        self.total += x
        self.rows[0].append([x, 0.0])
        self._compress()

        self._ticks += 1
        if self._ticks % self.clock != 0:
            return False

        changed = False
        while self.width > 1 and self._cut_fires():
            self._drop_oldest()
            changed = True

        if changed:
            self.n_detections += 1
        return changed

    def _compress(self):
        level = 0
        while len(self.rows[level]) > self.max_buckets:
            if level + 1 == len(self.rows):
                self.rows.append([])
            (s1, v1), (s2, v2) = self.rows[level][0], self.rows[level][1]
            del self.rows[level][:2]
            n = 2**level
            merged_variance = v1 + v2 + n * n * (s1 / n - s2 / n) ** 2 / (2 * n)
            self.rows[level + 1].append([s1 + s2, merged_variance])
            level += 1

    def _buckets_oldest_first(self):
        capacities = []
        sums = []
        for level in range(len(self.rows) - 1, -1, -1):
            for s, _ in self.rows[level]:
                capacities.append(2**level)
                sums.append(s)
        return np.array(capacities, dtype=float), np.array(sums)

    def _cut_fires(self):
        capacities, sums = self._buckets_oldest_first()
        if len(capacities) < 2:
            return False

        # Every bucket boundary is a candidate cut: W0 = older, W1 = newer.
        n0 = np.cumsum(capacities)[:-1]
        s0 = np.cumsum(sums)[:-1]
        n1 = self.width - n0
        s1 = self.total - s0

        m = n0 * n1 / (n0 + n1)
        epsilon = np.sqrt(np.log(4.0 * self.width / self.delta) / (2.0 * m))
        return bool(np.any(np.abs(s0 / n0 - s1 / n1) >= epsilon))

    def _drop_oldest(self):
        level = len(self.rows) - 1
        while level > 0 and not self.rows[level]:
            self.rows.pop()
            level -= 1

        s, v = self.rows[level].pop(0)
        n = 2**level
        self.width -= n
        self.total -= s

        if self.width > 0:
            self.variance_sum -= v + n * self.width * (
                s / n - self.total / self.width
            ) ** 2 / (n + self.width)
            self.variance_sum = max(self.variance_sum, 0.0)
        else:
            self.variance_sum = 0.0

        while len(self.rows) > 1 and not self.rows[-1]:
            self.rows.pop()
