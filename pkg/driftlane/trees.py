# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

import math
from dataclasses import dataclass
from logging import getLogger

import numpy as np
from scipy.special import ndtr, softmax

from driftlane.baselearners import VARIANCE_FLOOR, GaussianStats
from driftlane.core import N_CLASSES, Classifier, DriftlaneError
from driftlane.drift import DEFAULT_DELTA, AdwinDetector, cut_threshold

logger = getLogger(__name__)

GAIN_RANGE = math.log2(N_CLASSES)


class DomainError(DriftlaneError, ValueError):
    pass


@dataclass(frozen=True)
class HoeffdingConfig:
    grace_period: int = 200
    split_confidence: float = 1e-7
    tie_threshold: float = 0.05
    leaf_prediction: str = "nba"
    n_thresholds: int = 10

    def __post_init__(self):
        if not 0 < self.split_confidence < 1:
            raise ValueError("split_confidence must lie in (0, 1)")
        if self.tie_threshold < 0:
            raise ValueError("tie_threshold must be >= 0")
        if self.grace_period < 1:
            raise ValueError("grace_period must be >= 1")
        if self.leaf_prediction not in ("mc", "nba"):
            raise ValueError(f"Unknown leaf prediction mode {self.leaf_prediction!r}")


def hoeffding_bound(R, delta, n):
    if R <= 0 or not 0 < delta < 1 or n < 1:
        raise DomainError(f"Invalid Hoeffding bound arguments R={R}, delta={delta}, n={n}")
    return math.sqrt(R * R * math.log(1.0 / delta) / (2.0 * n))


def _entropy(counts, axis=0):
    totals = counts.sum(axis=axis, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / totals, 0.0)
        terms = np.where(p > 0, -p * np.log2(p), 0.0)
    return terms.sum(axis=axis)


def _split_gains(stats: GaussianStats, thresholds):
    """Information gain of splitting at `thresholds` (n_features, n_candidates).

    Class masses on each side come from the per-class Gaussian summaries.
    """
    weight = stats.weight
    seen = weight > 0
    variance = np.where(seen[:, None], stats.variance(), 1.0)
    sd = np.sqrt(np.maximum(variance, VARIANCE_FLOOR))

    z = (thresholds[None, :, :] - stats.mean[:, :, None]) / sd[:, :, None]
    left = weight[:, None, None] * ndtr(z)
    right = weight[:, None, None] - left

    total = weight.sum()
    left_mass = left.sum(axis=0)
    right_mass = right.sum(axis=0)
    children = (left_mass * _entropy(left) + right_mass * _entropy(right)) / total
    return _entropy(weight) - children


def best_splits(stats: GaussianStats, n_thresholds):
    """Best (gain, threshold) per feature over evenly spaced candidates."""
    lo, hi = stats.lo, stats.hi
    valid = hi > lo
    fractions = np.arange(1, n_thresholds + 1) / (n_thresholds + 1)
    span = np.where(valid, hi - lo, 0.0)
    base = np.where(valid, lo, 0.0)
    thresholds = base[:, None] + span[:, None] * fractions[None, :]

    gains = _split_gains(stats, thresholds)
    gains[~valid] = 0.0
    best = np.argmax(gains, axis=1)
    rows = np.arange(len(best))
    return gains[rows, best], thresholds[rows, best]


def split_gain(stats: GaussianStats, feature, threshold):
    thresholds = np.full((stats.n_features, 1), threshold)
    return float(_split_gains(stats, thresholds)[feature, 0])


class TreeNode:
    def __init__(self, n_features, depth=0, prior=None):
        self.stats = GaussianStats(n_features)
        self.depth = depth
        self.prior = prior
        self.feature = None
        self.threshold = None
        self.left = None
        self.right = None
        self.last_attempt = 0.0
        # Weight received while the node was a leaf.
        self.leaf_seen = 0.0
        self.mc_correct = 0.0
        self.nb_correct = 0.0

    @property
    def is_leaf(self):
        return self.feature is None

    def child(self, x):
        return self.left if x[self.feature] <= self.threshold else self.right

    def walk(self):
        yield self
        if not self.is_leaf:
            yield from self.left.walk()
            yield from self.right.walk()


class HatNode(TreeNode):
    def __init__(self, n_features, depth=0, prior=None):
        super().__init__(n_features, depth, prior)
        self.detector = AdwinDetector(DEFAULT_DELTA)
        self.alternate = None


class HoeffdingTree(Classifier):
    """Very fast decision tree over numeric features."""

    name = "HT"
    node_class = TreeNode

    def __init__(self, config=None, seed=0):
        super().__init__(seed)
        self.config = config or HoeffdingConfig()
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self.root = None
        self.n_features = None
        self.n_splits = 0

    def _new_leaf(self, depth=0, prior=None):
        return self.node_class(self.n_features, depth, prior)

    def _ensure_root(self, x):
        if self.root is None:
            self.n_features = x.shape[0]
            self.root = self._new_leaf()

    def sort(self, x, node=None):
        node = node or self.root
        while not node.is_leaf:
            node = node.child(x)
        return node

    def _leaf_scores(self, leaf, x):
        stats = leaf.stats
        if stats.total == 0:
            if leaf.prior is not None and leaf.prior.sum() > 0:
                return leaf.prior / leaf.prior.sum()
            return np.zeros(N_CLASSES)
        if self.config.leaf_prediction == "nba" and leaf.nb_correct > leaf.mc_correct:
            return softmax(stats.log_posterior(x))
        return stats.weight / stats.total

    def predict_one(self, x):
        if self.root is None:
            return np.zeros(N_CLASSES)
        x = np.asarray(x, dtype=float)
        return self._leaf_scores(self.sort(x), x)

    def learn_one(self, x, y, weight=1.0):
        x = np.asarray(x, dtype=float)
        self._ensure_root(x)
        self._learn_at_leaf(self.sort(x), x, int(y), weight)

    def _learn_at_leaf(self, leaf, x, y, w):
        stats = leaf.stats
        if stats.total > 0 and self.config.leaf_prediction == "nba":
            leaf.mc_correct += w * (int(np.argmax(stats.weight)) == y)
            leaf.nb_correct += w * (int(np.argmax(stats.log_posterior(x))) == y)
        stats.update(x, y, w)
        leaf.leaf_seen += w

        if stats.total - leaf.last_attempt >= self.config.grace_period:
            leaf.last_attempt = stats.total
            self._attempt_split(leaf)

    def _split_bound(self, n):
        return hoeffding_bound(GAIN_RANGE, self.config.split_confidence, n)

    def _should_split(self, gains, n):
        order = np.argsort(gains)[::-1]
        best = gains[order[0]]
        # Not splitting at all has gain 0, the floor for the runner-up.
        second = max(gains[order[1]], 0.0) if len(order) > 1 else 0.0
        epsilon = self._split_bound(n)
        return best > 0 and (best - second > epsilon or epsilon < self.config.tie_threshold)

    def _attempt_split(self, leaf):
        stats = leaf.stats
        if np.count_nonzero(stats.weight) < 2:
            return False

        gains, thresholds = best_splits(stats, self.config.n_thresholds)
        if not self._should_split(gains, stats.total):
            return False

        feature = int(np.argmax(gains))
        self._split(leaf, feature, float(thresholds[feature]))
        return True

    def _split(self, node, feature, threshold):
        node.feature = feature
        node.threshold = threshold
        prior = node.stats.weight.copy()
        node.left = self._new_leaf(node.depth + 1, prior)
        node.right = self._new_leaf(node.depth + 1, prior)
        self.n_splits += 1
        logger.debug(
            f"{self.name}: split depth {node.depth} on feature {feature} <= {threshold:.3f}"
        )

    @property
    def n_nodes(self):
        return 0 if self.root is None else sum(1 for _ in self.root.walk())

    @property
    def depth(self):
        if self.root is None:
            return 0
        return max(node.depth for node in self.root.walk())

    def leaf_seen_total(self):
        if self.root is None:
            return 0.0
        return sum(node.leaf_seen for node in self.root.walk())


class HoeffdingAdaptiveTree(HoeffdingTree):
    """Hoeffding tree whose nodes watch their error with ADWIN and grow
    alternate subtrees when it rises."""

    name = "HAT"
    node_class = HatNode

    def reset(self, seed=None):
        super().reset(seed)
        self.n_alternates = 0
        self.n_switches = 0
        self.n_pruned = 0

    def learn_one(self, x, y, weight=1.0):
        x = np.asarray(x, dtype=float)
        self._ensure_root(x)
        self.root = self._learn_subtree(self.root, x, int(y), weight)

    def _learn_subtree(self, node, x, y, w):
        leaf = self.sort(x, node)
        error = int(int(np.argmax(self._leaf_scores(leaf, x))) != y)
        return self._descend(node, x, y, w, error)

    def _descend(self, node, x, y, w, error):
        before = node.detector.mean
        changed = node.detector.insert(error)
        # Only a rising error at an internal node warrants an alternate.
        if changed and node.detector.mean > before and not node.is_leaf:
            if node.alternate is None:
                node.alternate = self._new_leaf(node.depth)
                self.n_alternates += 1

        if node.alternate is not None:
            node.alternate = self._learn_subtree(node.alternate, x, y, w)
            alternate, current = node.alternate.detector, node.detector
            minimum = self.config.grace_period
            if alternate.width >= minimum and current.width >= minimum:
                if alternate.mean < current.mean:
                    self.n_switches += 1
                    logger.debug(f"{self.name}: alternate replaces subtree at depth {node.depth}")
                    return node.alternate
                margin = cut_threshold(
                    alternate.width, current.width, alternate.width + current.width, current.delta
                )
                if alternate.mean - current.mean > margin:
                    node.alternate = None
                    self.n_pruned += 1
                    logger.debug(f"{self.name}: dropped losing alternate at depth {node.depth}")

        if node.is_leaf:
            self._learn_at_leaf(node, x, y, w)
        elif x[node.feature] <= node.threshold:
            node.left = self._descend(node.left, x, y, w, error)
        else:
            node.right = self._descend(node.right, x, y, w, error)
        return node


class ExtremelyFastDecisionTree(HoeffdingTree):
    """Hoeffding anytime tree: splits as soon as a split beats not splitting,
    and revisits the split of every internal node."""

    name = "HATT"

    def reset(self, seed=None):
        super().reset(seed)
        self.n_resplits = 0

    def learn_one(self, x, y, weight=1.0):
        x = np.asarray(x, dtype=float)
        y = int(y)
        self._ensure_root(x)

        node = self.root
        while not node.is_leaf:
            node.stats.update(x, y, weight)
            if node.stats.total - node.last_attempt >= self.config.grace_period:
                node.last_attempt = node.stats.total
                self._reevaluate(node)
            node = node.child(x)
        self._learn_at_leaf(node, x, y, weight)

    def _should_split(self, gains, n):
        best = float(np.max(gains))
        epsilon = self._split_bound(n)
        return best > 0 and (best > epsilon or epsilon < self.config.tie_threshold)

    def _reevaluate(self, node):
        stats = node.stats
        if np.count_nonzero(stats.weight) < 2:
            return

        gains, thresholds = best_splits(stats, self.config.n_thresholds)
        best = int(np.argmax(gains))
        if best == node.feature:
            return

        current = split_gain(stats, node.feature, node.threshold)
        if gains[best] - current > self._split_bound(stats.total):
            # The subtree collapses into a leaf that splits on the better feature.
            node.leaf_seen = sum(n.leaf_seen for n in node.walk())
            node.feature = None
            self._split(node, best, float(thresholds[best]))
            self.n_resplits += 1


def export_text(tree: HoeffdingTree):
    if tree.root is None:
        return ""

    lines = []

    def visit(node, indent):
        pad = "  " * indent
        counts = ",".join(f"{c:g}" for c in node.stats.weight)
        if node.is_leaf:
            lines.append(f"{pad}leaf [{counts}]")
        else:
            lines.append(f"{pad}x[{node.feature}] <= {node.threshold:.4f} [{counts}]")
            visit(node.left, indent + 1)
            visit(node.right, indent + 1)

    visit(tree.root, 0)
    return "\n".join(lines) + "\n"
