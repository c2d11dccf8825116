# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

import math
from logging import getLogger

import numpy as np

from driftlane.core import N_CLASSES, Classifier, argmax_class
from driftlane.drift import AdwinDetector
from driftlane.trees import HoeffdingTree
from driftlane.utils import derive_seed

logger = getLogger(__name__)


def default_member(seed=0):
    return HoeffdingTree(seed=seed)


def vote(scores):
    """Turn member scores into unit mass: kept as-is when they already form
    non-negative mass, collapsed onto the argmax otherwise."""
    scores = np.asarray(scores, dtype=float)
    total = scores.sum()
    if np.all(scores >= 0) and total > 0:
        return scores / total
    if np.all(scores == 0):
        return scores
    mass = np.zeros(N_CLASSES)
    mass[int(argmax_class(scores))] = 1.0
    return mass


def _predicted(learner, x):
    return int(argmax_class(learner.predict_one(x)))


class _MemberFactoryMixin:
    def _make_member(self):
        self._n_created += 1
        return self.member(seed=derive_seed(self.seed, self._n_created))


class DynamicWeightedMajority(_MemberFactoryMixin, Classifier):
    name = "DWM"

    def __init__(
        self,
        member=default_member,
        beta=0.5,
        theta=0.01,
        period=50,
        max_experts=50,
        seed=0,
    ):
        super().__init__(seed)
        self.member = member
        self.beta = beta
        self.theta = theta
        self.period = period
        self.max_experts = max_experts
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self._n_created = 0
        self.experts = [self._make_member()]
        self.weights = [1.0]
        self.t = 0

    def predict_one(self, x):
        scores = np.zeros(N_CLASSES)
        for expert, weight in zip(self.experts, self.weights):
            scores[_predicted(expert, x)] += weight
        return scores

    def learn_one(self, x, y):
        y = int(y)
        self.t += 1
        boundary = self.t % self.period == 0

        scores = np.zeros(N_CLASSES)
        for i, expert in enumerate(self.experts):
            predicted = _predicted(expert, x)
            if boundary and predicted != y:
                self.weights[i] *= self.beta
            scores[predicted] += self.weights[i]

        if boundary:
            top = max(self.weights)
            self.weights = [w / top for w in self.weights]
            keep = [i for i, w in enumerate(self.weights) if w >= self.theta]
            self.experts = [self.experts[i] for i in keep]
            self.weights = [self.weights[i] for i in keep]

            if int(argmax_class(scores)) != y:
                if len(self.experts) >= self.max_experts:
                    weakest = int(np.argmin(self.weights))
                    del self.experts[weakest]
                    del self.weights[weakest]
                self.experts.append(self._make_member())
                self.weights.append(1.0)

        for expert in self.experts:
            expert.learn_one(x, y)


class AdditiveExpertEnsemble(_MemberFactoryMixin, Classifier):
    name = "AEE"

    def __init__(self, member=default_member, beta=0.5, gamma=0.1, max_experts=10, seed=0):
        super().__init__(seed)
        self.member = member
        self.beta = beta
        self.gamma = gamma
        self.max_experts = max_experts
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self._n_created = 0
        self.experts = [self._make_member()]
        self.weights = [1.0]

    def _weighted_vote(self, predictions):
        scores = np.zeros(N_CLASSES)
        for predicted, weight in zip(predictions, self.weights):
            scores[predicted] += weight
        return scores

    def predict_one(self, x):
        predictions = [_predicted(expert, x) for expert in self.experts]
        scores = self._weighted_vote(predictions)
        top = max(self.weights)
        leaders = {p for p, w in zip(predictions, self.weights) if w == top}
        if len(leaders) == 1:
            # The heaviest expert decides; other classes keep their weighted mass.
            scores[leaders.pop()] = scores.sum() + 1.0
        return scores

    def learn_one(self, x, y):
        y = int(y)
        wrong = int(argmax_class(self.predict_one(x))) != y

        for i, expert in enumerate(self.experts):
            if _predicted(expert, x) != y:
                self.weights[i] *= self.beta

        if wrong:
            total = sum(self.weights)
            if len(self.experts) >= self.max_experts:
                weakest = int(np.argmin(self.weights))
                del self.experts[weakest]
                del self.weights[weakest]
            self.experts.append(self._make_member())
            self.weights.append(self.gamma * total)

        top = max(self.weights)
        self.weights = [w / top for w in self.weights]

        for expert in self.experts:
            expert.learn_one(x, y)


class OzaBagging(_MemberFactoryMixin, Classifier):
    name = "OZB"

    def __init__(self, member=default_member, n_members=10, lam=1.0, use_adwin=False, seed=0):
        super().__init__(seed)
        self.member = member
        self.n_members = n_members
        self.lam = lam
        self.use_adwin = use_adwin
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self._n_created = 0
        self.rng = np.random.default_rng(self.seed)
        self.members = [self._make_member() for _ in range(self.n_members)]
        self.detectors = [AdwinDetector() for _ in range(self.n_members)]
        self.n_replaced = 0

    def predict_one(self, x):
        scores = np.zeros(N_CLASSES)
        for member in self.members:
            scores += vote(member.predict_one(x))
        return scores

    def _watch(self, x, y):
        changed = False
        for member, detector in zip(self.members, self.detectors):
            error = int(_predicted(member, x) != y)
            changed = detector.insert(error) or changed
        return changed

    def replace_member(self, i):
        self.members[i] = self._make_member()
        self.detectors[i] = AdwinDetector()
        self.n_replaced += 1
        logger.debug(f"{self.name}: member {i} replaced")

    def _replace_worst(self):
        worst = int(np.argmax([d.mean for d in self.detectors]))
        self.replace_member(worst)

    def learn_one(self, x, y):
        y = int(y)
        changed = self._watch(x, y) if self.use_adwin else False

        for member in self.members:
            for _ in range(self.rng.poisson(self.lam)):
                member.learn_one(x, y)

        if changed:
            self._replace_worst()


class OzaBaggingAdwin(OzaBagging):
    name = "OZBA"

    def __init__(self, member=default_member, n_members=10, lam=1.0, seed=0):
        super().__init__(member=member, n_members=n_members, lam=lam, use_adwin=True, seed=seed)


class OnlineBoosting(OzaBagging):
    """Online AdaBoost: each member sees the instance with a Poisson weight
    that grows after the members before it misclassify it."""

    name = "OB"
    ERROR_CLAMP = 1e-6

    def __init__(self, member=default_member, n_members=10, seed=0):
        super().__init__(member=member, n_members=n_members, lam=1.0, use_adwin=True, seed=seed)

    def reset(self, seed=None):
        super().reset(seed)
        self.lambda_sc = np.zeros(self.n_members)
        self.lambda_sw = np.zeros(self.n_members)

    def replace_member(self, i):
        super().replace_member(i)
        self.lambda_sc[i] = 0.0
        self.lambda_sw[i] = 0.0

    def member_weights(self):
        weights = np.zeros(self.n_members)
        seen = self.lambda_sc + self.lambda_sw
        for i in range(self.n_members):
            if seen[i] == 0:
                continue
            error = min(max(self.lambda_sw[i] / seen[i], self.ERROR_CLAMP), 1 - self.ERROR_CLAMP)
            weights[i] = max(0.0, math.log((1 - error) / error))
        return weights

    def predict_one(self, x):
        weights = self.member_weights()
        if not np.any(weights > 0):
            weights = np.ones(self.n_members)
        scores = np.zeros(N_CLASSES)
        for member, weight in zip(self.members, weights):
            if weight > 0:
                scores += weight * vote(member.predict_one(x))
        return scores

    def learn_one(self, x, y):
        y = int(y)
        changed = self._watch(x, y)

        lam = 1.0
        for i, member in enumerate(self.members):
            for _ in range(self.rng.poisson(lam)):
                member.learn_one(x, y)
            if _predicted(member, x) == y:
                self.lambda_sc[i] += lam
                n = self.lambda_sc[i] + self.lambda_sw[i]
                lam *= n / (2 * self.lambda_sc[i])
            else:
                self.lambda_sw[i] += lam
                n = self.lambda_sc[i] + self.lambda_sw[i]
                lam *= n / (2 * self.lambda_sw[i])

        if changed:
            self._replace_worst()


class _ForestMember:
    def __init__(self, tree, subspace, warning_delta, drift_delta):
        self.tree = tree
        self.subspace = subspace
        self.warning = AdwinDetector(warning_delta)
        self.drift = AdwinDetector(drift_delta)
        self.background = None
        self.n_seen = 0
        self.n_correct = 0

    @property
    def accuracy(self):
        return self.n_correct / self.n_seen if self.n_seen else 0.0


class AdaptiveRandomForest(Classifier):
    name = "ARF"

    def __init__(
        self,
        member=default_member,
        n_members=10,
        lam=6.0,
        subspace_size=None,
        warning_delta=0.01,
        drift_delta=0.001,
        seed=0,
    ):
        super().__init__(seed)
        self.member = member
        self.n_members = n_members
        self.lam = lam
        self.subspace_size = subspace_size
        self.warning_delta = warning_delta
        self.drift_delta = drift_delta
        self.reset(seed)

    def reset(self, seed=None):
        if seed is not None:
            self.seed = seed
        self.rng = np.random.default_rng(self.seed)
        self.members = None
        self.n_features = None
        self._n_created = 0
        self.n_warnings = 0
        self.n_replaced = 0

    @property
    def m(self):
        return self.subspace_size or int(math.ceil(math.sqrt(self.n_features)))

    def _new_tree(self):
        self._n_created += 1
        subspace = np.sort(self.rng.choice(self.n_features, size=self.m, replace=False))
        return self.member(seed=derive_seed(self.seed, self._n_created)), subspace

    def _new_member(self):
        tree, subspace = self._new_tree()
        return _ForestMember(tree, subspace, self.warning_delta, self.drift_delta)

    def _ensure(self, x):
        if self.members is None:
            self.n_features = x.shape[0]
            self.members = [self._new_member() for _ in range(self.n_members)]

    def predict_one(self, x):
        if self.members is None:
            return np.zeros(N_CLASSES)
        x = np.asarray(x, dtype=float)
        accuracies = np.array([m.accuracy for m in self.members])
        if not np.any(accuracies > 0):
            accuracies = np.ones(len(self.members))
        scores = np.zeros(N_CLASSES)
        for member, weight in zip(self.members, accuracies):
            scores += weight * vote(member.tree.predict_one(x[member.subspace]))
        return scores

    def replace_member(self, i):
        member = self.members[i]
        replacement = self._new_member()
        if member.background is not None:
            replacement.tree, replacement.subspace = member.background
        self.members[i] = replacement
        self.n_replaced += 1
        logger.debug(f"{self.name}: member {i} replaced")

    def learn_one(self, x, y):
        x = np.asarray(x, dtype=float)
        y = int(y)
        self._ensure(x)

        for i, member in enumerate(self.members):
            correct = _predicted(member.tree, x[member.subspace]) == y
            member.n_seen += 1
            member.n_correct += int(correct)

            k = self.rng.poisson(self.lam)
            if k > 0:
                member.tree.learn_one(x[member.subspace], y, weight=float(k))
                if member.background is not None:
                    tree, subspace = member.background
                    tree.learn_one(x[subspace], y, weight=float(k))

            error = 0 if correct else 1
            if member.warning.insert(error):
                member.warning.reset()
                if member.background is None:
                    member.background = self._new_tree()
                    self.n_warnings += 1
            if member.drift.insert(error):
                self.replace_member(i)
