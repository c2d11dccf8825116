# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

import functools
import math

import numpy as np
import pytest

from conftest import ConstantLearner, CountingLearner, boundary_data, prequential_accuracy
from driftlane.core import CongestionLevel, argmax_class
from driftlane.ensembles import (
    AdaptiveRandomForest,
    AdditiveExpertEnsemble,
    DynamicWeightedMajority,
    OnlineBoosting,
    OzaBagging,
    OzaBaggingAdwin,
    vote,
)
from driftlane.trees import HoeffdingTree
from driftlane.utils import state_fingerprint

X0 = np.zeros(3)


def constant(level):
    return functools.partial(ConstantLearner, level)


def test_vote():
    assert vote([0.2, 0.6, 0.2]).tolist() == pytest.approx([0.2, 0.6, 0.2])
    assert vote([2.0, 2.0, 0.0]).tolist() == [0.5, 0.5, 0.0]
    assert vote([-3.0, -1.0, -2.0]).tolist() == [0.0, 1.0, 0.0]
    assert vote([0.0, 0.0, 0.0]).tolist() == [0.0, 0.0, 0.0]


def test_dwm_penalises_wrong_experts():
    dwm = DynamicWeightedMajority(period=1)
    dwm.experts = [ConstantLearner(0), ConstantLearner(1)]
    dwm.weights = [1.0, 1.0]
    dwm.learn_one(X0, 1)
    assert dwm.weights == [0.5, 1.0]
    assert len(dwm.experts) == 2


def test_dwm_agreeing_experts_decide():
    dwm = DynamicWeightedMajority(member=constant(2))
    dwm.experts = [ConstantLearner(2), ConstantLearner(2)]
    dwm.weights = [0.01, 1.0]
    assert argmax_class(dwm.predict_one(X0)) == CongestionLevel.BOTTLENECK


def test_dwm_pool_is_bounded():
    dwm = DynamicWeightedMajority(member=constant(0), period=1, max_experts=50)
    sizes = []
    for _ in range(500):
        dwm.learn_one(X0, 2)
        sizes.append(len(dwm.experts))
    assert max(sizes) <= 50
    assert all(w >= dwm.theta for w in dwm.weights)


def test_dwm_grows_after_a_concept_flip():
    grew = 0
    for seed in range(3):
        X, y = boundary_data(2500, seed=seed, flip_at=2000)
        dwm = DynamicWeightedMajority(seed=seed)
        for x, label in zip(X[:2000], y[:2000]):
            dwm.learn_one(x, label)
        at_flip = len(dwm.experts)
        sizes = []
        for x, label in zip(X[2000:2250], y[2000:2250]):
            dwm.learn_one(x, label)
            sizes.append(len(dwm.experts))
        grew += max(sizes) > at_flip
    assert grew >= 2


def test_aee_single_expert_matches_it():
    X, y = boundary_data(600)
    tree = HoeffdingTree()
    for x, label in zip(X[:300], y[:300]):
        tree.learn_one(x, label)
    aee = AdditiveExpertEnsemble()
    aee.experts = [tree]
    aee.weights = [1.0]
    for x in X[300:]:
        assert argmax_class(aee.predict_one(x)) == argmax_class(tree.predict_one(x))


def test_aee_weights_stay_finite_and_bounded():
    aee = AdditiveExpertEnsemble(member=constant(0), max_experts=10)
    for _ in range(10000):
        aee.learn_one(X0, 1)
    assert len(aee.experts) <= 10
    assert max(aee.weights) == 1.0
    assert all(math.isfinite(w) and w > 0 for w in aee.weights)


def test_aee_top_expert_wins():
    aee = AdditiveExpertEnsemble()
    aee.experts = [ConstantLearner(0), ConstantLearner(1), ConstantLearner(1)]
    aee.weights = [1.0, 0.6, 0.6]
    assert argmax_class(aee.predict_one(X0)) == CongestionLevel.FREE_FLOW
    aee.weights = [1.0, 1.0, 0.6]
    # Tied leaders fall back to the weighted vote.
    assert argmax_class(aee.predict_one(X0)) == CongestionLevel.CONGESTION


def test_oza_poisson_rate():
    ozb = OzaBagging(member=CountingLearner, n_members=10, seed=1)
    for _ in range(10000):
        ozb.learn_one(X0, 0)
    draws = sum(m.n_learned for m in ozb.members) / 100000
    assert abs(draws - 1.0) < 0.02


def test_oza_tiny_rate_never_trains():
    ozb = OzaBagging(n_members=5, lam=1e-9)
    X, y = boundary_data(200)
    for x, label in zip(X, y):
        ozb.learn_one(x, label)
    assert all(m.root is None for m in ozb.members)
    assert ozb.predict_one(X[0]).tolist() == [0.0, 0.0, 0.0]


def test_oza_is_reproducible():
    counts = []
    for _ in range(2):
        ozb = OzaBagging(member=CountingLearner, seed=7)
        for _ in range(500):
            ozb.learn_one(X0, 0)
        counts.append([m.n_learned for m in ozb.members])
    assert counts[0] == counts[1]


def test_oza_accuracy():
    X, y = boundary_data(2000, seed=2)
    assert prequential_accuracy(OzaBagging(n_members=5), X, y, start=1000) > 0.9


def test_replacing_a_member_leaves_the_others_alone():
    X, y = boundary_data(500)
    ozba = OzaBaggingAdwin(n_members=5)
    for x, label in zip(X, y):
        ozba.learn_one(x, label)
    replaced = ozba.n_replaced
    before = [state_fingerprint(m) for m in ozba.members]
    ozba.replace_member(3)
    after = [state_fingerprint(m) for m in ozba.members]
    assert [b == a for b, a in zip(before, after)] == [True, True, True, False, True]
    assert ozba.n_replaced == replaced + 1


def test_predict_does_not_mutate_ensembles():
    X, y = boundary_data(400)
    for ensemble in [OzaBaggingAdwin(n_members=3), OnlineBoosting(n_members=3), DynamicWeightedMajority()]:
        for x, label in zip(X, y):
            ensemble.learn_one(x, label)
        before = state_fingerprint(ensemble)
        ensemble.predict_one(X[0])
        assert state_fingerprint(ensemble) == before


def test_boosting_raises_the_weight_of_misclassified_instances():
    ob = OnlineBoosting(member=constant(0), n_members=3)
    ob.lambda_sc[:] = 9.0
    ob.learn_one(X0, 1)
    assert ob.lambda_sw[0] == 1.0
    # Member 0 erred with error rate 1/10, so member 1 sees the instance at 1 * 10 / 2.
    assert ob.lambda_sw[1] == 5.0
    assert ob.lambda_sw[2] > ob.lambda_sw[1]


def test_boosting_member_weights():
    ob = OnlineBoosting(member=constant(0), n_members=2)
    ob.lambda_sc[:] = [100.0, 50.0]
    ob.lambda_sw[:] = [0.0, 50.0]
    weights = ob.member_weights()
    assert weights[0] == pytest.approx(math.log((1 - 1e-6) / 1e-6))
    assert weights[1] == 0.0


def test_boosting_accuracy():
    X, y = boundary_data(3000, seed=3)
    assert prequential_accuracy(OnlineBoosting(n_members=5), X, y, start=1500) > 0.8


def test_forest_subspaces():
    arf = AdaptiveRandomForest(seed=1)
    arf.learn_one(np.zeros(45), 0)
    assert arf.m == 7
    for member in arf.members:
        assert len(member.subspace) == 7
        assert len(set(member.subspace.tolist())) == 7
    assert len({tuple(m.subspace) for m in arf.members}) > 1


def test_forest_predicts_zeros_before_learning():
    assert AdaptiveRandomForest().predict_one(np.zeros(45)).tolist() == [0.0, 0.0, 0.0]


def test_forest_of_one_tree_matches_the_tree():
    X, y = boundary_data(400)
    arf = AdaptiveRandomForest(n_members=1, subspace_size=5, lam=1.0)
    for x, label in zip(X, y):
        arf.learn_one(x, label)
    member = arf.members[0]
    for x in X[:50]:
        assert argmax_class(arf.predict_one(x)) == argmax_class(
            member.tree.predict_one(x[member.subspace])
        )


def test_forest_replaces_drifting_members():
    X, y = boundary_data(4000, seed=2, flip_at=2000)
    arf = AdaptiveRandomForest(n_members=5, seed=2)
    for x, label in zip(X, y):
        arf.learn_one(x, label)
    assert arf.n_replaced >= 1


def test_forest_replacement_touches_one_member():
    X, y = boundary_data(300)
    arf = AdaptiveRandomForest(n_members=4)
    for x, label in zip(X, y):
        arf.learn_one(x, label)
    before = [state_fingerprint(m.tree) for m in arf.members]
    arf.replace_member(0)
    after = [state_fingerprint(m.tree) for m in arf.members]
    assert before[1:] == after[1:]
    assert before[0] != after[0]
