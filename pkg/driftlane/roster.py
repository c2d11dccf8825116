# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

from typing import Dict, Optional

from driftlane import baselearners, elm, ensembles, trees
from driftlane.core import DriftlaneError
from driftlane.evaluation import RunConfig, Strategy
from driftlane.ingest import LabelThresholds


class UnknownMethodError(DriftlaneError, ValueError):
    pass


class _TreeFactory:
    """Takes HoeffdingConfig fields as keyword parameters."""

    def __init__(self, cls):
        self.cls = cls

    def __call__(self, seed=0, **params):
        config = trees.HoeffdingConfig(**params) if params else None
        return self.cls(config=config, seed=seed)


METHODS = {
    "NM": baselearners.NaiveModel,
    "NB": baselearners.GaussianNaiveBayes,
    "KNNA": baselearners.KNNAdwin,
    "P": baselearners.Perceptron,
    "PA": baselearners.PassiveAggressive,
    "SGD": baselearners.SGDClassifier,
    "HT": _TreeFactory(trees.HoeffdingTree),
    "HAT": _TreeFactory(trees.HoeffdingAdaptiveTree),
    "HATT": _TreeFactory(trees.ExtremelyFastDecisionTree),
    "DWM": ensembles.DynamicWeightedMajority,
    "AEE": ensembles.AdditiveExpertEnsemble,
    "OB": ensembles.OnlineBoosting,
    "OZB": ensembles.OzaBagging,
    "OZBA": ensembles.OzaBaggingAdwin,
    "ARF": ensembles.AdaptiveRandomForest,
    "OSELM": elm.OSELM,
}

# Ensemble members may be any tree of the roster, e.g. {"member": "HAT"}.
MEMBER_METHODS = ("HT", "HAT", "HATT")


def make_learner(
    method,
    seed=0,
    params: Optional[Dict] = None,
    strategy=Strategy.CLASSIFICATION,
    thresholds=LabelThresholds(),
):
    if method not in METHODS:
        raise UnknownMethodError(f"Unknown method {method!r}, expected one of {sorted(METHODS)}")

    params = dict(params or {})
    if Strategy(strategy) is Strategy.NAIVE_REGRESSION:
        if method != "NM":
            raise UnknownMethodError(f"{method} has no naive-regression variant")
        return baselearners.NaiveSpeedModel(thresholds=thresholds, seed=seed)

    member = params.pop("member", None)
    if member is not None:
        if member not in MEMBER_METHODS:
            raise UnknownMethodError(f"Ensemble member must be one of {MEMBER_METHODS}")
        params["member"] = METHODS[member]

    try:
        return METHODS[method](seed=seed, **params)
    except TypeError as e:
        raise UnknownMethodError(f"Invalid parameters for {method}: {e}")


class LearnerFactory:
    """Builds the learner of a RunConfig; picklable so runs can go to worker processes."""

    def __init__(self, params: Optional[Dict[str, Dict]] = None):
        self.params = params or {}

    def __call__(self, cfg: RunConfig):
        return make_learner(
            cfg.method,
            seed=cfg.seed,
            params=self.params.get(cfg.method),
            strategy=cfg.strategy,
            thresholds=cfg.thresholds,
        )
