# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

import time

import pytest

from driftlane.core import CongestionLevel
from driftlane.evaluation import RunConfig, prequential_run
from driftlane.ingest import WindowSpec, build_instances, select_neighbors
from driftlane.roster import make_learner
from driftlane.synth import CorridorConfig, corridor_meta, gen_corridor, inject_label_flip

PARAMS = {"DWM": {"max_experts": 10}}


def corridor_stream(cfg, horizon=1):
    matrix = gen_corridor(cfg)
    nb = select_neighbors(corridor_meta(cfg), cfg.target)
    return build_instances(matrix, nb, WindowSpec(5, horizon))


@pytest.mark.parametrize("method", ["HT", "HAT", "HATT", "ARF", "DWM", "AEE", "OZBA", "KNNA"])
def test_online_learners_outlast_a_label_flip(method):
    gaps = []
    for seed in range(3):
        cfg = inject_label_flip(CorridorConfig(n_slots=10000, seed=seed), 5000)
        stream = corridor_stream(cfg)
        scores = {}
        for mode in ("offline", "online"):
            run = RunConfig(method, mode=mode, seed=seed, record_runtime=False)
            learner = make_learner(method, seed=seed, params=PARAMS.get(method))
            scores[mode] = prequential_run(stream, learner, run).umf1
        gaps.append(scores["online"] - scores["offline"])
    assert sum(gap >= 0.05 for gap in gaps) >= 2, gaps


def test_congestion_fades_with_the_horizon():
    cfg = CorridorConfig(n_slots=20000, seed=0)
    f1 = {}
    for horizon in (1, 20):
        run = RunConfig("HT", horizon=horizon, record_runtime=False)
        f1[horizon] = prequential_run(corridor_stream(cfg, horizon), make_learner("HT"), run).f1

    congestion = CongestionLevel.CONGESTION
    free_flow = CongestionLevel.FREE_FLOW
    assert f1[1][congestion] - f1[20][congestion] >= 0.15
    assert f1[1][free_flow] - f1[20][free_flow] < 0.05


def test_hoeffding_tree_keeps_up_with_a_year_of_slots():
    stream = corridor_stream(CorridorConfig(n_slots=105120, seed=0))
    assert len(stream) == 105115
    start = time.perf_counter()
    report = prequential_run(stream, make_learner("HT"), RunConfig("HT"))
    assert time.perf_counter() - start < 60
    assert report.n_eval == 105115 - 2016
