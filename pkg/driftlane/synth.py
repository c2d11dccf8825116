# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from logging import getLogger
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd

from driftlane.core import CongestionLevel, DriftlaneError
from driftlane.ingest import AtrMeta, LabelThresholds, LoopMatrix

logger = getLogger(__name__)

MIN_SPEED = 0.0
MAX_SYNTH_SPEED = 80.0
ROUTE = "SYN"
START_TIME = "2015-01-01"
SLOT = "5min"

FF, CG, BN = (int(level) for level in CongestionLevel)


class ConfigError(DriftlaneError, ValueError):
    pass


@dataclass(frozen=True)
class PhaseModel:
    """Emission and dwell parameters per phase, in ordinal order
    (free-flow, congestion, bottleneck)."""

    means: Tuple[float, float, float] = (58.0, 32.0, 10.0)
    stds: Tuple[float, float, float] = (4.0, 5.0, 6.0)
    dwell: Tuple[float, float, float] = (60.0, 2.0, 30.0)
    recovery_to_free_flow: float = 0.7

    def __post_init__(self):
        for name in ("means", "stds", "dwell"):
            values = tuple(float(v) for v in getattr(self, name))
            if len(values) != 3:
                raise ConfigError(f"{name} needs one value per phase, got {values}")
            object.__setattr__(self, name, values)
        if any(s < 0 for s in self.stds):
            raise ConfigError(f"Standard deviations must be >= 0, got {self.stds}")
        if any(d < 1 for d in self.dwell):
            raise ConfigError(f"Mean dwell times must be >= 1 slot, got {self.dwell}")
        if not 0 <= self.recovery_to_free_flow <= 1:
            raise ConfigError("recovery_to_free_flow must lie in [0, 1]")

    def check(self, th: LabelThresholds = LabelThresholds()):
        ff, cg, bn = self.means
        if not ff > cg > bn:
            raise ConfigError(f"Phase means must decrease from free-flow to bottleneck: {self.means}")
        if not (ff > th.free_flow_above and th.bottleneck_below <= cg <= th.free_flow_above and bn < th.bottleneck_below):
            raise ConfigError(
                f"Phase means {self.means} disagree with thresholds "
                f"{th.free_flow_above}/{th.bottleneck_below}"
            )

    def leave_probabilities(self):
        return np.array([0.0 if math.isinf(d) else 1.0 / d for d in self.dwell])


@dataclass(frozen=True)
class DriftEvent:
    """From `slot` on, the sensors listed (all when None) emit with `overrides`."""

    slot: int
    overrides: Dict[str, Tuple[float, float, float]]
    sensors: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        unknown = set(self.overrides) - {"means", "stds"}
        if unknown:
            raise ConfigError(f"Drift events may only override means and stds, not {sorted(unknown)}")
        if self.slot < 0:
            raise ConfigError(f"Drift slot must be >= 0, got {self.slot}")


@dataclass(frozen=True)
class CorridorConfig:
    n_sensors: int = 9
    propagation_delay: int = 4
    n_slots: int = 50000
    seed: int = 0
    drift: Tuple[DriftEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "drift", tuple(self.drift))
        if self.n_slots < 1:
            raise ConfigError(f"n_slots must be >= 1, got {self.n_slots}")
        if self.n_sensors < 1:
            raise ConfigError(f"n_sensors must be >= 1, got {self.n_sensors}")
        if self.propagation_delay < 0:
            raise ConfigError("propagation_delay must be >= 0")
        slots = [event.slot for event in self.drift]
        if any(b <= a for a, b in zip(slots, slots[1:])):
            raise ConfigError(f"Drift slots must be strictly increasing, got {slots}")
        for event in self.drift:
            if event.sensors and not all(0 <= i < self.n_sensors for i in event.sensors):
                raise ConfigError(f"Drift event at slot {event.slot} names unknown sensors")

    @property
    def target_index(self):
        return self.n_sensors // 2

    @property
    def sensor_ids(self):
        return [f"S{i}" for i in range(self.n_sensors)]

    @property
    def target(self):
        return self.sensor_ids[self.target_index]


def head_chain(cfg: CorridorConfig, phases: PhaseModel, rng, length):
    """Hidden phase sequence at the corridor head.

    Free-flow and bottleneck only ever move to congestion; congestion
    recovers to free-flow or deepens into a bottleneck.
    """
    leave = phases.leave_probabilities()
    moves = rng.random(length)
    branches = rng.random(length)

    chain = np.empty(length, dtype=np.int64)
    state = FF
    for t in range(length):
        chain[t] = state
        if moves[t] < leave[state]:
            if state == CG:
                state = FF if branches[t] < phases.recovery_to_free_flow else BN
            else:
                state = CG
    return chain


def phase_matrix(cfg: CorridorConfig, phases: PhaseModel = PhaseModel()):
    """(n_slots, n_sensors) hidden phases; sensor i lags the head by i delays."""
    rng = np.random.default_rng(cfg.seed)
    span = (cfg.n_sensors - 1) * cfg.propagation_delay
    chain = head_chain(cfg, phases, rng, cfg.n_slots + span)
    offsets = span - np.arange(cfg.n_sensors) * cfg.propagation_delay
    return chain[np.arange(cfg.n_slots)[:, None] + offsets[None, :]], rng


def gen_corridor(cfg: CorridorConfig, phases: PhaseModel = PhaseModel(), th=LabelThresholds()) -> LoopMatrix:
    phases.check(th)
    hidden, rng = phase_matrix(cfg, phases)
    noise = rng.standard_normal(hidden.shape)

    means = np.empty(hidden.shape)
    stds = np.empty(hidden.shape)
    for i in range(cfg.n_sensors):
        model = phases
        boundaries = [0]
        models = [model]
        for event in cfg.drift:
            if event.sensors is not None and i not in event.sensors:
                continue
            model = replace(model, **event.overrides)
            boundaries.append(min(event.slot, cfg.n_slots))
            models.append(model)
        boundaries.append(cfg.n_slots)
        for model, start, end in zip(models, boundaries, boundaries[1:]):
            segment = hidden[start:end, i]
            means[start:end, i] = np.array(model.means)[segment]
            stds[start:end, i] = np.array(model.stds)[segment]

    speeds = np.clip(np.round(means + stds * noise, 2), MIN_SPEED, MAX_SYNTH_SPEED)
    timestamps = pd.date_range(START_TIME, periods=cfg.n_slots, freq=SLOT)
    logger.info(
        f"Generated {cfg.n_slots} slots for {cfg.n_sensors} sensors "
        f"with {len(cfg.drift)} drift events"
    )
    return LoopMatrix(
        speeds, cfg.sensor_ids, list(timestamps.strftime("%Y-%m-%dT%H:%M"))
    )


def inject_label_flip(cfg: CorridorConfig, slot, phases: PhaseModel = PhaseModel()) -> CorridorConfig:
    """Swap the free-flow and bottleneck means of the sensors upstream of the
    target from `slot` on. The target keeps its emission, so the relation
    between upstream speeds and the target label is inverted."""
    ff, cg, bn = phases.means
    event = DriftEvent(
        slot=slot,
        overrides={"means": (bn, cg, ff)},
        sensors=tuple(range(cfg.target_index)),
    )
    events = sorted(cfg.drift + (event,), key=lambda e: e.slot)
    return replace(cfg, drift=tuple(events))


def corridor_meta(cfg: CorridorConfig):
    return [AtrMeta(sensor_id, ROUTE, float(i)) for i, sensor_id in enumerate(cfg.sensor_ids)]


_CORRIDOR_KEYS = {"n_sensors", "propagation_delay", "n_slots", "seed"}
_PHASE_KEYS = {"means", "stds", "dwell", "recovery_to_free_flow"}


def _dwell(values):
    return tuple(math.inf if v is None else v for v in values)


def load_corridor_config(data) -> Tuple[CorridorConfig, PhaseModel]:
    """Build a corridor and phase model from a decoded JSON object.

    Optional keys: the CorridorConfig fields, "phases" (PhaseModel fields,
    a null dwell meaning infinite), "drift" (list of {"slot", "means",
    "stds", "sensors"}) and "label_flip_at" (slot).
    """
    if not isinstance(data, dict):
        raise ConfigError("Corridor config must be a JSON object")
    unknown = set(data) - _CORRIDOR_KEYS - {"phases", "drift", "label_flip_at"}
    if unknown:
        raise ConfigError(f"Unknown corridor config keys: {sorted(unknown)}")

    phase_data = dict(data.get("phases", {}))
    if set(phase_data) - _PHASE_KEYS:
        raise ConfigError(f"Unknown phase keys: {sorted(set(phase_data) - _PHASE_KEYS)}")
    if "dwell" in phase_data:
        phase_data["dwell"] = _dwell(phase_data["dwell"])

    try:
        phases = PhaseModel(**phase_data)
        events = []
        for raw in data.get("drift", []):
            raw = dict(raw)
            slot = int(raw.pop("slot"))
            sensors = raw.pop("sensors", None)
            events.append(
                DriftEvent(
                    slot,
                    {k: tuple(v) for k, v in raw.items()},
                    None if sensors is None else tuple(sensors),
                )
            )
        cfg = CorridorConfig(
            drift=tuple(events), **{k: int(data[k]) for k in _CORRIDOR_KEYS & set(data)}
        )
        if data.get("label_flip_at") is not None:
            cfg = inject_label_flip(cfg, int(data["label_flip_at"]), phases)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(f"Invalid corridor config: {e}")

    phases.check()
    return cfg, phases
