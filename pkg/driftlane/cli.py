# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
from dataclasses import dataclass, field
from logging import INFO, WARNING, basicConfig, getLogger
from typing import Dict, List, Optional

import pandas as pd

from driftlane import evaluation, ingest, report, roster, synth
from driftlane.core import DriftlaneError
from driftlane.synth import ConfigError
from driftlane.utils import atomic_write

logger = getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INVALID = 2

DEFAULT_HORIZONS = [1, 5, 10, 15, 20]
OUT_ENV = "DRIFTLANE_OUT"

_SPEC_KEYS = {
    "data",
    "target",
    "thresholds",
    "methods",
    "modes",
    "horizons",
    "seeds",
    "out",
    "n_init",
    "n_lags",
    "neighbors",
    "strategy",
    "params",
    "record_runtime",
}


class SpecError(ConfigError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass
class ExperimentSpec:
    methods: List[str]
    modes: List[str]
    horizons: List[int]
    seeds: List[int]
    out: str
    loops: Optional[str] = None
    meta: Optional[str] = None
    corridor: Optional[dict] = None
    target: Optional[str] = None
    thresholds: ingest.LabelThresholds = ingest.LabelThresholds()
    n_init: int = ingest.WEEK_SLOTS
    n_lags: int = 5
    neighbors: int = 4
    strategy: str = evaluation.Strategy.CLASSIFICATION.value
    params: Dict[str, dict] = field(default_factory=dict)
    record_runtime: bool = True
    raw: dict = field(default_factory=dict)

    def run_configs(self, location):
        for method, mode, horizon, seed in itertools.product(
            self.methods, self.modes, self.horizons, self.seeds
        ):
            yield evaluation.RunConfig(
                method=method,
                mode=mode,
                horizon=horizon,
                location=location,
                seed=seed,
                n_init=self.n_init,
                thresholds=self.thresholds,
                strategy=self.strategy,
                record_runtime=self.record_runtime,
            )


def _non_empty_list(data, key, default=None, kind=None):
    value = data.get(key, default)
    if not isinstance(value, list) or not value:
        raise SpecError(f"{key} must be a non-empty list", key)
    if kind is not None and not all(isinstance(v, kind) and not isinstance(v, bool) for v in value):
        raise SpecError(f"{key} must only hold {kind.__name__} values", key)
    return value


def parse_spec(data, base_dir, out_default=None) -> ExperimentSpec:
    if not isinstance(data, dict):
        raise SpecError("The experiment spec must be a JSON object")
    unknown = set(data) - _SPEC_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise SpecError(f"Unknown key {key!r}", key)

    methods = _non_empty_list(data, "methods", kind=str)
    for method in methods:
        if method not in roster.METHODS:
            raise SpecError(f"Unknown method {method!r}", "methods")
    modes = _non_empty_list(data, "modes", ["offline", "online"], kind=str)
    for mode in modes:
        if mode not in ("offline", "online"):
            raise SpecError(f"Unknown mode {mode!r}", "modes")
    horizons = _non_empty_list(data, "horizons", DEFAULT_HORIZONS, kind=int)
    if any(h < 1 for h in horizons):
        raise SpecError("horizons must be >= 1", "horizons")
    seeds = _non_empty_list(data, "seeds", [0], kind=int)

    source = data.get("data")
    if not isinstance(source, dict):
        raise SpecError("data must be an object with loops/meta paths or a synthetic corridor", "data")
    loops = meta = corridor = None
    if "synthetic" in source:
        corridor = source["synthetic"]
    elif "loops" in source and "meta" in source:
        loops = os.path.join(base_dir, source["loops"])
        meta = os.path.join(base_dir, source["meta"])
    else:
        raise SpecError("data needs either \"synthetic\" or both \"loops\" and \"meta\"", "data")
    if loops is not None and not data.get("target"):
        raise SpecError("target is required with file data", "target")

    try:
        thresholds = ingest.LabelThresholds(**data.get("thresholds", {}))
    except (TypeError, ValueError) as e:
        raise SpecError(f"Invalid thresholds: {e}", "thresholds")

    params = data.get("params", {})
    if not isinstance(params, dict) or not all(isinstance(p, dict) for p in params.values()):
        raise SpecError("params must map method ids to objects", "params")
    for method in params:
        if method not in roster.METHODS:
            raise SpecError(f"params names unknown method {method!r}", "params")

    strategy = data.get("strategy", evaluation.Strategy.CLASSIFICATION.value)
    try:
        evaluation.Strategy(strategy)
    except ValueError:
        raise SpecError(f"Unknown strategy {strategy!r}", "strategy")
    if strategy != evaluation.Strategy.CLASSIFICATION.value and methods != ["NM"]:
        raise SpecError("The naive-regression strategy only applies to NM", "strategy")

    counts = {}
    for key, default, minimum in (
        ("n_init", ingest.WEEK_SLOTS, 1),
        ("n_lags", 5, 1),
        ("neighbors", 4, 1),
    ):
        value = data.get(key, default)
        if not isinstance(value, int) or isinstance(value, bool) or value < minimum:
            raise SpecError(f"{key} must be an integer >= {minimum}", key)
        counts[key] = value

    record_runtime = data.get("record_runtime", True)
    if not isinstance(record_runtime, bool):
        raise SpecError("record_runtime must be a boolean", "record_runtime")

    out = data.get("out")
    out = os.path.join(base_dir, out) if out else (out_default or os.environ.get(OUT_ENV) or ".")

    return ExperimentSpec(
        methods=methods,
        modes=modes,
        horizons=horizons,
        seeds=seeds,
        out=out,
        loops=loops,
        meta=meta,
        corridor=corridor,
        target=data.get("target"),
        thresholds=thresholds,
        strategy=strategy,
        params=params,
        record_runtime=record_runtime,
        raw=data,
        **counts,
    )


def _key_line(text, key):
    if key is None:
        return 1
    for number, line in enumerate(text.splitlines(), start=1):
        if f'"{key}"' in line:
            return number
    return 1


def diagnose(path, line, message, column=None):
    where = f"{path}:{line}" + (f":{column}" if column is not None else "")
    print(f"{where}: {message}", file=sys.stderr)


def load_json(path):
    """Decoded JSON and its raw text; decoding errors keep their position."""
    with open(path, encoding="utf-8") as f:
        text = f.read()
    return json.loads(text), text


def load_spec(path, out_default=None) -> ExperimentSpec:
    try:
        data, text = load_json(path)
    except OSError as e:
        diagnose(path, 1, f"cannot read spec: {e}")
        raise SpecError(str(e))
    except json.JSONDecodeError as e:
        diagnose(path, e.lineno, e.msg, e.colno)
        raise SpecError(str(e))

    try:
        return parse_spec(data, os.path.dirname(os.path.abspath(path)), out_default)
    except SpecError as e:
        diagnose(path, _key_line(text, e.key), str(e))
        raise


def load_data(spec: ExperimentSpec):
    """(LoopMatrix, NeighborSet) for the spec's data source."""
    if spec.corridor is not None:
        cfg, phases = synth.load_corridor_config(spec.corridor)
        matrix = synth.gen_corridor(cfg, phases, spec.thresholds)
        meta = synth.corridor_meta(cfg)
        target = spec.target or cfg.target
    else:
        matrix, meta = ingest.parse_loop_csv(spec.loops, spec.meta)
        target = spec.target

    nb = ingest.select_neighbors(meta, target, spec.neighbors)
    logger.info(f"Target {target}: neighbourhood {', '.join(nb.sensor_ids)}")
    return matrix, nb


def class_profiles(spec, matrix, nb) -> pd.DataFrame:
    frames = []
    for horizon in spec.horizons:
        stream = ingest.build_instances(
            matrix, nb, ingest.WindowSpec(spec.n_lags, horizon), spec.thresholds
        )
        frame = evaluation.class_profile(stream)
        frame.insert(0, "horizon", horizon)
        frame.insert(0, "location", nb.target)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def manifest(spec, results):
    runs = []
    for result in results:
        cfg = result.config
        entry = {
            "method": cfg.method,
            "mode": cfg.mode.value,
            "horizon": cfg.horizon,
            "seed": cfg.seed,
            "status": "ok" if result.ok else "failed",
        }
        if result.ok:
            entry["umf1"] = round(result.umf1, 6)
            entry["window_umf1"] = [round(v, 6) for v in result.window_umf1]
        else:
            entry["error"] = result.error
            entry["index"] = result.index
        runs.append(entry)

    return {
        "spec": spec.raw,
        "runs": runs,
        "failures": [r for r in runs if r["status"] == "failed"],
    }


def cmd_run(spec_path, workers=1, seed_override=None, quiet=False, out_dir=None):
    try:
        spec = load_spec(spec_path, out_dir)
    except SpecError:
        return EXIT_INVALID
    if seed_override is not None:
        spec.seeds = [seed_override]

    try:
        matrix, nb = load_data(spec)
        profiles = class_profiles(spec, matrix, nb)
    except (DriftlaneError, OSError, ValueError) as e:
        logger.error(f"Cannot prepare the data: {e}")
        return EXIT_INVALID

    configs = list(spec.run_configs(nb.target))
    logger.info(f"Running {len(configs)} runs with {workers} worker(s)")
    results = evaluation.run_all(
        configs,
        matrix,
        nb,
        roster.LearnerFactory(spec.params),
        n_lags=spec.n_lags,
        workers=workers,
        progress=not quiet,
    )

    os.makedirs(spec.out, exist_ok=True)
    evaluation.write_results_csv(results, os.path.join(spec.out, "results.csv"))
    atomic_write(
        os.path.join(spec.out, "class_profile.csv"),
        profiles.to_csv(index=False, float_format="%.6f", lineterminator="\n"),
    )
    atomic_write(
        os.path.join(spec.out, "manifest.json"),
        json.dumps(manifest(spec, results), indent=2, sort_keys=True) + "\n",
    )

    failed = sum(1 for r in results if not r.ok)
    if failed:
        logger.warning(f"{failed} of {len(results)} runs failed, see manifest.json")
        return EXIT_PARTIAL
    logger.info(f"All {len(results)} runs succeeded, results in {spec.out}")
    return EXIT_OK


def meta_path_for(out_path):
    stem, _ = os.path.splitext(out_path)
    return f"{stem}_meta.csv"


def cmd_synth(config_path, out_path, seed_override=None):
    try:
        data, text = load_json(config_path)
    except OSError as e:
        diagnose(config_path, 1, f"cannot read config: {e}")
        return EXIT_INVALID
    except json.JSONDecodeError as e:
        diagnose(config_path, e.lineno, e.msg, e.colno)
        return EXIT_INVALID

    if seed_override is not None and isinstance(data, dict):
        data = {**data, "seed": seed_override}

    try:
        cfg, phases = synth.load_corridor_config(data)
        matrix = synth.gen_corridor(cfg, phases)
    except ConfigError as e:
        diagnose(config_path, 1, str(e))
        return EXIT_INVALID

    ingest.write_loop_csv(matrix, out_path)
    ingest.write_meta_csv(synth.corridor_meta(cfg), meta_path_for(out_path))
    logger.info(f"Wrote {matrix.n_rows} slots to {out_path}")
    return EXIT_OK


def cmd_report(results_path, out_dir):
    try:
        report.render_report(results_path, out_dir)
    except report.ReportError as e:
        diagnose(results_path, 1, str(e))
        return EXIT_INVALID
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--workers", type=int, default=1, help="Number of runs executed in parallel"
    )
    common.add_argument(
        "--seed-override", type=int, default=None, help="Replace every seed of the spec"
    )
    common.add_argument(
        "--quiet", action="store_true", default=False, help="Only log warnings and errors"
    )

    parser = argparse.ArgumentParser(prog="driftlane")
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", parents=[common], help="Run an experiment spec")
    run.add_argument("spec", help="Path to the experiment spec (JSON)")

    synth_parser = subparsers.add_parser(
        "synth", parents=[common], help="Generate a synthetic corridor"
    )
    synth_parser.add_argument("config", help="Path to the corridor config (JSON)")
    synth_parser.add_argument("out", help="Path of the loop CSV to write")

    report_parser = subparsers.add_parser(
        "report", parents=[common], help="Render a results.csv"
    )
    report_parser.add_argument("results", help="Path to results.csv")
    report_parser.add_argument(
        "outdir", nargs="?", default=None, help=f"Output directory (${OUT_ENV} by default)"
    )
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    basicConfig(level=WARNING if args.quiet else INFO)

    if args.command == "run":
        return cmd_run(args.spec, args.workers, args.seed_override, args.quiet)
    if args.command == "synth":
        return cmd_synth(args.config, args.out, args.seed_override)
    out_dir = args.outdir or os.environ.get(OUT_ENV) or "."
    return cmd_report(args.results, out_dir)
