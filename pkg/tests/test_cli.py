# -*- coding: utf-8 -*-
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this file,
# You can obtain one at http://mozilla.org/MPL/2.0/.

import csv
import json
import os
import xml.etree.ElementTree as ET

import pytest

from driftlane import cli, roster
from driftlane.core import Classifier

CORRIDOR = {"n_slots": 3000, "seed": 1}


def write_json(path, data):
    with open(path, "w") as f:
        json.dump(data, f, indent=2)
    return path


def read_rows(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def experiment(tmpdir, **overrides):
    spec = {
        "data": {"synthetic": CORRIDOR},
        "methods": ["NM", "NB"],
        "modes": ["offline", "online"],
        "horizons": [1, 5, 10, 20],
        "seeds": [0],
        "n_init": 500,
        "record_runtime": False,
        "out": "out",
    }
    spec.update(overrides)
    return write_json(os.path.join(tmpdir.strpath, "spec.json"), spec)


def test_synth_writes_loops_and_meta(tmpdir):
    config = write_json(os.path.join(tmpdir.strpath, "corridor.json"), {"n_slots": 1000, "seed": 3})
    out = os.path.join(tmpdir.strpath, "loops.csv")

    assert cli.main(["synth", config, out, "--quiet"]) == cli.EXIT_OK
    with open(out) as f:
        lines = f.read().splitlines()
    assert len(lines) == 1001
    assert lines[0] == "timestamp," + ",".join(f"S{i}" for i in range(9))

    meta = os.path.join(tmpdir.strpath, "loops_meta.csv")
    with open(meta) as f:
        assert len(f.read().splitlines()) == 10

    with open(out, "rb") as f:
        first = f.read()
    assert cli.main(["synth", config, out, "--quiet"]) == cli.EXIT_OK
    with open(out, "rb") as f:
        assert f.read() == first

    assert cli.main(["synth", config, out, "--quiet", "--seed-override", "4"]) == cli.EXIT_OK
    with open(out, "rb") as f:
        assert f.read() != first


def test_synth_rejects_bad_config(tmpdir, capsys):
    config = write_json(os.path.join(tmpdir.strpath, "corridor.json"), {"n_slots": 0})
    out = os.path.join(tmpdir.strpath, "loops.csv")
    assert cli.main(["synth", config, out, "--quiet"]) == cli.EXIT_INVALID
    assert not os.path.exists(out)
    assert "corridor.json:1:" in capsys.readouterr().err


def test_run_grid(tmpdir):
    spec = experiment(tmpdir)
    assert cli.main(["run", spec, "--quiet"]) == cli.EXIT_OK

    out = os.path.join(tmpdir.strpath, "out")
    rows = read_rows(os.path.join(out, "results.csv"))
    assert len(rows) == 2 * 2 * 4 * 4
    assert {row["location"] for row in rows} == {"S4"}
    assert all(row["runtime_s"] == "0.000" for row in rows)

    with open(os.path.join(out, "manifest.json")) as f:
        manifest = json.load(f)
    assert len(manifest["runs"]) == 16
    assert manifest["failures"] == []
    assert manifest["spec"]["methods"] == ["NM", "NB"]

    profile = read_rows(os.path.join(out, "class_profile.csv"))
    assert len(profile) == 4 * 3

    nm = {}
    for row in rows:
        if row["method"] == "NM" and row["class"] == "ALL":
            nm.setdefault(row["horizon"], {})[row["mode"]] = row["umf1"]
    assert all(scores["offline"] == scores["online"] for scores in nm.values())


def test_run_is_reproducible(tmpdir):
    spec = experiment(tmpdir, methods=["HT"], horizons=[1, 5])
    out = os.path.join(tmpdir.strpath, "out")

    assert cli.main(["run", spec, "--quiet"]) == cli.EXIT_OK
    outputs = {}
    for name in ("results.csv", "class_profile.csv", "manifest.json"):
        with open(os.path.join(out, name), "rb") as f:
            outputs[name] = f.read()

    assert cli.main(["run", spec, "--quiet"]) == cli.EXIT_OK
    for name, content in outputs.items():
        with open(os.path.join(out, name), "rb") as f:
            assert f.read() == content


def test_run_keeps_going_after_a_failure(tmpdir, monkeypatch):
    class Broken(Classifier):
        def predict_one(self, x):
            raise RuntimeError("broken")

        def learn_one(self, x, y):
            pass

        def reset(self, seed=None):
            pass

    monkeypatch.setitem(roster.METHODS, "NB", Broken)
    spec = experiment(tmpdir, horizons=[1])
    assert cli.main(["run", spec, "--quiet"]) == cli.EXIT_PARTIAL

    out = os.path.join(tmpdir.strpath, "out")
    rows = read_rows(os.path.join(out, "results.csv"))
    assert {row["method"] for row in rows} == {"NM"}
    with open(os.path.join(out, "manifest.json")) as f:
        failures = json.load(f)["failures"]
    assert len(failures) == 2
    assert failures[0]["index"] == 500


def test_missing_data_file(tmpdir):
    spec = experiment(tmpdir, data={"loops": "nope.csv", "meta": "nope_meta.csv"}, target="S4")
    assert cli.main(["run", spec, "--quiet"]) == cli.EXIT_INVALID
    assert not os.path.exists(os.path.join(tmpdir.strpath, "out"))


def test_invalid_spec_points_at_the_key(tmpdir, capsys):
    path = os.path.join(tmpdir.strpath, "spec.json")
    with open(path, "w") as f:
        f.write('{\n  "data": {"synthetic": {}},\n  "methods": ["XX"]\n}\n')

    assert cli.main(["run", path, "--quiet"]) == cli.EXIT_INVALID
    err = capsys.readouterr().err
    assert "spec.json:3: Unknown method 'XX'" in err
    assert not os.path.exists(os.path.join(tmpdir.strpath, "results.csv"))


def test_broken_json_reports_its_position(tmpdir, capsys):
    path = os.path.join(tmpdir.strpath, "spec.json")
    with open(path, "w") as f:
        f.write('{\n  "methods": ["NM"],\n}\n')
    assert cli.main(["run", path, "--quiet"]) == cli.EXIT_INVALID
    assert "spec.json:3:1:" in capsys.readouterr().err


@pytest.mark.parametrize(
    "overrides",
    [
        {"methods": []},
        {"modes": ["batch"]},
        {"horizons": [0]},
        {"seeds": ["a"]},
        {"n_init": 0},
        {"thresholds": {"free_flow_above": 20, "bottleneck_below": 30}},
        {"strategy": "naive-regression"},
        {"data": {"loops": "x.csv"}},
        {"colour": "blue"},
        {"record_runtime": "false"},
    ],
)
def test_spec_validation(tmpdir, overrides):
    spec = experiment(tmpdir, **overrides)
    assert cli.main(["run", spec, "--quiet"]) == cli.EXIT_INVALID


def test_file_data_and_output_from_environment(tmpdir, monkeypatch):
    config = write_json(os.path.join(tmpdir.strpath, "corridor.json"), CORRIDOR)
    assert cli.main(["synth", config, os.path.join(tmpdir.strpath, "loops.csv"), "--quiet"]) == cli.EXIT_OK

    spec = write_json(
        os.path.join(tmpdir.strpath, "files.json"),
        {
            "data": {"loops": "loops.csv", "meta": "loops_meta.csv"},
            "target": "S4",
            "methods": ["NM"],
            "horizons": [1],
            "n_init": 500,
            "record_runtime": False,
        },
    )
    out = os.path.join(tmpdir.strpath, "env_out")
    monkeypatch.setenv(cli.OUT_ENV, out)
    assert cli.main(["run", spec, "--quiet"]) == cli.EXIT_OK
    from_files = read_rows(os.path.join(out, "results.csv"))

    synthetic = experiment(tmpdir, methods=["NM"], horizons=[1])
    assert cli.main(["run", synthetic, "--quiet"]) == cli.EXIT_OK
    direct = read_rows(os.path.join(tmpdir.strpath, "out", "results.csv"))
    assert from_files == direct


def test_report(tmpdir):
    spec = experiment(tmpdir, methods=["NM"], horizons=[1])
    assert cli.main(["run", spec, "--quiet"]) == cli.EXIT_OK

    results = os.path.join(tmpdir.strpath, "out", "results.csv")
    report_dir = os.path.join(tmpdir.strpath, "report")
    assert cli.main(["report", results, report_dir, "--quiet"]) == cli.EXIT_OK

    with open(os.path.join(report_dir, "umf1_table.md")) as f:
        lines = f.read().splitlines()
    assert lines[0] == "| method | S4 offline | S4 online |"
    assert len(lines) == 3
    cells = [cell.strip() for cell in lines[2].strip("|").split("|")]
    assert cells[0] == "NM"
    assert cells[1] == cells[2]

    charts = sorted(name for name in os.listdir(report_dir) if name.endswith(".svg"))
    assert charts == ["f1_S4_bottleneck.svg", "f1_S4_congestion.svg", "f1_S4_free-flow.svg"]
    for name in charts:
        assert ET.parse(os.path.join(report_dir, name)).getroot().tag.endswith("svg")


def test_report_rejects_malformed_results(tmpdir, capsys):
    path = os.path.join(tmpdir.strpath, "results.csv")
    with open(path, "w") as f:
        f.write("foo,bar\n1,2\n")
    assert cli.main(["report", path, tmpdir.strpath, "--quiet"]) == cli.EXIT_INVALID
    assert "results.csv:1:" in capsys.readouterr().err


def test_report_names_the_bad_row(tmpdir, capsys):
    spec = experiment(tmpdir, methods=["NM"], horizons=[1])
    assert cli.main(["run", spec, "--quiet"]) == cli.EXIT_OK
    results = os.path.join(tmpdir.strpath, "out", "results.csv")
    with open(results) as f:
        lines = f.read().splitlines()
    lines[3] = lines[3].replace("offline", "sideways")
    with open(results, "w") as f:
        f.write("\n".join(lines) + "\n")

    assert cli.main(["report", results, tmpdir.strpath, "--quiet"]) == cli.EXIT_INVALID
    assert "Row 4" in capsys.readouterr().err


def test_record_runtime_must_be_a_boolean(tmpdir, capsys):
    spec = experiment(tmpdir, record_runtime="false")
    assert cli.main(["run", spec, "--quiet"]) == cli.EXIT_INVALID
    assert "record_runtime must be a boolean" in capsys.readouterr().err
    assert not os.path.exists(os.path.join(tmpdir.strpath, "out"))
