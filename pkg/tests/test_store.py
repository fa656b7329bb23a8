import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import value_function
from optval.catalog import get_problem
from optval.problem import problem_to_dict
from optval.schemas import load_schema
from optval.solver import GridConfig, solve_surface, surface_from_csv, surface_to_csv
from optval.store import (
    OUT_ENV,
    IntegrityError,
    RunNotFoundError,
    compute_run_id,
    default_root,
    list_runs,
    load,
    new_manifest,
    save,
)


@pytest.fixture
def p1_run():
    spec = get_problem("P1")
    surf = solve_surface(spec, GridConfig(11), vf=value_function("P1"))
    inputs = {"problem": problem_to_dict(spec), "grid": GridConfig(11).to_dict()}
    return new_manifest(inputs, 0), {"surface.csv": surface_to_csv(surf), "reports/surface.json": '{"ok": true}\n'}


def test_save_layout_and_row_count(tmp_path, p1_run):
    run, arts = p1_run
    path = save(run, arts, tmp_path)
    assert path == tmp_path / "runs" / run.run_id
    assert (path / "manifest.json").exists() and (path / "reports" / "surface.json").exists()
    lines = (path / "surface.csv").read_text().splitlines()
    assert len(lines) == 1 + 11
    assert {e["kind"] for e in run.artifact_index} == {"surface", "report"}


def test_second_save_is_noop(tmp_path, p1_run):
    run, arts = p1_run
    path = save(run, arts, tmp_path)
    before = (path / "manifest.json").read_bytes()
    again = new_manifest(run.inputs, run.seed)
    assert again.run_id == run.run_id
    assert save(again, {"surface.csv": "different"}, tmp_path) == path
    assert (path / "manifest.json").read_bytes() == before
    assert list_runs(tmp_path) == [run.run_id]


def test_round_trip(tmp_path, p1_run):
    run, arts = p1_run
    save(run, arts, tmp_path)
    got, loaded = load(run.run_id, tmp_path)
    assert got.to_dict() == json.loads(json.dumps(run.to_dict()))
    assert loaded == arts


def test_tampered_artifact(tmp_path, p1_run):
    run, arts = p1_run
    path = save(run, arts, tmp_path)
    (path / "surface.csv").write_text("u_1,v,rep_count\n0,1,1\n")
    with pytest.raises(IntegrityError, match="checksum mismatch for surface.csv"):
        load(run.run_id, tmp_path)


def test_missing_report(tmp_path, p1_run):
    run, arts = p1_run
    path = save(run, arts, tmp_path)
    (path / "reports" / "surface.json").unlink()
    with pytest.raises(IntegrityError, match="reports/surface.json"):
        load(run.run_id, tmp_path)


def test_unknown_run(tmp_path):
    with pytest.raises(RunNotFoundError):
        load("0" * 20, tmp_path)


def test_rejects_escaping_paths(tmp_path, p1_run):
    run, _ = p1_run
    with pytest.raises(ValueError):
        save(run, {"../evil.txt": "x"}, tmp_path)
    assert list_runs(tmp_path) == []


def test_run_id_stable_under_reserialization(p1_run):
    run, _ = p1_run
    inputs = json.loads(json.dumps(run.inputs, sort_keys=False))
    assert compute_run_id(inputs, 0) == run.run_id
    assert compute_run_id(inputs, 1) != run.run_id


def test_manifest_schema(tmp_path, p1_run):
    run, arts = p1_run
    path = save(run, arts, tmp_path)
    jsonschema.validate(json.loads((path / "manifest.json").read_text()), load_schema("manifest"))


def test_default_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv(OUT_ENV, str(tmp_path))
    assert default_root() == tmp_path


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=20))
def test_csv_doubles_round_trip_bit_exact(vals):
    from optval.solver import ValueSurface

    v = np.array(vals)
    grid = np.linspace(-1, 1, len(v))[:, None] / 3.0
    sols = [type("S", (), {"reps": [0]})() for _ in v]
    g, values, counts = surface_from_csv(surface_to_csv(ValueSurface(grid, v, sols, (len(v),))))
    assert np.array_equal(values.view(np.int64), v.view(np.int64))
    assert np.array_equal(g, grid) and list(counts) == [1] * len(v)
