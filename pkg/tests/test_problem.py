import json
from dataclasses import replace

import numpy as np
import pytest
from jsonschema import validate

from optval.catalog import catalog, get_problem, problem_names
from optval.problem import BoxDomain, Cone, feasible, load_problem, problem_from_dict, problem_to_dict
from optval.schemas import load_schema


def test_box_basics():
    b = BoxDomain.parse("0.5:1.5,-1:1")
    assert b.dim == 2
    assert b.contains([1.0, 0.0]) and not b.contains([2.0, 0.0])
    assert b.grid((3, 3)).shape == (9, 2)
    mask = b.boundary_mask((3, 3))
    assert mask.sum() == 8 and not mask[4]
    with pytest.raises(ValueError):
        BoxDomain((1.0,), (1.0,))


def test_cone_sdist():
    assert Cone("nonneg").sdist_scalar([0.75]) == 0.75
    assert Cone("nonpos").sdist_scalar([-1.0, -2.0]) == 1.0
    assert Cone("box", (0.0,), (2.0,)).sdist_scalar([0.5]) == 0.5
    assert Cone("ball", center=(0.0, 0.0), radius=1.0).sdist_scalar([0.6, 0.0]) == pytest.approx(0.4)
    z = np.array([[0.1, -0.2, 0.3]])
    np.testing.assert_array_equal(Cone("nonneg").sdist(z), z[0])


def test_catalog_lookup():
    assert len(catalog()) == 7
    assert get_problem("P3").name == "bilinear-box" == get_problem("bilinear-box").name
    assert "slater-fail" in problem_names()
    with pytest.raises(KeyError):
        get_problem("P9")


def test_catalog_examples():
    assert get_problem("P1").oracle.value([0.7]) == 0.0
    assert get_problem("P3").oracle.value([2.0]) == -2.0
    np.testing.assert_allclose(get_problem("P4").oracle.argmin([1.0]), [[-0.5]])


def test_feasible_examples():
    p6 = get_problem("P6")
    r = feasible(p6, [1.0], [0.5])
    assert r.feasible and r.margin == 0.75
    r = feasible(p6, [0.25], [0.5])
    assert r.feasible and r.margin == 0.0
    assert not feasible(p6, [0.0], [0.5])
    assert not feasible(p6, [5.0], [0.5])  # outside X
    assert feasible(get_problem("P3"), [0.3], [1.0]).margin == np.inf


@pytest.mark.parametrize("label", ["P1", "P2", "P3", "P4", "P5", "P6", "P7"])
def test_problem_json_round_trip(label, tmp_path):
    spec = get_problem(label)
    data = problem_to_dict(spec)
    validate(data, load_schema("problem"))
    path = tmp_path / "p.json"
    path.write_text(json.dumps(data))
    again = load_problem(path)
    assert problem_to_dict(again) == data
    assert again.f == spec.f and again.constraints == spec.constraints


def test_dimension_mismatch_rejected():
    spec = get_problem("P3")
    with pytest.raises(ValueError):
        replace(spec, U=BoxDomain((-1.0, -1.0), (1.0, 1.0)))
    bad = problem_to_dict(spec) | {"f": "x2"}
    with pytest.raises(ValueError):
        problem_from_dict(bad)
