import json

import numpy as np
import pytest

from asymlq import numerics
from asymlq.best_response import minimizer_initial, augment_for_max
from asymlq.errors import ParseError, ValidationError
from asymlq.game_model import (dumps_spec, load_spec, paper_example, random_instance, save_spec,
                               spec_to_dict, validate)


def test_paper_example_is_valid():
    report = validate(paper_example())
    assert report.ok and report.violations == []


def test_indefinite_state_weight_reported():
    report = validate(paper_example().replace(Q=np.diag([1.0, -0.1])))
    assert not report.ok
    assert any(v.check == "Q not PSD" for v in report.violations)


def test_shape_mismatch_reported():
    report = validate(paper_example().replace(B1=np.ones((3, 1))))
    assert any(v.check == "shape mismatch" for v in report.violations)


def test_positive_maximizer_weight_reported():
    report = validate(paper_example().replace(R2=[[7.5]]))
    assert [v.check for v in report.violations] == ["R2 not ND"]


def test_round_trip(tmp_path):
    spec = random_instance(4, dims=(2, 1, 2, 1, 2))
    path = tmp_path / "game.json"
    save_spec(spec, path)
    assert load_spec(path) == spec
    save_spec(paper_example(), path)
    assert load_spec(path) == paper_example()


def test_missing_field_named(tmp_path):
    data = spec_to_dict(paper_example())
    del data["R2"]
    path = tmp_path / "m.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ParseError) as info:
        load_spec(path)
    assert "R2" in str(info.value) and info.value.field == "R2"


def test_malformed_json_has_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n "dims": {\n  "n": 1,,\n}')
    with pytest.raises(ParseError) as info:
        load_spec(path)
    assert info.value.line == 3


def test_nonsymmetric_covariance_rejected(tmp_path):
    data = spec_to_dict(paper_example())
    data["W"] = [[1.0, 0.2], [0.0, 1.0]]
    path = tmp_path / "w.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ValidationError) as info:
        load_spec(path)
    assert not info.value.report.ok


def test_dims_must_match(tmp_path):
    data = spec_to_dict(paper_example())
    data["dims"]["n"] = 3
    path = tmp_path / "d.json"
    path.write_text(json.dumps(data))
    with pytest.raises(ParseError, match="dims.n"):
        load_spec(path)


def test_random_instance_deterministic():
    a = random_instance(17, dims=(2, 1, 1, 1, 1))
    b = random_instance(17, dims=(2, 1, 1, 1, 1))
    assert a == b
    assert dumps_spec(a) == dumps_spec(b)
    assert random_instance(18, dims=(2, 1, 1, 1, 1)) != a


@pytest.mark.parametrize("seed", range(20))
def test_random_instance_properties(seed):
    dims = (1 + seed % 3, 1 + seed % 2, 1, 1 + seed % 2, 1)
    spec = random_instance(seed, dims=dims, spectral_target=0.8)
    assert validate(spec).ok
    assert numerics.spectral_radius(spec.A) == pytest.approx(0.8, abs=1e-10)
    c = -spec.R2[0, 0]
    assert np.allclose(spec.R2, -c * np.eye(dims[2]))
    assert np.log2(c) == pytest.approx(round(np.log2(c)))


def test_random_scalar_r2_search_verified():
    spec = random_instance(1, dims=(1, 1, 1, 1, 1), spectral_target=0.8)
    plant = augment_for_max(spec, minimizer_initial(spec))
    sol = numerics.solve_dare_control(plant.A_bar, plant.B_bar, plant.Q_bar, plant.R, role="maximizer")
    S = spec.R2 + plant.B_bar.T @ sol.P @ plant.B_bar
    assert np.all(np.linalg.eigvalsh(S) < 0)
    assert sol.closed_loop_spectral_radius < 1


def test_bad_arguments():
    with pytest.raises(ValueError):
        random_instance(0, spectral_target=1.2)
    with pytest.raises(ValueError):
        random_instance(0, dims=(0, 1, 1, 1, 1))
