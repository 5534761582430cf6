import json

import numpy as np
import pytest

from dduio.io import (
    FileFormatError,
    Scenario,
    load_scenario,
    load_system,
    load_uio,
    save_system,
    save_uio,
    system_to_dict,
)
from dduio.oracle import UioRealization, design_model_based, random_system


def test_system_round_trip(tmp_path, example):
    path = tmp_path / "s.json"
    save_system(example, path)
    back = load_system(path)
    for name in ("A", "C", "E"):
        np.testing.assert_array_equal(getattr(back, name), getattr(example, name))
    assert back.B.shape == (3, 0) and back.m == 0


def test_system_with_inputs_round_trip(tmp_path):
    S = random_system(3, 2, 2, 1, seed=4)
    path = tmp_path / "s.json"
    save_system(S, path)
    back = load_system(path)
    np.testing.assert_array_equal(back.B, S.B)
    assert back.meta["construction"] == S.meta["construction"]


def test_uio_round_trip_keeps_complex_meta(tmp_path, example):
    U = design_model_based(example)
    U = UioRealization(A=U.A, B_u=U.B_u, B_y=U.B_y, D=U.D, meta={"poles": [0.5 + 0.1j, 0.5 - 0.1j, 0.0]})
    path = tmp_path / "u.json"
    save_uio(U, path)
    doc = json.loads(path.read_text())
    assert doc["dims"] == {"n": 3, "m": 0, "p": 2}
    assert doc["meta"]["poles"][0] == [0.5, 0.1]
    back = load_uio(path)
    for name in ("A", "B_y", "D"):
        np.testing.assert_array_equal(getattr(back, name), getattr(U, name))


def test_malformed_files(tmp_path, example):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(FileFormatError, match="invalid JSON"):
        load_system(bad)
    doc = system_to_dict(example)
    doc = json.loads(json.dumps({k: (v.tolist() if hasattr(v, "tolist") else v) for k, v in doc.items()}))
    doc["A"] = [[1.0, 2.0]]
    bad.write_text(json.dumps(doc))
    with pytest.raises(FileFormatError, match="shape"):
        load_system(bad)
    del doc["dims"]
    bad.write_text(json.dumps(doc))
    with pytest.raises(FileFormatError, match="dims"):
        load_system(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(FileFormatError):
        load_uio(bad)
    with pytest.raises(FileFormatError):
        load_uio(tmp_path / "missing.json")


def test_scenario_resolves_paths(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"system": "s.json", "uio": "u.json", "horizon": 30, "x0": [1, 2, 3]}))
    sc = load_scenario(path)
    assert sc == Scenario(str(tmp_path / "s.json"), str(tmp_path / "u.json"), horizon=30, x0=(1.0, 2.0, 3.0))
    assert sc.disturbance == "uniform(-10,10)"


def test_scenario_rejects_unknown_keys(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps({"system": "s.json", "uio": "u.json", "horizn": 30}))
    with pytest.raises(FileFormatError, match="horizn"):
        load_scenario(path)
    path.write_text(json.dumps({"system": "s.json"}))
    with pytest.raises(FileFormatError):
        load_scenario(path)
