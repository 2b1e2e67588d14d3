"""JSON config parsing and unit conversion."""

import json

import pytest

from neuroskin.config import config_from_dict, config_sha256, load_config
from neuroskin.errors import ConfigError


def base_dict():
    return {
        "length_unit": "m",
        "mesh": {"nx": 2, "ny": 4, "elem_size": 0.05},
        "material": {"E": 2.0e7, "nu": 0.3, "rho": 1200.0,
                     "thickness": 5.0e-7,
                     "rayleigh_a0": 5.0, "rayleigh_a1": 1.0e-4},
        "neuro": {"activation": "tanh",
                  "input_weights": [-5.0e-4, 5.0e-4, 5.0e-4, -5.0e-4],
                  "design_dim": 2, "default_w_o": 450000.0,
                  "bounds": [[400000.0, 550000.0]]},
        "excitation": {"node_ids": [13], "amplitude": 50.0,
                       "waveform": "half_sine", "t_start": 0.0,
                       "t_end": 0.05},
        "time": {"dt": 1.0e-3, "n_steps": 40},
        "output": {"node": 7, "dof": "x"},
    }


def test_round_trip_fields():
    config = config_from_dict(base_dict())
    assert config.nx == 2 and config.ny == 4
    assert config.material.E == 2.0e7
    assert config.design_dim == 2
    assert config.excitation.node_ids == (13,)
    assert config.bounds == ((400000.0, 550000.0),)
    assert config.newmark_beta == 0.25  # default when section absent


def test_mm_unit_scales_geometry_only():
    raw = base_dict()
    raw["length_unit"] = "mm"
    raw["mesh"]["elem_size"] = 50.0         # 50 mm
    raw["material"]["thickness"] = 5.0e-4   # 0.5 um in mm
    config = config_from_dict(raw)
    assert config.elem_size == pytest.approx(0.05)
    assert config.material.thickness == pytest.approx(5.0e-7)
    assert config.material.E == 2.0e7  # not a length; untouched


def test_bad_unit_rejected():
    raw = base_dict()
    raw["length_unit"] = "in"
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_wrong_input_weight_count():
    raw = base_dict()
    raw["neuro"]["input_weights"] = [1.0, 2.0]
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_inverted_bounds_rejected():
    raw = base_dict()
    raw["neuro"]["bounds"] = [[5.5e5, 4.0e5]]
    with pytest.raises(ConfigError):
        config_from_dict(raw)


def test_load_config_missing_and_malformed(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"mesh": {}}))
    with pytest.raises(ConfigError):
        load_config(missing)


def test_load_config_file_and_hash(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(base_dict()))
    config = load_config(path)
    assert config.n_elems == 8
    h1 = config_sha256(path)
    assert len(h1) == 64
    path.write_text(json.dumps(base_dict()) + "\n")
    assert config_sha256(path) != h1


def test_shipped_default_config_loads():
    from pathlib import Path

    config = load_config(Path(__file__).resolve().parents[1]
                         / "configs" / "default.json")
    config.validate()
    assert config.n_elems == 200
    assert config.design_dim == 1
