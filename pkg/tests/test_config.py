import math

import pytest

from chimrom.config import default_config, load_config, parse_config
from chimrom.errors import ConfigError

GOOD = """
[case]
theta_deg = 45.0
seed = 99

[mesh]
nx = 16
air_ny = 8
pcm_ny = 4
glass_ny = 2

[time]
dt_s = 2.0
t_end_s = 600.0
snapshot_every_s = 60.0
"""


def test_parse_and_defaults():
    cfg = parse_config(GOOD)
    assert cfg["case", "seed"] == 99
    assert cfg["mesh", "nx"] == 16
    assert cfg["mesh", "length_m"] == 1.0           # default
    assert cfg["physics", "gs_w_m2"] == 600.0       # default
    assert math.isinf(cfg["physics", "charge_end_s"])


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config("[mesh]\nn_x = 16\n")
    with pytest.raises(ConfigError, match="unknown config section"):
        parse_config("[grid]\nnx = 16\n")


def test_bad_values_rejected():
    with pytest.raises(ConfigError):
        parse_config("[time]\ndt_s = -1\n")
    with pytest.raises(ConfigError):
        parse_config("[rom]\ngs_lo_w_m2 = 650\ngs_hi_w_m2 = 650\n")
    with pytest.raises(ConfigError):
        parse_config("[case]\ntheta_deg = 95\n")
    with pytest.raises(ConfigError):
        parse_config("[solver]\nbdf_w2 = 0.6\n")
    with pytest.raises(ConfigError):
        parse_config("[rom]\nmodes = -3\n")
    with pytest.raises(ConfigError):
        parse_config("[mesh]\nnx = not_a_number\n")


def test_missing_file_raises_config_error(tmp_path):
    with pytest.raises(ConfigError, match="config-not-found"):
        load_config(tmp_path / "nope.cfg")


def test_hash_stable_and_sensitive():
    a = parse_config(GOOD)
    b = parse_config(GOOD)
    c = parse_config(GOOD.replace("seed = 99", "seed = 100"))
    assert a.hash == b.hash
    assert a.hash != c.hash


def test_overrides():
    cfg = parse_config(GOOD).with_overrides(physics__gs_w_m2=555.0, case__seed=3)
    assert cfg["physics", "gs_w_m2"] == 555.0
    assert cfg["case", "seed"] == 3
    with pytest.raises(ConfigError):
        parse_config(GOOD).with_overrides(physics__nonsense=1.0)


def test_build_helpers():
    cfg = parse_config(GOOD)
    mesh = cfg.build_mesh()
    assert mesh.air.shape == (8, 16)
    assert cfg.build_room().t_amb == 22.0
    assert cfg.build_schedule().value(10.0) == 600.0
    assert cfg.build_schedule(gs_override=620.0).value(10.0) == 620.0
    assert cfg.build_pcm().h_pc == 165.0


def test_mesh_min_width_knob():
    cfg = default_config().with_overrides(mesh__air_min_width_m=2e-3,
                                          mesh__air_ny=20)
    mesh = cfg.build_mesh()
    assert mesh.air.axis_y.widths.min() == pytest.approx(2e-3, rel=1e-6)
