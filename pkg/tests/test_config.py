import json

import numpy as np
import pytest

from inextbeam.config import ConfigError, load_config, loads_config
from inextbeam.experiments import sweep_values

MINIMAL = """
n_modes = 3

[integrator]
dt = 1e-3

[run]
t_final = 1.0
"""


def _with(extra: str) -> str:
    return MINIMAL + extra


def test_minimal_config_defaults():
    cfg = loads_config(MINIMAL)
    assert cfg.n_modes == 3 and cfg.seed == 0
    b = cfg.beam
    assert (b.D, b.L, b.k2, b.sigma, b.iota) == (1.0, 1.0, 0.0, 1, 0)
    assert cfg.quadrature == {"panels": 16, "points_per_panel": 16}
    assert cfg.integrator.scheme == "implicit-midpoint"
    assert cfg.forcing.kind == "zero"
    assert cfg.decay is None and cfg.sweep is None
    assert np.array_equal(cfg.initial_state().q, np.zeros(3))


def test_decimal_parsing_rounds_once():
    cfg = loads_config(_with("[beam]\nk2 = 0.1\n"))
    assert cfg.beam.k2 == 0.1


def test_initial_state_entries():
    cfg = loads_config(_with("[[initial]]\nmode = 2\nq0 = 0.25\n[[initial]]\nmode = 3\nv0 = -1\n"))
    s = cfg.initial_state()
    assert s.q.tolist() == [0.0, 0.25, 0.0] and s.v.tolist() == [0.0, 0.0, -1.0]


def test_undamped_inertia_is_rejected():
    with pytest.raises(ConfigError, match="damping"):
        loads_config(_with("[beam]\niota = 1\nk2 = 0.0\n"))
    cfg = loads_config("allow_undamped_inertia = true\n" + _with("[beam]\niota = 1\n"))
    assert cfg.beam.iota == 1
    assert loads_config(_with("[beam]\niota = 1\n"), allow_undamped_inertia=True).allow_undamped_inertia


@pytest.mark.parametrize("extra,key", [
    ("[[initial]]\nmode = 5\nq0 = 1.0\n", "initial.0.mode"),
    ("[[initial]]\nmode = 1\n[[initial]]\nmode = 1\n", "initial.1.mode"),
    ("[beam]\nstiffness = 2.0\n", "beam.stiffness"),
    ("[forcing]\nkind = 'modal'\nprofile = [1.0, 0.0, 0.0, 1.0]\n", "forcing.profile"),
    ("[run.extra]\n", "run.extra"),
    ("[quadrature]\npoints_per_panel = 40\n", "quadrature.points_per_panel"),
    ("[decay]\nt_start = 2.0\nt_end = 1.0\n", "decay.t_end"),
    ("[sweep]\nparameter = 'beam.k2'\nvalues = []\n", "sweep.values"),
    ("[sweep]\nparameter = 'beam.k2'\n", "sweep"),
])
def test_invalid_entries_name_their_key(extra, key):
    with pytest.raises(ConfigError) as info:
        loads_config(_with(extra))
    assert str(info.value).startswith(key)


def test_missing_required():
    with pytest.raises(ConfigError, match="n_modes"):
        loads_config("[integrator]\ndt = 1e-3\n[run]\nt_final = 1.0\n")
    with pytest.raises(ConfigError, match="run"):
        loads_config("n_modes = 2\n[integrator]\ndt = 1e-3\n")
    with pytest.raises(ConfigError, match="integrator.dt"):
        loads_config("n_modes = 2\n[integrator]\n[run]\nt_final = 1.0\n")


def test_type_errors():
    with pytest.raises(ConfigError, match="n_modes"):
        loads_config(MINIMAL.replace("n_modes = 3", "n_modes = 'three'"))
    with pytest.raises(ConfigError, match="beam.sigma"):
        loads_config(_with("[beam]\nsigma = 0.5\n"))


def test_parse_error_reports_position():
    with pytest.raises(ConfigError) as info:
        loads_config("n_modes = 3\n[run\n")
    msg = str(info.value)
    assert "parse error" in msg and "line 2" in msg and "column" in msg


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml")
    p = tmp_path / "c.toml"
    p.write_text(MINIMAL)
    assert load_config(p).n_modes == 3


def test_replace_paths():
    cfg = loads_config(_with("[[initial]]\nmode = 1\nq0 = 0.1\n[sweep]\nparameter = 'beam.k2'\nvalues = [0.1]\n"))
    assert cfg.replace("beam.k2", 0.3).beam.k2 == 0.3
    assert cfg.replace("initial.0.q0", 2.0).initial_state().q[0] == 2.0
    assert cfg.replace("beam.k2", 0.3).sweep is None
    assert cfg.replace("beam.sigma", 0.0).beam.sigma == 0
    for bad in ("beam.nothing", "initial.4.q0", "beam", "forcing.profile", "allow_undamped_inertia"):
        with pytest.raises(ConfigError):
            cfg.replace(bad, 1.0)
    # the replaced config is validated again
    with pytest.raises(ConfigError):
        cfg.replace("beam.D", -1.0)


def test_random_sweep_is_seeded():
    text = "seed = 7\n" + _with("[sweep]\nparameter = 'beam.k2'\nrandom = {low = 0.01, high = 0.1, count = 4}\n")
    a, b = sweep_values(loads_config(text)), sweep_values(loads_config(text))
    assert a == b and len(a) == 4
    assert all(0.01 <= x < 0.1 for x in a)
    ref = np.random.default_rng(7).uniform(0.01, 0.1, 4).tolist()
    assert a == ref
    other = sweep_values(loads_config(text.replace("seed = 7", "seed = 8")))
    assert other != a


def test_to_json_roundtrip():
    cfg = loads_config(_with("[beam]\nk2 = 0.05\n"))
    data = json.loads(cfg.to_json())
    assert data["beam"]["k2"] == 0.05 and data["n_modes"] == 3
