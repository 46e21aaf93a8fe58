import numpy as np
import pytest

from conftest import closed_form_mode, trapezoid
from inextbeam.forcing import Forcing, ForcingError, bind_forcing, project_forcing
from inextbeam.modes import build_basis, solve_wavenumbers
from inextbeam.quadrature import build_context


def test_zero_forcing(basis4, quad):
    assert np.array_equal(project_forcing(None, basis4, quad, 0.3), np.zeros(4))
    assert np.array_equal(project_forcing(Forcing(), basis4, quad, 0.3), np.zeros(4))


def test_mode_shaped_pressure_projects_to_unit_vector(basis4, quad):
    p = lambda x, t: basis4.evaluate(x)[0]
    P = project_forcing(p, basis4, quad, 0.0)
    assert np.max(np.abs(P - np.eye(4)[0])) <= 1e-10


def test_uniform_load_against_trapezoid():
    q = build_context()
    b = build_basis(1, 1.0, q)
    P = project_forcing(Forcing("uniform", amplitude=1.0), b, q, 0.0)
    x = np.linspace(0, 1, 100_001)
    k = solve_wavenumbers(1)[0]
    raw = closed_form_mode(k, 1.0, x)
    s = raw / np.sqrt(trapezoid(raw**2, x))
    assert abs(P[0] - trapezoid(s, x)) <= 1e-8


def test_uniform_preset_matches_callable(basis4, quad):
    preset = project_forcing(Forcing("uniform", amplitude=2.5), basis4, quad, 1.0)
    field = project_forcing(lambda x, t: np.full_like(x, 2.5), basis4, quad, 1.0)
    assert np.allclose(preset, field, rtol=1e-13, atol=1e-15)


def test_harmonic_time_factor(basis4, quad):
    f = Forcing("harmonic", amplitude=3.0, frequency=2.0)
    load = bind_forcing(f, basis4, quad)
    base = project_forcing(Forcing("uniform", amplitude=1.0), basis4, quad, 0.0)
    for t in (0.0, 0.4, 1.7):
        assert np.allclose(load(t), 3.0 * np.sin(2.0 * t) * base, rtol=1e-14, atol=1e-16)


def test_modal_profile(basis4, quad):
    load = bind_forcing(Forcing("modal", amplitude=2.0, profile=(1.0, 0.0, -0.5)), basis4, quad)
    assert np.array_equal(load(0.0), [2.0, 0.0, -1.0, 0.0])
    with pytest.raises(ForcingError):
        bind_forcing(Forcing("modal", amplitude=1.0, profile=(1,) * 5), basis4, quad)


@pytest.mark.parametrize("kw", [{"kind": "gust"}, {"kind": "modal"}, {"kind": "uniform", "amplitude": np.inf}])
def test_invalid_presets(kw):
    with pytest.raises(ForcingError):
        Forcing(**kw)


def test_non_finite_field_load_raises(basis4, quad):
    bad = lambda x, t: np.where(x > 0.5, np.nan, 1.0)
    with pytest.raises(ForcingError, match="non-finite"):
        project_forcing(bad, basis4, quad, 0.0)
