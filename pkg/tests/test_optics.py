import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from nuczeno import ConfigError, OpticalParams, SingularParametersError
from nuczeno.constants import HBAR
from nuczeno.optics import (
    channel_coefficients,
    empty_cavity_reflectivity,
    phase_shift,
    povm_weight,
    reflectivity,
    validity_report,
)


def _eq13(p, delta):
    # direct transcription of the reflection formula, kept separate from the conj(D)/D form
    x = p.omega_0 + delta - p.omega_L
    den = (p.omega_c - p.omega_L - 1j * np.pi * p.kappa) * x - p.g**2
    return 1 + 2j * np.pi * p.kappa * x / den


def test_resonant_emitter_reflects_unity():
    p = OpticalParams(omega_0=0.3, omega_L=0.8, kappa=100.0, g=2.0)
    assert reflectivity(p, 0.5) == pytest.approx(1.0, abs=1e-15)


def test_empty_cavity_on_resonance():
    p = OpticalParams(kappa=10.0, g=0.0)
    assert reflectivity(p, 0.2) == pytest.approx(-1.0)
    assert empty_cavity_reflectivity(p) == pytest.approx(-1.0)


def test_fig2_closed_form_value(fig2_optics):
    # x = pi kappa delta / g^2 at delta = 0.45
    x = np.pi * 4000 * 0.45 / 900
    closed = (1 - 1j * x) / (1 + 1j * x)
    r = reflectivity(fig2_optics, 0.45)
    assert r == pytest.approx(closed, abs=1e-12)
    assert r == pytest.approx(_eq13(fig2_optics, 0.45), abs=1e-12)
    assert r.real == pytest.approx(-0.9506, abs=1e-4)
    assert r.imag == pytest.approx(-0.3104, abs=1e-4)


def test_decoupled_emitter_on_probe_resonance_is_regular():
    # D vanishes at g = 0 and zero detuning, but only as a removable singularity
    p = OpticalParams(g=0.0, omega_c=1.0)
    assert reflectivity(p, 0.0) == pytest.approx(empty_cavity_reflectivity(p), abs=1e-15)


@pytest.mark.parametrize("kwargs,key", [(dict(kappa=0.0), "optics.kappa"), (dict(g=-1.0), "optics.g"), (dict(omega_c=np.inf), "optics.omega_c")])
def test_invalid_params(kwargs, key):
    with pytest.raises(ConfigError) as info:
        OpticalParams(**kwargs)
    assert info.value.key == key


def test_channel_limits(fig2_optics):
    c = channel_coefficients(fig2_optics, 0.0)
    assert c.r_co == pytest.approx(0.0, abs=1e-15)
    assert c.r_cr == pytest.approx(1.0, abs=1e-15)
    g0 = channel_coefficients(OpticalParams(g=0.0, omega_c=0.2), np.linspace(-1, 1, 7))
    np.testing.assert_array_equal(g0.r_cr, 0)


def test_fully_resonant_closed_forms(fig2_optics):
    d = np.linspace(-0.5, 0.5, 41)
    x = np.pi * fig2_optics.kappa * d / fig2_optics.g**2
    c = channel_coefficients(fig2_optics, d)
    np.testing.assert_allclose(c.r_cr, 1 / (1 + 1j * x), atol=1e-12)
    np.testing.assert_allclose(c.r_co, -1j * x / (1 + 1j * x), atol=1e-12)
    np.testing.assert_allclose(np.angle(c.r), -2 * np.arctan(x), atol=1e-12)


def test_crossover_matches_root_find(fig2_optics):
    star = brentq(lambda d: povm_weight(fig2_optics, d) - 0.5, 1e-6, 1.0, xtol=1e-14)
    assert star == pytest.approx(900 / (np.pi * 4000), abs=1e-10)
    assert star == pytest.approx(0.0716197, abs=1e-6)
    assert fig2_optics.crossover_shift == pytest.approx(star, abs=1e-10)
    assert povm_weight(fig2_optics, star, "co") == pytest.approx(0.5, abs=1e-9)


def test_povm_weights(fig2_optics):
    assert povm_weight(fig2_optics, 0.0) == 1.0
    assert povm_weight(fig2_optics, 0.0, "co") == pytest.approx(0.0, abs=1e-30)
    assert povm_weight(fig2_optics, 1e6) < 1e-10
    with pytest.raises(ValueError):
        povm_weight(fig2_optics, 0.0, "xx")


def test_phase_shift(fig2_optics):
    assert abs(phase_shift(fig2_optics, 0.0)) == pytest.approx(np.pi)
    assert phase_shift(OpticalParams(g=0.0, omega_c=0.3), 0.7) == pytest.approx(0.0, abs=1e-15)
    h = 1e-7
    slope = (np.angle(reflectivity(OpticalParams(omega_L=h), 0.0)) - np.angle(reflectivity(OpticalParams(omega_L=-h), 0.0))) / (2 * h)
    # probe frequency enters both the emitter and the cavity detuning; the emitter term dominates
    assert slope == pytest.approx(2 * np.pi * 4000 / 900, rel=1e-3)
    p = np.asarray(phase_shift(fig2_optics, np.linspace(-3, 3, 101)))
    assert np.all(p > -np.pi) and np.all(p <= np.pi)


def test_validity_report(fig2_optics):
    rep = validity_report(fig2_optics, 1000.0)
    assert rep.linewidth == pytest.approx(0.225)
    assert rep.phase_slope == pytest.approx(27.925268, rel=1e-6)
    assert rep.t_delta_min == pytest.approx(HBAR / 0.225)
    assert rep.t_delta_min == pytest.approx(2.925, abs=1e-3)
    assert rep.ok
    assert not validity_report(fig2_optics, 100.0).ok
    with pytest.raises(ValueError):
        validity_report(fig2_optics, 0.0)
    with pytest.raises(SingularParametersError):
        validity_report(OpticalParams(g=0.0), 10.0)


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, st.floats(0.01, 1e4), st.floats(0.01, 100), finite)
def test_unimodular_and_complete(wc, w0, wl, kappa, g, delta):
    p = OpticalParams(omega_c=wc, omega_0=w0, omega_L=wl, kappa=kappa, g=g)
    c = channel_coefficients(p, delta)
    assert abs(abs(c.r) - 1) < 1e-12
    assert abs(abs(c.r0) - 1) < 1e-12
    assert abs(abs(c.r_co) ** 2 + abs(c.r_cr) ** 2 - 1) < 1e-12
    assert c.r_co == 0.5 * (c.r + c.r0)
    assert c.r_cr == 0.5 * (c.r - c.r0)
    assert c.r == pytest.approx(_eq13(p, delta), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(1.0, 1e4), st.floats(0.1, 100))
def test_resonant_symmetry(delta, kappa, g):
    p = OpticalParams(kappa=kappa, g=g)
    assert povm_weight(p, delta) == pytest.approx(povm_weight(p, -delta), abs=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(1.0, 100.0))
def test_empty_cavity_limit(delta, wc, kappa):
    p = OpticalParams(omega_c=wc, kappa=kappa, g=0.0, omega_0=1.0)
    if delta == -1.0:
        return
    assert reflectivity(p, delta) == pytest.approx(empty_cavity_reflectivity(p), abs=1e-13)
