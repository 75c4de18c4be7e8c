import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riswave.exceptions import InvalidArgumentError
from riswave.phase import (
    PhaseProfile,
    compose,
    focus_at_point,
    focusing_phase,
    quantize,
    self_accelerating_phase,
    self_healing_phase,
    steering_phase,
    wrap,
    wrap_values,
    zero_phase,
)
from riswave.scene import RisGeometry, medium_from_wavelength

MED = medium_from_wavelength(2e-3)


def _at(profile, ris, x, y=None):
    ix = int(np.argmin(np.abs(ris.x - x)))
    iy = int(np.argmin(np.abs(ris.y - (0.0 if y is None else y))))
    return profile.values[ix, iy]


def test_specular_steering_is_zero():
    ris = RisGeometry(8, 8, 1e-3)
    assert np.all(steering_phase(ris, MED, 0.4, 0.4).values == 0)


@pytest.mark.parametrize("ti, tr, x, expected", [(0, 30, 1e-3, -math.pi / 2), (30, 0, 2e-3, math.pi)])
def test_steering_values(ti, tr, x, expected):
    ris = RisGeometry(9, 3, 0.5e-3)
    p = steering_phase(ris, MED, math.radians(ti), math.radians(tr))
    assert _at(p, ris, x) == pytest.approx(expected, abs=1e-4)


def test_steering_is_linear_in_x():
    ris = RisGeometry(33, 5, 1e-3)
    p = steering_phase(ris, MED, 0.1, -0.7).values
    np.testing.assert_allclose(np.diff(p, 2, axis=0), 0, atol=1e-9)


@pytest.mark.parametrize("f0, r, expected", [(5.0, 0.1, -math.pi), (2.5, 0.05, -math.pi / 2)])
def test_focusing_values(f0, r, expected):
    ris = RisGeometry(401, 3, 0.5e-3)
    p = focusing_phase(ris, MED, f0)
    assert _at(p, ris, r) == pytest.approx(expected, abs=1e-9)
    assert _at(p, ris, 0.0) == 0


def test_focusing_rejects_nonpositive_f0():
    with pytest.raises(InvalidArgumentError):
        focusing_phase(RisGeometry(4, 4, 1e-3), MED, 0.0)


def test_focusing_radially_symmetric():
    ris = RisGeometry(20, 20, 1e-3)
    v = focusing_phase(ris, MED, 1.3).values
    np.testing.assert_array_equal(v, v.T)
    np.testing.assert_array_equal(v, v[::-1, :])


def test_axicon_value():
    ris = RisGeometry(81, 3, 0.5e-3)
    assert _at(self_healing_phase(ris, MED, 0.05, 1.0), ris, 0.02) == pytest.approx(-math.pi, abs=1e-9)


def test_healing_gamma2_equals_focusing():
    ris = RisGeometry(17, 23, 0.7e-3)
    f0 = 1.7
    np.testing.assert_array_equal(
        self_healing_phase(ris, MED, 1 / (2 * f0), 2.0).values, focusing_phase(ris, MED, f0).values
    )


def test_accelerating_edge_and_value():
    ris = RisGeometry(81, 4, 1e-3)
    p = self_accelerating_phase(ris, MED, 0.02, 1.5)
    assert np.all(p.values[0] == 0)
    u = ris.x - ris.x[0]
    i = int(np.argmin(np.abs(u - 0.04)))
    assert p.values[i, 2] == pytest.approx(-0.5027, abs=1e-4)
    np.testing.assert_array_equal(p.values, p.values[:, :1].repeat(4, axis=1))


@pytest.mark.parametrize("gamma", [1.0, 2.0, 0.5])
def test_accelerating_gamma_range(gamma):
    with pytest.raises(InvalidArgumentError):
        self_accelerating_phase(RisGeometry(4, 4, 1e-3), MED, 0.1, gamma)


def test_focus_at_point_matches_exact_spherical_term():
    # oracle: -k (sqrt(25 + 0.0025) - 5) evaluated directly
    oracle = -MED.wavenumber * (math.sqrt(25 + 0.05 ** 2) - 5)
    ris = RisGeometry(201, 3, 0.5e-3)
    p = focus_at_point(ris, MED, (0.0, 5.0))
    assert _at(p, ris, 0.05) == pytest.approx(oracle, abs=1e-9)
    assert _at(p, ris, 0.05) == pytest.approx(-0.7854, abs=1e-4)
    assert _at(p, ris, 0.0) == 0
    assert _at(p, ris, 0.05) == _at(p, ris, -0.05)


def test_focus_at_point_paraxial_limit():
    ris = RisGeometry(32, 32, 1e-3)
    f0 = 4.0
    diff = focus_at_point(ris, MED, (0.0, f0)).values - focusing_phase(ris, MED, f0).values
    r4 = (ris.mesh()[0] ** 2 + ris.mesh()[1] ** 2) ** 2
    # next term of the expansion is +k r^4 / (8 f0^3)
    assert np.max(np.abs(diff)) <= MED.wavenumber * r4.max() / (8 * f0 ** 3) * 1.01


def test_focus_at_point_rejects_origin():
    with pytest.raises(InvalidArgumentError):
        focus_at_point(RisGeometry(4, 4, 1e-3), MED, (0.0, 0.0))


def test_compose_identity_and_mismatch():
    ris = RisGeometry(6, 5, 1e-3)
    p = focusing_phase(ris, MED, 2.0)
    np.testing.assert_array_equal(compose(p, zero_phase(ris)).values, p.values)
    with pytest.raises(InvalidArgumentError):
        compose(p, zero_phase(RisGeometry(5, 5, 1e-3)))


def test_wrap_examples():
    assert wrap_values(np.array([3 * math.pi / 2]))[0] == pytest.approx(-math.pi / 2)
    assert wrap_values(np.array([-math.pi]))[0] == math.pi


def test_quantize_one_bit_example():
    p = PhaseProfile(np.array([[0.3]]))
    assert quantize(p, 1).values[0, 0] == 0.0


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.integers(-3, 3))
def test_wrap_invariant_to_2pi_shift(values, n):
    v = np.array(values)[None, :]
    p = PhaseProfile(v)
    shifted = compose(p, PhaseProfile(np.full_like(v, 2 * math.pi * n)))
    np.testing.assert_allclose(np.cos(wrap(shifted).values), np.cos(wrap(p).values), atol=1e-9)
    np.testing.assert_allclose(np.sin(wrap(shifted).values), np.sin(wrap(p).values), atol=1e-9)
    w = wrap(p).values
    assert np.all((w > -math.pi) & (w <= math.pi))


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40), st.integers(1, 12))
@settings(max_examples=60)
def test_quantize_levels_and_error(values, bits):
    p = PhaseProfile(np.array(values)[None, :])
    q = quantize(p, bits).values
    step = 2 * math.pi / 2 ** bits
    n = (q + math.pi) / step
    np.testing.assert_allclose(n, np.round(n), atol=1e-9)
    assert np.all((n >= -1e-9) & (n < 2 ** bits))
    err = np.angle(np.exp(1j * (q - p.values)))
    assert np.max(np.abs(err)) <= math.pi / 2 ** bits + 1e-9


def test_profile_csv_round_trip(tmp_path):
    ris = RisGeometry(5, 4, 1e-3)
    p = focusing_phase(ris, MED, 0.7)
    path = tmp_path / "p.csv"
    p.to_csv(path)
    np.testing.assert_array_equal(np.loadtxt(path, delimiter=","), p.values)
