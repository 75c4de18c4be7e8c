import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from riswave.exceptions import ConfigurationError, InvalidArgumentError
from riswave.field import (
    ComplexFieldSlice,
    ObstacleMask,
    apply_mask,
    march,
    propagate_direct,
    propagate_spectral,
    read_map_csv,
    reflect,
    write_map_csv,
)
from riswave.phase import focusing_phase, self_accelerating_phase, self_healing_phase, steering_phase
from riswave.metrics import caustic_trajectory
from riswave.scene import IncidentBeamSpec, RisGeometry, direction_angle, incident_field_on_ris, point_at

LAM = 2e-3


def centered(samples, spacing=1e-3, z=0.0):
    nx, ny = samples.shape
    origin = (-(nx - 1) / 2 * spacing, -(ny - 1) / 2 * spacing)
    return ComplexFieldSlice(samples, spacing, origin, z, LAM)


def gaussian(n=255, w0=10e-3, spacing=1e-3):
    x = (np.arange(n) - (n - 1) / 2) * spacing
    return centered(np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / w0 ** 2).astype(complex), spacing)


def rel_l2(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# ---------------------------------------------------------------- reflect

def test_reflect_quarter_turn(small_ris, med):
    e = centered(np.ones((4, 4), dtype=complex))
    out = reflect(e, np.full((4, 4), np.pi / 2))
    np.testing.assert_allclose(out.samples, 1j, atol=1e-15)


def test_reflect_zero_phase_is_identity(small_ris, med):
    inc = incident_field_on_ris(small_ris, IncidentBeamSpec(0.02, 0.3), med)
    out = reflect(inc, np.zeros(small_ris.shape))
    assert np.array_equal(out.samples, inc.samples)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_reflect_keeps_power_and_modulus(seed):
    rng = np.random.default_rng(seed)
    e = centered(rng.normal(size=(8, 6)) + 1j * rng.normal(size=(8, 6)))
    out = reflect(e, rng.uniform(-10, 10, size=(8, 6)))
    np.testing.assert_allclose(np.abs(out.samples), np.abs(e.samples), rtol=1e-14)
    assert out.power == pytest.approx(e.power, rel=1e-13)


def test_reflect_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        reflect(centered(np.ones((4, 4))), np.zeros((4, 5)))


# ---------------------------------------------------------------- direct summation

def test_direct_inverse_distance():
    samples = np.zeros((2, 2), dtype=complex)
    samples[0, 0] = 1
    src = centered(samples)
    near, far = np.abs(propagate_direct(src, [[0, 0, 1.0], [0, 0, 2.0]]))
    assert near / far == pytest.approx(2.0, rel=1e-6)


def test_direct_constructive_and_destructive_pairs():
    on_axis = [[0.0, 0.0, 0.7]]
    single = np.zeros((2, 2), dtype=complex)
    single[0, 0] = 1
    one = propagate_direct(centered(single), on_axis)[0]

    pair = np.zeros((2, 2), dtype=complex)
    pair[0, 0] = pair[1, 0] = 1
    assert propagate_direct(centered(pair), on_axis)[0] == pytest.approx(2 * one, rel=1e-12)

    pair[1, 0] = -1
    assert propagate_direct(centered(pair), on_axis)[0] == 0


def test_direct_rejects_targets_behind_source():
    with pytest.raises(InvalidArgumentError):
        propagate_direct(gaussian(9), [[0, 0, 0.0]])


def test_direct_workers_bitwise(small_ris, med):
    src = reflect(incident_field_on_ris(small_ris, IncidentBeamSpec(0.02), med), focusing_phase(small_ris, med, 0.5))
    pts = np.column_stack([np.linspace(-0.1, 0.1, 1500), np.zeros(1500), np.linspace(0.2, 1.0, 1500)])
    assert np.array_equal(propagate_direct(src, pts), propagate_direct(src, pts, workers=3))


# ---------------------------------------------------------------- spectral propagation

def test_spectral_zero_distance_identity():
    g = gaussian(33)
    assert np.array_equal(propagate_spectral(g, 0.0).samples, g.samples)


def test_spectral_negative_distance():
    with pytest.raises(InvalidArgumentError):
        propagate_spectral(gaussian(9), -0.1)


def _one_over_e_radius(field):
    j = int(np.argmin(np.abs(field.y)))
    row = np.abs(field.samples[:, j])
    row = row / row.max()
    x = field.x
    right = x >= 0
    xr, ar = x[right], row[right]
    k = int(np.nonzero(ar < 1 / math.e)[0][0])
    return float(np.interp(1 / math.e, [ar[k], ar[k - 1]], [xr[k], xr[k - 1]]))


def test_gaussian_radius_after_rayleigh_distance():
    w0 = 10e-3
    z_r = math.pi * w0 ** 2 / LAM
    out = propagate_spectral(gaussian(255, w0), z_r)
    # analytic Gaussian-beam oracle w(z) = w0 sqrt(1 + (z/zR)^2)
    assert _one_over_e_radius(out) == pytest.approx(w0 * math.sqrt(2), rel=0.01)


def test_power_conserved_for_contained_beam():
    g = gaussian(255, 10e-3)
    out = propagate_spectral(g, 0.5)
    assert out.power == pytest.approx(g.power, rel=1e-6)


# ---------------------------------------------------------------- masks

def test_mask_outside_grid_is_identity():
    g = gaussian(33)
    out = apply_mask(g.with_samples(g.samples, z=0.3), ObstacleMask(0.3, [(1.0, 2.0)]))
    assert np.array_equal(out.samples, g.samples)


def test_mask_covering_grid_zeroes_field():
    g = gaussian(33).with_samples(gaussian(33).samples, z=0.3)
    out = apply_mask(g, ObstacleMask(0.3, [(-1.0, 1.0)]))
    assert out.power == 0


def test_half_plane_halves_symmetric_beam():
    g = gaussian(64, 8e-3)  # even count: no sample sits on x = 0
    g = g.with_samples(g.samples, z=0.2)
    out = apply_mask(g, ObstacleMask(0.2, [(0.0, 1.0)]))
    assert out.power == pytest.approx(g.power / 2, rel=1e-12)


def test_mask_plane_mismatch():
    with pytest.raises(InvalidArgumentError):
        apply_mask(gaussian(9), ObstacleMask(0.3, [(0.0, 1.0)]))


# ---------------------------------------------------------------- march

def _src(ris, med, phase, w=0.02):
    return reflect(incident_field_on_ris(ris, IncidentBeamSpec(w), med), phase)


def test_broadside_ridge_on_axis(small_ris, med):
    src = _src(small_ris, med, steering_phase(small_ris, med, 0, 0))
    m = march(src, np.linspace(0.1, 1.0, 10))
    for row in m.intensity:
        assert abs(m.x[np.argmax(row)]) <= m.dx
        # mirror symmetry about x = 0 (the window is centred on the aperture)
        assert rel_l2(row, row[::-1]) < 1e-9


def test_focus_peak_at_f0_within_one_step(med):
    ris = RisGeometry(128, 128, 1e-3)
    f0, dz = 0.3, 0.01
    src = _src(ris, med, focusing_phase(ris, med, f0), w=math.inf)
    zs = np.round(np.arange(0.2, 0.4 + dz / 2, dz), 12)
    m = march(src, zs)
    iz, ix = np.unravel_index(np.argmax(m.intensity), m.intensity.shape)
    assert abs(m.z[iz] - f0) <= dz + 1e-12
    assert abs(m.x[ix]) <= m.dx
    # cross-check with the direct sum on a 5-point axial stencil around (0, f0)
    offsets = np.array([-2, -1, 0, 1, 2]) * dz
    stencil = np.column_stack([np.zeros(5), np.zeros(5), f0 + offsets])
    vals = np.abs(propagate_direct(src, stencil)) ** 2
    best = int(np.argmax(vals))
    assert best in (1, 2, 3)
    assert f0 + offsets[best] == pytest.approx(m.z[iz])


def test_accelerating_argmax_monotone_before_apex(med):
    ris = RisGeometry(256, 16, 1e-3)
    src = _src(ris, med, self_accelerating_phase(ris, med, 0.85, 1.5), w=math.inf)
    zs = np.linspace(0.05, 0.34, 30)
    ca = caustic_trajectory(0.85, 1.5, med, zs, ris.x[0], ris.aperture)
    m = march(src, zs, excursion=float(np.max(np.abs(ca.x))))
    pre = m.z <= ca.apex_z
    xs = m.x[np.argmax(m.intensity, axis=1)][pre]
    # with u = x - x_min the rays bend towards -x, so the peak moves to smaller x
    assert np.all(np.diff(xs) <= m.dx)
    assert xs[-1] < xs[0] - 0.02


def test_obstacle_not_bracketed(small_ris, med):
    src = _src(small_ris, med, steering_phase(small_ris, med, 0, 0))
    with pytest.raises(ConfigurationError):
        march(src, [0.2, 0.5], [ObstacleMask(0.7, [(-0.01, 0.01)])])


def test_window_below_rule(small_ris, med):
    src = _src(small_ris, med, steering_phase(small_ris, med, 0, 0))
    with pytest.raises(ConfigurationError):
        march(src, [0.2, 0.5], window=(0.04, 0.04))


def test_z_grid_must_increase(small_ris, med):
    src = _src(small_ris, med, steering_phase(small_ris, med, 0, 0))
    with pytest.raises(InvalidArgumentError):
        march(src, [0.5, 0.2])


def test_obstacle_blocks_downstream_only(small_ris, med):
    src = _src(small_ris, med, steering_phase(small_ris, med, 0, 0))
    zs = np.linspace(0.1, 0.5, 9)
    free = march(src, zs, window=(0.1, 0.1))
    blocked = march(src, zs, [ObstacleMask(0.3, [(-0.05, 0.05)])], window=(0.1, 0.1))
    before = zs < 0.3 - 1e-12
    np.testing.assert_allclose(blocked.intensity[before], free.intensity[before], rtol=1e-12, atol=0)
    assert blocked.intensity[np.ix_(zs >= 0.3, np.abs(blocked.x) < 0.04)].max() < 1e-3 * free.intensity.max()


def test_march_linearity(small_ris, med):
    src = _src(small_ris, med, self_healing_phase(small_ris, med, 0.05))
    zs = np.linspace(0.2, 1.0, 5)
    alpha = 0.3 - 1.7j
    base = march(src, zs).intensity
    scaled = march(src.with_samples(alpha * src.samples), zs).intensity
    np.testing.assert_allclose(scaled, abs(alpha) ** 2 * base, rtol=1e-10, atol=1e-12 * scaled.max())


def test_march_serial_matches_parallel(small_ris, med):
    src = _src(small_ris, med, focusing_phase(small_ris, med, 0.6))
    zs = np.linspace(0.2, 1.0, 9)
    a = march(src, zs, workers=1).intensity
    b = march(src, zs, workers=4).intensity
    assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))
    assert np.array_equal(a, march(src, zs, workers=1).intensity)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.01, 1.0), st.booleans())
def test_power_never_increases(seed, dz, masked):
    rng = np.random.default_rng(seed)
    f = centered(rng.normal(size=(24, 20)) + 1j * rng.normal(size=(24, 20)))
    p0 = f.power
    f = propagate_spectral(f, dz)
    assert f.power <= p0 * (1 + 1e-12)
    if masked:
        p1 = f.power
        f = apply_mask(f, ObstacleMask(f.z, [(rng.uniform(-0.01, 0), rng.uniform(0, 0.01))]))
        assert f.power <= p1
    p2 = f.power
    f = propagate_spectral(f, dz)
    assert f.power <= p2 * (1 + 1e-12)


ORACLE_CASES = {
    "broadside": lambda ris, med: (steering_phase(ris, med, 0, 0), 0.02, 0.0),
    "steer15": lambda ris, med: (steering_phase(ris, med, 0, math.radians(15)), 0.02, 5 * math.tan(math.radians(15))),
    "focus": lambda ris, med: (focusing_phase(ris, med, 1.0), math.inf, 0.0),
    "axicon": lambda ris, med: (self_healing_phase(ris, med, 0.05), 0.03, 0.0),
}


@pytest.mark.parametrize("case", sorted(ORACLE_CASES))
def test_oracle_equivalence(case, small_ris, med):
    phase, w, excursion = ORACLE_CASES[case](small_ris, med)
    src = _src(small_ris, med, phase, w)
    zs = np.linspace(0.2, 5.0, 13)
    m = march(src, zs, excursion=excursion)
    cols = np.arange(0, len(m.x), 7)
    xs = m.x[cols]
    pts = np.array([[x, 0.0, z] for z in zs for x in xs])
    direct = np.abs(propagate_direct(src, pts)) ** 2
    spectral = m.intensity[:, cols].ravel()
    assert rel_l2(spectral, direct) <= 1e-2
    cone = np.abs(pts[:, 0]) <= 0.2 * pts[:, 2]
    assert rel_l2(spectral[cone], direct[cone]) <= 1e-3


def test_reciprocity_mirrored_peak(med):
    ris = RisGeometry(32, 32, 1e-3)
    a, b = math.radians(10), math.radians(25)
    angles = np.radians(np.arange(-60, 60.001, 0.25))
    arc = np.array([[*point_at(t, 20.0)][:1] + [0.0] + [point_at(t, 20.0)[1]] for t in angles])

    def peak(theta_in, profile):
        inc = incident_field_on_ris(ris, IncidentBeamSpec(math.inf, theta_in), med)
        return angles[np.argmax(np.abs(propagate_direct(reflect(inc, profile), arc)))]

    forward = peak(a, steering_phase(ris, med, a, b))
    assert forward == pytest.approx(b, abs=math.radians(0.25))
    # swap (theta_i, theta_r) and conjugate the incident ramp
    back = peak(-a, steering_phase(ris, med, b, a))
    assert back == pytest.approx(-forward, abs=math.radians(0.25))
    assert direction_angle(*point_at(back, 1.0)) == pytest.approx(back)


def test_map_csv_round_trip(tmp_path, small_ris, med):
    src = _src(small_ris, med, steering_phase(small_ris, med, 0, 0))
    m = march(src, np.linspace(0.2, 0.6, 5))
    write_map_csv(m, tmp_path / "m.csv")
    back = read_map_csv(tmp_path / "m.csv")
    assert np.array_equal(back.intensity, m.intensity)
    assert np.array_equal(back.z, m.z)
    np.testing.assert_allclose(back.x, m.x, rtol=0, atol=1e-15)
    assert back.wavelength == m.wavelength
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert [ln[0] for ln in lines[:3]] == ["#"] * 3 and not lines[3].startswith("#")
