"""Beam descriptors extracted from simulated fields and intensity maps."""

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from scipy.interpolate import RegularGridInterpolator

from ._validation import check_positive, check_scalar
from .exceptions import InfeasibleTargetError, InvalidArgumentError, MeasurementOutOfWindowError

NEVER = math.inf
"""Sentinel returned by :func:`reconstruction_distance` when the beam never recovers."""


@dataclass(frozen=True)
class BeamMetrics:
    peak_x: float
    peak_z: float
    peak_intensity: float
    fwhm_at_peak: float
    major_radius: float
    minor_radius: float
    fraunhofer_distance: float

    def as_row(self):
        return {
            "peak_x": self.peak_x,
            "peak_z": self.peak_z,
            "peak_intensity": self.peak_intensity,
            "fwhm_at_peak": self.fwhm_at_peak,
            "major_radius": self.major_radius,
            "minor_radius": self.minor_radius,
            "fraunhofer_distance": self.fraunhofer_distance,
        }


@dataclass(frozen=True)
class FocalEllipsoid:
    center: tuple
    major_radius: float
    minor_radius: float
    peak_intensity: float
    axis: tuple


def fraunhofer_distance(D, wavelength):
    """``2 D^2 / lambda``."""
    D = check_positive(D, "D")
    wavelength = check_positive(wavelength, "wavelength")
    return 2 * D * D / wavelength


# ---------------------------------------------------------------------------
# 1-D widths


def _half_crossings(values, peak_index, level):
    """Fractional indices where ``values`` drops below ``level`` left and right of the peak."""
    n = len(values)
    left = None
    for i in range(peak_index, 0, -1):
        if values[i - 1] < level:
            a, b = values[i - 1], values[i]
            left = (i - 1) + (level - a) / (b - a)
            break
    right = None
    for i in range(peak_index, n - 1):
        if values[i + 1] < level:
            a, b = values[i], values[i + 1]
            right = i + (a - level) / (a - b)
            break
    return left, right


def transverse_fwhm(row, spacing):
    """Full width at half maximum of an intensity row, by linear interpolation.

    A lone nonzero sample gives ``spacing`` (each flank interpolates to the
    half-way point). Raises :class:`MeasurementOutOfWindowError` when either
    half-maximum crossing lies outside the row.
    """
    row = np.asarray(row, dtype=float)
    spacing = check_positive(spacing, "spacing")
    peak = int(np.argmax(row))
    if row[peak] <= 0:
        raise InvalidArgumentError("row must have a positive maximum")
    left, right = _half_crossings(row, peak, row[peak] / 2)
    if left is None or right is None:
        raise MeasurementOutOfWindowError("half-maximum not bracketed inside the window")
    return (right - left) * spacing


def _parabolic_offset(a, b, c):
    denom = a - 2 * b + c
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))


def find_peak(imap):
    """Peak of an intensity map with 3-point parabolic refinement in x and z.

    Ties in the discrete argmax go to the smaller z, then the smaller x.
    Returns ``(x, z, intensity_at_discrete_peak)``.
    """
    I = imap.intensity
    flat = int(np.argmax(I))  # first occurrence: smallest z row, then smallest x
    iz, ix = np.unravel_index(flat, I.shape)
    x, z = float(imap.x[ix]), float(imap.z[iz])
    if 0 < ix < I.shape[1] - 1:
        x += _parabolic_offset(I[iz, ix - 1], I[iz, ix], I[iz, ix + 1]) * imap.dx
    if 0 < iz < I.shape[0] - 1:
        dz = float(imap.z[iz + 1] - imap.z[iz])
        z += _parabolic_offset(I[iz - 1, ix], I[iz, ix], I[iz + 1, ix]) * dz
    return x, z, float(I[iz, ix])


def _line_crossing(interp, start, direction, level, max_dist, step):
    """Distance from ``start`` along ``direction`` to the first sample below ``level``."""
    n = int(math.ceil(max_dist / step)) + 1
    s = np.arange(n) * step
    pts = start[None, :] + s[:, None] * direction[None, :]
    vals = interp(pts)
    # leaving the map (NaN) before dropping below the level is not a crossing
    stop = np.nonzero(~(vals >= level))[0]
    if len(stop) == 0 or stop[0] == 0 or not np.isfinite(vals[stop[0]]):
        return None
    below = stop
    j = below[0]
    a, b = vals[j - 1], vals[j]
    return s[j - 1] + step * (a - level) / (a - b)


def focal_ellipsoid(imap, origin=(0.0, 0.0)):
    """Half-maximum ellipsoid around the global intensity peak of an xz map.

    The major axis points along the local propagation direction, taken as the
    ray from ``origin`` (the RIS centre, as (x, z)) to the peak; the minor
    axis is perpendicular to it. Each radius is the mean of the two
    half-maximum distances on either side of the peak.
    """
    x_pk, z_pk, _ = find_peak(imap)
    interp = RegularGridInterpolator((imap.z, imap.x), imap.intensity, bounds_error=False, fill_value=np.nan)

    def at(pts_xz):
        return interp(pts_xz[:, ::-1])

    peak_val = float(at(np.array([[x_pk, z_pk]]))[0])
    level = peak_val / 2
    axis = np.array([x_pk - origin[0], z_pk - origin[1]])
    axis /= np.linalg.norm(axis)
    perp = np.array([axis[1], -axis[0]])
    start = np.array([x_pk, z_pk])
    step = 0.25 * min(imap.dx, imap.dz if imap.dz > 0 else imap.dx)
    span = float(max(imap.x[-1] - imap.x[0], imap.z[-1] - imap.z[0]))
    radii = []
    for direction in (axis, -axis, perp, -perp):
        d = _line_crossing(at, start, direction, level, span, step)
        if d is None or not np.isfinite(d):
            raise MeasurementOutOfWindowError("half-maximum locus leaves the map")
        radii.append(d)
    return FocalEllipsoid(
        center=(x_pk, z_pk),
        major_radius=0.5 * (radii[0] + radii[1]),
        minor_radius=0.5 * (radii[2] + radii[3]),
        peak_intensity=peak_val,
        axis=(float(axis[0]), float(axis[1])),
    )


def beam_metrics(imap, wavelength, aperture, origin=(0.0, 0.0)):
    """Bundle peak, transverse FWHM and (when measurable) the focal ellipsoid."""
    x_pk, z_pk, peak = find_peak(imap)
    row = imap.row(z_pk)
    try:
        fwhm = transverse_fwhm(row, imap.dx)
    except MeasurementOutOfWindowError:
        fwhm = math.nan
    try:
        ell = focal_ellipsoid(imap, origin)
        major, minor = ell.major_radius, ell.minor_radius
    except MeasurementOutOfWindowError:
        major = minor = math.nan
    return BeamMetrics(x_pk, z_pk, peak, fwhm, major, minor, fraunhofer_distance(aperture, wavelength))


# ---------------------------------------------------------------------------
# Focal size vs footprint


def gaussian_focus(w, f0, wavelength):
    """Paraxial Gaussian-beam focus of a footprint ``w`` with lens focal length ``f0``.

    Returns ``(peak_distance, major_radius)``: the waist position and the
    half-maximum half-depth (the Rayleigh range of the focused beam).
    """
    zr = math.pi * w * w / wavelength
    t = zr / f0
    return f0 * t * t / (1 + t * t), f0 * t / (1 + t * t)


def gaussian_design(peak_distance, major_radius, wavelength):
    """Footprint and lens focal length that put a Gaussian waist at ``peak_distance``
    with Rayleigh range ``major_radius`` (inverse of :func:`gaussian_focus`)."""
    t = peak_distance / major_radius
    f0 = (peak_distance ** 2 + major_radius ** 2) / peak_distance
    zr = major_radius * (1 + t * t)
    return math.sqrt(wavelength * zr / math.pi), f0


def _on_axis_sources(src):
    """Collapse source samples sharing a radius; exact for points on the z axis.

    On the axis the kernel depends only on the element radius, so samples at
    equal ``x^2 + y^2`` can be summed first.
    """
    X, Y = np.meshgrid(src.x, src.y, indexing="ij")
    r2 = (X * X + Y * Y).ravel()
    w = src.samples.ravel() * src.spacing ** 2
    keep = np.abs(w) > 1e-9 * np.abs(w).max()
    key = np.round(r2[keep] / src.spacing ** 2 * 4).astype(np.int64)  # integer for half-pitch grids
    uniq, inv = np.unique(key, return_inverse=True)
    weights = np.zeros(len(uniq), dtype=complex)
    np.add.at(weights, inv, w[keep])
    r2u = np.zeros(len(uniq))
    np.maximum.at(r2u, inv, r2[keep])
    return np.sqrt(r2u), weights


@functools.lru_cache(maxsize=8)
def _radial_groups(nx, ny, pitch):
    """Distinct element radii of a centred grid and how many elements share each."""
    x = (np.arange(nx) - (nx - 1) / 2) * pitch
    y = (np.arange(ny) - (ny - 1) / 2) * pitch
    r2 = (x[:, None] ** 2 + y[None, :] ** 2).ravel()
    key = np.round(r2 / pitch ** 2 * 4).astype(np.int64)
    uniq, idx, counts = np.unique(key, return_index=True, return_counts=True)
    return np.sqrt(r2[idx]), counts.astype(float)


def on_axis_intensity(src, z):
    """``|E(0, 0, z)|^2`` of a source plane by direct Rayleigh-Sommerfeld summation."""
    r, weights = _on_axis_sources(src)
    return _axis_intensity(r, weights, src.wavelength, np.atleast_1d(np.asarray(z, dtype=float)))


def _axis_intensity(r, weights, wavelength, z):
    k = 2 * np.pi / wavelength
    out = np.empty(len(z))
    for i, zi in enumerate(z):
        rho = np.sqrt(r * r + zi * zi)
        kern = (zi / rho) * np.exp(1j * k * rho) / rho * (1 + 1j / (k * rho)) / (1j * wavelength)
        out[i] = abs(np.dot(kern, weights)) ** 2
    return out


def on_axis_focus(ris, medium, w, f0, *, power=1.0, z_max=None):
    """Measure the on-axis focus of a parabolic profile by direct summation.

    Returns ``(peak_z, peak_intensity, near_z, far_z)``, the last two being
    the half-maximum crossings (``near_z`` is NaN when the intensity never
    drops to half between the RIS and the peak). Raises
    :class:`MeasurementOutOfWindowError` when the far crossing lies beyond
    ``z_max`` (default ``20 * f0``).
    """
    from .scene import IncidentBeamSpec

    beam = IncidentBeamSpec.with_power(w, power)
    r, counts = _radial_groups(ris.nx, ris.ny, ris.pitch)
    k = medium.wavenumber
    # the profile depends on the radius only, so each group shares one sample value
    sample = beam.amplitude * np.exp(-(r / w) ** 2) * np.exp(-1j * k * r * r / (2 * f0))
    weights = counts * sample * ris.pitch ** 2
    keep = np.abs(sample) > 1e-9 * beam.amplitude
    r, weights = r[keep], weights[keep]
    lam = medium.wavelength
    z_max = 20 * f0 if z_max is None else z_max
    z_min = 10 * lam

    def intensity(z):
        return _axis_intensity(r, weights, lam, np.atleast_1d(z))

    # geometric grid so short and long foci are both resolved
    zs = np.geomspace(z_min, z_max, 241)
    vals = intensity(zs)
    i = int(np.argmax(vals))
    lo, hi = zs[max(i - 1, 0)], zs[min(i + 1, len(zs) - 1)]
    res = optimize.minimize_scalar(lambda z: -intensity(z)[0], bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-6 * f0})
    z_pk, I_pk = float(res.x), float(-res.fun)
    half = I_pk / 2

    def g(z):
        return intensity(z)[0] - half

    near_idx = np.nonzero((zs < z_pk) & (vals < half))[0]
    near = math.nan
    if len(near_idx):
        j = near_idx[-1]
        near = optimize.brentq(g, zs[j], min(zs[j + 1], z_pk), xtol=1e-7 * f0)
    far_idx = np.nonzero((zs > z_pk) & (vals < half))[0]
    if not len(far_idx):
        raise MeasurementOutOfWindowError(f"far half-maximum beyond z_max={z_max}")
    j = far_idx[0]
    far = optimize.brentq(g, max(zs[j - 1], z_pk), zs[j], xtol=1e-7 * f0)
    return z_pk, I_pk, near, far


def focal_major_radius(ris, medium, w, f0):
    """Half-maximum half-depth of the on-axis focus (mean of both sides when both exist)."""
    z_pk, _, near, far = on_axis_focus(ris, medium, w, f0)
    if math.isnan(near):
        return far - z_pk
    return 0.5 * (far - near)


def footprint_for_focal_size(ris, medium, f0, target_radius, *, rtol=0.05, max_iter=40):
    """Footprint radius whose focus at ``f0`` has the requested major radius.

    The major radius shrinks monotonically with the footprint once the
    footprint exceeds ``sqrt(lambda f0 / pi)``, where the paraxial focal depth
    peaks; below that the beam waist drifts back towards the RIS. Bisection
    therefore runs over ``[max(2 lambda, sqrt(lambda f0/pi)), D/2]``, each probe
    measuring the focus by direct summation.

    Raises
    ------
    InfeasibleTargetError
        The target is smaller than the focus of the largest footprint, or
        larger than the deepest focus available at ``f0``.
    """
    f0 = check_positive(f0, "f0")
    target = check_positive(target_radius, "target_radius")
    lam = medium.wavelength
    w_hi = ris.aperture / 2
    w_lo = max(2 * lam, math.sqrt(lam * f0 / math.pi))
    if w_lo >= w_hi:
        raise InfeasibleTargetError(f"aperture too small to focus at f0={f0} m")

    def radius(w):
        return focal_major_radius(ris, medium, w, f0)

    r_hi = radius(w_hi)
    if r_hi > target * (1 + rtol):
        raise InfeasibleTargetError(
            f"target major radius {target} m unreachable at f0={f0} m: the largest footprint "
            f"{w_hi:.4g} m gives {r_hi:.4g} m"
        )
    if abs(r_hi / target - 1) <= rtol:
        return w_hi
    r_lo = radius(w_lo)
    if r_lo < target * (1 - rtol):
        raise InfeasibleTargetError(
            f"target major radius {target} m exceeds the deepest focus {r_lo:.4g} m available at f0={f0} m"
        )
    if abs(r_lo / target - 1) <= rtol:
        return w_lo
    lo, hi = w_lo, w_hi
    # Start from the paraxial Gaussian estimate; the probe there splits the bracket.
    t = (f0 + math.sqrt(max(f0 * f0 - 4 * target * target, 0.0))) / (2 * target)
    mid = min(max(math.sqrt(lam * t * f0 / math.pi), w_lo * 1.01), w_hi / 1.01)
    for _ in range(max_iter):
        r = radius(mid)
        if abs(r / target - 1) <= rtol:
            return mid
        if r > target:
            lo = mid
        else:
            hi = mid
        mid = math.sqrt(lo * hi)
    raise InfeasibleTargetError(f"bisection did not converge for f0={f0}, target={target}")


# ---------------------------------------------------------------------------
# Self-healing and self-accelerating descriptors


def profile_correlation(a, b):
    """Pearson correlation of two intensity rows; 0 when either is constant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a - a.mean()
    b = b - b.mean()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def reconstruction_distance(blocked, unblocked, z_b, threshold=0.9):
    """First z >= ``z_b`` where the blocked row correlates with the unblocked one.

    Returns :data:`NEVER` (``inf``) if the threshold is never reached inside
    the map.
    """
    if blocked.intensity.shape != unblocked.intensity.shape or not (
        np.allclose(blocked.x, unblocked.x) and np.allclose(blocked.z, unblocked.z)
    ):
        raise InvalidArgumentError("blocked and unblocked maps must share the same grid")
    threshold = check_scalar(threshold, "threshold", min_val=-1.0, max_val=1.0)
    for z, rb, ru in zip(blocked.z, blocked.intensity, unblocked.intensity):
        if z < z_b - 1e-9 * max(1.0, abs(z_b)):
            continue
        if profile_correlation(rb, ru) >= threshold:
            return float(z)
    return NEVER


def correlation_curve(blocked, unblocked):
    return np.array([profile_correlation(a, b) for a, b in zip(blocked.intensity, unblocked.intensity)])


@dataclass(frozen=True)
class Caustic:
    z: np.ndarray
    x: np.ndarray
    apex_z: float
    source_u: np.ndarray


def caustic_trajectory(C, gamma, medium, z_grid, x_min, aperture, n_rays=20001):
    """Ray-optics envelope of the power-law profile ``-k C u^gamma``.

    A ray leaving ``x0 = x_min + u0`` travels at angle
    ``asin(C gamma u0^(gamma-1))`` towards -x (the direction of the phase
    gradient), i.e. ``x(z) = x0 - z tan(...)``. The caustic at each z is the
    extreme (smallest) x over the ray family; it is a true envelope while the
    extremal ray comes from inside the aperture. ``apex_z`` is the distance
    where the extremal ray reaches the far edge of the aperture.
    """
    C = check_positive(C, "C")
    gamma = check_scalar(gamma, "gamma", min_val=1.0, max_val=2.0, include_min=False, include_max=False)
    aperture = check_positive(aperture, "aperture")
    z_grid = np.asarray(z_grid, dtype=float)
    u = np.linspace(0.0, aperture, n_rays)
    s = C * gamma * u ** (gamma - 1)
    pitch = medium.wavelength / 2
    if C * gamma * pitch ** (gamma - 1) >= 1:
        raise InvalidArgumentError("rays are evanescent across the aperture for these (C, gamma)")
    real = s < 1
    u, s = u[real], s[real]
    slope = np.tan(np.arcsin(s))
    xc = np.empty_like(z_grid)
    src = np.empty_like(z_grid)
    for i, z in enumerate(z_grid):
        xs = x_min + u - z * slope
        j = int(np.argmin(xs))
        xc[i] = xs[j]
        src[i] = u[j]
    # apex: extremal ray reaches the last real ray; d/du (u - z slope) = 0 at u_end
    dslope = np.gradient(slope, u)
    apex = 1.0 / dslope[-1] if dslope[-1] > 0 else math.inf
    return Caustic(z=z_grid.copy(), x=xc, apex_z=float(apex), source_u=src)


def argmax_trajectory(imap):
    """x of the intensity maximum in each z-row."""
    return imap.x[np.argmax(imap.intensity, axis=1)]


def axial_peak_variation_db(values):
    """Max minus min of a positive intensity series, in dB."""
    values = np.asarray(values, dtype=float)
    return float(10 * np.log10(values.max() / values.min()))
