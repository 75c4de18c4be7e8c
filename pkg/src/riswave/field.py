"""Scalar field engine.

Two propagators are provided. :func:`propagate_direct` sums the first
Rayleigh-Sommerfeld kernel over every source sample and is the slow exact
reference. :func:`propagate_spectral` is the band-limited angular-spectrum
method on a zero-padded grid. :func:`march` builds xz intensity maps on top
of the spectral propagator and handles absorbing obstacles.

Conventions: time dependence exp(-j w t), so an outgoing spherical wave is
exp(+j k r). Transverse arrays are indexed ``[ix, iy]``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
import scipy.fft

from ._validation import check_points, check_positive, check_same_shape, check_scalar
from .exceptions import ConfigurationError, InvalidArgumentError

# Targets x sources evaluated per block in propagate_direct.
_DIRECT_BLOCK = 2 ** 21

# Planes closer than this (relative) count as coincident, e.g. an obstacle at a grid z.
_Z_TOL = 1e-9


@dataclass(frozen=True)
class ComplexFieldSlice:
    """Complex scalar field sampled on a transverse plane ``z = const``.

    Parameters
    ----------
    samples : ndarray of complex, shape (nx, ny)
    spacing : float
        Sample pitch in metres (same along x and y).
    origin : tuple of float
        (x, y) coordinate of ``samples[0, 0]``.
    z : float
        Plane position; 0 is the RIS plane.
    wavelength : float
    """

    samples: np.ndarray
    spacing: float
    origin: tuple
    z: float
    wavelength: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        if samples.ndim != 2 or min(samples.shape) < 2:
            raise InvalidArgumentError(f"samples must be 2-D with >= 2 points per axis, got {samples.shape}")
        check_positive(self.spacing, "spacing")
        check_positive(self.wavelength, "wavelength")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "z", float(self.z))

    @property
    def shape(self):
        return self.samples.shape

    @property
    def x(self):
        return self.origin[0] + self.spacing * np.arange(self.shape[0])

    @property
    def y(self):
        return self.origin[1] + self.spacing * np.arange(self.shape[1])

    @property
    def wavenumber(self):
        return 2 * np.pi / self.wavelength

    @property
    def power(self):
        """Total power ``sum |E|^2 * spacing^2``."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.spacing ** 2)

    def with_samples(self, samples, z=None):
        return replace(self, samples=samples, z=self.z if z is None else z)


@dataclass(frozen=True)
class ObstacleMask:
    """Thin absorbing screen at ``z = z_b``.

    The opaque region is the union of ``x_intervals``; when ``y_intervals`` is
    given it is restricted to those y ranges, otherwise it extends over all y.
    """

    z_b: float
    x_intervals: tuple
    y_intervals: tuple = None

    def __post_init__(self):
        z_b = check_positive(self.z_b, "z_b")
        xs = _normalize_intervals(self.x_intervals, "x_intervals")
        ys = None if self.y_intervals is None else _normalize_intervals(self.y_intervals, "y_intervals")
        object.__setattr__(self, "z_b", z_b)
        object.__setattr__(self, "x_intervals", xs)
        object.__setattr__(self, "y_intervals", ys)

    def opaque(self, x, y):
        """Boolean opacity on the grid spanned by 1-D coordinate arrays ``x`` and ``y``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        in_x = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.x_intervals:
            in_x |= (x >= lo) & (x <= hi)
        if self.y_intervals is None:
            in_y = np.ones(y.shape, dtype=bool)
        else:
            in_y = np.zeros(y.shape, dtype=bool)
            for lo, hi in self.y_intervals:
                in_y |= (y >= lo) & (y <= hi)
        return in_x[:, None] & in_y[None, :]

    @property
    def max_abs_x(self):
        return max(max(abs(lo), abs(hi)) for lo, hi in self.x_intervals)


def _normalize_intervals(intervals, name):
    out = []
    for item in intervals:
        lo, hi = (float(v) for v in item)
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise InvalidArgumentError(f"{name} entries must be finite with lo < hi, got {item!r}")
        out.append((lo, hi))
    if not out:
        raise InvalidArgumentError(f"{name} must not be empty")
    return tuple(out)


@dataclass(frozen=True)
class IntensityMap:
    """|E|^2 sampled on the xz observation plane (y = 0).

    ``intensity[i, j]`` is the value at ``z[i]``, ``x[j]``.
    """

    x: np.ndarray
    z: np.ndarray
    intensity: np.ndarray
    wavelength: float
    meta: dict = dc_field(default_factory=dict)

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def dz(self):
        return float(self.z[1] - self.z[0]) if len(self.z) > 1 else 0.0

    def row(self, z):
        """Intensity row nearest to ``z``."""
        return self.intensity[int(np.argmin(np.abs(self.z - z)))]

    def value_at(self, x, z):
        """Bilinear interpolation of the map at (x, z)."""
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator((self.z, self.x), self.intensity, bounds_error=True)
        return float(interp([[z, x]])[0])

    def to_csv(self, path):
        write_map_csv(self, path)


# ---------------------------------------------------------------------------
# RIS transformation and masks


def reflect(incident, phase):
    """Apply the RIS phase: ``E_r = E_i * exp(j * phase)``.

    ``phase`` may be a :class:`~riswave.phase.PhaseProfile` or a plain array.
    """
    values = getattr(phase, "values", phase)
    values = np.asarray(values, dtype=float)
    check_same_shape(incident.samples, values, "incident field and phase profile")
    return incident.with_samples(incident.samples * np.exp(1j * values))


def apply_mask(field, mask, atol=1e-12):
    """Zero the samples of ``field`` that fall inside the opaque region of ``mask``."""
    if abs(field.z - mask.z_b) > atol * max(1.0, abs(mask.z_b)):
        raise InvalidArgumentError(f"field plane z={field.z} does not match obstacle plane z_b={mask.z_b}")
    blocked = mask.opaque(field.x, field.y)
    samples = field.samples.copy()
    samples[blocked] = 0
    return field.with_samples(samples)


# ---------------------------------------------------------------------------
# Direct Rayleigh-Sommerfeld summation


def rs_kernel(source_xy, targets, dz_targets, wavelength):
    """First Rayleigh-Sommerfeld impulse response between sources and targets.

    Returns an array of shape (n_targets, n_sources) holding
    ``(1/(j lam)) (z/r) exp(j k r)/r (1 + j/(k r))`` which is the exact
    kernel ``z/(2 pi) exp(jkr)/r^2 (1/r - jk)`` rewritten.
    """
    k = 2 * np.pi / wavelength
    dx = targets[:, 0:1] - source_xy[None, :, 0]
    dy = targets[:, 1:2] - source_xy[None, :, 1]
    dz = dz_targets[:, None]
    r = np.sqrt(dx * dx + dy * dy + dz * dz)
    return (dz / r) * np.exp(1j * k * r) / r * (1 + 1j / (k * r)) / (1j * wavelength)


def propagate_direct(source, targets, *, workers=1, amplitude_cutoff=0.0):
    """Field at arbitrary points by direct summation over the source samples.

    Parameters
    ----------
    source : ComplexFieldSlice
    targets : array_like, shape (n, 3)
        Points (x, y, z); every z must exceed ``source.z``.
    workers : int
        Threads used across target blocks. The block partition does not
        depend on ``workers`` so results are identical for any value.
    amplitude_cutoff : float
        Skip source samples whose amplitude is below this fraction of the
        peak amplitude. 0 keeps every nonzero sample.

    Returns
    -------
    ndarray of complex, shape (n,)
    """
    pts = check_points(targets)
    dz = pts[:, 2] - source.z
    if np.any(dz <= 0):
        raise InvalidArgumentError("all targets must lie strictly in front of the source plane")
    amp = np.abs(source.samples)
    peak = amp.max()
    if peak == 0:
        return np.zeros(len(pts), dtype=complex)
    keep = amp > amplitude_cutoff * peak
    ix, iy = np.nonzero(keep)
    src_xy = np.column_stack([source.x[ix], source.y[iy]])
    weights = source.samples[ix, iy] * source.spacing ** 2

    block = max(1, _DIRECT_BLOCK // max(1, len(weights)))
    starts = list(range(0, len(pts), block))

    def run(start):
        sl = slice(start, start + block)
        kern = rs_kernel(src_xy, pts[sl], dz[sl], source.wavelength)
        return np.sum(kern * weights[None, :], axis=1)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# Band-limited angular spectrum


class _Spectrum:
    """Zero-padded spectrum of a source plane, reused for many propagation distances."""

    def __init__(self, field, pad_factor=2, workers=1):
        if pad_factor < 1:
            raise InvalidArgumentError("pad_factor must be >= 1")
        self.field = field
        self.workers = workers
        nx, ny = field.shape
        self.px, self.py = int(round(pad_factor * nx)), int(round(pad_factor * ny))
        self.ox, self.oy = (self.px - nx) // 2, (self.py - ny) // 2
        padded = np.zeros((self.px, self.py), dtype=complex)
        padded[self.ox:self.ox + nx, self.oy:self.oy + ny] = field.samples
        # fftshift keeps frequencies sorted so band limits become contiguous slices.
        self.spec = scipy.fft.fftshift(scipy.fft.fft2(padded, workers=workers))
        d = field.spacing
        self.fx = scipy.fft.fftshift(scipy.fft.fftfreq(self.px, d))
        self.fy = scipy.fft.fftshift(scipy.fft.fftfreq(self.py, d))
        self.x0_pad = field.origin[0] - self.ox * d
        self.y0_pad = field.origin[1] - self.oy * d

    def _band(self, dz):
        """Index slices of the propagating, anti-aliased band for distance ``dz``."""
        lam = self.field.wavelength
        d = self.field.spacing
        dfx = 1.0 / (self.px * d)
        dfy = 1.0 / (self.py * d)
        lim_x = 1.0 / (lam * np.sqrt((2 * dfx * dz) ** 2 + 1))
        lim_y = 1.0 / (lam * np.sqrt((2 * dfy * dz) ** 2 + 1))
        sx = np.searchsorted(self.fx, -lim_x, side="left"), np.searchsorted(self.fx, lim_x, side="right")
        sy = np.searchsorted(self.fy, -lim_y, side="left"), np.searchsorted(self.fy, lim_y, side="right")
        return slice(*sx), slice(*sy)

    def _geometry(self):
        if not hasattr(self, "_kz"):
            k = 2 * np.pi / self.field.wavelength
            kx = 2 * np.pi * self.fx
            ky = 2 * np.pi * self.fy
            kz2 = k * k - kx[:, None] ** 2 - ky[None, :] ** 2
            prop = kz2 > 0
            self._kz = np.sqrt(np.where(prop, kz2, 0.0))
            # A plane wave shifted sideways by at least the padding width wraps
            # around the periodic grid back into the window. Its true landing
            # point is outside the window, so it is dropped. ``reach`` is the
            # shift per unit dz as a fraction of the padding (0 when unpadded).
            d = self.field.spacing
            nx, ny = self.field.shape
            pad_x = (self.px - nx) * d or np.inf
            pad_y = (self.py - ny) * d or np.inf
            kz_safe = np.where(prop, self._kz, 1.0)
            reach = np.maximum(np.abs(kx)[:, None] / pad_x, np.abs(ky)[None, :] / pad_y) / kz_safe
            self._reach = np.where(prop, reach, np.inf)
        return self._kz, self._reach

    def _transfer(self, dz, sx, sy):
        kz, reach = self._geometry()
        return np.where(reach[sx, sy] * dz < 1, np.exp(1j * dz * kz[sx, sy]), 0)

    def plane(self, dz):
        """Full transverse field at ``source.z + dz`` cropped to the source window."""
        sx, sy = self._band(dz)
        out = np.zeros_like(self.spec)
        out[sx, sy] = self.spec[sx, sy] * self._transfer(dz, sx, sy)
        padded = scipy.fft.ifft2(scipy.fft.ifftshift(out), workers=self.workers)
        nx, ny = self.field.shape
        return padded[self.ox:self.ox + nx, self.oy:self.oy + ny]

    def row(self, dz, y=0.0):
        """Field along x at height ``y`` on the plane ``source.z + dz`` (window samples only)."""
        sx, sy = self._band(dz)
        block = self.spec[sx, sy] * self._transfer(dz, sx, sy)
        # Trigonometric interpolation in y, exact for the band-limited field.
        wy = np.exp(2j * np.pi * self.fy[sy] * (y - self.y0_pad)) / self.py
        row_spec = np.zeros(self.px, dtype=complex)
        row_spec[sx] = block @ wy
        padded_row = scipy.fft.ifft(scipy.fft.ifftshift(row_spec), workers=self.workers)
        nx = self.field.shape[0]
        return padded_row[self.ox:self.ox + nx]


def propagate_spectral(field, dz, *, pad_factor=2, workers=1):
    """Propagate a transverse field by ``dz`` with the band-limited angular-spectrum method.

    Evanescent components are dropped and the transfer function is further
    limited to the band that does not alias on the padded window. The
    output is cropped back to the input window, so power leaving the window
    is lost.
    """
    dz = check_scalar(dz, "dz", min_val=0.0)
    if dz == 0:
        return field.with_samples(field.samples.copy())
    samples = _Spectrum(field, pad_factor, workers).plane(dz)
    return field.with_samples(samples, z=field.z + dz)


# ---------------------------------------------------------------------------
# Windowing and marching


def footprint_extent(field, rel_amplitude=1e-3):
    """Largest |x| and |y| among samples above ``rel_amplitude`` of the peak amplitude."""
    amp = np.abs(field.samples)
    peak = amp.max()
    if peak == 0:
        return 0.0, 0.0
    ix, iy = np.nonzero(amp >= rel_amplitude * peak)
    half = field.spacing / 2
    ex = float(np.max(np.abs(field.x[ix]))) + half
    ey = float(np.max(np.abs(field.y[iy]))) + half
    return ex, ey


def required_half_window(field, obstacles=(), excursion=0.0, factor=2.0):
    """Minimum window half-widths (x, y) under the sizing rule.

    The window must span ``factor`` times the largest of the footprint
    extent, the obstacle extent and the expected transverse excursion,
    measured from the axis. With the default factor of 2 the full window is
    four times that extent.
    """
    ex, ey = footprint_extent(field)
    ox = max((m.max_abs_x for m in obstacles), default=0.0)
    oy = max((max(abs(v) for iv in m.y_intervals for v in iv) for m in obstacles if m.y_intervals), default=0.0)
    return factor * max(ex, ox, abs(excursion)), factor * max(ey, oy)


def beam_spread(field, z):
    """Half-widths (x, y) the beam from ``field`` can occupy at distance ``z``.

    Each significant sample is traced along the local phase slope, and a
    diffraction allowance of ``wavelength * z / extent`` is added.
    """
    amp = np.abs(field.samples)
    peak = amp.max()
    if peak == 0 or z <= 0:
        return footprint_extent(field)
    k = 2 * np.pi / field.wavelength
    d = field.spacing
    ex, ey = footprint_extent(field)
    out = []
    for axis, coord, extent in ((0, field.x, ex), (1, field.y, ey)):
        s = field.samples
        ph = np.angle(np.take(s, np.arange(1, s.shape[axis]), axis) * np.conj(np.take(s, np.arange(s.shape[axis] - 1), axis)))
        a = np.minimum(np.take(amp, np.arange(1, s.shape[axis]), axis), np.take(amp, np.arange(s.shape[axis] - 1), axis))
        sin = np.clip(ph / (k * d), -0.99, 0.99)
        mid = (coord[1:] + coord[:-1]) / 2
        mid = mid[:, None] if axis == 0 else mid[None, :]
        land = np.abs(mid + z * sin / np.sqrt(1 - sin ** 2))
        sig = a >= 1e-3 * peak
        ray = float(land[sig].max()) if sig.any() else extent
        out.append(max(ray, extent) + field.wavelength * z / max(extent, d))
    return tuple(out)


def default_half_window(field, obstacles=(), excursion=0.0, z_max=0.0):
    """Window used when none is given: the sizing rule, widened to hold the beam up to ``z_max``."""
    need_x, need_y = required_half_window(field, obstacles, excursion)
    sx, sy = beam_spread(field, z_max)
    return max(need_x, 2 * sx), max(need_y, 2 * sy)


def embed(field, half_x, half_y):
    """Zero-extend ``field`` onto a centred window of the given half-widths.

    The original sample positions are preserved, so the new grid is the old
    one extended by whole samples on each side.
    """
    d = field.spacing
    x, y = field.x, field.y
    add_lx = max(0, int(np.ceil((x[0] + half_x) / d - 1e-9)))
    add_rx = max(0, int(np.ceil((half_x - x[-1]) / d - 1e-9)))
    add_ly = max(0, int(np.ceil((y[0] + half_y) / d - 1e-9)))
    add_ry = max(0, int(np.ceil((half_y - y[-1]) / d - 1e-9)))
    samples = np.pad(field.samples, ((add_lx, add_rx), (add_ly, add_ry)))
    origin = (x[0] - add_lx * d, y[0] - add_ly * d)
    return replace(field, samples=samples, origin=origin)


def check_window(field, obstacles=(), excursion=0.0, factor=2.0):
    """Raise :class:`ConfigurationError` when ``field`` spans less than the sizing rule needs."""
    need_x, need_y = required_half_window(field, obstacles, excursion, factor)
    have_x = min(-field.x[0], field.x[-1]) + field.spacing / 2
    have_y = min(-field.y[0], field.y[-1]) + field.spacing / 2
    if have_x + 1e-12 < need_x or have_y + 1e-12 < need_y:
        raise ConfigurationError(
            f"simulation window half-widths ({have_x:.4g}, {have_y:.4g}) m are below the "
            f"required ({need_x:.4g}, {need_y:.4g}) m; enlarge the window"
        )


def march(reflected, z_grid, obstacles=(), *, window=None, excursion=0.0, pad_factor=2, workers=1):
    """Intensity map on the y = 0 plane for every z in ``z_grid``.

    Parameters
    ----------
    reflected : ComplexFieldSlice
        Field leaving the RIS (z = 0).
    z_grid : array_like
        Strictly increasing positive observation distances.
    obstacles : sequence of ObstacleMask
        Each mask is applied at its ``z_b``; rows with ``z >= z_b`` see the
        blocked field.
    window : tuple of float, optional
        Half-widths (x, y) of the simulation window. Defaults to
        :func:`default_half_window` for the last z; values below the sizing
        rule raise ConfigurationError.
    excursion : float
        Expected transverse excursion of the beam (e.g. a caustic), folded
        into the sizing rule.

    Returns
    -------
    IntensityMap
    """
    z_grid = np.asarray(z_grid, dtype=float)
    if z_grid.ndim != 1 or len(z_grid) < 1:
        raise InvalidArgumentError("z_grid must be a non-empty 1-D sequence")
    if np.any(z_grid <= reflected.z) or np.any(np.diff(z_grid) <= 0):
        raise InvalidArgumentError("z_grid must be strictly increasing and in front of the RIS")
    obstacles = sorted(obstacles, key=lambda m: m.z_b)
    for m in obstacles:
        if not (z_grid[0] <= m.z_b <= z_grid[-1]):
            raise ConfigurationError(f"obstacle at z_b={m.z_b} is not bracketed by z_grid [{z_grid[0]}, {z_grid[-1]}]")

    if window is None:
        window = default_half_window(reflected, obstacles, excursion, z_grid[-1] - reflected.z)
    field = embed(reflected, *window)
    check_window(field, obstacles, excursion)

    rows = np.empty((len(z_grid), field.shape[0]))
    source = field
    spectrum = _Spectrum(source, pad_factor, workers)
    pending = list(obstacles)
    for i, z in enumerate(z_grid):
        while pending and pending[0].z_b <= z + _Z_TOL * max(1.0, abs(z)):
            mask = pending.pop(0)
            dz_b = mask.z_b - source.z
            plane = spectrum.plane(dz_b) if dz_b > 0 else source.samples
            source = apply_mask(source.with_samples(plane, z=mask.z_b), mask)
            spectrum = _Spectrum(source, pad_factor, workers)
        dz = z - source.z
        row = spectrum.row(dz) if dz > _Z_TOL * max(1.0, abs(z)) else _row_at_y0(source)
        rows[i] = np.abs(row) ** 2
    meta = {"window": tuple(float(w) for w in window), "pad_factor": pad_factor}
    return IntensityMap(x=field.x.copy(), z=z_grid.copy(), intensity=rows, wavelength=field.wavelength, meta=meta)


def _row_at_y0(field):
    y = field.y
    j = int(np.argmin(np.abs(y)))
    if abs(y[j]) < 1e-12:
        return field.samples[:, j]
    # y = 0 falls between samples (even count); band-limited interpolation.
    spec = scipy.fft.fft(field.samples, axis=1)
    fy = scipy.fft.fftfreq(field.shape[1], field.spacing)
    w = np.exp(2j * np.pi * fy * (0.0 - y[0])) / field.shape[1]
    return spec @ w


def field_through_obstacles(reflected, points, obstacles=(), *, window=None, pad_factor=2, workers=1):
    """Field at ``points`` including absorbing obstacles.

    The reflected field is carried spectrally through every obstacle lying in
    front of the points, then summed directly from the last masked plane.
    With no obstacles this is :func:`propagate_direct`.
    """
    pts = check_points(points)
    zmin = pts[:, 2].min()
    active = sorted((m for m in obstacles if m.z_b < zmin), key=lambda m: m.z_b)
    if not active:
        return propagate_direct(reflected, pts, workers=workers)
    excursion = float(np.max(np.abs(pts[:, 0])))
    if window is None:
        window = default_half_window(reflected, active, excursion, active[-1].z_b)
    source = embed(reflected, *window)
    check_window(source, active, excursion)
    for mask in active:
        source = propagate_spectral(source, mask.z_b - source.z, pad_factor=pad_factor, workers=workers)
        source = apply_mask(source, mask)
    return propagate_direct(source, pts, workers=workers, amplitude_cutoff=1e-9)


# ---------------------------------------------------------------------------
# CSV exchange


def write_map_csv(imap, path):
    """Write an intensity map with the 3-line header used by the plotting scripts.

    Header lines: axis extents, sample spacing, wavelength. Then one row per
    z: ``z`` followed by the intensities at every x.
    """
    with open(path, "w", newline="") as fh:
        x0, x1, z0, z1 = (float(v) for v in (imap.x[0], imap.x[-1], imap.z[0], imap.z[-1]))
        fh.write(f"# extents x_min={x0!r} x_max={x1!r} z_min={z0!r} z_max={z1!r}\n")
        fh.write(f"# spacing dx={imap.dx!r} dz={imap.dz!r} nx={len(imap.x)} nz={len(imap.z)}\n")
        fh.write(f"# wavelength={float(imap.wavelength)!r}\n")
        for z, row in zip(imap.z, imap.intensity):
            fh.write(",".join([repr(float(z))] + [repr(float(v)) for v in row]) + "\n")


def read_map_csv(path):
    """Inverse of :func:`write_map_csv`."""
    header = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        header[key] = float(val)
                continue
            if line.strip():
                rows.append([float(v) for v in line.split(",")])
    data = np.array(rows)
    nx = int(header["nx"])
    x = header["x_min"] + header["dx"] * np.arange(nx)
    return IntensityMap(x=x, z=data[:, 0], intensity=data[:, 1:], wavelength=header["wavelength"])
