"""Wavelength, RIS geometry and incident-beam conventions.

Geometry: the RIS lies in the z = 0 plane, centred on the origin, and
radiates into z > 0. Angles in the xz steering plane follow the usual
reflection convention. The incidence angle is measured on the +x side of the
normal and the reflection angle on the -x side, so a beam reflected at angle
``theta`` travels along ``(-sin(theta), 0, cos(theta))`` and specular
reflection means ``theta_r == theta_i``.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_angle, check_int, check_positive, check_scalar
from .exceptions import InvalidArgumentError
from .field import ComplexFieldSlice

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class Medium:
    """Free-space propagation constants at one frequency."""

    frequency: float
    wavelength: float
    wavenumber: float


def medium_from_frequency(frequency):
    """Medium for a carrier ``frequency`` in Hz (``lambda = c / f``)."""
    frequency = check_scalar(frequency, "frequency", min_val=0.0, include_min=False)
    lam = SPEED_OF_LIGHT / frequency
    return Medium(frequency=frequency, wavelength=lam, wavenumber=2 * math.pi / lam)


def medium_from_wavelength(wavelength):
    """Medium for a given wavelength in metres. Useful when a rounded wavelength is wanted."""
    lam = check_positive(wavelength, "wavelength")
    return Medium(frequency=SPEED_OF_LIGHT / lam, wavelength=lam, wavenumber=2 * math.pi / lam)


@dataclass(frozen=True)
class RisGeometry:
    """Rectangular grid of ``nx`` by ``ny`` elements with pitch ``pitch``.

    Element ``m`` along x sits at ``(m - (nx - 1) / 2) * pitch``; the grid is
    centred on the origin.
    """

    nx: int
    ny: int
    pitch: float

    def __post_init__(self):
        object.__setattr__(self, "nx", check_int(self.nx, "nx", min_val=1))
        object.__setattr__(self, "ny", check_int(self.ny, "ny", min_val=1))
        object.__setattr__(self, "pitch", check_positive(self.pitch, "pitch"))

    @classmethod
    def half_wave(cls, nx, ny, medium):
        """Grid with the default lambda/2 pitch."""
        return cls(nx, ny, medium.wavelength / 2)

    @property
    def x(self):
        return (np.arange(self.nx) - (self.nx - 1) / 2) * self.pitch

    @property
    def y(self):
        return (np.arange(self.ny) - (self.ny - 1) / 2) * self.pitch

    @property
    def aperture(self):
        """Aperture size ``D = max(nx, ny) * pitch``."""
        return max(self.nx, self.ny) * self.pitch

    @property
    def shape(self):
        return (self.nx, self.ny)

    def mesh(self):
        """Element coordinates as two (nx, ny) arrays."""
        return np.meshgrid(self.x, self.y, indexing="ij")


@dataclass(frozen=True)
class IncidentBeamSpec:
    """Gaussian beam footprint on the RIS.

    Parameters
    ----------
    footprint_radius : float
        1/e amplitude radius ``w`` along x (``inf`` for a plane wave).
    incidence_angle : float
        ``theta_i`` in radians.
    amplitude : float
        Peak amplitude ``A``.
    footprint_radius_y : float, optional
        1/e amplitude radius along y; defaults to ``footprint_radius``.
    """

    footprint_radius: float
    incidence_angle: float = 0.0
    amplitude: float = 1.0
    footprint_radius_y: float = None

    def __post_init__(self):
        w = _radius(self.footprint_radius, "footprint_radius")
        wy = w if self.footprint_radius_y is None else _radius(self.footprint_radius_y, "footprint_radius_y")
        object.__setattr__(self, "footprint_radius", w)
        object.__setattr__(self, "footprint_radius_y", wy)
        object.__setattr__(self, "incidence_angle", check_angle(self.incidence_angle, "incidence_angle"))
        object.__setattr__(self, "amplitude", check_scalar(self.amplitude, "amplitude", min_val=0.0))

    @classmethod
    def with_power(cls, footprint_radius, power, incidence_angle=0.0, footprint_radius_y=None):
        """Beam whose (untruncated) Gaussian carries total power ``power``.

        ``P = A^2 * pi * w_x * w_y / 2``.
        """
        wy = footprint_radius if footprint_radius_y is None else footprint_radius_y
        amp = math.sqrt(2 * power / (math.pi * footprint_radius * wy))
        return cls(footprint_radius, incidence_angle, amp, footprint_radius_y)

    @property
    def power(self):
        """Total power of the untruncated Gaussian, ``inf`` for a plane wave."""
        return self.amplitude ** 2 * math.pi * self.footprint_radius * self.footprint_radius_y / 2

    def is_partial(self, ris):
        """Partial illumination iff ``w < D/2``; the boundary counts as full."""
        return self.footprint_radius < ris.aperture / 2


def _radius(value, name):
    # inf means a uniform (plane-wave) footprint
    if isinstance(value, (int, float)) and math.isinf(value) and value > 0:
        return math.inf
    return check_positive(value, name)


def incident_field_on_ris(ris, beam, medium):
    """Sample the incident beam on every RIS element.

    ``E_i(x, y) = A exp(-(x^2/w_x^2 + y^2/w_y^2)) exp(-j k sin(theta_i) x)``.
    The ramp sign follows from the incidence angle being measured on the +x
    side: the wave travels towards -x.

    Returns
    -------
    ComplexFieldSlice on z = 0 with ``spacing = ris.pitch``.
    """
    X, Y = ris.mesh()
    env = np.ones(X.shape)
    if math.isfinite(beam.footprint_radius):
        env = env * np.exp(-(X / beam.footprint_radius) ** 2)
    if math.isfinite(beam.footprint_radius_y):
        env = env * np.exp(-(Y / beam.footprint_radius_y) ** 2)
    ramp = np.exp(-1j * medium.wavenumber * math.sin(beam.incidence_angle) * X)
    samples = beam.amplitude * env * ramp
    if samples.shape[0] < 2 or samples.shape[1] < 2:
        raise InvalidArgumentError("the RIS needs at least 2 elements per axis to form a field slice")
    return ComplexFieldSlice(
        samples=samples,
        spacing=ris.pitch,
        origin=(ris.x[0], ris.y[0]),
        z=0.0,
        wavelength=medium.wavelength,
    )


def direction_angle(x, z):
    """Reflection-convention angle of the point (x, z) seen from the RIS centre."""
    return math.atan2(-x, z)


def point_at(angle, distance):
    """Cartesian (x, z) of the point at ``distance`` along reflection angle ``angle``."""
    return -distance * math.sin(angle), distance * math.cos(angle)
