"""RIS phase profiles.

Every generator returns an unwrapped :class:`PhaseProfile` in radians sampled
on the element grid of a :class:`~riswave.scene.RisGeometry`.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_angle, check_int, check_positive, check_same_shape, check_scalar
from .exceptions import InvalidArgumentError


@dataclass(frozen=True)
class PhaseProfile:
    """Per-element phase map of shape (nx, ny) plus a description of how it was made."""

    values: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    bits: int = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise InvalidArgumentError(f"phase values must be 2-D, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def shape(self):
        return self.values.shape

    def descriptor(self):
        """Short human-readable description used in scan logs."""
        parts = [self.kind] + [f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.params.items()]
        if self.bits is not None:
            parts.append(f"bits={self.bits}")
        return " ".join(parts)

    def to_csv(self, path):
        """Row-major CSV of the unwrapped phases, one row per x index."""
        np.savetxt(path, self.values, delimiter=",", fmt="%.17g")


def _profile(values, kind, **params):
    return PhaseProfile(values=values, kind=kind, params=params)


def steering_phase(ris, medium, theta_i, theta_r):
    """Linear gradient ``k (sin(theta_i) - sin(theta_r)) x`` steering the beam to ``theta_r``."""
    theta_i = check_angle(theta_i, "theta_i")
    theta_r = check_angle(theta_r, "theta_r")
    X, _ = ris.mesh()
    values = medium.wavenumber * (math.sin(theta_i) - math.sin(theta_r)) * X
    return _profile(values, "steering", theta_i=theta_i, theta_r=theta_r)


def focusing_phase(ris, medium, f0):
    """Parabolic lens profile ``-k r^2 / (2 f0)``."""
    f0 = check_positive(f0, "f0")
    X, Y = ris.mesh()
    # same evaluation order as self_healing_phase so gamma=2, C=1/(2 f0) matches bitwise
    values = -medium.wavenumber * (1 / (2 * f0)) * (X ** 2 + Y ** 2)
    return _profile(values, "focusing", f0=f0)


def self_healing_phase(ris, medium, C, gamma=1.0):
    """Radial power law ``-k C r^gamma``; ``gamma = 1`` is an axicon."""
    C = check_positive(C, "C")
    gamma = check_positive(gamma, "gamma")
    X, Y = ris.mesh()
    r2 = X ** 2 + Y ** 2
    values = -medium.wavenumber * C * r2 ** (gamma / 2)
    return _profile(values, "self_healing", C=C, gamma=gamma)


def self_accelerating_phase(ris, medium, C, gamma=1.5):
    """Transverse power law ``-k C u^gamma`` with ``u = x - x_min``.

    The power law starts at the ``x_min`` edge of the aperture so the phase is
    defined for non-integer ``gamma``; the profile is independent of y.
    """
    C = check_positive(C, "C")
    gamma = check_scalar(gamma, "gamma", min_val=1.0, max_val=2.0, include_min=False, include_max=False)
    X, _ = ris.mesh()
    u = X - ris.x[0]
    values = -medium.wavenumber * C * u ** gamma
    return _profile(values, "self_accelerating", C=C, gamma=gamma)


def focus_at_point(ris, medium, target):
    """Exact spherical focusing on ``target = (x, z)`` in the y = 0 plane.

    ``phase(p) = -k (|p - t| - |t|)``. For an on-axis target at distance f0
    this reduces to :func:`focusing_phase` up to terms of order r^4 / f0^3.
    """
    tx, tz = (float(v) for v in target)
    if tz <= 0:
        raise InvalidArgumentError(f"target z must be > 0, got {tz}")
    X, Y = ris.mesh()
    dist = np.sqrt((X - tx) ** 2 + Y ** 2 + tz ** 2)
    values = -medium.wavenumber * (dist - math.hypot(tx, tz))
    return _profile(values, "focus_point", x=tx, z=tz)


def range_sheet_phase(ris, medium, theta, focal_range):
    """Steer towards ``theta`` in the xz plane while focusing only along y at ``focal_range``.

    The y-part is the exact cylindrical term ``-k (sqrt(R^2 + y^2) - R)``,
    which brings the beam to a focus on the arc of radius ``R`` in the y = 0
    plane whatever the direction. Used for range probes whose response must
    not depend on the lateral position of the UE inside its angular sector.
    """
    theta = check_angle(theta, "theta")
    R = check_positive(focal_range, "focal_range")
    X, Y = ris.mesh()
    values = -medium.wavenumber * math.sin(theta) * X - medium.wavenumber * (np.sqrt(R * R + Y ** 2) - R)
    return _profile(values, "range_sheet", theta=theta, focal_range=R)


def zero_phase(ris):
    return _profile(np.zeros(ris.shape), "zero")


def compose(p1, p2):
    """Elementwise sum of two profiles."""
    check_same_shape(p1.values, p2.values, "phase profiles")
    return PhaseProfile(
        values=p1.values + p2.values,
        kind=f"{p1.kind}+{p2.kind}",
        params={**{f"a.{k}": v for k, v in p1.params.items()}, **{f"b.{k}": v for k, v in p2.params.items()}},
    )


def wrap_values(values):
    """Map phases into (-pi, pi]."""
    w = np.mod(values + np.pi, 2 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def wrap(profile):
    return replace(profile, values=wrap_values(profile.values))


def quantize(profile, bits):
    """Round to the nearest of the ``2**bits`` levels ``2 pi n / 2**bits - pi``.

    The result is expressed on those levels, so it lies in [-pi, pi).
    """
    bits = check_int(bits, "bits", min_val=1)
    step = 2 * np.pi / 2 ** bits
    wrapped = wrap_values(profile.values)
    n = np.rint((wrapped + np.pi) / step).astype(np.int64) % 2 ** bits
    return replace(profile, values=n * step - np.pi, bits=bits)
