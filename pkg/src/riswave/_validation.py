"""Small input-validation helpers shared by the public functions."""

import numbers

import numpy as np

from .exceptions import InvalidArgumentError


def check_scalar(value, name, *, min_val=None, max_val=None, include_min=True, include_max=True):
    """Return ``value`` as a float after checking it is finite and inside the bounds."""
    if isinstance(value, bool) or not isinstance(value, (numbers.Real, np.floating, np.integer)):
        raise InvalidArgumentError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value}")
    if min_val is not None:
        if value < min_val or (not include_min and value == min_val):
            op = ">=" if include_min else ">"
            raise InvalidArgumentError(f"{name} must be {op} {min_val}, got {value}")
    if max_val is not None:
        if value > max_val or (not include_max and value == max_val):
            op = "<=" if include_max else "<"
            raise InvalidArgumentError(f"{name} must be {op} {max_val}, got {value}")
    return value


def check_positive(value, name):
    return check_scalar(value, name, min_val=0.0, include_min=False)


def check_int(value, name, *, min_val=None):
    if isinstance(value, bool) or not isinstance(value, (numbers.Integral, np.integer)):
        raise InvalidArgumentError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if min_val is not None and value < min_val:
        raise InvalidArgumentError(f"{name} must be >= {min_val}, got {value}")
    return value


def check_angle(value, name, *, limit=np.pi / 2):
    """Check an angle in radians with ``|value| < limit``."""
    value = check_scalar(value, name)
    if abs(value) >= limit:
        raise InvalidArgumentError(f"|{name}| must be < {limit:.6g} rad, got {value}")
    return value


def check_points(points, name="targets"):
    """Coerce to a float array of shape (n, 3)."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.shape[0] == 3:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidArgumentError(f"{name} must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    return arr


def check_same_shape(a, b, what="arrays"):
    if np.shape(a) != np.shape(b):
        raise InvalidArgumentError(f"shape mismatch between {what}: {np.shape(a)} vs {np.shape(b)}")
