"""Small input validation helpers in the spirit of ``sklearn.utils.validation``."""

from numbers import Integral, Real

import numpy as np

from mixlab.errors import PreconditionError


def check_int(value, name, *, min_value=None, max_value=None):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, (Integral, np.integer)):
        raise PreconditionError(f"{name} must be an integer, got {value!r}", field=name)
    value = int(value)
    if min_value is not None and value < min_value:
        raise PreconditionError(f"{name} must be >= {min_value}, got {value}", field=name)
    if max_value is not None and value > max_value:
        raise PreconditionError(f"{name} must be <= {max_value}, got {value}", field=name)
    return value


def check_real(value, name, *, low=None, high=None, low_open=False, high_open=False):
    if isinstance(value, bool) or not isinstance(value, (Real, np.floating, np.integer)):
        raise PreconditionError(f"{name} must be a real number, got {value!r}", field=name)
    value = float(value)
    if not np.isfinite(value):
        raise PreconditionError(f"{name} must be finite, got {value}", field=name)
    if low is not None and (value < low or (low_open and value == low)):
        bracket = "(" if low_open else "["
        raise PreconditionError(f"{name}={value} outside {bracket}{low}, ...", field=name)
    if high is not None and (value > high or (high_open and value == high)):
        bracket = ")" if high_open else "]"
        raise PreconditionError(f"{name}={value} outside ..., {high}{bracket}", field=name)
    return value


def check_positive(value, name):
    return check_real(value, name, low=0.0, low_open=True)


def check_vertex_set(subset, size, name="S"):
    """Return ``subset`` as a boolean membership mask of length ``size``."""
    arr = np.asarray(subset)
    if arr.dtype == bool:
        if arr.shape != (size,):
            raise PreconditionError(f"{name} mask must have length {size}", field=name)
        return arr.copy()
    ids = np.unique(arr.astype(np.int64).ravel())
    if ids.size and (ids[0] < 0 or ids[-1] >= size):
        raise PreconditionError(f"{name} contains vertex ids outside [0, {size})", field=name)
    mask = np.zeros(size, dtype=bool)
    mask[ids] = True
    return mask


def check_sorted_times(times, name, *, t_max=None):
    arr = np.asarray(times, dtype=np.int64).ravel()
    if arr.size == 0:
        raise PreconditionError(f"{name} must be non-empty", field=name)
    if np.any(arr < 0) or np.any(np.diff(arr) <= 0):
        raise PreconditionError(f"{name} must be strictly increasing non-negative integers", field=name)
    if t_max is not None and arr[-1] > t_max:
        raise PreconditionError(f"{name} exceeds horizon {t_max}", field=name)
    return arr
