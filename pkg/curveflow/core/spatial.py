"""Periodic differentiation, quadrature and resampling on uniform grids.

All operators act on samples at theta_j = 2*pi*j/n over one period.
Spectral operators go through ``scipy.fft``; for lengths that are not fast
transform lengths a direct DFT is used so that results stay well defined
for any n.
"""

from __future__ import annotations

import math
from typing import Tuple

import numpy as np
from scipy import fft as sp_fft

from .errors import InvalidCurveError
from .models import SPATIAL_SCHEMES

MIN_DIFF_NODES = 16


def check_scheme(scheme: str) -> str:
    if scheme not in SPATIAL_SCHEMES:
        raise ValueError(f"unknown spatial scheme {scheme!r}; expected one of {SPATIAL_SCHEMES}")
    return scheme


def is_fast_length(n: int) -> bool:
    return sp_fft.next_fast_len(n, real=True) == n


def _direct_rfft(values: np.ndarray) -> np.ndarray:
    n = values.size
    k = np.arange(n // 2 + 1)
    phase = np.exp(-2j * math.pi * np.outer(k, np.arange(n)) / n)
    return phase @ values


def _direct_irfft(coeffs: np.ndarray, n: int) -> np.ndarray:
    j = np.arange(n)
    out = np.full(n, coeffs[0].real)
    top = n // 2 if n % 2 == 0 else n // 2 + 1
    for k in range(1, top):
        out = out + 2.0 * np.real(coeffs[k] * np.exp(2j * math.pi * k * j / n))
    if n % 2 == 0:
        out = out + coeffs[n // 2].real * np.cos(math.pi * j)
    return out / n


def _rfft(values: np.ndarray) -> np.ndarray:
    if is_fast_length(values.size):
        return sp_fft.rfft(values)
    return _direct_rfft(values)


def _irfft(coeffs: np.ndarray, n: int) -> np.ndarray:
    if is_fast_length(n):
        return sp_fft.irfft(coeffs, n)
    return _direct_irfft(coeffs, n)


def _as_samples(values: np.ndarray, min_nodes: int = MIN_DIFF_NODES) -> np.ndarray:
    samples = np.asarray(values, dtype=float)
    if samples.ndim != 1:
        raise ValueError("periodic samples must be one-dimensional")
    if samples.size < min_nodes:
        raise ValueError(f"periodic grid needs at least {min_nodes} nodes, got {samples.size}")
    if not np.all(np.isfinite(samples)):
        raise InvalidCurveError("periodic samples must be finite")
    return samples


def _spectral_multipliers(n: int, order: int) -> np.ndarray:
    k = np.arange(n // 2 + 1, dtype=float)
    multipliers = (1j * k) ** order
    # odd derivatives of the Nyquist cosine are not representable on the grid
    if order % 2 == 1 and n % 2 == 0:
        multipliers[-1] = 0.0
    return multipliers


def _fd(samples: np.ndarray, order: int, scheme: str) -> np.ndarray:
    h = 2.0 * math.pi / samples.size
    up1, down1 = np.roll(samples, -1), np.roll(samples, 1)
    if scheme == "fd2":
        if order == 1:
            return (up1 - down1) / (2.0 * h)
        return (up1 - 2.0 * samples + down1) / (h * h)
    up2, down2 = np.roll(samples, -2), np.roll(samples, 2)
    if order == 1:
        return (-up2 + 8.0 * up1 - 8.0 * down1 + down2) / (12.0 * h)
    return (-up2 + 16.0 * up1 - 30.0 * samples + 16.0 * down1 - down2) / (12.0 * h * h)


def diff_periodic(values: np.ndarray, order: int = 1, scheme: str = "spectral") -> np.ndarray:
    """Derivative of periodic samples with respect to theta."""

    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order!r}")
    check_scheme(scheme)
    samples = _as_samples(values)
    if scheme == "spectral":
        coeffs = _rfft(samples)
        return _irfft(coeffs * _spectral_multipliers(samples.size, order), samples.size)
    return _fd(samples, order, scheme)


def derivatives(values: np.ndarray, scheme: str = "spectral") -> Tuple[np.ndarray, np.ndarray]:
    """First and second theta-derivatives, sharing one transform for spectral."""

    check_scheme(scheme)
    samples = _as_samples(values)
    if scheme != "spectral":
        return _fd(samples, 1, scheme), _fd(samples, 2, scheme)
    n = samples.size
    coeffs = _rfft(samples)
    first = _irfft(coeffs * _spectral_multipliers(n, 1), n)
    second = _irfft(coeffs * _spectral_multipliers(n, 2), n)
    return first, second


def quadrature_periodic(values: np.ndarray) -> float:
    """Trapezoid rule over [0, 2*pi]; spectrally accurate for smooth data."""

    samples = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(samples)):
        raise InvalidCurveError("quadrature samples must be finite")
    return 2.0 * math.pi * float(np.sum(samples)) / samples.size


def resample(values: np.ndarray, new_n: int) -> np.ndarray:
    """Trigonometric interpolation of even-length samples onto ``new_n`` nodes."""

    samples = _as_samples(values)
    n = samples.size
    if n % 2 or new_n % 2 or new_n < MIN_DIFF_NODES:
        raise ValueError(f"resample needs even grid sizes >= {MIN_DIFF_NODES}, got {n} -> {new_n}")
    if new_n == n:
        return samples.copy()

    coeffs = _rfft(samples)
    scale = new_n / n
    out = np.zeros(new_n // 2 + 1, dtype=complex)
    if new_n > n:
        out[: n // 2] = coeffs[: n // 2] * scale
        # the old Nyquist cosine becomes an interior mode split over +-k
        out[n // 2] = 0.5 * coeffs[n // 2].real * scale
    else:
        out[: new_n // 2] = coeffs[: new_n // 2] * scale
        out[new_n // 2] = 2.0 * coeffs[new_n // 2].real * scale
    return _irfft(out, new_n)


__all__ = [
    "check_scheme",
    "derivatives",
    "diff_periodic",
    "is_fast_length",
    "quadrature_periodic",
    "resample",
]
