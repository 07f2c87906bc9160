"""Smooth truncation ``theta_R`` of the nonlinear drift."""

from __future__ import annotations

import math

import numpy as np

from .grid import TorusSpec, fft, ifft

MONITOR_VARIANTS = ("q", "grad_q")


def cutoff_profile(z: float, R: float) -> float:
    """1 on ``[0, R]``, 0 on ``[R+1, inf)``, quintic smoothstep in between."""
    if not R > 0:
        raise ValueError(f"truncation radius must be positive, got {R!r}")
    if math.isinf(R) or z <= R:
        return 1.0
    s = z - R
    if s >= 1.0:
        return 0.0
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def monitor_terms(
    spec: TorusSpec, b: np.ndarray, psi: np.ndarray, q: np.ndarray, variant: str = "q"
) -> tuple[float, float, float]:
    """``(sup|grad b|, sup|grad u|, sup|q|)`` with spectral derivatives.

    ``|grad u|`` is the pointwise Frobenius norm of the velocity gradient.
    With ``variant="grad_q"`` the third term is ``sup|grad q|`` instead.
    """
    if variant not in MONITOR_VARIANTS:
        raise ValueError(f"unknown monitor variant {variant!r}")
    ikx, iky = spec.ik
    bh = fft(spec, b)
    grad_b = np.sqrt(ifft(spec, ikx * bh) ** 2 + ifft(spec, iky * bh) ** 2)
    ph = fft(spec, psi)
    kx, ky = spec.wavenumbers
    pxx = ifft(spec, -kx * kx * ph)
    pyy = ifft(spec, -ky * ky * ph)
    pxy = ifft(spec, ikx * iky * ph)
    grad_u = np.sqrt(pxx**2 + pyy**2 + 2.0 * pxy**2)
    if variant == "q":
        third = float(np.abs(q).max())
    else:
        qh = fft(spec, q)
        third = float(np.sqrt(ifft(spec, ikx * qh) ** 2 + ifft(spec, iky * qh) ** 2).max())
    return float(grad_b.max()), float(grad_u.max()), third
