"""Hot loops of the flux-form transport.

Two interchangeable implementations of the face-flux divergence exist: a
numba ``@njit`` kernel and a pure numpy one.  ``STQG_NUMBA=0`` in the
environment forces the numpy path; otherwise numba is used when importable.
Both evaluate the same expressions in the same order.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_wants_numba() -> bool:
    return os.environ.get("STQG_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


USE_NUMBA = numba is not None and _env_wants_numba()
BACKEND = "numba" if USE_NUMBA else "numpy"


def _minmod_np(a, b):
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _axis_flux_np(c, vel, degree, penalty, axis):
    c_next = np.roll(c, -1, axis=axis)
    if degree == 0:
        left = c
        right = c_next
    else:
        slope = _minmod_np(c - np.roll(c, 1, axis=axis), c_next - c)
        left = c + 0.5 * slope
        right = c_next - 0.5 * np.roll(slope, -1, axis=axis)
    return vel * (0.5 * (left + right)) - penalty * (0.5 * np.abs(vel)) * (right - left)


def flux_tendency_numpy(c, face_x, face_y, dx, dy, degree, penalty):
    fx = _axis_flux_np(c, face_x, degree, penalty, 0)
    fy = _axis_flux_np(c, face_y, degree, penalty, 1)
    return -((fx - np.roll(fx, 1, axis=0)) / dx + (fy - np.roll(fy, 1, axis=1)) / dy)


if numba is not None:

    @numba.njit(cache=True)
    def _minmod_nb(a, b):
        if a * b > 0.0:
            return np.sign(a) * min(abs(a), abs(b))
        return 0.0

    @numba.njit(cache=True)
    def _flux_tendency_nb(c, face_x, face_y, dx, dy, degree, penalty):
        nx, ny = c.shape
        sx = np.zeros((nx, ny))
        sy = np.zeros((nx, ny))
        if degree == 1:
            for i in range(nx):
                ip = (i + 1) % nx
                im = (i - 1) % nx
                for j in range(ny):
                    jp = (j + 1) % ny
                    jm = (j - 1) % ny
                    sx[i, j] = _minmod_nb(c[i, j] - c[im, j], c[ip, j] - c[i, j])
                    sy[i, j] = _minmod_nb(c[i, j] - c[i, jm], c[i, jp] - c[i, j])
        fx = np.empty((nx, ny))
        fy = np.empty((nx, ny))
        for i in range(nx):
            ip = (i + 1) % nx
            for j in range(ny):
                jp = (j + 1) % ny
                left = c[i, j] + 0.5 * sx[i, j]
                right = c[ip, j] - 0.5 * sx[ip, j]
                v = face_x[i, j]
                fx[i, j] = v * (0.5 * (left + right)) - penalty * (0.5 * abs(v)) * (right - left)
                left = c[i, j] + 0.5 * sy[i, j]
                right = c[i, jp] - 0.5 * sy[i, jp]
                v = face_y[i, j]
                fy[i, j] = v * (0.5 * (left + right)) - penalty * (0.5 * abs(v)) * (right - left)
        out = np.empty((nx, ny))
        for i in range(nx):
            im = (i - 1) % nx
            for j in range(ny):
                jm = (j - 1) % ny
                out[i, j] = -((fx[i, j] - fx[im, j]) / dx + (fy[i, j] - fy[i, jm]) / dy)
        return out

    def flux_tendency_numba(c, face_x, face_y, dx, dy, degree, penalty):
        return _flux_tendency_nb(
            np.ascontiguousarray(c, dtype=np.float64),
            np.ascontiguousarray(face_x, dtype=np.float64),
            np.ascontiguousarray(face_y, dtype=np.float64),
            float(dx),
            float(dy),
            int(degree),
            float(penalty),
        )

else:  # pragma: no cover
    flux_tendency_numba = None


def flux_tendency(c, face_x, face_y, dx, dy, degree=0, penalty=1.0):
    """``-div(F)`` for the Lax-Friedrichs face flux
    ``F = v {{c}} - penalty |v|/2 [[c]]`` with optional minmod reconstruction.

    ``penalty=1`` is the local Lax-Friedrichs (upwind) flux, ``penalty=0`` the
    centred flux.
    """
    if USE_NUMBA:
        return flux_tendency_numba(c, face_x, face_y, dx, dy, degree, penalty)
    return flux_tendency_numpy(c, face_x, face_y, dx, dy, degree, penalty)
