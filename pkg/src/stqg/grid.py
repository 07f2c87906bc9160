"""Uniform periodic grid on the 2-torus with exact spectral transforms.

Fields are sampled at cell centres ``x_i = (i + 1/2) dx``.  Array axis 0 is
``x`` and axis 1 is ``y``.  Fourier coefficients are normalised so that a
constant field ``c`` has coefficient ``c`` at ``k = 0``, hence Parseval reads
``||v||_2^2 = |T^2| sum_k |v_k|^2``.

Spectral arrays use the ``rfft2`` half-plane layout: shape ``(nx, ny//2 + 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class TorusSpec:
    """Domain periods and resolution of the periodic grid."""

    nx: int
    ny: int
    length_x: float = TWO_PI
    length_y: float = TWO_PI

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 4, got {n!r}")
        for name in ("length_x", "length_y"):
            length = getattr(self, name)
            if not np.isfinite(length) or length <= 0:
                raise ValueError(f"{name} must be positive and finite, got {length!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def dx(self) -> float:
        return self.length_x / self.nx

    @property
    def dy(self) -> float:
        return self.length_y / self.ny

    @property
    def area(self) -> float:
        return self.length_x * self.length_y

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-centre coordinates as two ``(nx, ny)`` arrays."""
        x = (np.arange(self.nx) + 0.5) * self.dx
        y = (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    @cached_property
    def corner_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of the lower-left corner of every cell."""
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical wavenumbers ``(kx, ky)`` broadcast to the spectral shape."""
        mx = np.fft.fftfreq(self.nx, d=1.0 / self.nx)
        my = np.fft.rfftfreq(self.ny, d=1.0 / self.ny)
        kx = (TWO_PI / self.length_x) * mx
        ky = (TWO_PI / self.length_y) * my
        return np.meshgrid(kx, ky, indexing="ij")

    @cached_property
    def mode_index(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer mode numbers ``(m1, m2)`` in the spectral layout."""
        mx = np.fft.fftfreq(self.nx, d=1.0 / self.nx).astype(int)
        my = np.fft.rfftfreq(self.ny, d=1.0 / self.ny).astype(int)
        return np.meshgrid(mx, my, indexing="ij")

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky = self.wavenumbers
        return kx**2 + ky**2

    @cached_property
    def ik(self) -> tuple[np.ndarray, np.ndarray]:
        """First-derivative multipliers with the Nyquist modes zeroed."""
        kx, ky = self.wavenumbers
        m1, m2 = self.mode_index
        kx = np.where(np.abs(m1) == self.nx // 2, 0.0, kx)
        ky = np.where(m2 == self.ny // 2, 0.0, ky)
        return 1j * kx, 1j * ky

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keeps modes with ``|m_i| < n_i / 3``."""
        m1, m2 = self.mode_index
        return (np.abs(m1) < self.nx / 3.0) & (np.abs(m2) < self.ny / 3.0)

    @cached_property
    def half_cell_shift(self) -> np.ndarray:
        """Multiplier moving a band-limited field from centres to lower-left corners."""
        ikx, iky = self.ik
        return np.exp(-0.5 * (ikx * self.dx + iky * self.dy))

    @cached_property
    def hermitian_weight(self) -> np.ndarray:
        """Multiplicity of each stored half-plane coefficient in the full sum."""
        w = np.full((self.nx, self.ny // 2 + 1), 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        return w

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.shape))

    def from_function(self, func) -> "Field":
        x, y = self.coords
        return Field(self, np.broadcast_to(func(x, y), self.shape).astype(float))


@dataclass
class Field:
    """Real scalar field sampled at cell centres."""

    spec: TorusSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.spec.shape:
            raise ValueError(f"field shape {values.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        self.values = values

    def mean(self) -> float:
        return float(self.values.mean())

    def integral(self) -> float:
        return float(self.values.sum() * self.spec.cell_area)

    def is_zero_mean(self, rtol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.abs(self.values).max(initial=0.0)))
        return abs(self.mean()) <= rtol * scale

    def copy(self) -> "Field":
        return Field(self.spec, self.values.copy())

    def _other(self, other):
        if isinstance(other, Field):
            check_same_spec(self, other)
            return other.values
        return other

    def __add__(self, other):
        return Field(self.spec, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.spec, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.spec, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.spec, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.spec, -self.values)


@dataclass
class SpectralField:
    """Fourier coefficients of a real field in the rfft2 half-plane layout."""

    spec: TorusSpec
    coeffs: np.ndarray

    def coefficient(self, m1: int, m2: int) -> complex:
        """Coefficient of the integer mode ``(m1, m2)``, using Hermitian symmetry."""
        nx, ny = self.spec.shape
        if abs(m1) > nx // 2 or abs(m2) > ny // 2:
            raise IndexError(f"mode ({m1}, {m2}) outside the resolved band")
        if m2 < 0 or (m2 == 0 and m1 < 0):
            return complex(np.conj(self.coeffs[(-m1) % nx, -m2]))
        return complex(self.coeffs[m1 % nx, m2])


@dataclass
class VectorField:
    """Two-component field plus optional face-normal velocities.

    ``face_x[i, j]`` is the mean normal velocity across the face shared by
    cells ``(i, j)`` and ``(i+1, j)``; ``face_y[i, j]`` the one shared by
    ``(i, j)`` and ``(i, j+1)``.
    """

    x: Field
    y: Field
    face_x: np.ndarray | None = None
    face_y: np.ndarray | None = None

    @property
    def spec(self) -> TorusSpec:
        return self.x.spec

    @property
    def has_faces(self) -> bool:
        return self.face_x is not None and self.face_y is not None

    def face_divergence(self) -> np.ndarray:
        if not self.has_faces:
            raise ValueError("vector field carries no face-normal data")
        return face_divergence(self.spec, self.face_x, self.face_y)


def check_same_spec(*fields) -> TorusSpec:
    spec = fields[0].spec
    for f in fields[1:]:
        if f.spec != spec:
            raise ValueError(f"grid mismatch: {spec} vs {f.spec}")
    return spec


# -- raw-array transforms -------------------------------------------------------


def fft(spec: TorusSpec, values: np.ndarray) -> np.ndarray:
    return np.fft.rfft2(values) / (spec.nx * spec.ny)


def ifft(spec: TorusSpec, coeffs: np.ndarray) -> np.ndarray:
    return np.fft.irfft2(coeffs * (spec.nx * spec.ny), s=spec.shape)


def to_spectral(f: Field) -> SpectralField:
    if not np.all(np.isfinite(f.values)):
        raise ValueError("cannot transform a non-finite field")
    return SpectralField(f.spec, fft(f.spec, f.values))


def from_spectral(F: SpectralField) -> Field:
    return Field(F.spec, ifft(F.spec, F.coeffs))


def dealias(f: Field) -> Field:
    spec = f.spec
    return Field(spec, ifft(spec, fft(spec, f.values) * spec.dealias_mask))


def gradient_values(spec: TorusSpec, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vh = fft(spec, values)
    ikx, iky = spec.ik
    return ifft(spec, ikx * vh), ifft(spec, iky * vh)


def gradient(f: Field) -> VectorField:
    gx, gy = gradient_values(f.spec, f.values)
    return VectorField(Field(f.spec, gx), Field(f.spec, gy))


def corner_values(spec: TorusSpec, values: np.ndarray) -> np.ndarray:
    """Band-limited interpolant of a centred field evaluated at cell corners."""
    return ifft(spec, fft(spec, values) * spec.half_cell_shift)


def face_velocities(spec: TorusSpec, stream_corners: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Face-mean normal velocity of ``grad^perp`` of a corner-sampled stream function.

    ``stream_corners[i, j]`` is the stream function at the lower-left corner
    of cell ``(i, j)``.  Differences along each face give its exact mean
    normal flux, so the cell divergence telescopes to zero.
    """
    p = stream_corners
    p_r = np.roll(p, -1, axis=0)
    p_rt = np.roll(p_r, -1, axis=1)
    p_t = np.roll(p, -1, axis=1)
    face_x = -(p_rt - p_r) / spec.dy
    face_y = (p_rt - p_t) / spec.dx
    return face_x, face_y


def face_divergence(spec: TorusSpec, face_x: np.ndarray, face_y: np.ndarray) -> np.ndarray:
    return (face_x - np.roll(face_x, 1, axis=0)) / spec.dx + (
        face_y - np.roll(face_y, 1, axis=1)
    ) / spec.dy


def perp_gradient(psi: Field) -> VectorField:
    """``u = (-d_y psi, d_x psi)`` with discretely divergence-free face fluxes."""
    spec = psi.spec
    ph = fft(spec, psi.values)
    ikx, iky = spec.ik
    ux = -ifft(spec, iky * ph)
    uy = ifft(spec, ikx * ph)
    face_x, face_y = face_velocities(spec, ifft(spec, ph * spec.half_cell_shift))
    return VectorField(Field(spec, ux), Field(spec, uy), face_x, face_y)


def jacobian(a: Field, b: Field, dealiased: bool = True) -> Field:
    """``J(a, b) = a_x b_y - a_y b_x`` evaluated pseudo-spectrally."""
    spec = check_same_spec(a, b)
    ah, bh = fft(spec, a.values), fft(spec, b.values)
    if dealiased:
        ah = ah * spec.dealias_mask
        bh = bh * spec.dealias_mask
    ikx, iky = spec.ik
    ax, ay = ifft(spec, ikx * ah), ifft(spec, iky * ah)
    bx, by = ifft(spec, ikx * bh), ifft(spec, iky * bh)
    return Field(spec, ax * by - ay * bx)


def curl(v: VectorField) -> Field:
    spec = v.spec
    ikx, iky = spec.ik
    return Field(spec, ifft(spec, ikx * fft(spec, v.y.values) - iky * fft(spec, v.x.values)))


def laplacian(f: Field) -> Field:
    spec = f.spec
    return Field(spec, ifft(spec, -spec.k2 * fft(spec, f.values)))


# -- norms ----------------------------------------------------------------------


def l2_norm(f: Field) -> float:
    return float(np.sqrt(np.sum(f.values**2) * f.spec.cell_area))


def sup_norm(f: Field) -> float:
    return float(np.abs(f.values).max())


def sobolev_norm_values(spec: TorusSpec, values: np.ndarray, s: float) -> float:
    vh = fft(spec, values)
    weight = spec.hermitian_weight * (1.0 + spec.k2) ** s
    return float(np.sqrt(spec.area * np.sum(weight * np.abs(vh) ** 2)))


def sobolev_norm(f: Field, s: float) -> float:
    """``(|T^2| sum_k (1 + |k|^2)^s |f_k|^2)^(1/2)``."""
    return sobolev_norm_values(f.spec, f.values, s)


def norms(f: Field, s: float = 1.0) -> dict[str, float]:
    return {"l2": l2_norm(f), "sup": sup_norm(f), "sobolev": sobolev_norm(f, s)}
