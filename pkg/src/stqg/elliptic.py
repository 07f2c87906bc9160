"""Spectral Helmholtz inversion, the kernel ``K = 1 - Laplacian^{-1}``, and the
periodic Green's function of ``Laplacian - 1``."""

from __future__ import annotations

import numpy as np

from .grid import (
    Field,
    TorusSpec,
    VectorField,
    check_same_spec,
    fft,
    ifft,
    perp_gradient,
)


def helmholtz_inverse(spec: TorusSpec, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(Laplacian - 1) psi = rhs`` on raw nodal arrays."""
    return ifft(spec, -fft(spec, rhs) / (spec.k2 + 1.0))


def solve_streamfunction(q: Field, f: Field) -> Field:
    """Stream function ``psi`` with ``q = (Laplacian - 1) psi + f``."""
    spec = check_same_spec(q, f)
    return Field(spec, helmholtz_inverse(spec, q.values - f.values))


def helmholtz(psi: Field) -> Field:
    """Forward operator ``(Laplacian - 1) psi``."""
    spec = psi.spec
    return Field(spec, ifft(spec, -(spec.k2 + 1.0) * fft(spec, psi.values)))


def velocity_from_q(q: Field, f: Field) -> tuple[Field, VectorField]:
    psi = solve_streamfunction(q, f)
    return psi, perp_gradient(psi)


def apply_K(u: VectorField) -> VectorField:
    """Apply ``K* = 1 - Laplacian^{-1}`` component-wise.

    Laplacian^{-1} only exists on zero-mean fields, so a component with a
    non-zero mean raises ``ValueError`` instead of being projected.
    """
    spec = u.spec
    out = []
    for comp in (u.x, u.y):
        ch = fft(spec, comp.values)
        scale = max(1.0, float(np.abs(comp.values).max(initial=0.0)))
        if abs(ch[0, 0]) > 1e-12 * scale:
            raise ValueError(f"K* requires zero-mean input, got mean {ch[0, 0].real:.3e}")
        k2 = spec.k2
        mult = np.ones_like(k2)
        nz = k2 > 0
        mult[nz] += 1.0 / k2[nz]
        out.append(Field(spec, ifft(spec, mult * ch)))
    return VectorField(out[0], out[1])


def greens_convolve(w: Field) -> Field:
    """Convolution with the periodic Green's function of ``Laplacian - 1``.

    Equivalent to multiplying every resolved coefficient by ``-1/(|k|^2 + 1)``.
    """
    return Field(w.spec, helmholtz_inverse(w.spec, w.values))


def greens_function(spec: TorusSpec) -> Field:
    """Resolved-band ``G(x) = -sum_k exp(i k.x) / (|k|^2 + 1)`` on the offset
    lattice ``x = (i dx, j dy)``.

    The unpaired Nyquist coefficient stands for the average of the ``+k`` and
    ``-k`` terms, which coincide on this lattice.
    """
    coeffs = -1.0 / (spec.k2 + 1.0)
    return Field(spec, np.fft.irfft2(coeffs * spec.nx * spec.ny, s=spec.shape))
