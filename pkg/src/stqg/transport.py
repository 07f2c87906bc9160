"""Conservative flux-form transport with the local Lax-Friedrichs face flux.

Every advection term of the model is assembled as ``-div(c U)`` from face
fluxes on the structured periodic grid.  Face-normal velocities come from
corner differences of a stream function, so they are single-valued and the
cell divergence of ``U`` telescopes to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .cutoff import cutoff_profile, monitor_terms
from .elliptic import velocity_from_q
from .grid import Field, TorusSpec, VectorField, check_same_spec, face_divergence, perp_gradient

FLUX_SCHEMES = ("lax_friedrichs_centered_avg",)
NOISE_FLUXES = ("central", "upwind")


@dataclass(frozen=True)
class TransportConfig:
    """Face-flux options.

    ``reconstruction_degree`` applies to the drift; 0 is piecewise constant,
    1 is minmod-limited piecewise linear.  ``noise_flux`` picks the flux used
    by the noise operators, which always use piecewise-constant states so that
    they stay linear.
    """

    flux_scheme: str = "lax_friedrichs_centered_avg"
    reconstruction_degree: int = 1
    noise_flux: str = "central"
    divergence_tol: float = 1e-10

    def __post_init__(self):
        if self.flux_scheme not in FLUX_SCHEMES:
            raise ValueError(f"unknown flux scheme {self.flux_scheme!r}")
        if self.reconstruction_degree not in (0, 1):
            raise ValueError(
                f"reconstruction_degree must be 0 or 1, got {self.reconstruction_degree!r}"
            )
        if self.noise_flux not in NOISE_FLUXES:
            raise ValueError(f"noise_flux must be one of {NOISE_FLUXES}, got {self.noise_flux!r}")

    @property
    def noise_penalty(self) -> float:
        return 0.0 if self.noise_flux == "central" else 1.0


def check_divergence_free(spec: TorusSpec, face_x, face_y, tol: float) -> None:
    div = face_divergence(spec, face_x, face_y)
    scale = max(1.0, float(np.abs(face_x).max()), float(np.abs(face_y).max()))
    worst = float(np.abs(div).max())
    if worst > tol * scale / min(spec.dx, spec.dy):
        raise ValueError(f"face velocities are not divergence-free (max |div| = {worst:.3e})")


def advect_values(spec: TorusSpec, c, face_x, face_y, degree: int = 0, penalty: float = 1.0):
    """Raw-array ``-div(c U)``; no validation."""
    return _kernels.flux_tendency(c, face_x, face_y, spec.dx, spec.dy, degree, penalty)


def advect(c: Field, U: VectorField, cfg: TransportConfig | None = None) -> Field:
    """Tendency ``-div(c U)`` assembled from local Lax-Friedrichs face fluxes.

    The output sums to zero over the grid up to round-off because each face
    flux enters two neighbouring cells with opposite signs.
    """
    cfg = cfg or TransportConfig()
    spec = check_same_spec(c, U.x)
    if not U.has_faces:
        raise ValueError("advect needs face-normal velocities")
    check_divergence_free(spec, U.face_x, U.face_y, cfg.divergence_tol)
    out = advect_values(spec, c.values, U.face_x, U.face_y, cfg.reconstruction_degree, 1.0)
    return Field(spec, out)


@dataclass
class Drift:
    db_dt: Field
    dq_dt: Field
    theta: float


def drift_values(
    spec: TorusSpec,
    b: np.ndarray,
    q: np.ndarray,
    u_faces: tuple[np.ndarray, np.ndarray],
    uh_faces: tuple[np.ndarray, np.ndarray] | None,
    theta: float,
    degree: int,
) -> tuple[np.ndarray, np.ndarray]:
    """``(-theta u.grad b, -theta u.grad(q - b) - u_h.grad b)`` in flux form.

    The theta-weighted part is skipped, not multiplied, when ``theta == 0``.
    """
    db = np.zeros(spec.shape)
    dq = np.zeros(spec.shape)
    if theta != 0.0:
        fx, fy = u_faces
        db = theta * advect_values(spec, b, fx, fy, degree)
        dq = theta * advect_values(spec, q - b, fx, fy, degree)
    if uh_faces is not None:
        dq = dq + advect_values(spec, b, uh_faces[0], uh_faces[1], degree)
    return db, dq


def assemble_drift(state, h: Field | None, f: Field, R: float = math.inf, cfg=None,
                   theta_monitor: str = "q") -> Drift:
    """Drift of the truncated system at ``state``.

    ``R = inf`` gives the untruncated deterministic drift.
    """
    cfg = cfg or TransportConfig()
    spec = check_same_spec(state.b, state.q, f)
    psi, u = velocity_from_q(state.q, f)
    z = sum(monitor_terms(spec, state.b.values, psi.values, state.q.values, theta_monitor))
    theta = cutoff_profile(z, R)
    uh_faces = None
    if h is not None:
        uh = perp_gradient(0.5 * h)
        uh_faces = (uh.face_x, uh.face_y)
    db, dq = drift_values(
        spec, state.b.values, state.q.values, (u.face_x, u.face_y), uh_faces, theta,
        cfg.reconstruction_degree,
    )
    return Drift(Field(spec, db), Field(spec, dq), theta)
