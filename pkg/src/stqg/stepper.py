"""SSPRK3 integrator for the truncated stochastic TQG system.

One step with Brownian increments ``dW`` reuses the same increments in all
three stages::

    g1      = g  + dt A(g)  g  + dW_i G_i g
    g2      = 3/4 g + 1/4 (g1 + dt A(g1) g1 + dW_i G_i g1)
    g_{n+1} = 1/3 g + 2/3 (g2 + dt A(g2) g2 + dW_i G_i g2)

where ``A(g)`` uses the velocity and cutoff of the stage state ``g``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .cutoff import MONITOR_VARIANTS, cutoff_profile, monitor_terms
from .diagnostics import DiagnosticsRecord, record
from .elliptic import helmholtz_inverse
from .grid import Field, TorusSpec, corner_values, face_velocities, gradient_values, perp_gradient
from .noise import BrownianPath, NoiseBasis, g_values
from .state import State
from .transport import TransportConfig, drift_values

log = logging.getLogger(__name__)

STATUS_COMPLETED = "COMPLETED"
STATUS_BLOWUP = "BLOWUP"


class BlowUpError(FloatingPointError):
    """A stage produced non-finite values."""

    def __init__(self, stage: int, t: float):
        super().__init__(f"non-finite values in stage {stage} of the step starting at t={t:g}")
        self.stage = stage
        self.t = t


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    R: float = math.inf
    theta_monitor: str = "q"
    transport: TransportConfig = field(default_factory=TransportConfig)
    advection: bool = True
    bathymetry: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R!r}")
        if self.theta_monitor not in MONITOR_VARIANTS:
            raise ValueError(f"theta_monitor must be one of {MONITOR_VARIANTS}")


class ModelData:
    """Time-independent data: bathymetry ``h``, Coriolis ``f`` and noise basis."""

    def __init__(self, f: Field, h: Field | None = None, basis: NoiseBasis | None = None):
        self.spec: TorusSpec = f.spec
        self.f = f
        self.h = h
        self.basis = basis if basis is not None else NoiseBasis()

    @property
    def n_noise(self) -> int:
        return len(self.basis)

    @cached_property
    def uh_faces(self):
        if self.h is None:
            return None
        uh = perp_gradient(0.5 * self.h)
        return uh.face_x, uh.face_y

    @cached_property
    def noise_fields(self):
        return self.basis.sampled(self.spec)


def theta_R(state: State, R: float, variant: str = "q") -> float:
    """Cutoff evaluated at ``||grad b|| + ||grad u|| + ||q||`` (sup norms)."""
    if not R > 0:
        raise ValueError(f"R must be positive, got {R!r}")
    z = sum(monitor_terms(state.spec, state.b.values, state.psi.values, state.q.values, variant))
    return cutoff_profile(z, R)


def _stage(spec: TorusSpec, b, q, dW, cfg: StepperConfig, data: ModelData):
    """``g + dt A(g) g + dW_i G_i g`` on raw arrays; returns ``(b, q, theta)``."""
    theta = 0.0
    db = dq = None
    if cfg.advection or cfg.bathymetry:
        u_faces = None
        if cfg.advection:
            psi = helmholtz_inverse(spec, q - data.f.values)
            if math.isinf(cfg.R):
                theta = 1.0
            else:
                z = sum(monitor_terms(spec, b, psi, q, cfg.theta_monitor))
                theta = cutoff_profile(z, cfg.R) if math.isfinite(z) else 0.0
            if theta != 0.0:
                u_faces = face_velocities(spec, corner_values(spec, psi))
        uh_faces = data.uh_faces if cfg.bathymetry else None
        if theta != 0.0 or uh_faces is not None:
            db, dq = drift_values(spec, b, q, u_faces, uh_faces, theta,
                                  cfg.transport.reconstruction_degree)
    nb = b if db is None else b + cfg.dt * db
    nq = q if dq is None else q + cfg.dt * dq
    penalty = cfg.transport.noise_penalty
    for w, xi in zip(dW, data.noise_fields):
        if w == 0.0:
            continue
        gb, gq = g_values(spec, xi, b, q, "flux", penalty)
        nb = nb + w * gb
        nq = nq + w * gq
    return nb, nq, theta


def ssprk3_combine(g: tuple, stage: Callable[[tuple], tuple], check=None) -> tuple:
    """The three-stage SSPRK3 combination for a stage map ``g -> g + dt A g + dW G g``.

    ``g`` is a tuple of arrays (or scalars); ``check(stage_no, values)`` runs
    after each stage when given.
    """
    g1 = stage(g)
    if check:
        check(1, g1)
    l1 = stage(g1)
    g2 = tuple(0.75 * a + 0.25 * c for a, c in zip(g, l1))
    if check:
        check(2, g2)
    l2 = stage(g2)
    g3 = tuple(a / 3.0 + (2.0 / 3.0) * c for a, c in zip(g, l2))
    if check:
        check(3, g3)
    return g3


def ssprk3_values(spec, b, q, dW, cfg: StepperConfig, data: ModelData, t: float = 0.0):
    """One SSPRK3 step on raw arrays; returns ``(b, q, thetas)``."""
    dW = np.zeros(data.n_noise) if dW is None else np.asarray(dW, dtype=float)
    if dW.shape != (data.n_noise,):
        raise ValueError(f"expected {data.n_noise} increments, got shape {dW.shape}")
    if not np.all(np.isfinite(dW)):
        raise ValueError("Brownian increments must be finite")
    thetas = []

    def stage(g):
        nb, nq, th = _stage(spec, g[0], g[1], dW, cfg, data)
        thetas.append(th)
        return nb, nq

    def check(n, g):
        if not (np.all(np.isfinite(g[0])) and np.all(np.isfinite(g[1]))):
            raise BlowUpError(n, t)

    b3, q3 = ssprk3_combine((b, q), stage, check)
    return b3, q3, thetas


def ssprk3_step(state: State, dW, cfg: StepperConfig, data: ModelData) -> State:
    """Advance ``state`` by one step of length ``cfg.dt`` with increments ``dW``."""
    spec = state.spec
    b, q, _ = ssprk3_values(spec, state.b.values, state.q.values, dW, cfg, data, state.t)
    return State(Field(spec, b), Field(spec, q), data.f, state.t + cfg.dt)


# -- trajectory loop ------------------------------------------------------------


@dataclass(frozen=True)
class Thresholds:
    """Early-termination levels for the two blow-up monitors.

    ``bkm_integral`` bounds the running integral of ``||grad b|| + ||q||``;
    ``sobolev`` bounds ``||b||_{3,2} + ||q||_{2,2}``.
    """

    bkm_integral: float = math.inf
    sobolev: float = 1e6


@dataclass
class RunResult:
    status: str
    steps: int
    records: list[DiagnosticsRecord]
    snapshots: list[tuple[int, State]]
    final: State
    blowup_step: int | None = None
    blowup_reason: str | None = None
    cfl: float = 0.0


def cfl_number(state: State, path: BrownianPath | None, cfg: StepperConfig, data: ModelData) -> float:
    """``(dt ||u|| + sum_i ||xi_i|| max|dW_i|) / min(dx, dy)``."""
    spec = state.spec
    with np.errstate(all="ignore"):
        psi = helmholtz_inverse(spec, state.q.values - data.f.values)
        speed = float(np.hypot(*gradient_values(spec, psi)).max())
    if not math.isfinite(speed):
        return math.inf
    if data.h is not None and cfg.bathymetry:
        speed += 0.5 * float(np.hypot(*gradient_values(spec, data.h.values)).max())
    disp = cfg.dt * speed
    if path is not None and path.n_noise:
        max_inc = np.abs(path.increments).max(axis=1)
        disp += sum(xi.sup * m for xi, m in zip(data.noise_fields, max_inc))
    return disp / min(spec.dx, spec.dy)


def _exceeded(rec: DiagnosticsRecord, thresholds: Thresholds) -> str | None:
    values = [rec.energy, rec.bkm_integral, rec.sobolev_monitor, rec.sup_q, rec.sup_grad_b]
    if not all(np.isfinite(values)):
        return "non-finite diagnostics"
    if rec.bkm_integral >= thresholds.bkm_integral:
        return f"bkm_integral {rec.bkm_integral:.6g} >= {thresholds.bkm_integral:.6g}"
    if rec.sobolev_monitor >= thresholds.sobolev:
        return f"sobolev monitor {rec.sobolev_monitor:.6g} >= {thresholds.sobolev:.6g}"
    return None


def run(
    initial: State,
    path: BrownianPath | None,
    cfg: StepperConfig,
    data: ModelData,
    n_steps: int | None = None,
    snapshot_stride: int = 0,
    thresholds: Thresholds = Thresholds(),
    cfl_max: float = 0.4,
    on_record: Callable[[DiagnosticsRecord], None] | None = None,
    on_snapshot: Callable[[int, State], None] | None = None,
) -> RunResult:
    """Integrate from ``initial`` over the fine increments of ``path``.

    Stops with status ``BLOWUP`` at the first step whose diagnostics cross a
    threshold or whose stages go non-finite.  ``snapshot_stride = 0`` keeps
    only the initial and final states.
    """
    if path is not None:
        if not math.isclose(path.fine_dt, cfg.dt, rel_tol=1e-12):
            raise ValueError(f"path step {path.fine_dt} does not match dt {cfg.dt}")
        if path.n_noise != data.n_noise:
            raise ValueError(f"path has {path.n_noise} noise indices, basis has {data.n_noise}")
        total = path.increments.shape[1]
        n_steps = total if n_steps is None else n_steps
        if n_steps > total:
            raise ValueError(f"path holds {total} increments, {n_steps} steps requested")
    elif n_steps is None:
        raise ValueError("n_steps is required without a Brownian path")
    elif data.n_noise:
        raise ValueError("a Brownian path is required when the noise basis is non-empty")

    cfl = cfl_number(initial, path, cfg, data)
    if cfl > cfl_max:
        warnings.warn(f"CFL number {cfl:.3f} exceeds {cfl_max}", RuntimeWarning, stacklevel=2)

    h = data.h
    spec = initial.spec
    rec = record(initial, 0, h, cfg.R, None, cfg.theta_monitor)
    records = [rec]
    snapshots = [(0, initial)]
    if on_record:
        on_record(rec)
    if on_snapshot:
        on_snapshot(0, initial)

    state = initial
    status, hit, reason = STATUS_COMPLETED, None, None
    reason = _exceeded(rec, thresholds)
    if reason:
        status, hit = STATUS_BLOWUP, 0
    step = 0
    zero_dw = np.zeros(0)
    while status == STATUS_COMPLETED and step < n_steps:
        dW = path.increments[:, step] if path is not None else zero_dw
        try:
            b, q, _ = ssprk3_values(spec, state.b.values, state.q.values, dW, cfg, data, state.t)
        except BlowUpError as exc:
            status, hit, reason = STATUS_BLOWUP, step + 1, str(exc)
            break
        step += 1
        state = State(Field(spec, b), Field(spec, q), data.f, initial.t + step * cfg.dt)
        rec = record(state, step, h, cfg.R, rec, cfg.theta_monitor)
        records.append(rec)
        if on_record:
            on_record(rec)
        reason = _exceeded(rec, thresholds)
        if reason:
            status, hit = STATUS_BLOWUP, step
        if snapshot_stride and (step % snapshot_stride == 0 or status != STATUS_COMPLETED):
            snapshots.append((step, state))
            if on_snapshot:
                on_snapshot(step, state)
    if snapshots[-1][1] is not state:
        snapshots.append((step, state))
        if on_snapshot:
            on_snapshot(step, state)
    if status == STATUS_BLOWUP:
        log.info("run stopped at step %s: %s", hit, reason)
    return RunResult(status, step, records, snapshots, state, hit, reason, cfl)
