"""Conserved and monitored quantities: energy, Casimirs, PV budget, BKM
monitors and Sobolev norms."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .cutoff import cutoff_profile, monitor_terms
from .elliptic import apply_K
from .grid import Field, check_same_spec, jacobian, sobolev_norm

MAX_CASIMIR_DEGREE = 4

# (Phi, Psi) coefficient lists, lowest power first.
CASIMIR_SET = {
    "C_0_1": ((), (1.0,)),
    "C_b_0": ((0.0, 1.0), ()),
    "C_b2_0": ((0.0, 0.0, 1.0), ()),
    "C_0_b": ((), (0.0, 1.0)),
    "C_b3_0": ((0.0, 0.0, 0.0, 1.0), ()),
    "C_0_b2": ((), (0.0, 0.0, 1.0)),
}


def energy(state, h: Field | None = None) -> float:
    """``int u.(K*u)/2 + (b + h)^2/4`` by spectral quadrature."""
    u = state.u
    ku = apply_K(u)
    kinetic = 0.5 * float(np.sum(u.x.values * ku.x.values + u.y.values * ku.y.values))
    bh = state.b.values if h is None else state.b.values + h.values
    potential = 0.25 * float(np.sum(bh**2))
    return (kinetic + potential) * state.spec.cell_area


def _polyval(coeffs, x):
    out = np.zeros_like(x)
    for c in reversed(tuple(coeffs)):
        out = out * x + c
    return out


def casimir(state, phi, psi) -> float:
    """``C = int Phi(b) + q Psi(b)`` for polynomial ``Phi``, ``Psi`` (degree <= 4)."""
    for name, coeffs in (("phi", phi), ("psi", psi)):
        if len(coeffs) - 1 > MAX_CASIMIR_DEGREE:
            raise ValueError(f"{name} has degree {len(coeffs) - 1} > {MAX_CASIMIR_DEGREE}")
    b = state.b.values
    integrand = _polyval(phi, b) + state.q.values * _polyval(psi, b)
    return float(np.sum(integrand) * state.spec.cell_area)


def pv_budget(state0, state1, h: Field | None = None) -> tuple[float, float]:
    """Rate of change of total PV and ``int J(psi - h/2, b)`` at the midpoint.

    On the torus the right-hand side integrates to zero, so both numbers are
    expected to vanish.
    """
    spec = check_same_spec(state0.b, state1.b)
    dt = state1.t - state0.t
    if dt == 0:
        raise ValueError("pv_budget needs two snapshots at distinct times")
    lhs = (state1.q.integral() - state0.q.integral()) / dt
    potential = 0.5 * (state0.psi + state1.psi)
    if h is not None:
        potential = potential - 0.5 * h
    b_mid = 0.5 * (state0.b + state1.b)
    rhs = jacobian(potential, b_mid).integral()
    return lhs, rhs


def bkm_monitors(state) -> tuple[float, float, float]:
    """``(sup|grad b|, sup|grad u|, sup|q|)``."""
    return monitor_terms(state.spec, state.b.values, state.psi.values, state.q.values, "q")


@dataclass
class DiagnosticsRecord:
    step: int
    t: float
    energy: float
    casimirs: dict[str, float]
    total_b: float
    total_q: float
    sup_grad_b: float
    sup_grad_u: float
    sup_q: float
    bkm_integral: float
    theta: float
    sobolev_b3: float
    sobolev_q2: float

    @property
    def bkm_rate(self) -> float:
        return self.sup_grad_b + self.sup_q

    @property
    def sobolev_monitor(self) -> float:
        return self.sobolev_b3 + self.sobolev_q2

    def as_row(self) -> dict[str, float]:
        row = asdict(self)
        casimirs = row.pop("casimirs")
        row.update(casimirs)
        return row


CSV_COLUMNS = (
    ["step", "t", "energy"]
    + list(CASIMIR_SET)
    + [
        "total_b",
        "total_q",
        "sup_grad_b",
        "sup_grad_u",
        "sup_q",
        "bkm_integral",
        "theta",
        "sobolev_b3",
        "sobolev_q2",
    ]
)


def record(state, step: int, h: Field | None = None, R: float = math.inf,
           previous: DiagnosticsRecord | None = None, theta_monitor: str = "q") -> DiagnosticsRecord:
    """Diagnostics of ``state``; the BKM integral is advanced by the trapezoid rule.

    Quantities that overflow are reported as non-finite rather than raised.
    """
    with np.errstate(all="ignore"):
        try:
            sgb, sgu, sq = bkm_monitors(state)
            en = energy(state, h)
            if theta_monitor == "q":
                z = sgb + sgu + sq
            else:
                z = sum(monitor_terms(state.spec, state.b.values, state.psi.values,
                                      state.q.values, theta_monitor))
        except ValueError:
            # the stream function of an overflowing state is not representable
            sgb = sgu = sq = en = z = math.nan
        integral = 0.0
        if previous is not None:
            integral = previous.bkm_integral + 0.5 * (state.t - previous.t) * (previous.bkm_rate + sgb + sq)
        return DiagnosticsRecord(
            step=step,
            t=state.t,
            energy=en,
            casimirs={k: casimir(state, phi, psi) for k, (phi, psi) in CASIMIR_SET.items()},
            total_b=state.b.integral(),
            total_q=state.q.integral(),
            sup_grad_b=sgb,
            sup_grad_u=sgu,
            sup_q=sq,
            bkm_integral=integral,
            theta=cutoff_profile(z, R) if np.isfinite(z) else 0.0,
            sobolev_b3=sobolev_norm(state.b, 3.0),
            sobolev_q2=sobolev_norm(state.q, 2.0),
        )
