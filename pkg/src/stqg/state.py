"""Model state ``(b, q)`` with the derived stream function and velocity."""

from __future__ import annotations

from functools import cached_property

from .elliptic import velocity_from_q
from .grid import Field, VectorField, check_same_spec


class State:
    """Buoyancy ``b`` and potential vorticity ``q`` at time ``t``.

    ``psi`` and ``u`` are derived lazily from ``q - f``; states are never
    mutated, each step builds a new one.
    """

    def __init__(self, b: Field, q: Field, f: Field, t: float = 0.0):
        check_same_spec(b, q, f)
        self.b = b
        self.q = q
        self.f = f
        self.t = float(t)

    @property
    def spec(self):
        return self.b.spec

    @cached_property
    def _derived(self) -> tuple[Field, VectorField]:
        return velocity_from_q(self.q, self.f)

    @property
    def psi(self) -> Field:
        return self._derived[0]

    @property
    def u(self) -> VectorField:
        return self._derived[1]

    def replace(self, b=None, q=None, t=None) -> "State":
        return State(
            self.b if b is None else b,
            self.q if q is None else q,
            self.f,
            self.t if t is None else t,
        )

    def __repr__(self) -> str:
        return f"State(t={self.t:g}, grid={self.spec.nx}x{self.spec.ny})"
