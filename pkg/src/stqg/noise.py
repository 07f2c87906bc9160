"""Transport noise: divergence-free fields ``xi_i``, the operators ``G_i`` and
``G_i G_i / 2``, and reproducible dyadically refinable Brownian paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grid import Field, TorusSpec, TWO_PI, face_velocities, fft, gradient_values, ifft
from .transport import TransportConfig, advect_values


@dataclass(frozen=True)
class FourierMode:
    """``zeta = amplitude * cos(k.x + phase)`` with integer mode numbers ``k``."""

    k: tuple[int, int]
    amplitude: float
    phase: float = 0.0
    kind: str = field(default="fourier", init=False)

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "phase", float(self.phase))

    def wavevector(self, spec: TorusSpec) -> tuple[float, float]:
        return (TWO_PI * self.k[0] / spec.length_x, TWO_PI * self.k[1] / spec.length_y)

    def stream(self, spec: TorusSpec, x, y):
        kx, ky = self.wavevector(spec)
        return self.amplitude * np.cos(kx * x + ky * y + self.phase)

    def velocity(self, spec: TorusSpec, x, y):
        kx, ky = self.wavevector(spec)
        s = self.amplitude * np.sin(kx * x + ky * y + self.phase)
        return ky * s, -kx * s

    def summability(self) -> float:
        return abs(self.amplitude) * (1.0 + float(np.hypot(*self.k))) ** 5


@dataclass(frozen=True)
class ConstantMode:
    """Spatially constant transport velocity ``v``."""

    v: tuple[float, float]
    kind: str = field(default="constant", init=False)

    def __post_init__(self):
        object.__setattr__(self, "v", tuple(float(c) for c in self.v))

    def velocity(self, spec: TorusSpec, x, y):
        return np.full_like(x, self.v[0]), np.full_like(x, self.v[1])

    def summability(self) -> float:
        return float(np.hypot(*self.v))


@dataclass(frozen=True)
class NoiseField:
    """A noise mode sampled on a grid: centre values and face-normal velocities."""

    ux: np.ndarray
    uy: np.ndarray
    face_x: np.ndarray
    face_y: np.ndarray
    sup: float
    constant: tuple[float, float] | None


@dataclass(frozen=True)
class NoiseBasis:
    modes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))

    def __len__(self) -> int:
        return len(self.modes)

    def summability(self) -> float:
        """``sum_i |a_i| (1 + |k_i|)^5``, a stand-in for ``sum ||xi_i||_{4,inf}``."""
        return float(sum(m.summability() for m in self.modes))

    def sampled(self, spec: TorusSpec) -> tuple[NoiseField, ...]:
        return _sample_basis(self, spec)

    def check_index(self, i: int) -> None:
        if not 0 <= i < len(self.modes):
            raise IndexError(f"noise index {i} out of range for {len(self.modes)} modes")


@lru_cache(maxsize=32)
def _sample_basis(basis: NoiseBasis, spec: TorusSpec) -> tuple[NoiseField, ...]:
    x, y = spec.coords
    xc, yc = spec.corner_coords
    out = []
    for mode in basis.modes:
        ux, uy = mode.velocity(spec, x, y)
        if isinstance(mode, ConstantMode):
            fx = np.full(spec.shape, float(mode.v[0]))
            fy = np.full(spec.shape, float(mode.v[1]))
            const = (float(mode.v[0]), float(mode.v[1]))
        else:
            fx, fy = face_velocities(spec, mode.stream(spec, xc, yc))
            const = None
        sup = float(np.sqrt(ux**2 + uy**2).max())
        for arr in (ux, uy, fx, fy):
            arr.setflags(write=False)
        out.append(NoiseField(ux, uy, fx, fy, sup, const))
    return tuple(out)


# -- operators ------------------------------------------------------------------


def _lie(spec, xi: NoiseField, c, method: str, penalty: float):
    """``-(xi . grad) c``."""
    if method == "flux":
        return advect_values(spec, c, xi.face_x, xi.face_y, 0, penalty)
    if method == "spectral":
        gx, gy = gradient_values(spec, c)
        return -(xi.ux * gx + xi.uy * gy)
    raise ValueError(f"unknown method {method!r}")


def g_values(spec, xi: NoiseField, b, q, method="flux", penalty=0.0):
    """Raw-array ``G_i (b, q) = (-xi.grad b, -xi.grad (q - b))``."""
    return _lie(spec, xi, b, method, penalty), _lie(spec, xi, q - b, method, penalty)


def apply_G(i: int, state, basis: NoiseBasis, cfg: TransportConfig | None = None,
            method: str = "flux") -> tuple[Field, Field]:
    """Diffusion operator ``G_i`` applied to ``(b, q)``."""
    cfg = cfg or TransportConfig()
    basis.check_index(i)
    spec = state.b.spec
    xi = basis.sampled(spec)[i]
    db, dq = g_values(spec, xi, state.b.values, state.q.values, method, cfg.noise_penalty)
    return Field(spec, db), Field(spec, dq)


def apply_G2(i: int, state, basis: NoiseBasis, cfg: TransportConfig | None = None,
             method: str = "flux") -> tuple[Field, Field]:
    """``G_i G_i (b, q) / 2 = (L^2 b / 2, L^2 (q - 2b) / 2)`` with ``L = xi_i . grad``.

    The spectral method uses the exact second-derivative multiplier when the
    mode is constant.
    """
    cfg = cfg or TransportConfig()
    basis.check_index(i)
    spec = state.b.spec
    xi = basis.sampled(spec)[i]
    b, q = state.b.values, state.q.values
    if method == "spectral" and xi.constant is not None:
        kx, ky = spec.wavenumbers
        mult = -0.5 * (xi.constant[0] * kx + xi.constant[1] * ky) ** 2

        def half_l2(c):
            return ifft(spec, mult * fft(spec, c))
    else:
        penalty = cfg.noise_penalty

        def half_l2(c):
            return 0.5 * _lie(spec, xi, _lie(spec, xi, c, method, penalty), method, penalty)

    return Field(spec, half_l2(b)), Field(spec, half_l2(q - 2.0 * b))


# -- Brownian paths -------------------------------------------------------------


def _normal_stream(seed: int, realization_id: int, index: int, level: int, n: int) -> np.ndarray:
    """First ``n`` standard normals of the counter-based stream for one key."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(realization_id), int(index), int(level)))
    return np.random.Generator(np.random.Philox(ss)).standard_normal(n)


@dataclass(frozen=True)
class BrownianPath:
    """Increments of ``n_noise`` independent Brownian motions.

    ``increments[i, p]`` is the increment of ``W^i`` over the ``p``-th of the
    ``n_steps * 2**level`` sub-intervals of length ``dt / 2**level``.
    """

    seed: int
    realization_id: int
    n_steps: int
    dt: float
    level: int
    increments: np.ndarray

    @property
    def n_noise(self) -> int:
        return self.increments.shape[0]

    @property
    def substeps(self) -> int:
        return 2**self.level

    @property
    def fine_dt(self) -> float:
        return self.dt / self.substeps

    def coarsened(self, level: int) -> np.ndarray:
        """Increments summed pairwise down to ``level`` (exact for refined paths)."""
        if not 0 <= level <= self.level:
            raise ValueError(f"cannot coarsen level {self.level} path to level {level}")
        inc = self.increments
        for _ in range(self.level - level):
            inc = inc[:, 0::2] + inc[:, 1::2]
        return inc

    def step_increments(self, n: int) -> np.ndarray:
        """Fine increments inside coarse step ``n``, shape ``(n_noise, 2**level)``."""
        s = self.substeps
        return self.increments[:, n * s:(n + 1) * s]


def _quantum(dt: float) -> float:
    """Dyadic unit all increments are rounded to.

    With every increment a multiple of ``u`` and bounded by ``2**53 u`` (about
    ``2**7 sqrt(dt)``), pairwise sums are exact in floating point, so the
    bridge construction can keep ``left + right == coarse`` to the last bit.
    """
    return 2.0 ** (math.floor(math.log2(math.sqrt(dt))) - 46)


def _quantise(values: np.ndarray, u: float) -> np.ndarray:
    return np.round(values / u) * u


def sample_path(seed: int, realization_id: int, n_steps: int, dt: float, n_noise: int,
                level: int = 0) -> BrownianPath:
    """Brownian path keyed by ``(seed, realization_id)``.

    The level-``l`` path is built by ``l`` bridge refinements of the level-0
    path, so paths at different levels are exactly nested.
    """
    if n_steps < 0 or n_noise < 0 or level < 0:
        raise ValueError("n_steps, n_noise and level must be non-negative")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    u = _quantum(dt)
    inc = np.empty((n_noise, n_steps))
    for i in range(n_noise):
        inc[i] = _quantise(np.sqrt(dt) * _normal_stream(seed, realization_id, i, 0, n_steps), u)
    path = BrownianPath(int(seed), int(realization_id), int(n_steps), float(dt), 0, inc)
    for _ in range(level):
        path = refine(path)
    return path


def refine(path: BrownianPath) -> BrownianPath:
    """Insert Brownian-bridge midpoints into every increment."""
    level = path.level + 1
    h = path.fine_dt
    u = _quantum(path.dt)
    n_pos = path.increments.shape[1]
    children = np.empty((path.n_noise, 2 * n_pos))
    for i in range(path.n_noise):
        z = _normal_stream(path.seed, path.realization_id, i, level, n_pos)
        coarse = path.increments[i]
        left = _quantise(0.5 * coarse + 0.5 * np.sqrt(h) * z, u)
        children[i, 0::2] = left
        children[i, 1::2] = coarse - left
    return BrownianPath(path.seed, path.realization_id, path.n_steps, path.dt, level, children)
