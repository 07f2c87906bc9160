import math

import numpy as np
import pytest

from stqg import _kernels
from stqg.elliptic import solve_streamfunction
from stqg.grid import Field, TorusSpec, VectorField, jacobian, perp_gradient
from stqg.state import State
from stqg.transport import TransportConfig, advect, assemble_drift

from conftest import band_limited


def uniform(spec, vx, vy):
    fx = np.full(spec.shape, float(vx))
    fy = np.full(spec.shape, float(vy))
    return VectorField(Field(spec, fx), Field(spec, fy), fx, fy)


def test_config_validation():
    with pytest.raises(ValueError):
        TransportConfig(reconstruction_degree=2)
    with pytest.raises(ValueError):
        TransportConfig(flux_scheme="roe")
    with pytest.raises(ValueError):
        TransportConfig(noise_flux="nope")


@pytest.mark.parametrize("degree", [0, 1])
def test_constant_field_has_no_tendency(spec32, degree):
    U = perp_gradient(band_limited(spec32, seed=1))
    c = Field(spec32, np.full(spec32.shape, 3.7))
    out = advect(c, U, TransportConfig(reconstruction_degree=degree))
    assert np.abs(out.values).max() < 1e-12


def test_zero_velocity(spec32):
    z = spec32.zeros()
    U = VectorField(z, z, np.zeros(spec32.shape), np.zeros(spec32.shape))
    assert np.abs(advect(band_limited(spec32), U).values).max() == 0.0


def test_degree0_is_upwind(spec32):
    c = band_limited(spec32, seed=2).values
    out = advect(Field(spec32, c), uniform(spec32, 1.0, 0.0), TransportConfig(reconstruction_degree=0))
    upwind = -(c - np.roll(c, 1, axis=0)) / spec32.dx
    assert np.abs(out.values - upwind).max() < 1e-12
    out = advect(Field(spec32, c), uniform(spec32, 0.0, -2.0), TransportConfig(reconstruction_degree=0))
    upwind = 2.0 * (np.roll(c, -1, axis=1) - c) / spec32.dy
    assert np.abs(out.values - upwind).max() < 1e-12


@pytest.mark.parametrize("degree", [0, 1])
def test_conservative(spec64, degree):
    U = perp_gradient(band_limited(spec64, kmax=20, seed=3))
    c = band_limited(spec64, kmax=20, seed=4, zero_mean=False)
    out = advect(c, U, TransportConfig(reconstruction_degree=degree))
    assert abs(out.values.sum()) <= 1e-12 * spec64.nx * spec64.ny * max(1.0, np.abs(out.values).max())


def test_linear_at_degree0(spec32):
    cfg = TransportConfig(reconstruction_degree=0)
    U = perp_gradient(band_limited(spec32, seed=5))
    a, b = band_limited(spec32, seed=6), band_limited(spec32, seed=7)
    lhs = advect(2.0 * a + (-3.0) * b, U, cfg).values
    rhs = 2.0 * advect(a, U, cfg).values - 3.0 * advect(b, U, cfg).values
    assert np.abs(lhs - rhs).max() < 1e-11


def cfl_dt(spec, U, target):
    vmax = max(np.abs(U.face_x).max() / spec.dx, np.abs(U.face_y).max() / spec.dy)
    return target / vmax


def test_l2_stable_forward_euler(spec32):
    cfg = TransportConfig(reconstruction_degree=0)
    U = perp_gradient(band_limited(spec32, kmax=4, seed=8))
    # CFL summed over both directions stays below 0.5
    dt = cfl_dt(spec32, U, 0.25)
    c = band_limited(spec32, kmax=12, seed=9)
    norm = np.linalg.norm(c.values)
    for _ in range(200):
        c = c + dt * advect(c, U, cfg)
        new = np.linalg.norm(c.values)
        assert new <= norm * (1 + 1e-13)
        norm = new


def test_degree1_positivity_rotating_patch():
    spec = TorusSpec(64, 64)
    x, y = spec.coords
    U = perp_gradient(Field(spec, np.sin(x) * np.sin(y)))
    c = Field(spec, ((x - 2.0) ** 2 + (y - 1.5) ** 2 < 0.5).astype(float))
    cfg = TransportConfig(reconstruction_degree=1)
    dt = cfl_dt(spec, U, 0.25)
    mass = c.values.sum()
    for _ in range(300):
        c = c + dt * advect(c, U, cfg)
        assert c.values.min() >= -1e-14
    assert c.values.sum() == pytest.approx(mass, rel=1e-12)


def test_rejects_divergent_faces(spec32):
    fx = np.random.default_rng(0).normal(size=spec32.shape)
    U = VectorField(spec32.zeros(), spec32.zeros(), fx, np.zeros(spec32.shape))
    with pytest.raises(ValueError):
        advect(spec32.zeros(), U)
    with pytest.raises(ValueError):
        advect(spec32.zeros(), VectorField(spec32.zeros(), spec32.zeros()))
    with pytest.raises(ValueError):
        advect(TorusSpec(16, 16).zeros(), U)


def test_drift_constants(spec32):
    one = Field(spec32, np.ones(spec32.shape))
    st = State(2.0 * one, 5.0 * one, spec32.zeros())
    d = assemble_drift(st, band_limited(spec32), spec32.zeros())
    assert np.abs(d.db_dt.values).max() < 1e-12
    assert np.abs(d.dq_dt.values).max() < 1e-12
    assert d.theta == 1.0


def test_drift_q_minus_b_constant(spec32):
    b = band_limited(spec32, seed=3)
    st = State(b, b + 1.5, spec32.zeros())
    d = assemble_drift(st, None, spec32.zeros())
    assert np.abs(d.dq_dt.values).max() < 1e-12


def spectral_drift(b, q, f, h):
    psi = solve_streamfunction(q, f)
    db = -jacobian(psi, b, dealiased=False).values
    dq = -jacobian(psi, q - b, dealiased=False).values - jacobian(0.5 * h, b, dealiased=False).values
    return db, dq


@pytest.mark.parametrize("degree,rate", [(0, 1.9), (1, 2.6)])
def test_drift_converges_to_spectral_jacobian(degree, rate):
    errors = []
    for n in (16, 32, 64, 128):
        spec = TorusSpec(n, n)
        x, y = spec.coords
        b = Field(spec, np.sin(x) * np.cos(2 * y))
        q = Field(spec, np.cos(x + y))
        h = Field(spec, 0.4 * np.cos(y))
        d = assemble_drift(State(b, q, spec.zeros()), h, spec.zeros(),
                           cfg=TransportConfig(reconstruction_degree=degree))
        eb, eq = spectral_drift(b, q, spec.zeros(), h)
        errors.append(math.sqrt(np.mean((d.db_dt.values - eb) ** 2 + (d.dq_dt.values - eq) ** 2)))
    ratios = [a / b for a, b in zip(errors, errors[1:])]
    assert min(ratios) >= rate


def test_truncated_drift_vanishes(spec32):
    b, q = band_limited(spec32, seed=1), band_limited(spec32, seed=2)
    d = assemble_drift(State(b, q, spec32.zeros()), None, spec32.zeros(), R=1e-9)
    assert d.theta == 0.0
    assert np.abs(d.db_dt.values).max() == 0.0 and np.abs(d.dq_dt.values).max() == 0.0


@pytest.mark.skipif(_kernels.numba is None, reason="numba not installed")
@pytest.mark.parametrize("degree,penalty", [(0, 0.0), (0, 1.0), (1, 1.0)])
def test_numba_matches_numpy(spec64, degree, penalty):
    U = perp_gradient(band_limited(spec64, kmax=20, seed=11))
    c = band_limited(spec64, kmax=25, seed=12).values
    a = _kernels.flux_tendency_numpy(c, U.face_x, U.face_y, spec64.dx, spec64.dy, degree, penalty)
    b = _kernels.flux_tendency_numba(c, U.face_x, U.face_y, spec64.dx, spec64.dy, degree, penalty)
    assert np.abs(a - b).max() <= 1e-13 * max(1.0, np.abs(a).max())
