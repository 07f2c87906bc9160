import math
import warnings

import numpy as np
import pytest

from stqg.grid import Field, TorusSpec
from stqg.noise import ConstantMode, FourierMode, NoiseBasis, g_values, sample_path
from stqg.state import State
from stqg.stepper import (
    STATUS_BLOWUP,
    STATUS_COMPLETED,
    BlowUpError,
    ModelData,
    StepperConfig,
    Thresholds,
    run,
    ssprk3_combine,
    ssprk3_step,
    ssprk3_values,
    theta_R,
)
from stqg.cutoff import cutoff_profile

from conftest import band_limited


def smooth_state(spec, seed=0, amp=0.5):
    return State(band_limited(spec, kmax=4, seed=seed, amplitude=amp),
                 band_limited(spec, kmax=4, seed=seed + 1, amplitude=amp), spec.zeros())


def test_config_validation():
    for bad in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(ValueError):
            StepperConfig(dt=bad)
    with pytest.raises(ValueError):
        StepperConfig(dt=0.1, R=0.0)
    with pytest.raises(ValueError):
        StepperConfig(dt=0.1, theta_monitor="grad_b")


def test_cutoff_profile():
    assert cutoff_profile(0.0, 2.0) == 1.0
    assert cutoff_profile(2.0, 2.0) == 1.0
    assert cutoff_profile(3.0, 2.0) == 0.0
    assert cutoff_profile(10.0, 2.0) == 0.0
    assert cutoff_profile(2.5, 2.0) == pytest.approx(0.5, abs=1e-15)
    zs = np.linspace(2.0, 3.0, 101)
    vals = [cutoff_profile(z, 2.0) for z in zs]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert cutoff_profile(1e9, math.inf) == 1.0
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            cutoff_profile(1.0, bad)


def test_theta_R(spec32):
    st = smooth_state(spec32)
    assert theta_R(st, 1e6) == 1.0
    assert theta_R(st, 1e-6) == 0.0
    with pytest.raises(ValueError):
        theta_R(st, -1.0)


def test_identity_for_constant_state(spec32):
    one = np.ones(spec32.shape)
    st = State(Field(spec32, 2 * one), Field(spec32, -one), spec32.zeros())
    data = ModelData(spec32.zeros(), None, NoiseBasis([FourierMode((1, 1), 0.5)]))
    new = ssprk3_step(st, np.zeros(1), StepperConfig(dt=0.1), data)
    assert np.array_equal(new.b.values, st.b.values)
    assert np.array_equal(new.q.values, st.q.values)
    assert new.t == pytest.approx(0.1)


@pytest.mark.parametrize("z", [-1.0, -0.3, 0.2, 0.9])
def test_scalar_amplification_factor(z):
    dt, lam = 0.1, z / 0.1
    y = ssprk3_combine((1.0,), lambda g: (g[0] + dt * lam * g[0],))[0]
    assert y == pytest.approx(1 + z + z**2 / 2 + z**3 / 6, rel=1e-14)


def test_drift_off_matches_taylor_composition(spec32):
    basis = NoiseBasis([ConstantMode((0.7, -0.4))])
    data = ModelData(spec32.zeros(), None, basis)
    cfg = StepperConfig(dt=0.05, advection=False, bathymetry=False)
    st = smooth_state(spec32, seed=3)
    w = 0.23
    xi = data.noise_fields[0]

    def X(g):
        gb, gq = g_values(spec32, xi, g[0], g[1])
        return w * gb, w * gq

    g0 = (st.b.values, st.q.values)
    x1 = X(g0)
    x2 = X(x1)
    x3 = X(x2)
    expect = [g0[k] + x1[k] + x2[k] / 2 + x3[k] / 6 for k in range(2)]
    b, q, _ = ssprk3_values(spec32, st.b.values, st.q.values, [w], cfg, data)
    assert np.abs(b - expect[0]).max() < 1e-12
    assert np.abs(q - expect[1]).max() < 1e-12


def test_increment_shape_checked(spec32):
    data = ModelData(spec32.zeros(), None, NoiseBasis([ConstantMode((1, 0))]))
    st = smooth_state(spec32)
    with pytest.raises(ValueError):
        ssprk3_step(st, np.zeros(2), StepperConfig(dt=0.1), data)
    with pytest.raises(ValueError):
        ssprk3_step(st, [math.inf], StepperConfig(dt=0.1), data)


def test_non_finite_stage_raises(spec32):
    st = smooth_state(spec32)
    b = st.b.values * 1e306
    data = ModelData(spec32.zeros(), Field(spec32, np.cos(spec32.coords[1])))
    with np.errstate(all="ignore"), pytest.raises(BlowUpError) as exc:
        ssprk3_values(spec32, b, st.q.values * 1e306, None, StepperConfig(dt=10.0), data)
    assert exc.value.stage in (1, 2, 3)


def test_zero_step_run(spec32):
    st = smooth_state(spec32)
    res = run(st, None, StepperConfig(dt=0.01), ModelData(spec32.zeros()), n_steps=0)
    assert res.status == STATUS_COMPLETED and res.steps == 0
    assert res.snapshots == [(0, st)] and res.final is st
    assert len(res.records) == 1


def stochastic_setup(spec):
    basis = NoiseBasis([FourierMode((1, 0), 0.5), FourierMode((0, 1), 0.5, 0.3)])
    h = Field(spec, 0.3 * np.cos(spec.coords[1]))
    return ModelData(spec.zeros(), h, basis)


def test_reproducible_and_mass_conserving(spec32):
    data = stochastic_setup(spec32)
    st = smooth_state(spec32, seed=5)
    st = st.replace(b=st.b + 0.25)
    cfg = StepperConfig(dt=0.01)
    path = sample_path(3, 0, 40, cfg.dt, 2)
    a = run(st, path, cfg, data, snapshot_stride=10)
    b = run(st, path, cfg, data, snapshot_stride=10)
    assert [r.as_row() for r in a.records] == [r.as_row() for r in b.records]
    assert np.array_equal(a.final.b.values, b.final.b.values)
    assert [s for s, _ in a.snapshots] == [0, 10, 20, 30, 40]
    for r in a.records:
        assert abs(r.total_b - a.records[0].total_b) <= 1e-10 * np.abs(st.b.values).sum() * spec32.cell_area
        assert abs(r.total_q - a.records[0].total_q) <= 1e-10 * np.abs(st.q.values).sum() * spec32.cell_area
    # a different realization differs
    c = run(st, sample_path(3, 1, 40, cfg.dt, 2), cfg, data)
    assert not np.array_equal(a.final.b.values, c.final.b.values)


def test_run_stops_on_threshold(spec32):
    data = stochastic_setup(spec32)
    st = smooth_state(spec32, seed=5)
    cfg = StepperConfig(dt=0.01)
    path = sample_path(3, 0, 40, cfg.dt, 2)
    full = run(st, path, cfg, data)
    limit = full.records[20].bkm_integral
    res = run(st, path, cfg, data, thresholds=Thresholds(bkm_integral=limit))
    assert res.status == STATUS_BLOWUP
    assert res.blowup_step == 20 and res.steps == 20
    assert "bkm_integral" in res.blowup_reason
    assert res.snapshots[-1][0] == 20


def test_run_reports_non_finite_blowup(spec32):
    st = smooth_state(spec32)
    st = st.replace(b=st.b * 1e306, q=st.q * 1e306)
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run(st, None, StepperConfig(dt=1.0), ModelData(spec32.zeros()), n_steps=5,
                  thresholds=Thresholds(sobolev=math.inf))
    assert res.status == STATUS_BLOWUP
    assert res.blowup_step in (0, 1)


def test_cfl_warning(spec32):
    st = smooth_state(spec32, amp=5.0)
    with pytest.warns(RuntimeWarning, match="CFL"):
        run(st, None, StepperConfig(dt=1.0), ModelData(spec32.zeros()), n_steps=0)


def test_path_validation(spec32):
    data = stochastic_setup(spec32)
    st = smooth_state(spec32)
    with pytest.raises(ValueError):
        run(st, sample_path(0, 0, 4, 0.02, 2), StepperConfig(dt=0.01), data)
    with pytest.raises(ValueError):
        run(st, sample_path(0, 0, 4, 0.01, 1), StepperConfig(dt=0.01), data)
    with pytest.raises(ValueError):
        run(st, None, StepperConfig(dt=0.01), data, n_steps=3)
    with pytest.raises(ValueError):
        run(st, sample_path(0, 0, 4, 0.01, 2), StepperConfig(dt=0.01), data, n_steps=5)


def test_translation_equivariance(spec32):
    shift = (5, 3)

    def roll(f):
        return Field(spec32, np.roll(f.values, shift, axis=(0, 1)))

    basis = NoiseBasis([ConstantMode((0.8, 0.3))])
    h = Field(spec32, 0.3 * np.cos(spec32.coords[1]) + 0.2 * np.sin(spec32.coords[0]))
    f = band_limited(spec32, kmax=3, seed=9, amplitude=0.2)
    st = State(band_limited(spec32, kmax=4, seed=1), band_limited(spec32, kmax=4, seed=2), f)
    st_r = State(roll(st.b), roll(st.q), roll(f))
    cfg = StepperConfig(dt=0.01)
    path = sample_path(4, 0, 10, cfg.dt, 1)
    a = run(st, path, cfg, ModelData(f, h, basis)).final
    b = run(st_r, path, cfg, ModelData(roll(f), roll(h), basis)).final
    assert np.abs(roll(a.b).values - b.b.values).max() < 1e-12
    assert np.abs(roll(a.q).values - b.q.values).max() < 1e-12


def test_theta_gating_leaves_bathymetry_and_noise(spec32):
    data = stochastic_setup(spec32)
    st = smooth_state(spec32, seed=2)
    dw = np.array([0.05, -0.08])
    gated = ssprk3_values(spec32, st.b.values, st.q.values, dw, StepperConfig(dt=0.01, R=1e-9), data)
    off = ssprk3_values(spec32, st.b.values, st.q.values, dw,
                        StepperConfig(dt=0.01, advection=False), data)
    assert gated[2] == [0.0, 0.0, 0.0]
    assert np.array_equal(gated[0], off[0]) and np.array_equal(gated[1], off[1])
