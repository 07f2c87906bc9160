"""Mean-square local truncation order and the Stratonovich compatibility check.

Both experiments are Monte Carlo over Brownian paths keyed by
``(seed, path_id)``.  Paths are processed in fixed-size chunks whose partial
results are reduced in path order, so estimates do not depend on the number
of worker processes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .grid import TorusSpec
from .noise import g_values, sample_path
from .parallel import map_ordered
from .state import State
from .stepper import BlowUpError, ModelData, StepperConfig, ssprk3_combine, ssprk3_values

CHUNK = 64

STATUS_OK = "OK"
STATUS_INCONCLUSIVE = "INCONCLUSIVE"


def _chunks(n: int) -> list[range]:
    return [range(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]


def _sq_l2(spec: TorusSpec, *arrays) -> float:
    return float(sum(np.sum(a * a) for a in arrays) * spec.cell_area)


# -- local error ----------------------------------------------------------------


@dataclass(frozen=True)
class ErrorRow:
    dt: float
    mean_sq_error: float
    stderr: float
    n_effective: int
    n_excluded: int = 0

    @property
    def excluded_fraction(self) -> float:
        total = self.n_effective + self.n_excluded
        return self.n_excluded / total if total else 0.0


def _local_error_one(spec, b, q, dt, level, seed, pid, cfg, data, zero_noise):
    path = sample_path(seed, pid, 1, dt, data.n_noise, level)
    coarse_dw = path.coarsened(0)[:, 0]
    fine = path.increments
    if zero_noise:
        coarse_dw = np.zeros_like(coarse_dw)
        fine = np.zeros_like(fine)
    try:
        bc, qc, _ = ssprk3_values(spec, b, q, coarse_dw, cfg, data)
        fine_cfg = replace(cfg, dt=dt / 2**level)
        bf, qf = b, q
        for p in range(fine.shape[1]):
            bf, qf, _ = ssprk3_values(spec, bf, qf, fine[:, p], fine_cfg, data)
    except BlowUpError:
        return None
    err = _sq_l2(spec, bc - bf, qc - qf)
    return err if math.isfinite(err) else None


def _local_error_chunk(args):
    ids, spec, b, q, dt, level, seed, cfg, data, zero_noise = args
    return [_local_error_one(spec, b, q, dt, level, seed, pid, cfg, data, zero_noise) for pid in ids]


def local_error_samples(
    init: State,
    data: ModelData,
    dt_list,
    n_paths: int,
    ref_level: int = 4,
    seed: int = 0,
    cfg: StepperConfig | None = None,
    zero_noise: bool = False,
    workers: int | None = 1,
) -> list[ErrorRow]:
    """Mean-square one-step error ``E(||b_1 - b_ref||^2 + ||q_1 - q_ref||^2)``.

    For every ``dt`` and path, one coarse step with ``dW`` equal to the sum of
    the fine increments is compared with ``2**ref_level`` fine steps on the
    same refined path.  Samples that blow up are excluded and counted.
    """
    dts = [float(d) for d in dt_list]
    if not dts:
        raise ValueError("dt_list is empty")
    for a, b_ in zip(dts, dts[1:]):
        if not math.isclose(a, 2.0 * b_, rel_tol=1e-12):
            raise ValueError(f"dt_list must be dyadic (each entry half the previous), got {dts}")
    if ref_level < 4:
        raise ValueError(f"ref_level must be >= 4, got {ref_level}")
    if n_paths < 1:
        raise ValueError("n_paths must be positive")
    cfg = cfg or StepperConfig(dt=dts[0])
    spec = init.spec
    rows = []
    for dt in dts:
        step_cfg = replace(cfg, dt=dt)
        jobs = [(ids, spec, init.b.values, init.q.values, dt, ref_level, seed, step_cfg, data, zero_noise)
                for ids in _chunks(n_paths)]
        samples = [e for part in map_ordered(_local_error_chunk, jobs, workers) for e in part]
        good = np.array([e for e in samples if e is not None])
        n_ok = good.size
        mean = float(good.mean()) if n_ok else math.nan
        stderr = float(good.std(ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else math.nan
        rows.append(ErrorRow(dt, mean, stderr, n_ok, n_paths - n_ok))
    return rows


def _scalar_step(y, dt, dw, lam, sigma):
    def stage(g):
        return (g[0] + dt * lam * g[0] + dw * sigma * g[0],)
    return ssprk3_combine((y,), stage)[0]


def scalar_local_errors(
    dt_list,
    n_paths: int,
    lam: float = -1.0,
    sigma: float = 0.0,
    ref_level: int = 4,
    seed: int = 0,
    zero_noise: bool = False,
) -> list[ErrorRow]:
    """Local error of the scalar surrogate ``dy = lam y dt + sigma y o dW``, ``y(0) = 1``.

    Uses the same stage combination and path coupling as
    :func:`local_error_samples`.  Without noise the error is ``O(dt^4)``, so the
    mean-square slope is 8.
    """
    dts = [float(d) for d in dt_list]
    rows = []
    for dt in dts:
        errs = []
        for pid in range(n_paths):
            path = sample_path(seed, pid, 1, dt, 1, ref_level)
            fine = np.zeros_like(path.increments[0]) if zero_noise else path.increments[0]
            coarse = 0.0 if zero_noise else float(path.coarsened(0)[0, 0])
            yc = _scalar_step(1.0, dt, coarse, lam, sigma)
            yf = 1.0
            for w in fine:
                yf = _scalar_step(yf, dt / 2**ref_level, w, lam, sigma)
            errs.append((yc - yf) ** 2)
        errs = np.array(errs)
        stderr = float(errs.std(ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else math.nan
        rows.append(ErrorRow(dt, float(errs.mean()), stderr, n_paths, 0))
    return rows


# -- order fit --------------------------------------------------------------------


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float

    def contains(self, value: float, slack: float = 1e-9) -> bool:
        # exact power laws give a degenerate interval; allow round-off
        return self.ci_low - slack <= value <= self.ci_high + slack


def _ls_slope(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def fit_order(table, n_boot: int = 2000, level: float = 0.95, seed: int = 12345) -> OrderFit:
    """Least-squares slope of ``log E`` against ``log dt`` with a bootstrap CI.

    ``table`` holds rows with ``dt`` and ``mean_sq_error`` (and optionally
    ``stderr``), or ``(dt, value)`` pairs.  With standard errors available the
    bootstrap perturbs each point by its own error; otherwise log-residuals
    are resampled.
    """
    dts, vals, errs = [], [], []
    for row in table:
        if isinstance(row, (tuple, list)):
            dts.append(float(row[0]))
            vals.append(float(row[1]))
            errs.append(float(row[2]) if len(row) > 2 else math.nan)
        else:
            dts.append(float(row.dt))
            vals.append(float(getattr(row, "mean_sq_error", getattr(row, "residual", math.nan))))
            errs.append(float(getattr(row, "stderr", math.nan)))
    dts, vals, errs = np.array(dts), np.array(vals), np.array(errs)
    if len(dts) < 3:
        raise ValueError(f"need at least 3 dt points, got {len(dts)}")
    if not (np.all(np.isfinite(vals)) and np.all(vals > 0) and np.all(dts > 0)):
        raise ValueError("degenerate table: values and dt must be positive and finite")
    if np.unique(dts).size < 2:
        raise ValueError("degenerate table: all dt values coincide")
    x, y = np.log(dts), np.log(vals)
    slope, intercept = _ls_slope(x, y)
    rng = np.random.default_rng(seed)
    boot = np.empty(n_boot)
    if np.all(np.isfinite(errs)) and np.all(errs > 0):
        sigma = np.minimum(errs / vals, 1.0)
        for k in range(n_boot):
            boot[k] = _ls_slope(x, y + sigma * rng.standard_normal(y.size))[0]
    else:
        fitted = intercept + slope * x
        resid = y - fitted
        # scale residuals to undo the fit's shrinkage
        resid = resid * math.sqrt(y.size / max(y.size - 2, 1))
        for k in range(n_boot):
            boot[k] = _ls_slope(x, fitted + rng.choice(resid, y.size))[0]
    tail = 50.0 * (1.0 - level)
    lo, hi = np.percentile(boot, [tail, 100.0 - tail])
    return OrderFit(slope, intercept, float(lo), float(hi))


# -- Stratonovich compatibility -----------------------------------------------------


@dataclass(frozen=True)
class CompatRow:
    dt: float
    residual: float
    stderr: float
    n_effective: int
    status: str


def _compat_chunk(args):
    ids, spec, b, q, dt, seed, cfg, data = args
    n = spec.shape
    s1 = np.zeros((2,) + n)
    s2 = np.zeros((2,) + n)
    fields = data.noise_fields
    penalty = cfg.transport.noise_penalty
    gb0 = [g_values(spec, xi, b, q, "flux", penalty) for xi in fields]
    for pid in ids:
        dw = sample_path(seed, pid, 1, dt, data.n_noise).increments[:, 0]
        nb, nq, _ = ssprk3_values(spec, b, q, dw, cfg, data)
        sb, sq = nb - b, nq - q
        # control variate: the dW-linear term has mean zero
        for w, (gb, gq) in zip(dw, gb0):
            sb = sb - w * gb
            sq = sq - w * gq
        s1[0] += sb
        s1[1] += sq
        s2[0] += sb * sb
        s2[1] += sq * sq
    return s1, s2


def stratonovich_compat(
    state: State,
    dt: float,
    n_paths: int,
    data: ModelData,
    seed: int = 0,
    cfg: StepperConfig | None = None,
    workers: int | None = 1,
) -> CompatRow:
    """Residual ``||E[S_dt g] - dt/2 sum_i G_i G_i g||_2`` by Monte Carlo.

    ``S_dt`` is one SSPRK3 step with the drift switched off, minus the
    identity.  The ``dW``-linear term is subtracted pathwise.  The status is
    ``INCONCLUSIVE`` when the Monte Carlo standard error exceeds the residual.
    """
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    spec = state.spec
    cfg = replace(cfg or StepperConfig(dt=dt), dt=dt, advection=False, bathymetry=False)
    b, q = state.b.values, state.q.values
    if data.n_noise == 0:
        return CompatRow(dt, 0.0, 0.0, n_paths, STATUS_OK)
    jobs = [(ids, spec, b, q, dt, seed, cfg, data) for ids in _chunks(n_paths)]
    s1 = np.zeros((2,) + spec.shape)
    s2 = np.zeros((2,) + spec.shape)
    for p1, p2 in map_ordered(_compat_chunk, jobs, workers):
        s1 += p1
        s2 += p2
    mean = s1 / n_paths
    var = np.maximum(s2 / n_paths - mean * mean, 0.0) * n_paths / (n_paths - 1)
    target = np.zeros_like(mean)
    penalty = cfg.transport.noise_penalty
    for xi in data.noise_fields:
        gb, gq = g_values(spec, xi, b, q, "flux", penalty)
        ggb, ggq = g_values(spec, xi, gb, gq, "flux", penalty)
        target[0] += 0.5 * dt * ggb
        target[1] += 0.5 * dt * ggq
    residual = math.sqrt(_sq_l2(spec, *(mean - target)))
    stderr = math.sqrt(float(np.sum(var)) * spec.cell_area / n_paths)
    status = STATUS_INCONCLUSIVE if stderr > residual else STATUS_OK
    return CompatRow(dt, residual, stderr, n_paths, status)


def stratonovich_ladder(state, dt_list, n_paths, data, seed=0, cfg=None, workers=1) -> list[CompatRow]:
    return [stratonovich_compat(state, dt, n_paths, data, seed, cfg, workers) for dt in dt_list]


# -- output ---------------------------------------------------------------------


ERROR_COLUMNS = ("dt", "mean_sq_error", "stderr", "n_effective")
COMPAT_COLUMNS = ("dt", "residual", "stderr", "n_effective", "status")


def write_table(path, rows, header_comment: str | None = None) -> None:
    columns = COMPAT_COLUMNS if rows and isinstance(rows[0], CompatRow) else ERROR_COLUMNS
    with open(path, "w", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in columns])


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else v

