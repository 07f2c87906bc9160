"""Command line front end: ``stqg run | consistency | diagnose``.

Exit codes: 0 on completion (blow-up terminations included), 2 on
configuration errors, 3 on IO errors and malformed snapshots.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import warnings
from importlib import metadata
from pathlib import Path

import numpy as np

from . import _kernels, consistency, snapshot
from .config import ConfigError, RunConfig
from .diagnostics import CSV_COLUMNS, bkm_monitors, casimir, CASIMIR_SET, energy
from .grid import sobolev_norm
from .noise import sample_path
from .parallel import map_ordered
from .state import State
from .stepper import run as run_trajectory

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

log = logging.getLogger("stqg")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def build_id() -> str:
    """Hash of the package sources; identifies the code that produced a run."""
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def _versions() -> dict:
    out = {"python": ".".join(map(str, sys.version_info[:3])), "numpy": np.__version__}
    for name in ("stqg", "numba"):
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = None
    return out


# -- run ----------------------------------------------------------------------------


def _run_realization(args):
    cfg, rid, out_dir = args
    state, data = cfg.build()
    t = cfg["time"]
    stepper_cfg = cfg.stepper_config()
    path = None
    if cfg.n_noise:
        path = sample_path(cfg["run"]["seed"], rid, t["n_steps"], t["dt"], cfg.n_noise)
    rdir = Path(out_dir) / f"r{rid:04d}"
    rdir.mkdir(parents=True, exist_ok=True)
    files = []

    def on_snapshot(step, st):
        pb, pq = snapshot.write_state(rdir / f"snap_{step:06d}", st)
        files.extend([str(pb.relative_to(out_dir)), str(pq.relative_to(out_dir))])

    diag_enabled = cfg["diagnostics"]["enabled"]
    csv_path = rdir / "diagnostics.csv"
    fh = open(csv_path, "w", newline="") if diag_enabled else None
    try:
        writer = None
        if fh is not None:
            fh.write(f"# config_hash={cfg.config_hash()}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)

        def on_record(rec):
            if writer is not None:
                row = rec.as_row()
                writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RuntimeWarning)
            result = run_trajectory(
                state,
                path,
                stepper_cfg,
                data,
                n_steps=t["n_steps"],
                snapshot_stride=t["snapshot_stride"],
                thresholds=cfg.thresholds(),
                cfl_max=cfg["diagnostics"]["cfl_max"],
                on_record=on_record,
                on_snapshot=on_snapshot,
            )
        for w in caught:
            log.warning("realization %d: %s", rid, w.message)
    finally:
        if fh is not None:
            fh.close()
    last = result.records[-1]
    return {
        "realization": rid,
        "status": result.status,
        "steps": result.steps,
        "blowup_step": result.blowup_step,
        "blowup_reason": result.blowup_reason,
        "bkm_integral": last.bkm_integral,
        "cfl": result.cfl,
        "diagnostics": str(csv_path.relative_to(out_dir)) if diag_enabled else None,
        "snapshots": files,
    }


def cmd_run(args) -> int:
    cfg = RunConfig.load(args.config)
    overrides = {}
    if args.realizations is not None:
        overrides["n_realizations"] = args.realizations
    if args.out is not None:
        overrides["output_dir"] = args.out
    if overrides:
        cfg = cfg.with_overrides(run=overrides)
    out_dir = Path(cfg["run"]["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.toml").write_text(cfg.to_toml())
    jobs = [(cfg, rid, str(out_dir)) for rid in range(cfg["run"]["n_realizations"])]
    summaries = map_ordered(_run_realization, jobs, args.workers)
    manifest = {
        "config_hash": cfg.config_hash(),
        "build_id": build_id(),
        "backend": _kernels.BACKEND,
        "versions": _versions(),
        "seed": cfg["run"]["seed"],
        "n_noise": cfg.n_noise,
        "n_realizations": len(jobs),
        "realizations": summaries,
    }
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    for s in summaries:
        extra = f" at step {s['blowup_step']} ({s['blowup_reason']})" if s["status"] == "BLOWUP" else ""
        print(f"realization {s['realization']}: {s['status']} after {s['steps']} steps{extra}")
    print(f"manifest: {out_dir / 'manifest.json'}")
    return EXIT_OK


def _json_default(v):
    if isinstance(v, float):
        return repr(v)
    raise TypeError(f"not JSON serialisable: {v!r}")


# -- consistency ----------------------------------------------------------------------


def cmd_consistency(args) -> int:
    cfg = RunConfig.load(args.config)
    c = cfg["consistency"]
    state, data = cfg.build()
    seed = cfg["run"]["seed"] or 0
    out = Path(args.out) if args.out else Path(cfg["run"]["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    stepper_cfg = cfg.stepper_config()
    header = f"config_hash={cfg.config_hash()} mode={args.mode}"
    if args.mode == "local-order":
        if c["surrogate"] == "scalar":
            rows = consistency.scalar_local_errors(
                c["dt_list"], c["n_paths"], c["surrogate_lambda"], c["surrogate_sigma"],
                c["ref_level"], seed, c["zero_noise"],
            )
        else:
            rows = consistency.local_error_samples(
                state, data, c["dt_list"], c["n_paths"], c["ref_level"], seed, stepper_cfg,
                zero_noise=c["zero_noise"], workers=args.workers,
            )
        csv_path = out / "local_order.csv"
        consistency.write_table(csv_path, rows, header)
        for r in rows:
            print(f"dt={r.dt:.6g} mean_sq_error={r.mean_sq_error:.6e} stderr={r.stderr:.3e} "
                  f"n_effective={r.n_effective} excluded={r.n_excluded}")
        fit = consistency.fit_order(rows)
        excluded = sum(r.n_excluded for r in rows) / sum(r.n_effective + r.n_excluded for r in rows)
        print(f"mean_square_slope={fit.slope:.4f} ci=[{fit.ci_low:.4f}, {fit.ci_high:.4f}]")
        print(f"local_order={fit.slope / 2:.4f}")
        print(f"excluded_fraction={excluded:.4f}")
    else:
        rows = consistency.stratonovich_ladder(
            state, c["dt_list"], c["compat_paths"], data, seed, stepper_cfg, workers=args.workers
        )
        csv_path = out / "strat_compat.csv"
        consistency.write_table(csv_path, rows, header)
        for r in rows:
            print(f"dt={r.dt:.6g} residual={r.residual:.6e} stderr={r.stderr:.3e} "
                  f"n_effective={r.n_effective} status={r.status}")
        if all(r.residual == 0.0 for r in rows):
            print("residual=0")
        elif len(rows) >= 3 and all(r.residual > 0 for r in rows):
            fit = consistency.fit_order(rows)
            print(f"residual_slope={fit.slope:.4f} ci=[{fit.ci_low:.4f}, {fit.ci_high:.4f}]")
        inconclusive = any(r.status == consistency.STATUS_INCONCLUSIVE for r in rows)
        status = consistency.STATUS_INCONCLUSIVE if inconclusive else consistency.STATUS_OK
        print(f"status={status}")
        if inconclusive:
            print(f"hint: increase consistency.compat_paths (currently {c['compat_paths']})")
    print(f"table: {csv_path}")
    return EXIT_OK


# -- diagnose ---------------------------------------------------------------------


def _pair(path: Path) -> tuple[Path, Path]:
    name = path.name
    for suffix in ("_b.fld", "_q.fld"):
        if name.endswith(suffix):
            return snapshot.state_paths(path.with_name(name[: -len(suffix)]))
    return snapshot.state_paths(path)


def diagnose_state(state: State, h=None) -> dict:
    sgb, sgu, sq = bkm_monitors(state)
    out = {
        "energy": energy(state, h),
        "sup_grad_b": sgb,
        "sup_grad_u": sgu,
        "sup_q": sq,
        "sobolev_b3": sobolev_norm(state.b, 3.0),
        "sobolev_q2": sobolev_norm(state.q, 2.0),
    }
    out.update({k: casimir(state, phi, psi) for k, (phi, psi) in CASIMIR_SET.items()})
    return out


def cmd_diagnose(args) -> int:
    h = f = None
    if args.config:
        cfg = RunConfig.load(args.config)
        _, _, h, f = cfg.fields()
    seen = []
    for p in args.snapshot:
        pair = _pair(Path(p))
        if pair not in seen:
            seen.append(pair)
    rows = []
    for pb, pq in seen:
        b = snapshot.read_field(pb)
        q = snapshot.read_field(pq)
        if b.spec != q.spec:
            raise snapshot.SnapshotError(f"{pb} and {pq} have different grids")
        ff = f if f is not None and f.spec == b.spec else b.spec.zeros()
        hh = h if h is not None and h.spec == b.spec else None
        d = diagnose_state(State(b, q, ff), hh)
        d = {"snapshot": str(pb.with_name(pb.name[: -len("_b.fld")])), **d}
        rows.append(d)
        print(json.dumps(d, default=_json_default))
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            cols = list(rows[0]) if rows else []
            w.writerow(cols)
            for d in rows:
                w.writerow([_fmt(d[c]) for c in cols])
    return EXIT_OK


# -- entry point --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stqg", description="Stochastic thermal QG simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate an ensemble of realizations")
    p.add_argument("--config", required=True)
    p.add_argument("--realizations", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, help="worker processes (capped by STQG_THREADS)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("consistency", help="local-order or Stratonovich compatibility study")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", required=True, choices=("local-order", "strat-compat"))
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("diagnose", help="diagnostics of snapshot files")
    p.add_argument("--snapshot", nargs="+", required=True)
    p.add_argument("--config", help="config supplying h and f")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, snapshot.SnapshotError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
