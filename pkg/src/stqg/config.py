"""Run configuration: TOML parsing, validation and model construction.

A minimal file::

    [grid]
    nx = 64
    ny = 64

    [time]
    dt = 0.005
    n_steps = 200

    [initial]
    preset = "bathymetry_front"

Fields given explicitly are lists of Fourier modes
``{k = [m1, m2], amplitude = a, phase = p}`` meaning ``a cos(k.x + p)``
summed over the list.  Noise modes are either such Fourier entries, whose
stream function is ``a cos(k.x + p)``, or constant velocities ``{v = [vx, vy]}``.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass

import numpy as np
import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .grid import Field, TWO_PI, TorusSpec
from .noise import ConstantMode, FourierMode, NoiseBasis
from .state import State
from .stepper import ModelData, StepperConfig, Thresholds
from .transport import TransportConfig


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


_MISSING = object()

# section -> key -> default (``_MISSING`` marks required keys)
SCHEMA = {
    "grid": {"nx": _MISSING, "ny": _MISSING, "length_x": TWO_PI, "length_y": TWO_PI},
    "time": {
        "dt": _MISSING,
        "n_steps": _MISSING,
        "snapshot_stride": 0,
        "R": math.inf,
        "theta_monitor": "q",
    },
    "transport": {"reconstruction_degree": 1, "noise_flux": "central"},
    "initial": {
        "preset": None,
        "amplitude": 1.0,
        "sharpness": 3.0,
        "h_amplitude": 0.5,
        "perturbation": 0.05,
        "b0": None,
        "q0": None,
        "h": None,
        "f": None,
    },
    "noise": {"modes": []},
    "run": {"seed": None, "n_realizations": 1, "output_dir": "stqg_out"},
    "diagnostics": {
        "enabled": True,
        "bkm_threshold": math.inf,
        "sobolev_threshold": 1e6,
        "cfl_max": 0.4,
    },
    "consistency": {
        "dt_list": [1e-2, 5e-3, 2.5e-3, 1.25e-3],
        "n_paths": 200,
        "ref_level": 4,
        "compat_paths": 10000,
        "zero_noise": False,
        "surrogate": None,
        "surrogate_lambda": -1.0,
        "surrogate_sigma": 0.0,
    },
}

REQUIRED_SECTIONS = ("grid", "time", "initial")
PRESETS = ("bathymetry_front",)


def _float(v, key):
    if isinstance(v, str) and v.strip().lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    return float(v)


def _int(v, key, minimum=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {v}")
    return v


def _modes(raw, key, allow_constant=False):
    if raw is None:
        return None
    if not isinstance(raw, list):
        raise ConfigError(f"{key}: expected a list of modes")
    out = []
    for j, m in enumerate(raw):
        where = f"{key}[{j}]"
        if not isinstance(m, dict):
            raise ConfigError(f"{where}: expected a table")
        unknown = set(m) - {"k", "amplitude", "phase", "v", "kind"}
        if unknown:
            raise ConfigError(f"{where}: unknown key {sorted(unknown)[0]!r}")
        kind = m.get("kind", "constant" if "v" in m else "fourier")
        if kind == "constant":
            if not allow_constant:
                raise ConfigError(f"{where}: constant modes are only allowed in noise.modes")
            if "v" not in m:
                raise ConfigError(f"{where}.v: missing")
            v = m["v"]
            if not (isinstance(v, list) and len(v) == 2):
                raise ConfigError(f"{where}.v: expected two numbers")
            out.append({"kind": "constant", "v": [_float(c, f"{where}.v") for c in v]})
        elif kind == "fourier":
            for req in ("k", "amplitude"):
                if req not in m:
                    raise ConfigError(f"{where}.{req}: missing")
            k = m["k"]
            if not (isinstance(k, list) and len(k) == 2):
                raise ConfigError(f"{where}.k: expected two integers")
            entry = {
                "k": [_int(c, f"{where}.k") for c in k],
                "amplitude": _float(m["amplitude"], f"{where}.amplitude"),
                "phase": _float(m.get("phase", 0.0), f"{where}.phase"),
            }
            if allow_constant:
                entry["kind"] = "fourier"
            out.append(entry)
        else:
            raise ConfigError(f"{where}.kind: unknown kind {kind!r}")
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``data`` holds every section with defaults filled in."""

    data: dict

    # -- construction -----------------------------------------------------------

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a table")
        unknown = set(raw) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown section {sorted(unknown)[0]!r}")
        for sec in REQUIRED_SECTIONS:
            if sec not in raw:
                raise ConfigError(f"missing section [{sec}]")
        data = {}
        for sec, defaults in SCHEMA.items():
            given = raw.get(sec, {})
            if not isinstance(given, dict):
                raise ConfigError(f"[{sec}] must be a table")
            extra = set(given) - set(defaults)
            if extra:
                raise ConfigError(f"{sec}.{sorted(extra)[0]}: unknown key")
            section = {}
            for key, default in defaults.items():
                if key in given:
                    section[key] = given[key]
                elif default is _MISSING:
                    raise ConfigError(f"{sec}.{key}: missing required key")
                else:
                    section[key] = copy.deepcopy(default)
            data[sec] = section
        return cls(_normalise(data))

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"TOML syntax error: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, "rb") as fh:
            text = fh.read().decode("utf-8")
        return cls.from_toml(text)

    def to_toml(self) -> str:
        return tomli_w.dumps(_strip_none(self.data))

    def config_hash(self) -> str:
        """Hash of every setting that can change results (the output location cannot)."""
        data = copy.deepcopy(self.data)
        del data["run"]["output_dir"]
        canon = json.dumps(data, sort_keys=True, default=repr, allow_nan=True)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def __getitem__(self, section):
        return self.data[section]

    def with_overrides(self, **sections) -> "RunConfig":
        raw = copy.deepcopy(_strip_none(self.data))
        for sec, values in sections.items():
            raw.setdefault(sec, {}).update(values)
        return RunConfig.from_dict(raw)

    # -- model construction ---------------------------------------------------------

    @property
    def spec(self) -> TorusSpec:
        g = self.data["grid"]
        return TorusSpec(g["nx"], g["ny"], g["length_x"], g["length_y"])

    @property
    def basis(self) -> NoiseBasis:
        modes = []
        for m in self.data["noise"]["modes"]:
            if m["kind"] == "constant":
                modes.append(ConstantMode(tuple(m["v"])))
            else:
                modes.append(FourierMode(tuple(m["k"]), m["amplitude"], m["phase"]))
        return NoiseBasis(tuple(modes))

    @property
    def n_noise(self) -> int:
        return len(self.data["noise"]["modes"])

    def stepper_config(self) -> StepperConfig:
        t = self.data["time"]
        tr = self.data["transport"]
        return StepperConfig(
            dt=t["dt"],
            R=t["R"],
            theta_monitor=t["theta_monitor"],
            transport=TransportConfig(
                reconstruction_degree=tr["reconstruction_degree"], noise_flux=tr["noise_flux"]
            ),
        )

    def thresholds(self) -> Thresholds:
        d = self.data["diagnostics"]
        return Thresholds(d["bkm_threshold"], d["sobolev_threshold"])

    def fields(self) -> tuple[Field, Field, Field | None, Field]:
        """``(b0, q0, h, f)``; ``h`` is ``None`` when no bathymetry is configured."""
        spec = self.spec
        ini = self.data["initial"]
        if ini["preset"] == "bathymetry_front":
            b0, q0, h, f = bathymetry_front(
                spec, ini["amplitude"], ini["sharpness"], ini["h_amplitude"], ini["perturbation"]
            )
        else:
            b0 = mode_field(spec, ini["b0"] or [])
            q0 = mode_field(spec, ini["q0"] or [])
            h = None
            f = spec.zeros()
        if ini["h"] is not None:
            h = mode_field(spec, ini["h"])
        if ini["f"] is not None:
            f = mode_field(spec, ini["f"])
        return b0, q0, h, f

    def build(self) -> tuple[State, ModelData]:
        b0, q0, h, f = self.fields()
        return State(b0, q0, f, 0.0), ModelData(f, h, self.basis)


def _normalise(data: dict) -> dict:
    g = data["grid"]
    g["nx"] = _int(g["nx"], "grid.nx", 4)
    g["ny"] = _int(g["ny"], "grid.ny", 4)
    for key in ("length_x", "length_y"):
        g[key] = _float(g[key], f"grid.{key}")
    try:
        TorusSpec(g["nx"], g["ny"], g["length_x"], g["length_y"])
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    t = data["time"]
    t["dt"] = _float(t["dt"], "time.dt")
    if not (t["dt"] > 0 and math.isfinite(t["dt"])):
        raise ConfigError(f"time.dt: must be positive, got {t['dt']}")
    t["n_steps"] = _int(t["n_steps"], "time.n_steps", 0)
    t["snapshot_stride"] = _int(t["snapshot_stride"], "time.snapshot_stride", 0)
    t["R"] = _float(t["R"], "time.R")
    if not t["R"] > 0:
        raise ConfigError(f"time.R: must be positive, got {t['R']}")
    if t["theta_monitor"] not in ("q", "grad_q"):
        raise ConfigError(f"time.theta_monitor: expected 'q' or 'grad_q', got {t['theta_monitor']!r}")

    tr = data["transport"]
    tr["reconstruction_degree"] = _int(tr["reconstruction_degree"], "transport.reconstruction_degree")
    if tr["reconstruction_degree"] not in (0, 1):
        raise ConfigError("transport.reconstruction_degree: must be 0 or 1")
    if tr["noise_flux"] not in ("central", "upwind"):
        raise ConfigError(f"transport.noise_flux: unknown flux {tr['noise_flux']!r}")

    ini = data["initial"]
    if ini["preset"] is not None and ini["preset"] not in PRESETS:
        raise ConfigError(f"initial.preset: unknown preset {ini['preset']!r}")
    for key in ("amplitude", "sharpness", "h_amplitude", "perturbation"):
        ini[key] = _float(ini[key], f"initial.{key}")
    for key in ("b0", "q0", "h", "f"):
        ini[key] = _modes(ini[key], f"initial.{key}")
    if ini["preset"] is None:
        for key in ("b0", "q0"):
            if ini[key] is None:
                raise ConfigError(f"initial.{key}: missing (required without a preset)")

    data["noise"]["modes"] = _modes(data["noise"]["modes"], "noise.modes", allow_constant=True)

    run = data["run"]
    if run["seed"] is not None:
        run["seed"] = _int(run["seed"], "run.seed", 0)
    elif data["noise"]["modes"]:
        raise ConfigError("run.seed: missing (required when noise modes are configured)")
    run["n_realizations"] = _int(run["n_realizations"], "run.n_realizations", 1)
    if not isinstance(run["output_dir"], str):
        raise ConfigError("run.output_dir: expected a string")

    d = data["diagnostics"]
    if not isinstance(d["enabled"], bool):
        raise ConfigError("diagnostics.enabled: expected true or false")
    for key in ("bkm_threshold", "sobolev_threshold", "cfl_max"):
        d[key] = _float(d[key], f"diagnostics.{key}")

    c = data["consistency"]
    if not isinstance(c["dt_list"], list) or not c["dt_list"]:
        raise ConfigError("consistency.dt_list: expected a non-empty list")
    c["dt_list"] = [_float(v, "consistency.dt_list") for v in c["dt_list"]]
    c["n_paths"] = _int(c["n_paths"], "consistency.n_paths", 1)
    c["ref_level"] = _int(c["ref_level"], "consistency.ref_level", 4)
    c["compat_paths"] = _int(c["compat_paths"], "consistency.compat_paths", 2)
    if not isinstance(c["zero_noise"], bool):
        raise ConfigError("consistency.zero_noise: expected true or false")
    if c["surrogate"] not in (None, "scalar"):
        raise ConfigError(f"consistency.surrogate: unknown surrogate {c['surrogate']!r}")
    for key in ("surrogate_lambda", "surrogate_sigma"):
        c[key] = _float(c[key], f"consistency.{key}")
    return data


def _strip_none(d):
    if isinstance(d, dict):
        return {k: _strip_none(v) for k, v in d.items() if v is not None}
    if isinstance(d, list):
        return [_strip_none(v) for v in d]
    return d


def mode_field(spec: TorusSpec, modes) -> Field:
    """``sum a cos(k.x + p)`` over a list of mode tables."""
    x, y = spec.coords
    out = np.zeros(spec.shape)
    for m in modes:
        kx = TWO_PI * m["k"][0] / spec.length_x
        ky = TWO_PI * m["k"][1] / spec.length_y
        out += m["amplitude"] * np.cos(kx * x + ky * y + m.get("phase", 0.0))
    return Field(spec, out)


def bathymetry_front(spec: TorusSpec, amplitude=1.0, sharpness=3.0, h_amplitude=0.5,
                     perturbation=0.05) -> tuple[Field, Field, Field, Field]:
    """A smooth buoyancy front over sloping bathymetry, fluid initially at rest.

    ``b0 = A tanh(s sin x) (1 + p cos 3y)``, ``q0 = f = 0`` and ``h = H cos y``.
    PV is created where the front and the bathymetry gradient are misaligned.
    """
    x, y = spec.coords
    kx = TWO_PI / spec.length_x
    ky = TWO_PI / spec.length_y
    b0 = amplitude * np.tanh(sharpness * np.sin(kx * x)) * (1.0 + perturbation * np.cos(3 * ky * y))
    h = h_amplitude * np.cos(ky * y)
    zero = spec.zeros()
    return Field(spec, b0), zero, Field(spec, h), zero
