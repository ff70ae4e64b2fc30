"""Run configuration: flat ``key = value`` files with JSON values.

Complex numbers are written as ``[re, im]`` pairs, so a complex vector is a
list of pairs and a complex matrix a list of rows of pairs.  Plain real
numbers are accepted wherever a complex value is expected.  Lines starting
with ``#`` or ``;`` are comments.  A ``manifest.json`` written by a previous
run is also accepted and reproduces that run.
"""
from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, ValidationError
from .fpd import NoiseIdealSpec
from .lindblad import PRESETS, SystemSpec, preset, projector_row

SECTION = "run"

DEFAULTS = {
    "sigma": 1e-10,
    "g": 1e-6,
    "u_r": 1.0,
    "o_d": 1.0,
    "x_e": None,
    "d_row": None,
    "horizon": 10000,
    "ensemble_size": 1000,
    "seed": 0,
    "stop_fidelity": 0.999,
    "dwell": 100,
    "solver_tol": 1e-9,
    "noise_passes": "converge",
    "sample_control": False,
    "output_dir": "out",
}


def _complex_array(value, name, ndim: int = 1) -> np.ndarray:
    """Decode a complex vector (``ndim=1``) or matrix (``ndim=2``).

    Entries are plain numbers or ``[re, im]`` pairs.
    """
    def entry(v):
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return complex(v)
        if isinstance(v, list) and len(v) == 2 and all(
                isinstance(c, (int, float)) and not isinstance(c, bool) for c in v):
            return complex(v[0], v[1])
        raise ValidationError(f"{name}: cannot read {v!r} as a number or [re, im] pair",
                              field=name)

    def vector(v):
        if not isinstance(v, list) or not v:
            raise ValidationError(f"{name}: expected a non-empty list", field=name)
        return [entry(e) for e in v]

    if ndim == 1:
        return np.array(vector(value), dtype=complex)
    if not isinstance(value, list) or not value:
        raise ValidationError(f"{name}: expected a list of rows", field=name)
    rows = [vector(r) for r in value]
    if len({len(r) for r in rows}) != 1:
        raise ValidationError(f"{name}: rows have different lengths", field=name)
    return np.array(rows, dtype=complex)


def _encode_complex(arr):
    arr = np.asarray(arr, dtype=complex)
    if arr.ndim == 0:
        return [float(arr.real), float(arr.imag)]
    return [_encode_complex(a) for a in arr]


def _real_matrix(value, name, size=None) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.shape == (1, 1) and size:
        arr = arr[0, 0] * np.eye(size)
    if size and arr.shape != (size, size):
        raise ValidationError(f"{name} has shape {arr.shape}, expected {(size, size)}", field=name)
    return arr


@dataclass
class RunConfig:
    """Fully validated parameters for one optimization/testing run."""

    system: SystemSpec
    system_desc: dict
    dt: float
    horizon: int
    noise_ideal: NoiseIdealSpec
    x0: np.ndarray
    x_e: np.ndarray
    target: np.ndarray
    d_target: np.ndarray
    ensemble_size: int
    seed: int
    stop_fidelity: float
    dwell: int
    solver_tol: float
    noise_passes: int | None
    sample_control: bool
    output_dir: str
    defaults_used: list = field(default_factory=list)

    def with_overrides(self, seed=None, members=None, out_dir=None, sigma=None, g=None,
                       sample_control=None) -> "RunConfig":
        cfg = RunConfig(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        if seed is not None:
            cfg.seed = int(seed)
        if members is not None:
            if members < 1:
                raise ValidationError("members must be >= 1", field="ensemble_size")
            cfg.ensemble_size = int(members)
        if out_dir is not None:
            cfg.output_dir = str(out_dir)
        if sigma is not None or g is not None:
            m = cfg.noise_ideal.o_d.shape[0]
            cfg.noise_ideal = cfg.noise_ideal.replace(
                sigma=cfg.noise_ideal.sigma if sigma is None else float(sigma),
                g=cfg.noise_ideal.g if g is None else _real_matrix(g, "g", m))
        if sample_control is not None:
            cfg.sample_control = bool(sample_control)
        return cfg

    def to_dict(self) -> dict:
        """Plain-JSON form; :func:`config_from_dict` inverts it."""
        ni = self.noise_ideal
        return {
            **self.system_desc,
            "dt": self.dt,
            "horizon": self.horizon,
            "sigma": ni.sigma,
            "g": ni.g.tolist(),
            "g_r": ni.g_r.tolist(),
            "omega": ni.omega.tolist(),
            "u_r": ni.u_r.tolist(),
            "o_d": ni.o_d.tolist(),
            "d_row": _encode_complex(ni.d),
            "x0": _encode_complex(self.x0),
            "x_e": _encode_complex(self.x_e),
            "target": _encode_complex(self.target),
            "ensemble_size": self.ensemble_size,
            "seed": self.seed,
            "stop_fidelity": self.stop_fidelity,
            "dwell": self.dwell,
            "solver_tol": self.solver_tol,
            "noise_passes": "converge" if self.noise_passes is None else self.noise_passes,
            "sample_control": self.sample_control,
            "output_dir": self.output_dir,
        }


def _require(raw: dict, key: str):
    if key not in raw:
        raise ConfigurationError(f"missing required key {key!r}", field=key)
    return raw[key]


def _system_from(raw: dict) -> tuple[SystemSpec, dict]:
    if "preset" in raw:
        name = raw["preset"]
        if name not in PRESETS:
            raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
        theta = float(_require(raw, "theta"))
        return preset(name, theta), {"preset": name, "theta": theta}
    if "h0_eigenvalues" in raw:
        energies = np.asarray(raw["h0_eigenvalues"], dtype=float)
        h1 = _complex_array(_require(raw, "h1"), "h1", ndim=2)
        rates = np.asarray(_require(raw, "rates"), dtype=float)
        spec = SystemSpec(energies, h1, rates)
        return spec, {"h0_eigenvalues": energies.tolist(), "h1": _encode_complex(h1),
                      "rates": rates.tolist()}
    raise ConfigurationError("missing required key 'preset' (or explicit 'h0_eigenvalues')",
                             field="preset")


def config_from_dict(raw: dict) -> RunConfig:
    """Validate a decoded key-value mapping into a :class:`RunConfig`."""
    used = sorted(k for k in DEFAULTS if k not in raw)
    values = {**DEFAULTS, **raw}
    system, desc = _system_from(raw)
    dim = system.dim
    n = dim * dim

    dt = float(_require(raw, "dt"))
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    horizon = int(values["horizon"])
    if horizon < 1:
        raise ValidationError("horizon must be >= 1", field="horizon")

    x0 = _complex_array(_require(raw, "x0"), "x0")
    if x0.shape != (n,):
        raise ValidationError(f"x0 has length {x0.shape[0]}, expected {n} for l = {dim}",
                              field="x0")
    x_e = np.zeros(n, dtype=complex) if values["x_e"] is None else \
        _complex_array(values["x_e"], "x_e")
    if x_e.shape != (n,):
        raise ValidationError(f"x_e has length {x_e.shape[0]}, expected {n}", field="x_e")

    target = _complex_array(_require(raw, "target"), "target")
    if target.shape != (dim,):
        raise ValidationError(f"target has length {target.shape[0]}, expected {dim} for l = {dim}",
                              field="target")
    d_target = projector_row(target)
    if values["d_row"] is None:
        d = d_target
    else:
        d_raw = values["d_row"]
        is_matrix = isinstance(d_raw, list) and d_raw and isinstance(d_raw[0], list) and \
            isinstance(d_raw[0][0], list)
        d = np.atleast_2d(_complex_array(d_raw, "d_row", ndim=2 if is_matrix else 1))
        if d.shape[1] != n:
            raise ValidationError(f"d_row has {d.shape[1]} columns, expected {n}", field="d_row")

    m = d.shape[0]
    o_d = np.atleast_1d(np.asarray(values["o_d"], dtype=float))
    if o_d.shape != (m,):
        raise ValidationError(f"o_d has length {o_d.shape[0]}, output has {m} rows", field="o_d")
    u_r = np.atleast_1d(np.asarray(values["u_r"], dtype=float))
    if u_r.shape != (1,):
        raise ValidationError("u_r must be a single value (one control field)", field="u_r")
    noise_ideal = NoiseIdealSpec(
        sigma=float(values["sigma"]),
        g=_real_matrix(values["g"], "g", m),
        g_r=_real_matrix(_require(raw, "g_r"), "g_r", m),
        omega=_real_matrix(_require(raw, "omega"), "omega", 1),
        u_r=u_r, o_d=o_d, d=d)

    passes = values["noise_passes"]
    if passes in ("converge", None):
        passes = None
    elif isinstance(passes, int) and not isinstance(passes, bool) and passes >= 1:
        passes = int(passes)
    else:
        raise ValidationError("noise_passes must be 'converge' or a positive integer",
                              field="noise_passes")
    ensemble_size = int(values["ensemble_size"])
    if ensemble_size < 1:
        raise ValidationError("ensemble_size must be >= 1", field="ensemble_size")
    dwell = int(values["dwell"])
    if dwell < 1:
        raise ValidationError("dwell must be >= 1", field="dwell")
    return RunConfig(
        system=system, system_desc=desc, dt=dt, horizon=horizon, noise_ideal=noise_ideal,
        x0=x0, x_e=x_e, target=target, d_target=d_target, ensemble_size=ensemble_size,
        seed=int(values["seed"]), stop_fidelity=float(values["stop_fidelity"]), dwell=dwell,
        solver_tol=float(values["solver_tol"]), noise_passes=passes,
        sample_control=bool(values["sample_control"]), output_dir=str(values["output_dir"]),
        defaults_used=used)


def parse_text(text: str) -> dict:
    parser = configparser.ConfigParser(comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                       interpolation=None)
    parser.optionxform = str
    if not text.lstrip().startswith("["):
        text = f"[{SECTION}]\n" + text
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse configuration: {exc}") from exc
    raw = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            try:
                raw[key] = json.loads(value)
            except json.JSONDecodeError:
                raw[key] = value.strip().strip('"')
    return raw


def load_config(path) -> RunConfig:
    """Read and validate a configuration file (or a previous run manifest)."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"configuration file not found: {path}")
    text = path.read_text()
    if path.suffix == ".json":
        data = json.loads(text)
        return config_from_dict(data.get("config", data))
    return config_from_dict(parse_text(text))
