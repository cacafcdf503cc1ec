"""TOML run/sweep configuration: parsing with explicit defaults, and rendering.

A run file::

    [model]
    N = 50
    gamma = -0.1

    [drive]
    kind = "sinusoid"
    A = 5.0
    omega = 5.0

    [protocol]
    name = "sta"

A sweep file replaces ``[drive] kind`` by a ``[sweep]`` section with
``parameter``, ``values`` and ``protocols``.
"""

from dataclasses import dataclass, field
import sys

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analysis import SWEEP_PARAMETERS, GridSettings, SweepSpec
from .model import GAP_TOL, PROTOCOLS, BatteryParams
from .observables import default_subsystem
from .propagator import DEFAULT_SCHEME, SCHEMES, TimeGrid


class ConfigError(ValueError):
    def __init__(self, path, reason):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}" if path else reason)


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "."
    stem: str = None  # None: named after the config file
    plot: bool = False


@dataclass(frozen=True)
class RunConfig:
    params: BatteryParams
    grid: TimeGrid
    scheme: str = DEFAULT_SCHEME
    subsystem: int = None
    output: OutputSettings = field(default_factory=OutputSettings)


@dataclass(frozen=True)
class SweepConfig:
    spec: SweepSpec
    output: OutputSettings = field(default_factory=OutputSettings)


_RUN_KEYS = {
    "model": {"N", "gamma", "subsystem"},
    "drive": {"kind", "A", "omega"},
    "protocol": {"name", "gap_tol"},
    "grid": {"t_end", "n_steps", "sample_stride", "scheme"},
    "output": {"directory", "stem", "plot"},
}
_SWEEP_KEYS = {
    "model": {"N", "gamma"},
    "drive": {"A", "omega"},
    "protocol": {"gap_tol"},
    "grid": {"periods", "steps_per_period", "constant_t_end", "constant_dt",
             "sample_stride", "scheme"},
    "sweep": {"parameter", "values", "protocols"},
    "output": {"directory", "stem", "plot"},
}


def _check_keys(doc, allowed):
    for section, body in doc.items():
        if section not in allowed:
            raise ConfigError(section, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(section, "expected a table")
        for key in body:
            if key not in allowed[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")


def _get(doc, path, kind, default=None, required=False):
    section, key = path.split(".")
    body = doc.get(section, {})
    if key not in body:
        if required:
            raise ConfigError(path, "missing required key")
        return default
    value = body[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if not isinstance(value, kind):
        raise ConfigError(path, f"expected {kind.__name__}, got {value!r}")
    return value


def _output(doc):
    return OutputSettings(
        directory=_get(doc, "output.directory", str, "."),
        stem=_get(doc, "output.stem", str, None),
        plot=_get(doc, "output.plot", bool, False),
    )


def _scheme(doc):
    scheme = _get(doc, "grid.scheme", str, DEFAULT_SCHEME)
    if scheme not in SCHEMES:
        raise ConfigError("grid.scheme", f"unknown scheme {scheme!r}")
    return scheme


def parse_config(text):
    """Return a RunConfig or SweepConfig with every default made explicit."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"invalid TOML: {exc}") from None
    if "sweep" in doc:
        return _parse_sweep(doc)
    return _parse_run(doc)


def _parse_run(doc):
    _check_keys(doc, _RUN_KEYS)
    n = _get(doc, "model.N", int, required=True)
    gamma = _get(doc, "model.gamma", float, required=True)
    amplitude = _get(doc, "drive.A", float, required=True)
    protocol = _get(doc, "protocol.name", str, required=True)
    if protocol not in PROTOCOLS:
        raise ConfigError("protocol.name", f"expected one of {PROTOCOLS}, got {protocol!r}")
    implied = "constant" if protocol == "constant" else "sinusoid"
    kind = _get(doc, "drive.kind", str, implied)
    if kind != implied:
        raise ConfigError("drive.kind", f"protocol {protocol!r} needs a {implied} drive")
    omega = _get(doc, "drive.omega", float, None)
    if kind == "sinusoid" and omega is None:
        raise ConfigError("drive.omega", "missing required key for a sinusoid drive")
    if kind == "constant" and omega is not None:
        raise ConfigError("drive.omega", "not used by a constant drive")
    gap_tol = _get(doc, "protocol.gap_tol", float, GAP_TOL)
    try:
        params = BatteryParams.build(n, gamma, amplitude, omega, protocol, gap_tol=gap_tol)
    except ValueError as exc:
        path = "drive.omega" if "frequency" in str(exc) else "model"
        raise ConfigError(path, str(exc)) from None

    default = TimeGrid.default_for(params.drive)
    try:
        grid = TimeGrid(
            t_end=_get(doc, "grid.t_end", float, default.t_end),
            n_steps=_get(doc, "grid.n_steps", int, default.n_steps),
            sample_stride=_get(doc, "grid.sample_stride", int, default.sample_stride),
        )
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None

    subsystem = _get(doc, "model.subsystem", int, default_subsystem(n))
    if subsystem is not None and not (1 <= subsystem <= n - 1):
        raise ConfigError("model.subsystem", f"must lie in 1..{n - 1}")
    return RunConfig(params, grid, _scheme(doc), subsystem, _output(doc))


def _parse_sweep(doc):
    _check_keys(doc, _SWEEP_KEYS)
    parameter = _get(doc, "sweep.parameter", str, required=True)
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError("sweep.parameter", f"expected one of {SWEEP_PARAMETERS}")
    values = _get(doc, "sweep.values", list, required=True)
    protocols = tuple(_get(doc, "sweep.protocols", list, list(PROTOCOLS)))
    for p in protocols:
        if p not in PROTOCOLS:
            raise ConfigError("sweep.protocols", f"unknown protocol {p!r}")
    base = SweepSpec.__dataclass_fields__
    defaults = GridSettings()
    settings = GridSettings(
        periods=_get(doc, "grid.periods", float, float(defaults.periods)),
        steps_per_period=_get(doc, "grid.steps_per_period", int, defaults.steps_per_period),
        constant_t_end=_get(doc, "grid.constant_t_end", float, defaults.constant_t_end),
        constant_dt=_get(doc, "grid.constant_dt", float, defaults.constant_dt),
        sample_stride=_get(doc, "grid.sample_stride", int, defaults.sample_stride),
        scheme=_scheme(doc),
    )
    try:
        spec = SweepSpec(
            parameter=parameter,
            values=tuple(values),
            n_spins=_get(doc, "model.N", int, base["n_spins"].default),
            gamma=_get(doc, "model.gamma", float, base["gamma"].default),
            amplitude=_get(doc, "drive.A", float, base["amplitude"].default),
            omega=_get(doc, "drive.omega", float, base["omega"].default),
            protocols=protocols,
            settings=settings,
            gap_tol=_get(doc, "protocol.gap_tol", float, GAP_TOL),
        )
    except ValueError as exc:
        raise ConfigError("sweep", str(exc)) from None
    for proto in spec.protocols:
        for value in spec.values:
            try:
                spec.point(proto, value)
            except ValueError as exc:
                raise ConfigError("sweep.values", f"{proto} at {value!r}: {exc}") from None
    return SweepConfig(spec, _output(doc))


def config_to_dict(cfg):
    out = {"directory": cfg.output.directory, "plot": cfg.output.plot}
    if cfg.output.stem is not None:
        out["stem"] = cfg.output.stem
    if isinstance(cfg, RunConfig):
        p = cfg.params
        model = {"N": p.n_spins, "gamma": p.gamma}
        if cfg.subsystem is not None:
            model["subsystem"] = cfg.subsystem
        drive = {"kind": p.drive.kind, "A": p.drive.amplitude}
        if p.drive.kind == "sinusoid":
            drive["omega"] = p.drive.frequency
        return {
            "model": model,
            "drive": drive,
            "protocol": {"name": p.protocol, "gap_tol": p.gap_tol},
            "grid": {"t_end": cfg.grid.t_end, "n_steps": cfg.grid.n_steps,
                     "sample_stride": cfg.grid.sample_stride, "scheme": cfg.scheme},
            "output": out,
        }
    s = cfg.spec
    g = s.settings
    return {
        "model": {"N": s.n_spins, "gamma": s.gamma},
        "drive": {"A": s.amplitude, "omega": s.omega},
        "protocol": {"gap_tol": s.gap_tol},
        "grid": {"periods": float(g.periods), "steps_per_period": g.steps_per_period,
                 "constant_t_end": g.constant_t_end, "constant_dt": g.constant_dt,
                 "sample_stride": g.sample_stride, "scheme": g.scheme},
        "sweep": {"parameter": s.parameter, "values": list(s.values),
                  "protocols": list(s.protocols)},
        "output": out,
    }


def render_config(cfg) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def load_config(path):
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse_config(text)
