"""Flat ``key = value`` experiment configuration with dotted sections.

Grammar (one assignment per line)::

    line    := blank | comment | key "=" value [comment]
    comment := "#" anything
    key     := name ("." name)*
    value   := bool | int | float | word | list
    list    := value ("," value)+

Keys are matched against :data:`SCHEMA`; anything else is rejected with a
:class:`ConfigError` naming the key.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .fields import FieldConfig
from .flow import FlowParams
from .functionals import KINDS, FunctionalSpec
from .lattice import LatticeSpec
from .lie import GroupKind


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).lower()
    if s in ("true", "yes", "on", "1"):
        return True
    if s in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _int_list(v):
    items = v if isinstance(v, list) else [v]
    return [int(x) for x in items]


def _number_or_path(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return str(v)


def _choice(*options):
    def conv(v):
        s = str(v).lower()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s

    return conv


# key -> (converter, default)
SCHEMA = {
    "group": (_choice("u1", "su2"), "su2"),
    "rep_charge": (int, 1),
    "dims": (int, None),
    "extents": (_int_list, [4, 4]),
    "spacing": (float, 1.0),
    "seed": (int, 0),
    "functional.kind": (_choice(*KINDS), "pure_ym"),
    "functional.m": (_number_or_path, 0.0),
    "functional.s": (_number_or_path, 0.0),
    "functional.tau": (float, 0.0),
    "flow.dt0": (float, 0.05),
    "flow.integrator": (_choice("euler", "rk3"), "rk3"),
    "flow.adaptive": (_bool, True),
    "flow.grad_tol": (float, 1e-10),
    "flow.t_max": (float, 1e4),
    "flow.sample_stride": (int, 1),
    "flow.checkpoint_stride": (int, 0),
    "flow.max_steps": (int, 10_000_000),
    "flow.regauge_stride": (int, 0),
    "gaugefix.tol": (float, 1e-10),
    "gaugefix.max_newton": (int, 20),
    "gaugefix.zeta_iterations": (int, 0),
    "gaugefix.zeta_max": (float, 4.0),
    "ls.window_lo": (float, 1e-10),
    "ls.window_hi": (float, 1e-3),
    "ls.sigma": (float, float("inf")),
    "ls.e_inf": (float, None),
    "ls.mu": (float, None),
    "start.kind": (_choice("trivial", "random", "flux", "torus"), "trivial"),
    "start.amplitude": (float, 0.1),
    "start.phi": (float, 0.0),
    "start.flux": (int, 0),
    "start.holonomy": (lambda v: [float(x) for x in (v if isinstance(v, list) else [v])], None),
    "spectrum.operator": (_choice("pair_laplacian", "laplacian0", "laplacian1", "slice_hessian"),
                          "pair_laplacian"),
    "spectrum.count": (int, 6),
    "vortex.flux": (int, 1),
    "verify.samples": (int, 3),
}


def _scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_text(text: str) -> dict:
    """Raw ``{key: value}`` pairs; structural errors raise ConfigError."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", key=line)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not all(part.isidentifier() for part in key.split(".")):
            raise ConfigError(f"line {lineno}: malformed key {key!r}", key=key)
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", key=key)
        if "," in value:
            out[key] = [_scalar(v.strip()) for v in value.split(",") if v.strip()]
        else:
            out[key] = _scalar(value)
    return out


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)
    base_dir: Path = Path(".")

    def __getitem__(self, key):
        return self.values[key]

    @property
    def group(self) -> GroupKind:
        return GroupKind(self["group"], self["rep_charge"])

    @property
    def lattice(self) -> LatticeSpec:
        return LatticeSpec(tuple(self["extents"]), self["spacing"])

    @property
    def seed(self) -> int:
        return self["seed"]

    def _array_or_constant(self, value):
        if isinstance(value, float):
            return value
        path = Path(value)
        if not path.is_absolute():
            path = self.base_dir / path
        if not path.exists():
            raise ConfigError(f"array file {str(path)!r} not found", key="functional")
        arr = np.load(path) if path.suffix == ".npy" else np.loadtxt(path)
        return np.asarray(arr, dtype=float).ravel()

    @property
    def functional(self) -> FunctionalSpec:
        return FunctionalSpec(
            self["functional.kind"],
            self._array_or_constant(self["functional.m"]),
            self._array_or_constant(self["functional.s"]),
            self["functional.tau"],
        )

    @property
    def flow(self) -> FlowParams:
        kw = {f.name: self[f"flow.{f.name}"] for f in fields(FlowParams)}
        return FlowParams(**kw)

    @property
    def window(self):
        return (self["ls.window_lo"], self["ls.window_hi"])


def from_dict(raw: dict, base_dir=".") -> ExperimentConfig:
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", key=key)
    values = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}", key=key) from None
        else:
            values[key] = default
    ext = values["extents"]
    if values["dims"] is None:
        values["dims"] = len(ext)
    if len(ext) == 1:
        values["extents"] = ext * values["dims"]
    if len(values["extents"]) != values["dims"]:
        raise ConfigError(f"dims = {values['dims']} but {len(ext)} extents given", key="extents")
    cfg = ExperimentConfig(values, Path(base_dir))
    # construct every typed view once so invalid combinations fail before any compute
    for name, key in (("group", "group"), ("lattice", "extents"), ("functional", "functional.kind"),
                      ("flow", "flow")):
        try:
            getattr(cfg, name)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"invalid {name} settings: {exc}", key=key) from None
    try:
        cfg.functional.check(FieldConfig.trivial(cfg.lattice, cfg.group))
    except DimensionMismatch as exc:
        raise ConfigError(str(exc), key="functional.kind") from None
    if values["seed"] < 0 or values["seed"] >= 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer", key="seed")
    return cfg


def load(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", key=str(path)) from None
    return from_dict(parse_text(text), path.parent)


def loads(text: str, base_dir=".") -> ExperimentConfig:
    return from_dict(parse_text(text), base_dir)
