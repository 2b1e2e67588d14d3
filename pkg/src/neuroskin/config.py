"""JSON config parsing.

Geometry may be given in mm (``"length_unit": "mm"``); everything is
converted to SI at load time. All other quantities are SI already.
"""

import hashlib
import json

from .errors import ConfigError
from .fe import Material
from .neuro import ActivationKind
from .simulation import Excitation, SimConfig


def config_sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def load_config(path) -> SimConfig:
    """Parse a JSON config file into a validated :class:`SimConfig`."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config {path}: line {exc.lineno}, col {exc.colno}: {exc.msg}")
    try:
        return config_from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config {path}: {exc}")


def config_from_dict(raw: dict) -> SimConfig:
    scale = 1.0
    unit = raw.get("length_unit", "m")
    if unit == "mm":
        scale = 1.0e-3
    elif unit != "m":
        raise ConfigError(f"length_unit must be 'm' or 'mm', got {unit!r}")

    mesh = raw["mesh"]
    mat = raw["material"]
    neuro = raw["neuro"]
    exc = raw["excitation"]
    time = raw["time"]
    out = raw["output"]
    newmark = raw.get("newmark", {})

    material = Material(
        E=float(mat["E"]),
        nu=float(mat["nu"]),
        rho=float(mat["rho"]),
        thickness=float(mat["thickness"]) * scale,
        rayleigh_a0=float(mat.get("rayleigh_a0", 0.0)),
        rayleigh_a1=float(mat.get("rayleigh_a1", 0.0)),
    )
    excitation = Excitation(
        node_ids=tuple(int(n) for n in exc["node_ids"]),
        direction=exc.get("direction", "x"),
        amplitude=float(exc["amplitude"]),
        waveform=exc.get("waveform", "half_sine"),
        t_start=float(exc.get("t_start", 0.0)),
        t_end=float(exc["t_end"]),
        frequency=float(exc.get("frequency", 0.0)),
    )
    bounds = neuro.get("bounds", [[400000.0, 550000.0]])
    config = SimConfig(
        nx=int(mesh["nx"]),
        ny=int(mesh["ny"]),
        elem_size=float(mesh["elem_size"]) * scale,
        material=material,
        activation=ActivationKind(neuro.get("activation", "tanh")),
        input_weights=tuple(float(w) for w in neuro["input_weights"]),
        design_dim=int(neuro.get("design_dim", 1)),
        default_w_o=float(neuro.get("default_w_o", 450000.0)),
        bounds=tuple((float(lo), float(hi)) for lo, hi in bounds),
        excitation=excitation,
        dt=float(time["dt"]),
        n_steps=int(time["n_steps"]),
        output_node=int(out["node"]),
        output_dof=out.get("dof", "x"),
        newmark_beta=float(newmark.get("beta", 0.25)),
        newmark_gamma=float(newmark.get("gamma", 0.5)),
    )
    if len(config.input_weights) != 4:
        raise ConfigError("neuro.input_weights must have 4 entries")
    for lo, hi in config.bounds:
        if not lo < hi:
            raise ConfigError(f"bound pair ({lo}, {hi}) needs lo < hi")
    config.validate()
    return config
