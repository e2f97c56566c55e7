"""Run configuration: schema, defaults, validation, and object builders.

A run configuration is a JSON document with sections grid, material,
source, phantom (or measurement), pcls, newton, noise and output. Every
key has a default carrying the benchmark values, unknown keys are
rejected, and `key=value` overrides (dotted or bare when unambiguous) are
validated against the same schema.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .errors import ConfigError, InvalidArgumentError
from .fem import Grid, build_grid
from .forward import NewtonConfig, SourceField
from .materials import MaterialCurve
from .optimizer import PclsConfig
from .phantoms import Circle, DiscDifference, Ellipse, NoiseSpec, Phantom

DEFAULTS: dict = {
    "grid": {
        "dim": 50,
        "generate_refine": 1,
    },
    "material": {
        "a1": 0.5,
        "b1": 4.0,
        "c1": 3.0,
        "d1": 0.2,
        "v_air": 1.0,
    },
    "source": {
        "kind": "strip_coils",
        "j1": 500.0,
    },
    # phantom and measurement are alternatives; both default to "absent"
    "phantom": {
        "shapes": [],
    },
    "measurement": {
        "path": "",
        "phi_exact_path": "",
    },
    "pcls": {
        "sigma": 0.9,
        "alpha": 0.001,
        "osci_max": 10,
        "max_outer_iters": 2000,
        "phi0": 1.5,
        "phi0_seed": 0,
    },
    "newton": {
        "rel_residual_tol": 1e-10,
        "max_iters": 50,
        "damping_min": 0.0625,
    },
    "noise": {
        "level": 0.0,
        "seed": 0,
    },
    "output": {
        "dir": "",
        "figures": True,
    },
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict, user: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in user.items():
        dotted = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {dotted!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {dotted!r} must be a section")
            out[key] = _merge(base[key], value, prefix=f"{dotted}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def merge_config(user: dict) -> dict:
    """Overlay a user document on the defaults, rejecting unknown keys."""
    if not isinstance(user, dict):
        raise ConfigError("config document must be a JSON object")
    merged = _merge(DEFAULTS, user)
    validate_config(merged)
    return merged


def load_config(path) -> dict:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            user = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    return merge_config(user)


def save_config(path, cfg: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2)
        fh.write("\n")


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text  # bare strings (e.g. kind=uniform) stay strings


def apply_overrides(cfg: dict, overrides: list[str]) -> dict:
    """Apply `section.key=value` overrides; bare keys resolve when unique."""
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key = key.strip()
        parts = key.split(".")
        if len(parts) == 1:
            hits = [s for s, sec in DEFAULTS.items()
                    if isinstance(sec, dict) and parts[0] in sec]
            if len(hits) != 1:
                raise ConfigError(f"override key {key!r} is ambiguous or unknown")
            parts = [hits[0], parts[0]]
        if len(parts) != 2 or parts[0] not in DEFAULTS:
            raise ConfigError(f"unknown override key {key!r}")
        section, leaf = parts
        if leaf not in DEFAULTS[section]:
            raise ConfigError(f"unknown override key {key!r}")
        cfg[section][leaf] = _parse_override_value(value.strip())
    validate_config(cfg)
    return cfg


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate_config(cfg: dict):
    """Range- and type-check a merged configuration; raises ConfigError."""
    g = cfg["grid"]
    _require(isinstance(g["dim"], int) and g["dim"] >= 2, "grid.dim must be an integer >= 2")
    _require(isinstance(g["generate_refine"], int) and g["generate_refine"] >= 1,
             "grid.generate_refine must be an integer >= 1")
    m = cfg["material"]
    for key in ("a1", "b1", "c1", "d1", "v_air"):
        _require(_is_num(m[key]), f"material.{key} must be a number")
    _require(m["a1"] > 0 and m["b1"] >= 1 and m["c1"] > 0 and m["d1"] > 0,
             "material requires a1 > 0, b1 >= 1, c1 > 0, d1 > 0")
    _require(m["v_air"] > 0, "material.v_air must be positive")
    s = cfg["source"]
    _require(s["kind"] in ("strip_coils", "uniform"),
             "source.kind must be 'strip_coils' or 'uniform'")
    _require(_is_num(s["j1"]) and s["j1"] > 0, "source.j1 must be positive")
    p = cfg["pcls"]
    _require(_is_num(p["sigma"]) and 0 < p["sigma"] < 1,
             "pcls.sigma must lie strictly in (0, 1)")
    _require(_is_num(p["alpha"]) and p["alpha"] >= 0, "pcls.alpha must be >= 0")
    _require(isinstance(p["osci_max"], int) and p["osci_max"] >= 1,
             "pcls.osci_max must be an integer >= 1")
    _require(isinstance(p["max_outer_iters"], int) and p["max_outer_iters"] >= 1,
             "pcls.max_outer_iters must be an integer >= 1")
    phi0 = p["phi0"]
    if isinstance(phi0, str):
        _require(phi0 == "random", "pcls.phi0 must be a number in (1, 2) or 'random'")
    else:
        _require(_is_num(phi0) and 1 < phi0 < 2,
                 "pcls.phi0 must lie strictly between 1 and 2")
    _require(isinstance(p["phi0_seed"], int), "pcls.phi0_seed must be an integer")
    n = cfg["newton"]
    _require(_is_num(n["rel_residual_tol"]) and n["rel_residual_tol"] > 0,
             "newton.rel_residual_tol must be positive")
    _require(isinstance(n["max_iters"], int) and n["max_iters"] >= 1,
             "newton.max_iters must be an integer >= 1")
    _require(_is_num(n["damping_min"]) and 0 < n["damping_min"] <= 1,
             "newton.damping_min must lie in (0, 1]")
    nz = cfg["noise"]
    _require(_is_num(nz["level"]) and nz["level"] >= 0, "noise.level must be >= 0")
    _require(isinstance(nz["seed"], int), "noise.seed must be an integer")
    o = cfg["output"]
    _require(isinstance(o["dir"], str), "output.dir must be a string")
    _require(isinstance(o["figures"], bool), "output.figures must be a boolean")
    _require(isinstance(cfg["measurement"]["path"], str),
             "measurement.path must be a string")
    _require(isinstance(cfg["measurement"]["phi_exact_path"], str),
             "measurement.phi_exact_path must be a string")
    shapes = cfg["phantom"]["shapes"]
    _require(isinstance(shapes, list), "phantom.shapes must be a list")
    for i, spec in enumerate(shapes):
        _shape_from_dict(spec, f"phantom.shapes[{i}]")


def _shape_from_dict(spec, where: str):
    _require(isinstance(spec, dict) and "type" in spec, f"{where} must have a 'type'")
    kind = spec["type"]
    try:
        if kind == "circle":
            _check_keys(spec, {"type", "center", "radius"}, where)
            return Circle(tuple(spec["center"]), float(spec["radius"]))
        if kind == "ellipse":
            _check_keys(spec, {"type", "center", "semi_axes", "rotation"}, where,
                        optional={"rotation"})
            return Ellipse(tuple(spec["center"]), tuple(spec["semi_axes"]),
                           float(spec.get("rotation", 0.0)))
        if kind == "disc_difference":
            _check_keys(spec, {"type", "outer", "inner"}, where)
            return DiscDifference(
                Circle(tuple(spec["outer"]["center"]), float(spec["outer"]["radius"])),
                Circle(tuple(spec["inner"]["center"]), float(spec["inner"]["radius"])))
    except (TypeError, KeyError, ValueError, InvalidArgumentError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: unknown shape type {kind!r}")


def _check_keys(spec: dict, allowed: set, where: str, optional: set = frozenset()):
    for key in spec:
        if key not in allowed:
            raise ConfigError(f"{where}: unknown key {key!r}")
    for key in allowed - optional - {"type"}:
        if key not in spec:
            raise ConfigError(f"{where}: missing key {key!r}")


# ---------------------------------------------------------------- builders

def make_grid(cfg: dict) -> Grid:
    return build_grid(cfg["grid"]["dim"])


def make_curve(cfg: dict) -> MaterialCurve:
    m = cfg["material"]
    return MaterialCurve(a1=m["a1"], b1=m["b1"], c1=m["c1"], d1=m["d1"],
                         v_air=m["v_air"])


def make_source(cfg: dict) -> SourceField:
    return SourceField(kind=cfg["source"]["kind"], j1=float(cfg["source"]["j1"]))


def make_phantom(cfg: dict) -> Phantom | None:
    shapes = cfg["phantom"]["shapes"]
    if not shapes:
        return None
    built = tuple(_shape_from_dict(s, f"phantom.shapes[{i}]")
                  for i, s in enumerate(shapes))
    try:
        return Phantom(built)
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from None


def make_pcls(cfg: dict) -> PclsConfig:
    p = cfg["pcls"]
    return PclsConfig(sigma=p["sigma"], alpha=p["alpha"], osci_max=p["osci_max"],
                      max_outer_iters=p["max_outer_iters"], phi0=p["phi0"],
                      phi0_seed=p["phi0_seed"])


def make_newton(cfg: dict) -> NewtonConfig:
    n = cfg["newton"]
    return NewtonConfig(rel_residual_tol=n["rel_residual_tol"],
                        max_iters=n["max_iters"], damping_min=n["damping_min"])


def make_noise(cfg: dict) -> NoiseSpec:
    return NoiseSpec(level=cfg["noise"]["level"], seed=cfg["noise"]["seed"])


def shapes_to_json(phantom: Phantom) -> list[dict]:
    """Serialize phantom shapes into the config representation."""
    out = []
    for shape in phantom.shapes:
        if isinstance(shape, Circle):
            out.append({"type": "circle", "center": list(shape.center),
                        "radius": shape.radius})
        elif isinstance(shape, Ellipse):
            out.append({"type": "ellipse", "center": list(shape.center),
                        "semi_axes": list(shape.semi_axes),
                        "rotation": shape.rotation})
        elif isinstance(shape, DiscDifference):
            out.append({"type": "disc_difference",
                        "outer": {"center": list(shape.outer.center),
                                  "radius": shape.outer.radius},
                        "inner": {"center": list(shape.inner.center),
                                  "radius": shape.inner.radius}})
        else:
            raise InvalidArgumentError(f"unknown shape {shape!r}")
    return out
