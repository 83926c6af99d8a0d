"""Command-line interface: config ingestion and deterministic CSV/JSON output.

All floats are serialized with 17 significant digits so binary doubles
round-trip exactly and repeated runs are byte-identical. Structured results
go to JSON, curves to CSV; both carry ``schema_version`` 1.
"""

from __future__ import annotations

import json
import sys

import click
import jsonschema
import numpy as np

from . import localization as loc
from .dynamics import DecayModel, DriveParams, build_generator, build_liouvillian, populations, steady_state
from .errors import (
    AmbiguousBranch,
    DegenerateSteadyState,
    NoSolution,
    ZeroMagnification,
)
from .geometry import (
    TWO_PI,
    FieldGeometry,
    LoopLayout,
    diamond_layout,
    loop_phase,
    magnification,
)
from .observables import curve_maximum, ratio_analytic, ratio_curve, ratio_numeric, slope

SCHEMA_VERSION = 1

EXIT_CONFIG = 2
EXIT_ZERO_MAGNIFICATION = 3
EXIT_NO_SOLUTION = 4
EXIT_AMBIGUOUS_BRANCH = 5
EXIT_DEGENERATE_STEADY_STATE = 6

_LAYOUT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "xi": {"type": "number", "minimum": 0},
        "phi0": {"type": "number"},
        "wavelength": {"type": "number", "exclusiveMinimum": 0},
        "transitions": {
            "type": "array",
            "minItems": 4,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "wavenumber": {"type": "number", "exclusiveMinimum": 0},
                    "sign": {"enum": [-1, 1]},
                    "detuning": {"type": "number"},
                },
            },
        },
    },
}

_STAGE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "xi": {"type": "number", "exclusiveMinimum": 0},
        "phi0": {"type": "number"},
        "x": {"type": "number", "exclusiveMinimum": 0},
        "relative_error": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
    },
    "required": ["xi"],
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "layout": _LAYOUT_SCHEMA,
        "drive": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "x": {"type": "number", "exclusiveMinimum": 0},
                "per_transition_g": {
                    "type": "array",
                    "minItems": 4,
                    "maxItems": 4,
                    "items": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "decay": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rates": {
                    "type": "array",
                    "minItems": 4,
                    "maxItems": 4,
                    "items": {"type": "number", "exclusiveMinimum": 0},
                }
            },
        },
        "measurement": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "ratio": {"type": "number", "minimum": 0},
                "relative_error": {
                    "type": "number",
                    "minimum": 0,
                    "exclusiveMaximum": 0.5,
                },
                "z_true": {"type": "number"},
                "sigma": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "window": {
            "type": "array",
            "minItems": 2,
            "maxItems": 2,
            "items": {"type": "number"},
        },
        "points": {"type": "integer", "minimum": 2},
        "z_est": {"type": "number"},
        "phi": {"type": "number"},
        "stages": {"type": "array", "minItems": 1, "items": _STAGE_SCHEMA},
    },
}


class ConfigError(Exception):
    pass


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config field {exc.json_path}: {exc.message}") from exc
    layout = raw.get("layout", {})
    if "xi" in layout and "transitions" in layout:
        raise ConfigError("config field $.layout: give either xi or transitions, not both")
    return raw


def build_layout(config: dict) -> LoopLayout:
    layout = config.get("layout", {})
    phi0 = layout.get("phi0", 0.0)
    wavelength = layout.get("wavelength", 1.0)
    if "transitions" in layout:
        trans = tuple(
            FieldGeometry(
                wavenumber=t.get("wavenumber", 1.0),
                propagation_sign=t.get("sign", 1),
                detuning=t.get("detuning", 0.0),
            )
            for t in layout["transitions"]
        )
        return LoopLayout(trans, relative_phase=phi0, wavelength=wavelength)
    xi = layout.get("xi", 2.0)
    built = diamond_layout(xi, phi0=phi0)
    if wavelength != 1.0:
        built = LoopLayout(built.transitions, relative_phase=phi0, wavelength=wavelength)
    return built


def build_drive(config: dict) -> DriveParams:
    drive = config.get("drive", {})
    g = drive.get("per_transition_g")
    return DriveParams(x=drive.get("x", 5.0), per_transition_g=tuple(g) if g else None)


def build_decay(config: dict) -> DecayModel:
    return DecayModel(rates=tuple(config.get("decay", {}).get("rates", (1.0,) * 4)))


def get_window(config: dict) -> tuple[float, float]:
    lo, hi = config.get("window", (0.0, 1.0))
    if not lo < hi:
        raise ConfigError(f"config field $.window: need lo < hi, got [{lo}, {hi}]")
    return float(lo), float(hi)


def fmt(value: float) -> str:
    return format(float(value), ".17g")


def to_json(value, indent: int = 0) -> str:
    """Serialize with 17-significant-digit floats and stable key order."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f'{inner}{json.dumps(k)}: {to_json(v, indent + 1)}' for k, v in value.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(value, (list, tuple)):
        if not len(value):
            return "[]"
        items = [f"{inner}{to_json(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt(value)
    return json.dumps(value)


def emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def fail(code: int, message: str):
    click.echo(message, err=True)
    sys.exit(code)


def apply_overrides(config: dict, **overrides) -> dict:
    """Merge command-line flag values into the loaded config."""
    config = json.loads(json.dumps(config))  # deep copy
    flag_map = {
        "x": ("drive", "x"),
        "xi": ("layout", "xi"),
        "phi0": ("layout", "phi0"),
        "ratio": ("measurement", "ratio"),
        "rel_err": ("measurement", "relative_error"),
        "z_true": ("measurement", "z_true"),
        "seed": ("measurement", "seed"),
        "points": ("points",),
        "z_est": ("z_est",),
    }
    for name, value in overrides.items():
        if value is None:
            continue
        if name == "window":
            try:
                lo, hi = (float(p) for p in value.split(":"))
            except ValueError:
                raise ConfigError(f"--window expects LO:HI, got {value!r}")
            config["window"] = [lo, hi]
            continue
        path = flag_map[name]
        node = config
        for key in path[:-1]:
            node = node.setdefault(key, {})
        node[path[-1]] = value
    layout = config.get("layout", {})
    if "xi" in layout:
        layout.pop("transitions", None)
    return config


_COMMON_FLAGS = [
    click.option("--config", "config_path", type=click.Path(), default=None, help="JSON configuration file."),
    click.option("--out", "out", type=click.Path(), default=None, help="Output file (default: stdout)."),
    click.option("--x", "x", type=float, default=None, help="Drive strength Omega/gamma."),
    click.option("--xi", "xi", type=float, default=None, help="Magnification of the layout."),
    click.option("--phi0", "phi0", type=float, default=None, help="Relative phase in radians."),
    click.option("--R", "ratio", type=float, default=None, help="Measured intensity ratio."),
    click.option("--rel-err", "rel_err", type=float, default=None, help="Relative error band of the ratio."),
    click.option("--z-true", "z_true", type=float, default=None, help="True position in wavelengths."),
    click.option("--points", "points", type=int, default=None, help="Number of grid points."),
    click.option("--window", "window", type=str, default=None, help="Query window LO:HI in wavelengths."),
    click.option("--seed", "seed", type=int, default=None, help="Seed of the measurement noise generator."),
]


def common_flags(func):
    for flag in reversed(_COMMON_FLAGS):
        func = flag(func)
    return func


def prepare(config_path, **overrides) -> dict:
    try:
        config = load_config(config_path)
        config = apply_overrides(config, **overrides)
    except ConfigError as exc:
        fail(EXIT_CONFIG, str(exc))
    return config


@click.group()
def main():
    """Sub-wavelength localization with closed-loop running-wave driving fields."""


@main.command("ratio-curve")
@common_flags
def cmd_ratio_curve(config_path, out, **overrides):
    """Sampled fluorescence-ratio curve R(phi) and its slope, as CSV."""
    config = prepare(config_path, **overrides)
    x = build_drive(config).x
    points = config.get("points", 512)
    try:
        curve = ratio_curve(x, points)
    except ValueError as exc:
        fail(EXIT_CONFIG, str(exc))
    lines = [f"# schema_version={SCHEMA_VERSION}", "phi_rad,R,dR_dPhi"]
    for p, r, s in zip(curve.phi_grid, curve.values, curve.slopes):
        lines.append(f"{fmt(p)},{fmt(r)},{fmt(s)}")
    emit("\n".join(lines) + "\n", out)


@main.command("position-curve")
@common_flags
def cmd_position_curve(config_path, out, **overrides):
    """Branch positions z(R) over the ratio range, as CSV (Fig. 3-style data)."""
    config = prepare(config_path, **overrides)
    layout = build_layout(config)
    x = build_drive(config).x
    window = get_window(config)
    if magnification(layout) == 0.0:
        fail(EXIT_ZERO_MAGNIFICATION, "layout is phase matched: no position dependence")
    points = config.get("points", 512)
    r_values = np.linspace(0.0, curve_maximum(x), points)
    lines = [f"# schema_version={SCHEMA_VERSION}", "R,branch,z_lambda"]
    for r in r_values:
        for phi_star in loc.invert_ratio(float(r), x):
            for m, z in loc._phase_to_positions(phi_star, layout, window):
                lines.append(f"{fmt(r)},{m},{fmt(z)}")
    emit("\n".join(lines) + "\n", out)


def _measurement_from_config(config: dict, layout: LoopLayout, x: float) -> loc.Measurement:
    meas = config.get("measurement")
    if meas is None:
        raise ConfigError("config field $.measurement: required for this command")
    rel_err = meas.get("relative_error", 0.0)
    if "ratio" in meas:
        return loc.Measurement(ratio=meas["ratio"], relative_error=rel_err)
    if "z_true" in meas:
        noise = None
        if meas.get("sigma", 0.0) > 0.0:
            noise = (meas["sigma"], meas.get("seed", 0))
        return loc.simulate_measurement(meas["z_true"], layout, x, noise=noise, band=rel_err)
    raise ConfigError("config field $.measurement: needs ratio or z_true")


@main.command("invert")
@common_flags
def cmd_invert(config_path, out, **overrides):
    """Invert a measured ratio into position candidates with intervals, as JSON."""
    config = prepare(config_path, **overrides)
    layout = build_layout(config)
    x = build_drive(config).x
    window = get_window(config)
    try:
        meas = _measurement_from_config(config, layout, x)
        cands = loc.candidates(meas, layout, x, window)
    except ConfigError as exc:
        fail(EXIT_CONFIG, str(exc))
    except ZeroMagnification as exc:
        fail(EXIT_ZERO_MAGNIFICATION, str(exc))
    except NoSolution as exc:
        fail(EXIT_NO_SOLUTION, str(exc))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "candidates": [
            {
                "branch": c.branch,
                "z_hat": c.z_hat,
                "z_lo": c.z_lo,
                "z_hi": c.z_hi,
                "phi_solution": c.phi_solution,
            }
            for c in cands.candidates
        ],
        "relative_uncertainty": [c.relative_uncertainty for c in cands.candidates],
        "flags": sorted({f for c in cands.candidates for f in c.flags}),
    }
    emit(to_json(doc) + "\n", out)


@main.command("protocol")
@common_flags
def cmd_protocol(config_path, out, **overrides):
    """Run the coarse-to-fine magnification protocol, as JSON."""
    config = prepare(config_path, **overrides)
    x_default = build_drive(config).x
    window = get_window(config)
    meas = config.get("measurement", {})
    if "z_true" not in meas:
        fail(EXIT_CONFIG, "config field $.measurement.z_true: required for protocol")
    z_true = meas["z_true"]
    sigma = meas.get("sigma", 0.0)
    seed = meas.get("seed", 0)
    stages_cfg = config.get("stages")
    if not stages_cfg:
        fail(EXIT_CONFIG, "config field $.stages: required for protocol")
    stages = []
    for s in stages_cfg:
        layout = diamond_layout(s["xi"], phi0=s.get("phi0", 0.0))
        stages.append((layout, s.get("x", x_default)))
    bands = [s.get("relative_error", meas.get("relative_error", 0.0)) for s in stages_cfg]

    counter = {"i": 0}

    def source(layout, x):
        i = counter["i"]
        counter["i"] += 1
        noise = (sigma, seed + i) if sigma > 0.0 else None
        return loc.simulate_measurement(z_true, layout, x, noise=noise, band=bands[i])

    try:
        result = loc.coarse_to_fine(source, stages, window)
    except ValueError as exc:
        fail(EXIT_CONFIG, str(exc))
    except ZeroMagnification as exc:
        fail(EXIT_ZERO_MAGNIFICATION, str(exc))
    except NoSolution as exc:
        fail(EXIT_NO_SOLUTION, str(exc))
    except AmbiguousBranch as exc:
        fail(EXIT_AMBIGUOUS_BRANCH, str(exc))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "stages": [
            {
                "xi": s.xi,
                "phi0": s.phi0,
                "interval": {
                    "z_lo": s.interval.z_lo,
                    "z_hat": s.interval.z_hat,
                    "z_hi": s.interval.z_hi,
                    "branch": s.interval.branch,
                },
            }
            for s in result.stages
        ],
        "final": {
            "z_hat": result.final.z_hat,
            "z_lo": result.final.z_lo,
            "z_hi": result.final.z_hi,
            "relative_uncertainty": result.final.relative_uncertainty,
        },
    }
    emit(to_json(doc) + "\n", out)


@main.command("optimize-phi0")
@common_flags
@click.option("--z-est", "z_est", type=float, default=None, help="Position estimate in wavelengths.")
def cmd_optimize_phi0(config_path, out, **overrides):
    """Optimize the relative phase for a position estimate, as JSON."""
    z_est = overrides.pop("z_est", None)
    config = prepare(config_path, **overrides)
    if z_est is None:
        z_est = config.get("z_est")
    if z_est is None:
        fail(EXIT_CONFIG, "config field $.z_est: required for optimize-phi0")
    layout = build_layout(config)
    x = build_drive(config).x
    try:
        phi0_star = loc.optimize_phase(z_est, layout, x)
    except ZeroMagnification as exc:
        fail(EXIT_ZERO_MAGNIFICATION, str(exc))
    base = TWO_PI * magnification(layout) * z_est / layout.wavelength
    doc = {
        "schema_version": SCHEMA_VERSION,
        "phi0_star": phi0_star,
        "slope_at_operating_point": float(slope(x, base + phi0_star)),
        "slope_at_phi0_zero": float(slope(x, base)),
    }
    emit(to_json(doc) + "\n", out)


@main.command("steady-state")
@common_flags
def cmd_steady_state(config_path, out, **overrides):
    """Steady-state populations and numeric-vs-analytic ratio check, as JSON."""
    config = prepare(config_path, **overrides)
    layout = build_layout(config)
    drive = build_drive(config)
    decay = build_decay(config)
    if "phi" in config:
        phi = config["phi"]
    else:
        z = config.get("measurement", {}).get("z_true", 0.0)
        phi = loop_phase(layout, z)
    detunings = (0.0, 0.0, 0.0)
    if len(layout.transitions) == 4:
        t = layout.transitions
        detunings = (t[0].detuning, t[1].detuning, t[3].detuning)
    v = build_generator(phi, drive, detunings)
    try:
        rho = steady_state(build_liouvillian(v, decay))
    except DegenerateSteadyState as exc:
        fail(EXIT_DEGENERATE_STEADY_STATE, str(exc))
    pops = populations(rho)
    numeric = ratio_numeric(rho, decay)
    analytic = float(ratio_analytic(drive.x, phi))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "populations": list(pops),
        "ratio_numeric": numeric,
        "ratio_analytic": analytic,
        "abs_difference": abs(numeric - analytic),
    }
    emit(to_json(doc) + "\n", out)


if __name__ == "__main__":
    main()
