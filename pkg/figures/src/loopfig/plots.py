"""Figure builders for ratio curves, candidate branches and uncertainty bands."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "loopfig"  # stable element ids across runs
import matplotlib.pyplot as plt
import numpy as np

from .io import read_curve_csv, read_result_json

KINDS = ("ratio-curves", "position-branches", "uncertainty-band")

BRANCH_STYLES = [
    {"color": "tab:blue", "linestyle": "-"},
    {"color": "tab:red", "linestyle": "--"},
    {"color": "magenta", "linestyle": "-."},
]


@dataclass
class FigureSpec:
    """What to draw, from which serialized CLI outputs, to which file."""

    kind: str
    inputs: list[str]
    output: str
    labels: list[str] = field(default_factory=list)
    band_input: str | None = None
    marker_z: float | None = 0.15
    x_range: tuple[float, float] | None = None
    y_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}, expected one of {KINDS}")
        if not self.inputs:
            raise ValueError("at least one input file is required")

    @classmethod
    def from_dict(cls, raw: dict) -> "FigureSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown figure spec fields: {sorted(unknown)}")
        raw = dict(raw)
        for key in ("x_range", "y_range"):
            if raw.get(key) is not None:
                raw[key] = tuple(raw[key])
        return cls(**raw)


def _finish(fig, ax, spec: FigureSpec):
    if spec.x_range:
        ax.set_xlim(*spec.x_range)
    if spec.y_range:
        ax.set_ylim(*spec.y_range)
    ax.legend(loc="best", fontsize=8)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, metadata=_stable_metadata(out.suffix))
    plt.close(fig)
    return out


def _stable_metadata(suffix: str):
    # strip run timestamps so regenerated files are byte-stable
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".pdf":
        return {"CreationDate": None}
    return None


def make_ratio_figure(spec: FigureSpec) -> Path:
    """Overlay of ratio curves R(phi), one per input CSV."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, path in enumerate(spec.inputs):
        data = read_curve_csv(path)
        label = spec.labels[i] if i < len(spec.labels) else Path(path).stem
        ax.plot(data["phi_rad"], data["R"], label=label)
    ax.set_xlabel(r"loop phase $\Phi$ (rad)")
    ax.set_ylabel("intensity ratio $R$")
    return _finish(fig, ax, spec)


def _plot_branches(ax, data, style, label):
    """Draw one position-curve file as disconnected branch segments."""
    order = np.lexsort((data["R"], data["z_lambda"], data["branch"]))
    r, z = data["R"][order], data["z_lambda"][order]
    # split where consecutive points jump between branches
    breaks = np.nonzero(np.abs(np.diff(z)) > 0.1)[0] + 1
    first = True
    for seg_r, seg_z in zip(np.split(r, breaks), np.split(z, breaks)):
        ax.plot(seg_r, seg_z, label=label if first else None, **style)
        first = False


def make_position_figure(spec: FigureSpec) -> Path:
    """Candidate positions z(R) for several magnifications, one style each."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for i, path in enumerate(spec.inputs):
        data = read_curve_csv(path)
        label = spec.labels[i] if i < len(spec.labels) else Path(path).stem
        _plot_branches(ax, data, BRANCH_STYLES[i % len(BRANCH_STYLES)], label)
    if spec.marker_z is not None:
        ax.axhline(spec.marker_z, color="green", linewidth=1.2, label=f"z = {spec.marker_z}")
    ax.set_xlabel("intensity ratio $R$")
    ax.set_ylabel(r"position $z$ ($\lambda$)")
    return _finish(fig, ax, spec)


def make_uncertainty_figure(spec: FigureSpec) -> Path:
    """Position branches with the measured candidate intervals shaded."""
    fig, ax = plt.subplots(figsize=(6, 4))
    data = read_curve_csv(spec.inputs[0])
    label = spec.labels[0] if spec.labels else Path(spec.inputs[0]).stem
    _plot_branches(ax, data, BRANCH_STYLES[0], label)
    if spec.band_input is None:
        raise ValueError("uncertainty-band figures need band_input (invert JSON)")
    doc = read_result_json(spec.band_input)
    first = True
    for cand in doc["candidates"]:
        ax.axhspan(
            cand["z_lo"],
            cand["z_hi"],
            color="gray",
            alpha=0.35,
            label="measured interval" if first else None,
        )
        first = False
    if spec.marker_z is not None:
        ax.axhline(spec.marker_z, color="green", linewidth=1.2, label=f"z = {spec.marker_z}")
    ax.set_xlabel("intensity ratio $R$")
    ax.set_ylabel(r"position $z$ ($\lambda$)")
    return _finish(fig, ax, spec)


def render(spec: FigureSpec) -> Path:
    maker = {
        "ratio-curves": make_ratio_figure,
        "position-branches": make_position_figure,
        "uncertainty-band": make_uncertainty_figure,
    }[spec.kind]
    return maker(spec)
