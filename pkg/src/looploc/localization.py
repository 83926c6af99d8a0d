"""Inversion of measured fluorescence ratios into position candidates.

Maps a ratio measurement back to loop phases, unwinds the phases into
positions inside a query window, propagates the measurement band into
position intervals, optimizes the relative phase, and runs the
coarse-to-fine magnification protocol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousBranch, NoSolution, ZeroMagnification
from .geometry import TWO_PI, LoopLayout, loop_phase, magnification, reduce_phase
from .observables import curve_extrema, curve_maximum, ratio_analytic, slope

#: Grid used to isolate roots of R(phi) = R before bisection.
ROOT_SCAN_POINTS = 4096
#: Bisection phase tolerance for root refinement.
ROOT_PHI_TOL = 1e-10
#: Residual below which a non-crossing local minimum counts as a tangent root.
TANGENT_RESIDUAL_TOL = 1e-9
#: Slack allowed above the curve maximum before a ratio is inconsistent.
RATIO_SLACK = 1e-9

FLAG_BAND_ESCAPES = "BandEscapesBranch"
FLAG_OUTSIDE_PRIOR = "OutsidePrior"


@dataclass(frozen=True)
class Measurement:
    """A measured intensity ratio with a symmetric relative error band."""

    ratio: float
    relative_error: float = 0.0

    def __post_init__(self):
        if self.ratio < 0:
            raise ValueError(f"ratio must be >= 0, got {self.ratio}")
        if not 0.0 <= self.relative_error < 0.5:
            raise ValueError(
                f"relative_error must be in [0, 0.5), got {self.relative_error}"
            )


@dataclass(frozen=True)
class PositionInterval:
    """One candidate position with its uncertainty interval, in units of lambda."""

    z_lo: float
    z_hat: float
    z_hi: float
    branch: int
    phi_solution: float
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.z_lo <= self.z_hat <= self.z_hi:
            raise ValueError(
                f"interval must be ordered, got [{self.z_lo}, {self.z_hat}, {self.z_hi}]"
            )

    @property
    def relative_uncertainty(self) -> float:
        """Interval width relative to the central position estimate."""
        return (self.z_hi - self.z_lo) / self.z_hat

    def contains(self, z: float) -> bool:
        return self.z_lo <= z <= self.z_hi


@dataclass(frozen=True)
class CandidateSet:
    """All position candidates of one measurement, sorted by central position."""

    candidates: tuple[PositionInterval, ...]
    layout_snapshot: LoopLayout
    drive_x: float

    def __post_init__(self):
        cands = tuple(sorted(self.candidates, key=lambda c: c.z_hat))
        for a, b in zip(cands, cands[1:]):
            if a.z_hat == b.z_hat:
                raise ValueError(f"duplicate candidate position {a.z_hat}")
        object.__setattr__(self, "candidates", cands)

    def __len__(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class StageResult:
    """Outcome of one protocol stage."""

    xi: float
    phi0: float
    interval: PositionInterval


@dataclass(frozen=True)
class ProtocolResult:
    """Per-stage intervals and the final estimate of the coarse-to-fine run."""

    stages: tuple[StageResult, ...]

    @property
    def final(self) -> PositionInterval:
        return self.stages[-1].interval


def _bisect_ratio(x: float, target: float, lo: float, hi: float, f_lo: float) -> float:
    """Bisection for R(phi) = target on a bracket with a sign change."""
    while hi - lo > ROOT_PHI_TOL:
        mid = 0.5 * (lo + hi)
        fm = float(ratio_analytic(x, mid)) - target
        if fm == 0.0:
            return mid
        if fm * f_lo > 0.0:
            lo, f_lo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _refine_tangent(x: float, target: float, lo: float, hi: float) -> tuple[float, float]:
    """Ternary search for the minimum of |R(phi) - target| on [lo, hi]."""
    for _ in range(120):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        if abs(float(ratio_analytic(x, m1)) - target) < abs(
            float(ratio_analytic(x, m2)) - target
        ):
            hi = m2
        else:
            lo = m1
        if hi - lo < ROOT_PHI_TOL:
            break
    mid = 0.5 * (lo + hi)
    return mid, abs(float(ratio_analytic(x, mid)) - target)


def invert_ratio(ratio: float, x: float) -> list[float]:
    """All phases in [0, 2*pi) where the closed-form ratio equals ``ratio``.

    Sign changes on a uniform scan grid are refined by bisection; tangent
    (double) roots at curve extrema are caught by a residual-minimum check
    and reported once. Raises :class:`NoSolution` when the ratio exceeds the
    curve maximum beyond tolerance.
    """
    if ratio < 0:
        raise ValueError(f"ratio must be >= 0, got {ratio}")
    phi = np.linspace(0.0, TWO_PI, ROOT_SCAN_POINTS + 1)
    resid = ratio_analytic(x, phi) - ratio
    r_max = curve_maximum(x)
    if ratio > r_max + RATIO_SLACK:
        raise NoSolution(
            f"ratio {ratio} exceeds the curve maximum {r_max:.6f} for x = {x}"
        )

    roots: list[float] = [float(p) for p in phi[resid == 0.0]]
    # sign-change brackets
    for i in np.nonzero(resid[:-1] * resid[1:] < 0.0)[0]:
        roots.append(_bisect_ratio(x, ratio, phi[i], phi[i + 1], resid[i]))
    # tangent roots: interior minima of |residual| without a sign change
    absr = np.abs(resid)
    interior_min = (
        (absr[1:-1] <= absr[:-2])
        & (absr[1:-1] <= absr[2:])
        & (resid[:-2] * resid[1:-1] > 0.0)
        & (resid[1:-1] * resid[2:] > 0.0)
    )
    for i in np.nonzero(interior_min)[0] + 1:
        if absr[i] > 1e-4:  # far above any grid-resolved tangent residual
            continue
        root, res = _refine_tangent(x, ratio, phi[i - 1], phi[i + 1])
        if res <= TANGENT_RESIDUAL_TOL:
            roots.append(root)
    # tangent root at the periodic seam (extremum at phi = 0)
    if resid[0] != 0.0 and resid[0] * resid[1] > 0.0 and absr[0] < absr[1]:
        root, res = _refine_tangent(x, ratio, 0.0, float(phi[1]))
        if res <= TANGENT_RESIDUAL_TOL:
            roots.append(root)

    # reduce 2*pi aliases and deduplicate
    out: list[float] = []
    for r in sorted(reduce_phase(r) for r in roots):
        if not out or r - out[-1] > 1e-7:
            out.append(r)
    if len(out) > 1 and (TWO_PI - out[-1]) + out[0] < 1e-7:
        out.pop()
    return out


def _phase_to_positions(
    phi_star: float, layout: LoopLayout, window: tuple[float, float]
) -> list[tuple[int, float]]:
    """All (winding index m, position z) with z in the window, for one phase."""
    xi = magnification(layout)
    lam = layout.wavelength
    lo, hi = window
    base = phi_star - layout.relative_phase
    # z = (base + 2*pi*m) * lam / (2*pi*xi); solve m range from the window
    m_lo = (TWO_PI * xi * lo / lam - base) / TWO_PI
    m_hi = (TWO_PI * xi * hi / lam - base) / TWO_PI
    if m_lo > m_hi:
        m_lo, m_hi = m_hi, m_lo
    out = []
    for m in range(math.ceil(m_lo - 1e-12), math.floor(m_hi + 1e-12) + 1):
        z = (base + TWO_PI * m) * lam / (TWO_PI * xi)
        if lo - 1e-12 <= z < hi:
            out.append((m, z))
    return out


def _monotone_segment(x: float, phi_star: float) -> tuple[float, float]:
    """Endpoints of the monotone segment of R(phi) containing ``phi_star``."""
    ext = curve_extrema(x)
    idx = int(np.searchsorted(ext, phi_star))
    idx = min(max(idx, 1), len(ext) - 1)
    return float(ext[idx - 1]), float(ext[idx])


def _band_interval(
    x: float, phi_star: float, ratio: float, delta: float
) -> tuple[float, float, bool]:
    """Phase interval mapped from the ratio band [R(1-d), R(1+d)] around phi_star.

    Inversion stays on the monotone segment containing phi_star; band edges
    falling outside the segment's value range clamp to the segment end and
    set the escape flag.
    """
    seg_lo, seg_hi = _monotone_segment(x, phi_star)
    r_lo_end = float(ratio_analytic(x, seg_lo))
    r_hi_end = float(ratio_analytic(x, seg_hi))
    escaped = False

    def invert_edge(target: float) -> float:
        nonlocal escaped
        r_min, r_max = min(r_lo_end, r_hi_end), max(r_lo_end, r_hi_end)
        if target <= r_min:
            escaped = escaped or target < r_min - TANGENT_RESIDUAL_TOL
            return seg_lo if r_lo_end < r_hi_end else seg_hi
        if target >= r_max:
            escaped = escaped or target > r_max + TANGENT_RESIDUAL_TOL
            return seg_hi if r_hi_end > r_lo_end else seg_lo
        f_lo = r_lo_end - target
        return _bisect_ratio(x, target, seg_lo, seg_hi, f_lo)

    phi_a = invert_edge(ratio * (1.0 - delta))
    phi_b = invert_edge(ratio * (1.0 + delta))
    return min(phi_a, phi_b), max(phi_a, phi_b), escaped


def candidates(
    meas: Measurement,
    layout: LoopLayout,
    x: float,
    window: tuple[float, float],
) -> CandidateSet:
    """Position candidates of a ratio measurement inside a query window.

    Each phase solution is unwound into every branch that lands in the
    window; a nonzero measurement band is propagated into per-branch
    intervals on the same monotone segment of the ratio curve.
    """
    xi = magnification(layout)
    if xi == 0.0:
        raise ZeroMagnification("phase-matched layout carries no position information")
    lo, hi = window
    if hi - lo > 10.0 * layout.wavelength:
        raise ValueError(f"window length {hi - lo} exceeds 10 wavelengths")
    lam = layout.wavelength
    scale = lam / (TWO_PI * xi)

    out: list[PositionInterval] = []
    for phi_star in invert_ratio(meas.ratio, x):
        if meas.relative_error > 0.0:
            phi_a, phi_b, escaped = _band_interval(
                x, phi_star, meas.ratio, meas.relative_error
            )
        else:
            phi_a = phi_b = phi_star
            escaped = False
        flags = (FLAG_BAND_ESCAPES,) if escaped else ()
        for m, z_hat in _phase_to_positions(phi_star, layout, window):
            offsets = sorted(((phi_a - phi_star) * scale, (phi_b - phi_star) * scale))
            out.append(
                PositionInterval(
                    z_lo=z_hat + offsets[0],
                    z_hat=z_hat,
                    z_hi=z_hat + offsets[1],
                    branch=m,
                    phi_solution=phi_star,
                    flags=flags,
                )
            )
    return CandidateSet(tuple(out), layout, x)


def propagate_error(
    meas: Measurement,
    layout: LoopLayout,
    x: float,
    window: tuple[float, float],
) -> CandidateSet:
    """Candidates with the measurement band propagated into position intervals."""
    if meas.relative_error <= 0.0:
        raise ValueError("propagate_error needs a positive relative_error")
    return candidates(meas, layout, x, window)


def simulate_measurement(
    z_true: float,
    layout: LoopLayout,
    x: float,
    noise: tuple[float, int] | None = None,
    band: float | None = None,
) -> Measurement:
    """Synthetic ratio measurement of a particle at ``z_true`` (in lambda).

    ``noise`` = (relative sigma, seed) multiplies the ratio by (1 + sigma*u)
    with a deterministic standard-normal draw. ``band`` overrides the
    reported relative error; it defaults to sigma (or 0 without noise).
    """
    phi = loop_phase(layout, z_true)
    ratio = float(ratio_analytic(x, phi))
    rel_err = 0.0
    if noise is not None:
        sigma, seed = noise
        u = float(np.random.default_rng(seed).standard_normal())
        ratio = max(0.0, ratio * (1.0 + sigma * u))
        rel_err = sigma
    if band is not None:
        rel_err = band
    return Measurement(ratio=ratio, relative_error=rel_err)


def _golden_section_max(f, lo: float, hi: float, tol: float) -> float:
    """Golden-section search for the maximizer of f on [lo, hi]."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimize_phase(
    z_est: float,
    layout: LoopLayout,
    x: float,
    grid_points: int = 1024,
    tol: float = 1e-6,
) -> float:
    """Relative phase phi0 maximizing |dR/dphi| at the operating point of z_est.

    A steep operating point minimizes |dz/dR| there, shrinking the position
    interval a given ratio band maps to.
    """
    xi = magnification(layout)
    if xi == 0.0:
        raise ZeroMagnification("cannot optimize the phase of a phase-matched layout")
    base = TWO_PI * xi * z_est / layout.wavelength

    def objective(phi0: float) -> float:
        return abs(float(slope(x, base + phi0)))

    grid = np.linspace(0.0, TWO_PI, grid_points, endpoint=False)
    best = int(np.argmax(np.abs(slope(x, base + grid))))
    step = TWO_PI / grid_points
    phi0_star = _golden_section_max(
        objective, grid[best] - step, grid[best] + step, tol
    )
    return reduce_phase(phi0_star)


def select_branch(cands: CandidateSet, prior: PositionInterval) -> PositionInterval:
    """The unique candidate inside the prior interval.

    With no candidate inside, the nearest one is returned carrying an
    ``OutsidePrior`` flag; more than one inside raises
    :class:`AmbiguousBranch`.
    """
    if len(cands) == 0:
        raise ValueError("empty candidate set")
    inside = [c for c in cands.candidates if prior.contains(c.z_hat)]
    if len(inside) > 1:
        raise AmbiguousBranch(
            f"{len(inside)} candidates inside prior [{prior.z_lo}, {prior.z_hi}]"
        )
    if len(inside) == 1:
        return inside[0]
    nearest = min(cands.candidates, key=lambda c: abs(c.z_hat - prior.z_hat))
    return PositionInterval(
        z_lo=nearest.z_lo,
        z_hat=nearest.z_hat,
        z_hi=nearest.z_hi,
        branch=nearest.branch,
        phi_solution=nearest.phi_solution,
        flags=nearest.flags + (FLAG_OUTSIDE_PRIOR,),
    )


def coarse_to_fine(
    source,
    stages: list[tuple[LoopLayout, float]],
    window: tuple[float, float],
) -> ProtocolResult:
    """Coarse-to-fine localization over stages of increasing magnification.

    ``source`` is a callable (layout, x) -> Measurement. The first stage
    must be coarse (magnification <= 1) and yield a single candidate in the
    window; each later stage disambiguates its candidates against the
    previous stage's interval. Raises :class:`AmbiguousBranch` when a
    stage cannot single out a branch.
    """
    if not stages:
        raise ValueError("need at least one stage")
    xis = [magnification(layout) for layout, _ in stages]
    if xis[0] > 1.0:
        raise ValueError(f"first stage must have magnification <= 1, got {xis[0]}")
    if any(b <= a for a, b in zip(xis, xis[1:])):
        raise ValueError(f"stage magnifications must be strictly increasing: {xis}")

    results: list[StageResult] = []
    prior: PositionInterval | None = None
    for stage_idx, (layout, x) in enumerate(stages):
        meas = source(layout, x)
        cands = candidates(meas, layout, x, window)
        if prior is None:
            if len(cands) != 1:
                raise AmbiguousBranch(
                    f"coarse stage produced {len(cands)} candidates in the window"
                )
            chosen = cands.candidates[0]
        else:
            try:
                chosen = select_branch(cands, prior)
            except AmbiguousBranch as exc:
                raise AmbiguousBranch(f"stage {stage_idx}: {exc}") from exc
        results.append(
            StageResult(xi=xis[stage_idx], phi0=layout.relative_phase, interval=chosen)
        )
        prior = chosen
    return ProtocolResult(tuple(results))
