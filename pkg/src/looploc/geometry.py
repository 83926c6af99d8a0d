"""Field geometry of the closed driving loop and the phase/magnification algebra.

Units: the reference wavelength is normalized to 1, wavenumbers are in units
of 2*pi/lambda (so 1.0 means a field at the reference wavelength), detunings
are in units of the decay rate gamma, and positions are in units of lambda.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NonStaticPhase

TWO_PI = 2.0 * math.pi

#: Absolute tolerance (in gamma) below which the multiphoton detuning counts
#: as zero and the loop phase is static.
STATIC_PHASE_TOL = 1e-12


def reduce_phase(phi: float) -> float:
    """Reduce an angle to the canonical representative in [0, 2*pi)."""
    r = phi - TWO_PI * math.floor(phi / TWO_PI)
    if r >= TWO_PI:  # guard against rounding at the seam
        r -= TWO_PI
    return r


@dataclass(frozen=True)
class FieldGeometry:
    """One driving field: wavenumber magnitude, propagation sign, detuning."""

    wavenumber: float = 1.0
    propagation_sign: int = 1
    detuning: float = 0.0

    def __post_init__(self):
        if not self.wavenumber > 0:
            raise ValueError(f"wavenumber must be positive, got {self.wavenumber}")
        if self.propagation_sign not in (-1, 1):
            raise ValueError(
                f"propagation_sign must be -1 or +1, got {self.propagation_sign}"
            )
        if not math.isfinite(self.detuning):
            raise ValueError("detuning must be finite")


@dataclass(frozen=True)
class LoopLayout:
    """Geometry of the 2N driving fields forming the closed loop.

    ``transitions[i]`` couples level ``i+1`` to level ``i+2`` along the loop
    path, with level ``2N+1`` identified with level 1. ``relative_phase`` is
    the controllable phase phi0 summed around the loop, stored in [0, 2*pi).
    """

    transitions: tuple[FieldGeometry, ...]
    relative_phase: float = 0.0
    wavelength: float = 1.0

    def __post_init__(self):
        trans = tuple(self.transitions)
        object.__setattr__(self, "transitions", trans)
        n = len(trans)
        if n % 2 != 0 or n < 4:
            raise ValueError(f"need an even number 2N >= 4 of transitions, got {n}")
        if not math.isfinite(self.relative_phase):
            raise ValueError("relative_phase must be finite")
        object.__setattr__(self, "relative_phase", reduce_phase(self.relative_phase))
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    @property
    def half_length(self) -> int:
        """N, half the number of loop transitions."""
        return len(self.transitions) // 2


def multiphoton_detuning(layout: LoopLayout) -> float:
    """Signed sum of the per-transition detunings around the loop (in gamma)."""
    return sum(t.detuning for t in layout.transitions)


def wavevector_mismatch(layout: LoopLayout) -> float:
    """z-component of the loop wave-vector sum, in units of 2*pi/lambda.

    Orientation convention: the ascending legs i = 1..N enter with
    +sign*wavenumber, the descending legs i = N+1..2N with -sign*wavenumber.
    For the diamond (N = 2) this is k21 + k32 - eps34*k34 - eps41*k41.
    """
    n = layout.half_length
    total = 0.0
    for i, t in enumerate(layout.transitions):
        orient = 1.0 if i < n else -1.0
        total += orient * t.propagation_sign * t.wavenumber
    return total


def magnification(layout: LoopLayout) -> float:
    """Number of 2*pi windings of the loop phase per wavelength of displacement.

    Equal to the wavevector mismatch in the normalized units; for the
    equal-wavenumber diamond this is 2 - eps34 - eps41.
    """
    return wavevector_mismatch(layout)


def loop_phase(layout: LoopLayout, z: float, reduced: bool = False) -> float:
    """Closed-loop phase Phi = 2*pi*xi*z/lambda + phi0 at position z (in lambda).

    Requires a static phase: the multiphoton detuning must vanish, otherwise
    Phi drifts linearly in time and :class:`NonStaticPhase` is raised.
    """
    delta = multiphoton_detuning(layout)
    if abs(delta) > STATIC_PHASE_TOL:
        raise NonStaticPhase(
            f"multiphoton detuning {delta} gamma != 0: loop phase is time dependent"
        )
    phi = TWO_PI * magnification(layout) * z / layout.wavelength + layout.relative_phase
    return reduce_phase(phi) if reduced else phi


def admissible_magnifications(n: int) -> dict[float, tuple[int, ...]]:
    """Magnifications {0, 2, ..., 2N} reachable with equal wavenumbers.

    Returns a mapping from each admissible magnification to one witness sign
    assignment (a tuple of 2N propagation signs realizing it under the fixed
    loop orientation convention).
    """
    if n < 2:
        raise ValueError(f"need N >= 2, got {n}")
    out: dict[float, tuple[int, ...]] = {}
    for j in range(n + 1):
        # ascending legs all +1; j descending legs reversed to -1
        signs = (1,) * n + (-1,) * j + (1,) * (n - j)
        layout = LoopLayout(tuple(FieldGeometry(1.0, s, 0.0) for s in signs))
        out[magnification(layout)] = signs
    return out


def diamond_layout(
    xi: float, phi0: float = 0.0, detunings: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
) -> LoopLayout:
    """Build a 4-level diamond layout realizing magnification ``xi`` >= 0.

    Integer xi in {0, 2, 4} uses equal wavenumbers and sign flips only;
    other values adjust the two descending-leg wavenumbers symmetrically,
    mimicking slightly unequal transition frequencies.
    """
    if xi < 0:
        raise ValueError(f"magnification must be >= 0, got {xi}")
    if xi == 2.0:
        ks, signs = (1.0, 1.0, 1.0, 1.0), (1, 1, -1, 1)
    elif xi < 2.0:
        k = (2.0 - xi) / 2.0
        ks, signs = (1.0, 1.0, k, k), (1, 1, 1, 1)
    else:
        k = (xi - 2.0) / 2.0
        ks, signs = (1.0, 1.0, k, k), (1, 1, -1, -1)
    trans = tuple(
        FieldGeometry(k, s, d) for k, s, d in zip(ks, signs, detunings)
    )
    return LoopLayout(trans, relative_phase=phi0)
