"""Interaction-picture generator and dissipative steady state of the diamond scheme.

Basis ordering is (|1>, |2>, |3>, |4>) with |1> the ground state, |2> and |4>
the intermediates and |3> the top state. Density matrices are flattened
row-major over (row, column) whenever a 16-component vector is needed.
All energies and rates are in units of the decay rate gamma (hbar = 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSteadyState, NoConvergence

#: Decay channels of the diamond, directed downward in energy, as
#: (upper level, lower level) pairs using 0-based basis indices:
#: 3->2, 3->4, 2->1, 4->1.
DECAY_CHANNELS = ((2, 1), (2, 3), (1, 0), (3, 0))

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-10
RESIDUAL_TOL = 1e-10
#: Required singular-value separation between the kernel and the rest.
KERNEL_GAP = 1e6


@dataclass(frozen=True)
class DriveParams:
    """Uniform drive strength x = Omega/gamma, optionally overridden per field.

    ``per_transition_g``, when given, lists (g21, g32, g34, g41) in gamma.
    """

    x: float
    per_transition_g: tuple[float, float, float, float] | None = None

    def __post_init__(self):
        if not self.x > 0:
            raise ValueError(f"drive strength x must be positive, got {self.x}")
        if self.per_transition_g is not None:
            g = tuple(float(v) for v in self.per_transition_g)
            if len(g) != 4 or any(v <= 0 for v in g):
                raise ValueError("per_transition_g needs 4 positive entries")
            object.__setattr__(self, "per_transition_g", g)

    @property
    def couplings(self) -> tuple[float, float, float, float]:
        """(g21, g32, g34, g41) in units of gamma."""
        if self.per_transition_g is not None:
            return self.per_transition_g
        return (self.x,) * 4


@dataclass(frozen=True)
class DecayModel:
    """Half-rates gamma_ji of the four decay channels (3->2, 3->4, 2->1, 4->1).

    Each channel enters the dissipator with total Lindblad rate 2*gamma_ji.
    """

    rates: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        r = tuple(float(v) for v in self.rates)
        if len(r) != 4 or any(v <= 0 for v in r):
            raise ValueError("need 4 positive decay rates")
        object.__setattr__(self, "rates", r)


@dataclass(frozen=True)
class DensityMatrix:
    """Validated 4x4 Hermitian unit-trace state of the diamond system."""

    entries: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.entries, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T)) > HERMITICITY_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > TRACE_TOL or abs(np.trace(rho).imag) > TRACE_TOL:
            raise ValueError(f"trace must be 1, got {np.trace(rho)}")
        if np.min(rho.diagonal().real) < -TRACE_TOL:
            raise ValueError("negative population on the diagonal")
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)


def build_generator(
    phi: float,
    drives: DriveParams,
    detunings: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> np.ndarray:
    """Interaction-picture Hamiltonian V/hbar of the driven diamond, in gamma.

    ``detunings`` is (Delta21, Delta32, Delta41). The full loop phase ``phi``
    sits on the |2>-|3> coupling and nowhere else.
    """
    d21, d32, d41 = detunings
    g21, g32, g34, g41 = drives.couplings
    v = np.zeros((4, 4), dtype=complex)
    v[1, 1] = -d21
    v[2, 2] = -(d21 + d32)
    v[3, 3] = -d41
    v[1, 0] = g21
    v[2, 3] = g34
    v[3, 0] = g41
    v[2, 1] = g32 * np.exp(-1j * phi)
    return v + v.conj().T - np.diag(v.diagonal())


def build_liouvillian(v: np.ndarray, decay: DecayModel) -> np.ndarray:
    """16x16 matrix of rho -> -i[V, rho] + dissipator, row-major flattening.

    Each decay channel (i -> j) contributes a Lindblad term with jump
    operator |j><i| at total rate 2*gamma_ji.
    """
    v = np.asarray(v, dtype=complex)
    eye = np.eye(4)
    lv = -1j * (np.kron(v, eye) - np.kron(eye, v.T))
    for gamma_ji, (upper, lower) in zip(decay.rates, DECAY_CHANNELS):
        a = np.zeros((4, 4))
        a[lower, upper] = 1.0
        ada = a.T @ a
        lv += 2.0 * gamma_ji * (
            np.kron(a, a) - 0.5 * np.kron(ada, eye) - 0.5 * np.kron(eye, ada.T)
        )
    return lv


def _trace_functional() -> np.ndarray:
    t = np.zeros(16)
    t[[0, 5, 10, 15]] = 1.0
    return t


def steady_state(lv: np.ndarray) -> DensityMatrix:
    """Unique stationary density matrix of the generator ``lv``.

    Solves the augmented linear system in which one row of L is replaced by
    the trace functional, then symmetrizes and verifies the residual.
    Raises :class:`DegenerateSteadyState` when the kernel is not
    one-dimensional and :class:`NoConvergence` when the residual check fails.
    """
    lv = np.asarray(lv, dtype=complex)
    if lv.shape != (16, 16):
        raise ValueError(f"expected a 16x16 generator, got shape {lv.shape}")
    t = _trace_functional()
    if np.max(np.abs(t @ lv)) > TRACE_TOL:
        raise ValueError("generator is not trace preserving")
    sv = np.linalg.svd(lv, compute_uv=False)
    if sv[-2] <= KERNEL_GAP * sv[-1]:
        raise DegenerateSteadyState(
            f"kernel not one-dimensional (singular values {sv[-1]:.3e}, {sv[-2]:.3e})"
        )
    m = lv.copy()
    m[0, :] = t
    rhs = np.zeros(16, dtype=complex)
    rhs[0] = 1.0
    rho = np.linalg.solve(m, rhs).reshape(4, 4)
    rho = 0.5 * (rho + rho.conj().T)
    residual = np.max(np.abs(lv @ rho.reshape(16)))
    if residual > RESIDUAL_TOL:
        raise NoConvergence(f"steady-state residual {residual:.3e} above tolerance")
    return DensityMatrix(rho)


def populations(rho: DensityMatrix) -> tuple[float, float, float, float]:
    """Real diagonal (rho11, rho22, rho33, rho44), clamped at zero from below."""
    diag = rho.entries.diagonal().real
    return tuple(max(0.0, p) for p in diag)
