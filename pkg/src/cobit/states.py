"""Minimal single-qubit state and operator kernel.

A cobit is modelled as a normalized two-component complex vector over the
computational basis {|0>, |1>}.  Operators are plain 2x2 complex numpy
arrays; every factory in this module returns a unitary (checked to 1e-12).
Convention for rotations: ry(theta) = exp(-i theta/2 sigma_y), which is real
valued, so all states produced by the protocol stay real.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ATOL = 1e-12

# Tolerance for states arriving from outside the process (wire transport).
TRANSPORT_ATOL = 1e-9


class NonUnitaryError(ValueError):
    """Raised when an operator fed to apply() is not unitary."""


@dataclass(frozen=True)
class CobitState:
    """Normalized amplitudes over {|0>, |1>}.

    The constructor renormalizes to absorb floating-point drift but rejects
    vectors whose norm is off by more than ~1e-6, which always indicates a
    bug rather than accumulated rounding.
    """

    amp0: complex
    amp1: complex

    def __post_init__(self) -> None:
        norm = math.sqrt(abs(self.amp0) ** 2 + abs(self.amp1) ** 2)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"state norm {norm!r} too far from 1")
        if norm != 1.0:
            object.__setattr__(self, "amp0", self.amp0 / norm)
            object.__setattr__(self, "amp1", self.amp1 / norm)

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    def prob1(self) -> float:
        return float(abs(self.amp1) ** 2)

    def canonical_phase(self) -> "CobitState":
        """Fix the global phase so the dominant amplitude is real positive.

        Global phase carries no physical information (no phase reference
        travels with a single polarization qubit), so serialization and
        multiset comparisons use this gauge.
        """
        major = self.amp0 if abs(self.amp0) >= abs(self.amp1) else self.amp1
        phase = major / abs(major)
        return CobitState(self.amp0 / phase, self.amp1 / phase)

    def density(self) -> np.ndarray:
        v = self.vec
        return np.outer(v, v.conj())


def basis_state(bit: int) -> CobitState:
    """|0> or |1>."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return CobitState(1.0 - bit, 1.0 * bit)


def _frozen(mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=complex)
    mat.setflags(write=False)
    return mat


def ry(theta: float) -> np.ndarray:
    """Rotation exp(-i theta/2 sigma_y) as a real 2x2 matrix."""
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return _frozen([[c, -s], [s, c]])


def rotation(angle: float) -> np.ndarray:
    """Plane rotation [[cos, -sin], [sin, cos]]; equals ry(2*angle)."""
    return ry(2.0 * angle)


PAULI_X = _frozen([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = _frozen([[1.0, 0.0], [0.0, -1.0]])
IDENTITY = _frozen(np.eye(2))


def is_unitary(op: np.ndarray, atol: float = ATOL) -> bool:
    op = np.asarray(op)
    return op.shape == (2, 2) and np.allclose(op.conj().T @ op, np.eye(2), atol=atol)


def apply(op: np.ndarray, state: CobitState) -> CobitState:
    """Apply a unitary to a state; rejects non-unitary input."""
    if not is_unitary(op):
        raise NonUnitaryError("operator is not unitary within 1e-12")
    out = np.asarray(op) @ state.vec
    return CobitState(complex(out[0]), complex(out[1]))


def measure_z(state: CobitState, rng: np.random.Generator) -> int:
    """Sample a computational-basis outcome with Born probabilities."""
    return int(rng.random() < state.prob1())


def measure_z_many(state: CobitState, n: int, rng: np.random.Generator) -> int:
    """Number of 1-outcomes among n independent measurements of copies."""
    return int(rng.binomial(n, state.prob1()))


def equal_up_to_global_phase(s1: CobitState, s2: CobitState, tol: float = ATOL) -> bool:
    """True when |<s1|s2>| >= 1 - tol, i.e. same ray in state space."""
    overlap = abs(np.vdot(s1.vec, s2.vec))
    return bool(overlap >= 1.0 - tol)


def validate_density(rho: np.ndarray, atol: float = ATOL) -> np.ndarray:
    """Check Hermiticity, unit trace and positivity; returns rho unchanged."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError(f"density matrix must be 2x2, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=atol):
        raise ValueError("density matrix not Hermitian")
    if abs(np.trace(rho) - 1.0) > atol:
        raise ValueError("density matrix trace != 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise ValueError("density matrix has negative eigenvalue")
    return rho


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    """(1/2) sum |eigenvalues| of the difference of two density matrices."""
    diff = np.asarray(rho1, dtype=complex) - np.asarray(rho2, dtype=complex)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


MAXIMALLY_MIXED = _frozen(np.eye(2) / 2.0)
