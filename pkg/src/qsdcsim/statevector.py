"""Dense statevector engine for small registers of qubits plus probe ancillas.

A state lives in a tensor product of subsystems, each with its own dimension
(2 for qubits, 4 for an eavesdropper's probe ancilla). Subsystem 0 is the
leftmost ket label and flat indices are big-endian over subsystems, so for
three qubits |q0 q1 q2> sits at index 4*q0 + 2*q1 + q2.

All operations are pure: they take states and return new states, never
mutating their inputs. Measurement does not own a random source; the caller
supplies a uniform draw in [0, 1), which keeps whole protocol sessions
replayable from a single seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

NORM_ATOL = 1e-9

_SQRT2_INV = 1.0 / math.sqrt(2.0)


class NotNormalizedError(ValueError):
    """Amplitudes do not satisfy the unit-norm constraint."""


class InvalidIsometryError(ValueError):
    """A matrix offered as an isometry does not satisfy V†V = I."""


class Basis(Enum):
    """Measurement basis: Z is {|0>, |1>}, X is {|+>, |->}."""

    Z = "Z"
    X = "X"


class DecoyState(Enum):
    """The four single-photon states used for eavesdropping checks."""

    ZERO = "0"
    ONE = "1"
    PLUS = "+"
    MINUS = "-"

    @property
    def basis(self) -> Basis:
        """Basis in which this state is an eigenstate."""
        return Basis.Z if self in (DecoyState.ZERO, DecoyState.ONE) else Basis.X

    @property
    def eigenvalue_bit(self) -> int:
        """Outcome bit a noiseless measurement in `basis` must produce."""
        return 0 if self in (DecoyState.ZERO, DecoyState.PLUS) else 1


@dataclass(eq=False)
class StateVector:
    """Normalized complex amplitudes over a list of subsystem dimensions."""

    dims: tuple[int, ...]
    amps: np.ndarray

    def __post_init__(self) -> None:
        self.dims = tuple(int(d) for d in self.dims)
        if not self.dims or any(d < 2 for d in self.dims):
            raise ValueError(f"subsystem dimensions must all be >= 2, got {self.dims}")
        amps = np.asarray(self.amps, dtype=np.complex128).reshape(-1)
        expected = math.prod(self.dims)
        if amps.size != expected:
            raise ValueError(f"expected {expected} amplitudes for dims {self.dims}, got {amps.size}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        norm_sq = float(np.real(np.vdot(amps, amps)))
        if abs(norm_sq - 1.0) > NORM_ATOL:
            raise NotNormalizedError(f"sum of |amplitude|^2 is {norm_sq!r}, not 1")
        self.amps = amps

    @property
    def num_subsystems(self) -> int:
        return len(self.dims)

    @property
    def dim(self) -> int:
        return self.amps.size

    def probability(self, flat_index: int) -> float:
        return float(abs(self.amps[flat_index]) ** 2)


@dataclass(frozen=True)
class MeasurementRecord:
    """One projective measurement: where, in which basis, what came out.

    `outcome` 0 means the first eigenstate (|0> or |+>), 1 the second
    (|1> or |->). `outcome_prob` is the pre-collapse probability of the
    outcome that was sampled.
    """

    subsystem_index: int
    basis: Basis
    outcome: int
    outcome_prob: float


_DECOY_AMPS = {
    DecoyState.ZERO: np.array([1.0, 0.0], dtype=np.complex128),
    DecoyState.ONE: np.array([0.0, 1.0], dtype=np.complex128),
    DecoyState.PLUS: np.array([_SQRT2_INV, _SQRT2_INV], dtype=np.complex128),
    DecoyState.MINUS: np.array([_SQRT2_INV, -_SQRT2_INV], dtype=np.complex128),
}


def make_pair(a: complex, b: complex) -> StateVector:
    """Two-qubit resource state a|00> + b|11> over qubit order (A, B).

    Raises NotNormalizedError unless |a|^2 + |b|^2 = 1 within tolerance.
    """
    a = complex(a)
    b = complex(b)
    norm_sq = abs(a) ** 2 + abs(b) ** 2
    if abs(norm_sq - 1.0) > NORM_ATOL:
        raise NotNormalizedError(f"|a|^2 + |b|^2 = {norm_sq!r}, not 1")
    return StateVector((2, 2), np.array([a, 0.0, 0.0, b], dtype=np.complex128))


def make_qubit(bit: int) -> StateVector:
    """Single qubit prepared in |0> or |1>."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit!r}")
    return StateVector((2,), _DECOY_AMPS[DecoyState.ONE if bit else DecoyState.ZERO].copy())


def make_decoy(which: DecoyState) -> StateVector:
    """Single photon in one of the four check states |0>, |1>, |+>, |->."""
    return StateVector((2,), _DECOY_AMPS[which].copy())


def tensor(left: StateVector, right: StateVector) -> StateVector:
    """Kronecker product; left's subsystems come before right's."""
    return StateVector(left.dims + right.dims, np.kron(left.amps, right.amps))


def _check_subsystem(state: StateVector, index: int, *, want_qubit: bool = True) -> None:
    if not 0 <= index < state.num_subsystems:
        raise IndexError(f"subsystem {index} out of range for {state.num_subsystems} subsystems")
    if want_qubit and state.dims[index] != 2:
        raise ValueError(f"subsystem {index} has dimension {state.dims[index]}, expected a qubit")


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    """Controlled-NOT: flips the target wherever the control bit is 1."""
    _check_subsystem(state, control)
    _check_subsystem(state, target)
    if control == target:
        raise ValueError("control and target must be distinct subsystems")
    amps = state.amps.reshape(state.dims).copy()
    sel0 = [slice(None)] * state.num_subsystems
    sel0[control] = 1
    sel1 = list(sel0)
    sel0[target] = 0
    sel1[target] = 1
    a, b = tuple(sel0), tuple(sel1)
    amps[a], amps[b] = amps[b].copy(), amps[a].copy()
    return StateVector(state.dims, amps.reshape(-1))


def measure(
    state: StateVector, subsystem: int, basis: Basis, rand: float
) -> tuple[MeasurementRecord, StateVector]:
    """Projective measurement of one qubit with Born-rule sampling.

    `rand` is compared against the cumulative outcome probability: outcome 0
    is returned iff rand < P(0). The returned state is the renormalized
    collapse, with the measured subsystem left in the observed eigenstate.
    """
    _check_subsystem(state, subsystem)
    if not 0.0 <= rand < 1.0:
        raise ValueError(f"rand must lie in [0, 1), got {rand!r}")
    moved = np.moveaxis(state.amps.reshape(state.dims), subsystem, 0)
    if basis is Basis.Z:
        b0 = moved[0]
        b1 = moved[1]
    else:
        b0 = (moved[0] + moved[1]) * _SQRT2_INV
        b1 = (moved[0] - moved[1]) * _SQRT2_INV
    p0 = float(np.real(np.vdot(b0, b0)))
    p1 = float(np.real(np.vdot(b1, b1)))
    outcome = 0 if (rand < p0 or p1 == 0.0) else 1
    prob = p0 if outcome == 0 else p1
    branch = (b0 if outcome == 0 else b1) / math.sqrt(prob)
    out = np.zeros_like(moved)
    if basis is Basis.Z:
        out[outcome] = branch
    elif outcome == 0:  # collapse onto |+>
        out[0] = branch * _SQRT2_INV
        out[1] = branch * _SQRT2_INV
    else:  # collapse onto |->
        out[0] = branch * _SQRT2_INV
        out[1] = -branch * _SQRT2_INV
    record = MeasurementRecord(subsystem, basis, outcome, prob)
    return record, StateVector(state.dims, np.moveaxis(out, 0, subsystem).reshape(-1))


def apply_isometry(state: StateVector, subsystem: int, matrix: np.ndarray) -> StateVector:
    """Replace a qubit subsystem with (qubit ⊗ ancilla) via an isometry.

    `matrix` has shape (2*d, 2); row index q*d + e addresses the output
    component |q>|e>. Raises InvalidIsometryError unless V†V = I, which is
    what guarantees the output stays normalized.
    """
    _check_subsystem(state, subsystem)
    v = np.asarray(matrix, dtype=np.complex128)
    if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 4 or v.shape[0] % 2:
        raise InvalidIsometryError(f"isometry must have shape (2*d, 2) with d >= 2, got {v.shape}")
    gram = v.conj().T @ v
    if float(np.max(np.abs(gram - np.eye(2)))) > 1e-8:
        raise InvalidIsometryError("matrix columns are not orthonormal (V†V != I)")
    ancilla_dim = v.shape[0] // 2
    moved = np.moveaxis(state.amps.reshape(state.dims), subsystem, 0)
    extended = (v @ moved.reshape(2, -1)).reshape((2 * ancilla_dim,) + moved.shape[1:])
    back = np.moveaxis(extended, 0, subsystem)
    new_dims = state.dims[:subsystem] + (2, ancilla_dim) + state.dims[subsystem + 1 :]
    return StateVector(new_dims, np.ascontiguousarray(back).reshape(-1))
