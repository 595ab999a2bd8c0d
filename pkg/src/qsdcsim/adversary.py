"""Eavesdropping models applied to photons in transit.

Four attacks are supported:

* no attack (the identity),
* intercept-resend: Eve measures each photon in a basis of her choosing and
  forwards the observed eigenstate,
* a generic unitary probe: Eve couples the photon to a private 4-dimensional
  ancilla through an isometry E with
      E|0>|e> = alpha|0>|e00> + beta |1>|e01>
      E|1>|e> = beta'|0>|e10> + alpha'|1>|e11>
  trading information gain against the error rate she induces on the decoy
  check (|beta|^2 in the Z basis),
* selective capture: Eve keeps a fraction of the photons and forwards the
  rest untouched, hiding behind ordinary channel loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

import numpy as np

from .statevector import (
    Basis,
    InvalidIsometryError,
    StateVector,
    apply_isometry,
    measure,
)

ANCILLA_DIM = 4

_EPS_ATOL = 1e-9


def _basis_vec(i: int) -> np.ndarray:
    v = np.zeros(ANCILLA_DIM, dtype=np.complex128)
    v[i] = 1.0
    return v


@dataclass(frozen=True, eq=False)
class ProbeIsometry:
    """Parameters of the probe coupling: four amplitudes and four unit probe
    vectors in the ancilla space. The probe vectors need not be mutually
    orthogonal; the defaults are the standard basis of the ancilla.
    """

    alpha: complex
    beta: complex
    beta_p: complex
    alpha_p: complex
    eps00: np.ndarray = field(default_factory=lambda: _basis_vec(0))
    eps01: np.ndarray = field(default_factory=lambda: _basis_vec(1))
    eps10: np.ndarray = field(default_factory=lambda: _basis_vec(2))
    eps11: np.ndarray = field(default_factory=lambda: _basis_vec(3))

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "beta_p", "alpha_p"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        for name in ("eps00", "eps01", "eps10", "eps11"):
            vec = np.asarray(getattr(self, name), dtype=np.complex128).reshape(-1)
            if vec.size != ANCILLA_DIM:
                raise ValueError(f"{name} must have {ANCILLA_DIM} components, got {vec.size}")
            object.__setattr__(self, name, vec)

    @classmethod
    def identity(cls) -> ProbeIsometry:
        """Probe that does not touch the photon: both pass-through branches
        leave the ancilla in the same state, so it factors out entirely."""
        return cls(alpha=1.0, beta=0.0, beta_p=0.0, alpha_p=1.0, eps11=_basis_vec(0))

    @classmethod
    def from_error_rate(cls, beta_sq: float) -> ProbeIsometry:
        """Symmetric probe with |beta|^2 = |beta'|^2 = beta_sq and orthogonal
        probe vectors; induces exactly beta_sq error on Z-basis decoys."""
        if not 0.0 <= beta_sq <= 1.0:
            raise ValueError(f"beta_sq must lie in [0, 1], got {beta_sq!r}")
        a = math.sqrt(1.0 - beta_sq)
        b = math.sqrt(beta_sq)
        return cls(alpha=a, beta=b, beta_p=b, alpha_p=a)

    def as_matrix(self) -> np.ndarray:
        """The (2*ANCILLA_DIM, 2) coupling matrix, row index q*ANCILLA_DIM + e."""
        v = np.zeros((2 * ANCILLA_DIM, 2), dtype=np.complex128)
        v[:ANCILLA_DIM, 0] = self.alpha * self.eps00
        v[ANCILLA_DIM:, 0] = self.beta * self.eps01
        v[:ANCILLA_DIM, 1] = self.beta_p * self.eps10
        v[ANCILLA_DIM:, 1] = self.alpha_p * self.eps11
        return v


@dataclass(frozen=True)
class ProbeViolation:
    """One numerically violated probe constraint and how badly it fails."""

    constraint: str
    residual: float

    def __str__(self) -> str:
        return f"{self.constraint}: residual {self.residual:.3e}"


def validate_probe(iso: ProbeIsometry) -> list[ProbeViolation]:
    """Check every probe constraint numerically; empty list means valid.

    The constraints are exactly what V†V = I demands of the coupling matrix:
    unit probe vectors, unit column norms on both qubit inputs, and column
    orthogonality including the probe-vector overlaps.
    """
    violations = []
    for name in ("eps00", "eps01", "eps10", "eps11"):
        norm = float(np.linalg.norm(getattr(iso, name)))
        if abs(norm - 1.0) > _EPS_ATOL:
            violations.append(ProbeViolation(f"{name} unit norm", abs(norm - 1.0)))
    col0 = abs(iso.alpha) ** 2 + abs(iso.beta) ** 2
    if abs(col0 - 1.0) > _EPS_ATOL:
        violations.append(ProbeViolation("|alpha|^2 + |beta|^2 = 1", abs(col0 - 1.0)))
    col1 = abs(iso.beta_p) ** 2 + abs(iso.alpha_p) ** 2
    if abs(col1 - 1.0) > _EPS_ATOL:
        violations.append(ProbeViolation("|beta'|^2 + |alpha'|^2 = 1", abs(col1 - 1.0)))
    overlap = iso.alpha * np.conj(iso.beta_p) * np.vdot(iso.eps10, iso.eps00) + iso.beta * np.conj(
        iso.alpha_p
    ) * np.vdot(iso.eps11, iso.eps01)
    if abs(overlap) > _EPS_ATOL:
        violations.append(ProbeViolation("column orthogonality", float(abs(overlap))))
    return violations


def require_valid_probe(iso: ProbeIsometry) -> None:
    violations = validate_probe(iso)
    if violations:
        raise InvalidIsometryError("; ".join(str(v) for v in violations))


def amplitude_symmetry_residuals(iso: ProbeIsometry) -> tuple[float, float]:
    """Residuals of |alpha'|^2 = |alpha|^2 and |beta'|^2 = |beta|^2.

    These equalities follow from unitarity when the probe vectors coincide
    pairwise across the two columns (a 2x2-matrix probe); for general probe
    vectors they are informational, not a validity requirement.
    """
    return (
        abs(abs(iso.alpha_p) ** 2 - abs(iso.alpha) ** 2),
        abs(abs(iso.beta_p) ** 2 - abs(iso.beta) ** 2),
    )


def random_probe(rng: np.random.Generator) -> ProbeIsometry:
    """Haar-ish random valid probe: QR-orthonormalize a Gaussian coupling
    matrix and read the amplitudes and (generally non-orthogonal) probe
    vectors back off its columns."""
    m = rng.normal(size=(2 * ANCILLA_DIM, 2)) + 1j * rng.normal(size=(2 * ANCILLA_DIM, 2))
    q, _ = np.linalg.qr(m)

    def split(col: np.ndarray, fallback: int) -> tuple[complex, np.ndarray, complex, np.ndarray]:
        top, bottom = col[:ANCILLA_DIM], col[ANCILLA_DIM:]
        nt, nb = np.linalg.norm(top), np.linalg.norm(bottom)
        amp0, vec0 = (complex(nt), top / nt) if nt > 1e-12 else (0.0, _basis_vec(fallback))
        amp1, vec1 = (complex(nb), bottom / nb) if nb > 1e-12 else (0.0, _basis_vec(fallback))
        return amp0, vec0, amp1, vec1

    alpha, eps00, beta, eps01 = split(q[:, 0], 0)
    beta_p, eps10, alpha_p, eps11 = split(q[:, 1], 1)
    return ProbeIsometry(
        alpha=alpha, beta=beta, beta_p=beta_p, alpha_p=alpha_p,
        eps00=eps00, eps01=eps01, eps10=eps10, eps11=eps11,
    )


class BasisStrategy(Enum):
    """How an intercept-resend attacker picks her measurement basis."""

    RANDOM_ZX = "random_zx"
    ALWAYS_Z = "always_z"
    ALWAYS_X = "always_x"


@dataclass(frozen=True)
class NoAttack:
    pass


@dataclass(frozen=True)
class InterceptResend:
    basis_strategy: BasisStrategy = BasisStrategy.RANDOM_ZX


@dataclass(frozen=True, eq=False)
class UnitaryProbe:
    iso: ProbeIsometry


@dataclass(frozen=True)
class CaptureFraction:
    capture_prob: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.capture_prob <= 1.0:
            raise ValueError(f"capture_prob must lie in [0, 1], got {self.capture_prob!r}")


AttackModel = Union[NoAttack, InterceptResend, UnitaryProbe, CaptureFraction]


def attack_qubit(
    state: StateVector, qubit: int, model: AttackModel, rng: np.random.Generator
) -> tuple[StateVector, bool]:
    """Apply an attack to one in-transit qubit of `state`.

    Returns the (possibly new) state and a captured flag. Intercept-resend
    measures the qubit and leaves it collapsed onto the observed eigenstate,
    which severs its correlations with the rest of the register exactly as a
    physical resend would. Capture never alters the state; the caller removes
    captured photons from delivery.
    """
    if isinstance(model, NoAttack):
        return state, False
    if isinstance(model, InterceptResend):
        if model.basis_strategy is BasisStrategy.RANDOM_ZX:
            basis = Basis.Z if rng.random() < 0.5 else Basis.X
        elif model.basis_strategy is BasisStrategy.ALWAYS_Z:
            basis = Basis.Z
        else:
            basis = Basis.X
        _, post = measure(state, qubit, basis, rng.random())
        return post, False
    if isinstance(model, UnitaryProbe):
        require_valid_probe(model.iso)
        return apply_isometry(state, qubit, model.iso.as_matrix()), False
    if isinstance(model, CaptureFraction):
        return state, bool(rng.random() < model.capture_prob)
    raise TypeError(f"unknown attack model: {model!r}")


@dataclass(frozen=True)
class ErrorRates:
    """Analytic per-decoy error probabilities, by preparation basis."""

    z_error: float
    x_error: float


def probe_error_rates(iso: ProbeIsometry) -> ErrorRates:
    """Detection probabilities a probe induces on the decoy check.

    Z basis: the flipped branch carries |beta|^2 for a |0> decoy and
    |beta'|^2 for a |1> decoy; averaged over the two.

    X basis: for a |+> decoy the wrong-sign branch is
    (alpha e00 - beta e01 + beta' e10 - alpha' e11)/2 and the error is its
    squared norm; analogously for |->; averaged over the two.
    """
    require_valid_probe(iso)
    z_error = (abs(iso.beta) ** 2 + abs(iso.beta_p) ** 2) / 2.0
    minus_branch = (
        iso.alpha * iso.eps00 - iso.beta * iso.eps01 + iso.beta_p * iso.eps10 - iso.alpha_p * iso.eps11
    )
    plus_branch = (
        iso.alpha * iso.eps00 + iso.beta * iso.eps01 - iso.beta_p * iso.eps10 - iso.alpha_p * iso.eps11
    )
    err_plus = float(np.real(np.vdot(minus_branch, minus_branch))) / 4.0
    err_minus = float(np.real(np.vdot(plus_branch, plus_branch))) / 4.0
    return ErrorRates(z_error=float(z_error), x_error=(err_plus + err_minus) / 2.0)


def intercept_resend_error_rates(strategy: BasisStrategy) -> ErrorRates:
    """Analytic per-decoy error rates for intercept-resend.

    Measuring in the decoy's own basis is invisible; measuring in the
    conjugate basis randomizes the resent photon, so the receiver errs with
    probability 1/2 on those decoys.
    """
    if strategy is BasisStrategy.RANDOM_ZX:
        return ErrorRates(z_error=0.25, x_error=0.25)
    if strategy is BasisStrategy.ALWAYS_Z:
        return ErrorRates(z_error=0.0, x_error=0.5)
    return ErrorRates(z_error=0.5, x_error=0.0)


def attack_error_rates(model: AttackModel) -> ErrorRates:
    """Per-decoy error rates for any attack model (zero where it is silent)."""
    if isinstance(model, InterceptResend):
        return intercept_resend_error_rates(model.basis_strategy)
    if isinstance(model, UnitaryProbe):
        return probe_error_rates(model.iso)
    return ErrorRates(z_error=0.0, x_error=0.0)
