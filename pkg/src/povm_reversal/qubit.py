"""Two-level states, the diagonal unsharp measurement pair and its dilation.

The measurement pair is fixed to the z-axis diagonal representative

    M+ = diag(sqrt(1+lam), sqrt(1-lam)) / sqrt(2)
    M- = diag(sqrt(1-lam), sqrt(1+lam)) / sqrt(2)

Both operators are real and diagonal, so they commute and any balanced
product M+^a M-^a is a positive multiple of the identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TOL = 1e-12

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

AXES = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


def check_strength(lam: float) -> float:
    lam = float(lam)
    if not math.isfinite(lam) or lam < 0.0 or lam > 1.0:
        raise DomainError(f"measurement strength must lie in [0, 1], got {lam!r}")
    return lam


@dataclass(frozen=True)
class PureState:
    """Unnormalized qubit ket ``amp0|0> + amp1|1>``.

    The squared norm is used as probability bookkeeping: after applying a
    sequence of measurement operators to a normalized state it equals the
    probability of that outcome sequence.
    """

    amp0: complex
    amp1: complex

    def __post_init__(self) -> None:
        a0, a1 = complex(self.amp0), complex(self.amp1)
        if not all(math.isfinite(v) for v in (a0.real, a0.imag, a1.real, a1.imag)):
            raise DomainError("state amplitudes must be finite")
        object.__setattr__(self, "amp0", a0)
        object.__setattr__(self, "amp1", a1)

    @classmethod
    def zero(cls) -> PureState:
        return cls(1.0, 0.0)

    @classmethod
    def one(cls) -> PureState:
        return cls(0.0, 1.0)

    @classmethod
    def plus(cls) -> PureState:
        return cls(1 / math.sqrt(2), 1 / math.sqrt(2))

    @classmethod
    def minus(cls) -> PureState:
        return cls(1 / math.sqrt(2), -1 / math.sqrt(2))

    @classmethod
    def from_array(cls, vec: Sequence[complex]) -> PureState:
        return cls(vec[0], vec[1])

    @classmethod
    def random(cls, rng: np.random.Generator) -> PureState:
        """Haar-random normalized state."""
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        return cls.from_array(z / np.linalg.norm(z))

    def as_array(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    @property
    def norm_sq(self) -> float:
        return abs(self.amp0) ** 2 + abs(self.amp1) ** 2

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm_sq - 1.0) <= TOL

    def normalized(self) -> PureState:
        n2 = self.norm_sq
        if n2 <= 0.0:
            raise DomainError("cannot normalize a zero-norm state")
        s = 1.0 / math.sqrt(n2)
        return PureState(self.amp0 * s, self.amp1 * s)

    def bloch(self) -> np.ndarray:
        """Bloch vector of the normalized state."""
        psi = self.normalized()
        c = psi.amp0.conjugate() * psi.amp1
        return np.array([2 * c.real, 2 * c.imag, abs(psi.amp0) ** 2 - abs(psi.amp1) ** 2])

    def close_to(self, other: PureState, atol: float = 1e-10) -> bool:
        return bool(np.allclose(self.as_array(), other.as_array(), rtol=0.0, atol=atol))


NAMED_STATES = {
    "z0": PureState.zero,
    "z1": PureState.one,
    "x+": PureState.plus,
    "x-": PureState.minus,
}


@dataclass(frozen=True)
class MeasurementPair:
    m_plus: np.ndarray
    m_minus: np.ndarray
    strength: float

    @property
    def e_plus(self) -> np.ndarray:
        return self.m_plus.conj().T @ self.m_plus

    @property
    def e_minus(self) -> np.ndarray:
        return self.m_minus.conj().T @ self.m_minus

    def operator(self, outcome: int) -> np.ndarray:
        return self.m_plus if outcome > 0 else self.m_minus


@dataclass(frozen=True)
class BlochVector:
    r: np.ndarray

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.r))

    @property
    def out_of_range(self) -> bool:
        # flagged, never clamped
        return self.length > 1.0 + TOL


@dataclass(frozen=True)
class OutcomeCounts:
    n_plus: int
    n_minus: int

    def __post_init__(self) -> None:
        if self.n_plus < 0 or self.n_minus < 0:
            raise DomainError("outcome counts must be non-negative")

    @property
    def total(self) -> int:
        return self.n_plus + self.n_minus

    @property
    def difference(self) -> int:
        return self.n_plus - self.n_minus


def build_measurement_pair(lam: float) -> MeasurementPair:
    lam = check_strength(lam)
    hi, lo = math.sqrt(1.0 + lam), math.sqrt(1.0 - lam)
    m_plus = np.diag([hi, lo]).astype(complex) / math.sqrt(2.0)
    m_minus = np.diag([lo, hi]).astype(complex) / math.sqrt(2.0)
    return MeasurementPair(m_plus, m_minus, lam)


def _axis_vector(axis: str | Sequence[float]) -> np.ndarray:
    if isinstance(axis, str):
        try:
            return AXES[axis.lower()]
        except KeyError:
            raise DomainError(f"unknown axis {axis!r}") from None
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,) or abs(np.linalg.norm(n) - 1.0) > TOL:
        raise DomainError("observable axis must be a unit 3-vector")
    return n


def effects(lam: float, axis: str | Sequence[float] = "z") -> tuple[np.ndarray, np.ndarray]:
    """Return ``(E+, E-) = (1 +/- lam n.sigma) / 2`` for the given axis."""
    lam = check_strength(lam)
    n = _axis_vector(axis)
    obs = n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z
    return (IDENTITY + lam * obs) / 2, (IDENTITY - lam * obs) / 2


def outcome_probabilities(state: PureState, pair: MeasurementPair) -> tuple[float, float]:
    n2 = state.norm_sq
    if n2 <= 0.0:
        raise DomainError("outcome probabilities undefined for a zero-norm state")
    v = state.as_array()
    p_plus = float(np.real(v.conj() @ pair.e_plus @ v)) / n2
    p_minus = float(np.real(v.conj() @ pair.e_minus @ v)) / n2
    return p_plus, p_minus


def apply_outcome(state: PureState, pair: MeasurementPair, outcome: int) -> PureState:
    """Apply ``M_outcome`` without renormalizing (outcome is +1 or -1)."""
    return PureState.from_array(pair.operator(outcome) @ state.as_array())


def sample_step(state: PureState, pair: MeasurementPair, u: float) -> tuple[int, PureState]:
    """One sampled measurement: ``+1`` iff ``u < p+``; the new state is renormalized."""
    p_plus, _ = outcome_probabilities(state, pair)
    outcome = 1 if u < p_plus else -1
    return outcome, apply_outcome(state, pair, outcome).normalized()


def sequence_probability(state: PureState, n_plus: int, n_minus: int, lam: float) -> float:
    """Squared norm of ``M+^a M-^b |psi>``.

    The operators are diagonal, so this is the probability of every outcome
    sequence containing ``n_plus`` pluses and ``n_minus`` minuses in any order.
    """
    if n_plus < 0 or n_minus < 0:
        raise DomainError("outcome counts must be non-negative")
    pair = build_measurement_pair(lam)
    d_plus = np.real(np.diag(pair.m_plus))
    d_minus = np.real(np.diag(pair.m_minus))
    amps = state.as_array() * d_plus**n_plus * d_minus**n_minus
    return float(np.sum(np.abs(amps) ** 2))


def dilation_unitary(lam: float) -> np.ndarray:
    """System-ancilla unitary realizing the pair; basis index is ``2*system + ancilla``."""
    lam = check_strength(lam)
    hi, lo = math.sqrt(1.0 + lam), math.sqrt(1.0 - lam)
    u = np.array(
        [
            [hi, -lo, 0, 0],
            [lo, hi, 0, 0],
            [0, 0, lo, -hi],
            [0, 0, hi, lo],
        ],
        dtype=complex,
    )
    return u / math.sqrt(2.0)


def dilation_branches(unitary: np.ndarray, state: PureState) -> tuple[PureState, PureState]:
    """Evolve ``|psi>|0>`` and project the ancilla onto |0> and |1>.

    Returns the unnormalized system states of the two ancilla branches.
    """
    joint = np.kron(state.as_array(), np.array([1.0, 0.0], dtype=complex))
    out = unitary @ joint
    return PureState(out[0], out[2]), PureState(out[1], out[3])


def expectation_from_frequencies(f_plus: float, f_minus: float, lam: float) -> float:
    """Estimate <O> = (f+ - f-) / (lam (f+ + f-)). Not clamped to [-1, 1]."""
    lam = check_strength(lam)
    if lam == 0.0:
        raise DomainError("zero-strength measurements carry no information")
    total = f_plus + f_minus
    if not total > 0:
        raise DomainError("estimation needs at least one outcome")
    return (f_plus - f_minus) / (lam * total)


def expectation_from_counts(counts: OutcomeCounts, lam: float) -> float:
    return expectation_from_frequencies(counts.n_plus, counts.n_minus, lam)


def tomography_estimate(
    counts_x: OutcomeCounts,
    counts_y: OutcomeCounts,
    counts_z: OutcomeCounts,
    lam: float,
) -> BlochVector:
    r = np.array([expectation_from_counts(c, lam) for c in (counts_x, counts_y, counts_z)])
    return BlochVector(r)


def sample_tomography_counts(
    state: PureState, lam: float, shots: int, rng: np.random.Generator
) -> tuple[OutcomeCounts, OutcomeCounts, OutcomeCounts]:
    """Simulate ``shots`` unsharp measurements along each of x, y, z."""
    psi = state.normalized().as_array()
    out = []
    for axis in ("x", "y", "z"):
        e_plus, _ = effects(lam, axis)
        p_plus = min(max(float(np.real(psi.conj() @ e_plus @ psi)), 0.0), 1.0)
        n_plus = int(rng.binomial(shots, p_plus))
        out.append(OutcomeCounts(n_plus, shots - n_plus))
    return out[0], out[1], out[2]
