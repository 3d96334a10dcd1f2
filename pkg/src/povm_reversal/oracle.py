"""Exhaustive enumeration of +/-1 lattice walks.

Walk ``i`` of length ``T`` takes step ``t`` to the left (+1, outcome ``+``)
when bit ``t`` of ``i`` is set and to the right (-1, outcome ``-``) otherwise.
For every walk we record the number of returns to the origin ``k``, the
number of left departures ``l`` among the departures at origin visits
0..k-1 (the trajectory-engine convention), the number of left steps ``a``
and whether the walk ends at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .qubit import DomainError, PureState, check_strength, sequence_probability

MAX_COUNT_STEPS = 24
MAX_WEIGHTED_STEPS = 20
CHUNK_BITS = 18

LEFT, RIGHT = 1, -1


def _check_steps(steps: int, cap: int) -> None:
    if steps < 2 or steps % 2:
        raise DomainError(f"walk length must be even and >= 2, got {steps}")
    if steps > cap:
        raise DomainError(f"walk length {steps} exceeds enumeration cap {cap}")


@lru_cache(maxsize=None)
def _census(steps: int) -> np.ndarray:
    """Integer array ``[k, l, a, ends_at_origin] -> number of walks``."""
    half = steps // 2
    shape = (half + 1, half + 1, steps + 1, 2)
    total = np.zeros(int(np.prod(shape)), np.int64)
    shifts = np.arange(steps, dtype=np.int64)
    chunk = 1 << min(CHUNK_BITS, steps)
    for start in range(0, 1 << steps, chunk):
        idx = np.arange(start, start + chunk, dtype=np.int64)
        bits = ((idx[:, None] >> shifts) & 1).astype(np.int8)
        pos = np.cumsum(2 * bits - 1, axis=1, dtype=np.int8)
        at_origin = pos == 0
        prev = np.concatenate([np.zeros((chunk, 1), np.int8), pos[:, :-1]], axis=1)
        k = at_origin.sum(axis=1)
        l = (at_origin & (prev == 1)).sum(axis=1)
        a = bits.sum(axis=1, dtype=np.int64)
        end = at_origin[:, -1].astype(np.int64)
        key = np.ravel_multi_index((k, l, a, end), shape)
        total += np.bincount(key, minlength=total.size)
    return total.reshape(shape)


@dataclass(frozen=True)
class WalkTable:
    steps: int
    counts: dict[tuple[int, int], int]
    no_return: int

    def row(self, k: int) -> list[int]:
        return [self.counts.get((k, l), 0) for l in range(k + 1)]

    @property
    def ks(self) -> list[int]:
        return sorted({k for k, _ in self.counts})

    @property
    def total(self) -> int:
        return sum(self.counts.values()) + self.no_return

    def merge(self, other: WalkTable) -> WalkTable:
        if other.steps != self.steps:
            raise DomainError("cannot merge tables of different walk length")
        merged = dict(self.counts)
        for key, c in other.counts.items():
            merged[key] = merged.get(key, 0) + c
        return WalkTable(self.steps, merged, self.no_return + other.no_return)


@dataclass(frozen=True)
class DeparturePMF:
    k: int
    probabilities: tuple

    def as_floats(self) -> np.ndarray:
        return np.array([float(p) for p in self.probabilities])

    def __len__(self) -> int:
        return len(self.probabilities)


@dataclass
class ReflectionReport:
    steps: int
    checked: int = 0
    violations: list[tuple[int, int, int, int]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def enumerate_all(steps: int, cap: int = MAX_COUNT_STEPS) -> WalkTable:
    _check_steps(steps, min(cap, MAX_COUNT_STEPS))
    by_kl = _census(steps).sum(axis=(2, 3))
    counts = {
        (k, l): int(by_kl[k, l])
        for k in range(1, by_kl.shape[0])
        for l in range(k + 1)
        if by_kl[k, l]
    }
    return WalkTable(steps, counts, int(by_kl[0].sum()))


def reflection_identity_check(table: WalkTable) -> ReflectionReport:
    """Check ``N(k, i) == C(k, i) * N(k, 0)`` exactly for every row."""
    report = ReflectionReport(table.steps)
    for k in table.ks:
        base = table.counts.get((k, 0), 0)
        for i in range(k + 1):
            expected = math.comb(k, i) * base
            actual = table.counts.get((k, i), 0)
            report.checked += 1
            if actual != expected:
                report.violations.append((k, i, expected, actual))
    return report


def departure_pmf(table: WalkTable, k: int) -> DeparturePMF:
    row = table.row(k)
    total = sum(row)
    if total == 0:
        raise DomainError(f"no walks with {k} returns in table of length {table.steps}")
    return DeparturePMF(k, tuple(Fraction(c, total) for c in row))


def binomial_pmf(k: int, p: Fraction | float = Fraction(1, 2)) -> tuple:
    return tuple(math.comb(k, i) * p**i * (1 - p) ** (k - i) for i in range(k + 1))


def bias_weighted_pmf(steps: int, k: int, p_left: Fraction | float, ending_at_origin: bool = True) -> DeparturePMF:
    """Left-departure pmf among walks with ``k`` returns under an i.i.d. step bias.

    Each walk is weighted by ``p_left**#left * (1-p_left)**#right``; with
    Fractions the result is exact.
    """
    _check_steps(steps, MAX_COUNT_STEPS)
    census = _census(steps)
    if k >= census.shape[0]:
        raise DomainError(f"at most {steps // 2} returns fit in {steps} steps")
    sub = census[k, :, :, 1] if ending_at_origin else census[k].sum(axis=2)
    weights = [0 * p_left] * (k + 1)
    for l in range(k + 1):
        for a in np.nonzero(sub[l])[0]:
            a = int(a)
            weights[l] += int(sub[l, a]) * p_left**a * (1 - p_left) ** (steps - a)
    total = sum(weights)
    if total == 0:
        raise DomainError("no walks match the conditioning")
    return DeparturePMF(k, tuple(w / total for w in weights))


def balanced_return_probability(q: int, lam: float) -> float:
    """Probability that ``q`` measurements contain equally many + and - outcomes."""
    if q < 2 or q % 2:
        raise DomainError("q must be even and >= 2")
    lam = check_strength(lam)
    return math.comb(q, q // 2) * ((1.0 - lam * lam) / 4.0) ** (q // 2)


def conditional_departure_distribution(
    steps: int, k: int, lam: float, state: PureState, cap: int = MAX_WEIGHTED_STEPS
) -> DeparturePMF:
    """Exact left-departure pmf of quantum trajectories with exactly ``k`` returns.

    Every length-``steps`` outcome sequence is weighted by its quantum
    probability; summing full sequences marginalizes the continuation after
    the k-th return.
    """
    _check_steps(steps, min(cap, MAX_WEIGHTED_STEPS))
    census = _census(steps)
    if not 1 <= k < census.shape[0]:
        raise DomainError(f"k must lie in [1, {steps // 2}]")
    psi = state.normalized()
    seq_prob = [sequence_probability(psi, a, steps - a, lam) for a in range(steps + 1)]
    sub = census[k].sum(axis=2)
    weights = np.array([sum(int(sub[l, a]) * seq_prob[a] for a in range(steps + 1)) for l in range(k + 1)])
    total = weights.sum()
    if total <= 0.0:
        raise DomainError("conditioning event has zero probability")
    return DeparturePMF(k, tuple(float(w) for w in weights / total))


def return_count_distribution(
    steps: int, ensemble: Sequence[tuple[PureState, float]] | None = None, lam: float = 0.0
) -> np.ndarray:
    """Exact ``P(k)`` for ``k = 0..steps/2``.

    Without an ensemble every walk has weight ``2**-steps`` (fair walk).
    """
    census = _census(steps).sum(axis=(1, 3))
    if ensemble is None:
        return census.sum(axis=1) / float(1 << steps)
    seq = np.zeros(steps + 1)
    for state, weight in ensemble:
        seq += weight * np.array([sequence_probability(state, a, steps - a, lam) for a in range(steps + 1)])
    return census @ seq


# -- single walks -------------------------------------------------------------


def parse_walk(text: str) -> tuple[int, ...]:
    """``"RRLL"`` -> ``(-1, -1, 1, 1)``; separators other than L/R are ignored."""
    return tuple(LEFT if ch == "L" else RIGHT for ch in text.upper() if ch in "LR")


def format_walk(walk: Iterable[int]) -> str:
    return "".join("L" if s > 0 else "R" for s in walk)


def excursions(walk: Sequence[int]) -> list[range]:
    """Origin-to-origin excursions, in order, up to the last return."""
    out = []
    pos = 0
    start = 0
    for t, s in enumerate(walk):
        pos += s
        if pos == 0:
            out.append(range(start, t + 1))
            start = t + 1
    return out


def left_departures(walk: Sequence[int]) -> int:
    return sum(1 for ex in excursions(walk) if walk[ex.start] > 0)


def reflect_excursions(walk: Sequence[int], subset: Iterable[int]) -> tuple[int, ...]:
    """Flip every step inside the chosen excursions (an involution)."""
    parts = excursions(walk)
    out = list(walk)
    for i in set(subset):
        if not 0 <= i < len(parts):
            raise DomainError(f"walk has {len(parts)} excursions, no index {i}")
        for t in parts[i]:
            out[t] = -out[t]
    return tuple(out)
