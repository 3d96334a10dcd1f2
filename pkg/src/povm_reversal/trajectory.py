"""Measurement trajectories under the filtered and unfiltered protocols.

A trajectory is read as a lattice walk with position ``#plus - #minus``.
Returns to position 0 are origin visits; the outcome taken when leaving the
origin is an origin departure. Departures are counted at visits 0..k-1, so a
record with ``k`` returns always has ``n_plus + n_minus == k``.

Randomness layout per copy (one counter-based stream each): draw 0 picks the
preparation, draws 1.. feed the sampled measurement steps in order.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels
from .qubit import (
    DomainError,
    PureState,
    apply_outcome,
    build_measurement_pair,
    check_strength,
    sample_step,
)
from .rng import MASK64, CounterStream

log = logging.getLogger(__name__)

FILTERED = "filtered"
UNFILTERED = "unfiltered"
BLOCK_SIZE = 1 << 16
WORKERS_ENV = "POVM_REVERSAL_WORKERS"


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    members: tuple[tuple[PureState, float], ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise DomainError("ensemble needs at least one member state")
        weights = [w for _, w in self.members]
        if any(not (w > 0.0) for w in weights):
            raise DomainError("ensemble weights must be positive")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise DomainError("ensemble weights must sum to 1")
        if not all(s.is_normalized for s, _ in self.members):
            raise DomainError("ensemble member states must be normalized")

    @classmethod
    def z_basis(cls) -> EnsembleSpec:
        return cls("z", ((PureState.zero(), 0.5), (PureState.one(), 0.5)))

    @classmethod
    def x_basis(cls) -> EnsembleSpec:
        return cls("x", ((PureState.plus(), 0.5), (PureState.minus(), 0.5)))

    @classmethod
    def custom(cls, members: Iterable[tuple[PureState, float]]) -> EnsembleSpec:
        return cls("custom", tuple((s, float(w)) for s, w in members))

    @property
    def states(self) -> list[PureState]:
        return [s for s, _ in self.members]

    def cumulative(self) -> np.ndarray:
        cum = np.cumsum([w for _, w in self.members])
        cum[-1] = 1.0
        return cum

    def weights_sq(self) -> tuple[np.ndarray, np.ndarray]:
        w0 = np.array([abs(s.amp0) ** 2 for s in self.states])
        w1 = np.array([abs(s.amp1) ** 2 for s in self.states])
        return w0, w1

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "members": [
                {"state": [s.amp0.real, s.amp0.imag, s.amp1.real, s.amp1.imag], "weight": w}
                for s, w in self.members
            ],
        }


@dataclass(frozen=True)
class ProtocolConfig:
    strength: float
    steps: int
    mode: str = UNFILTERED
    copies: int = 1
    seed: int = 0
    condition_k: int | None = None

    def __post_init__(self) -> None:
        check_strength(self.strength)
        if self.steps <= 0 or self.steps % 2:
            raise DomainError("steps must be an even positive integer")
        if self.mode not in (FILTERED, UNFILTERED):
            raise DomainError(f"unknown protocol mode {self.mode!r}")
        if self.copies <= 0:
            raise DomainError("copies must be positive")
        if self.mode == FILTERED and self.strength >= 1.0:
            # M+M- vanishes at lam=1, so the forced reversal is impossible
            raise DomainError("the filtered protocol needs strength < 1")
        if self.condition_k is not None:
            if self.mode != UNFILTERED:
                raise DomainError("condition_k applies to the unfiltered protocol only")
            if not 1 <= self.condition_k <= self.steps // 2:
                raise DomainError("condition_k must lie in [1, steps/2]")

    def to_dict(self) -> dict:
        return {
            "strength": self.strength,
            "steps": self.steps,
            "mode": self.mode,
            "copies": self.copies,
            "seed": self.seed,
            "condition_k": self.condition_k,
        }


@dataclass
class Trajectory:
    outcomes: tuple[int, ...]
    initial_state: PureState
    initial_index: int | None = None
    final_state: PureState | None = None
    states: list[PureState] | None = None

    def positions(self) -> np.ndarray:
        return np.cumsum(self.outcomes)


@dataclass(frozen=True)
class OriginRecord:
    k: int
    n_plus: int
    n_minus: int

    @property
    def n(self) -> int:
        return self.n_plus - self.n_minus

    @property
    def n_over_N(self) -> float:
        total = self.n_plus + self.n_minus
        return self.n / total if total else math.nan


def sample_preparation(spec: EnsembleSpec, u: float) -> tuple[int, PureState]:
    """Pick the member whose cumulative-weight interval contains ``u``."""
    cum = spec.cumulative()
    idx = int(np.searchsorted(cum, u, side="right"))
    idx = min(idx, len(cum) - 1)
    return idx, spec.members[idx][0]


def run_unfiltered(
    state: PureState,
    steps: int,
    lam: float,
    stream: Iterator[float] | Iterable[float],
    record_states: bool = False,
) -> Trajectory:
    if steps < 1:
        raise DomainError("need at least one step")
    pair = build_measurement_pair(lam)
    stream = iter(stream)
    psi = state
    outcomes = []
    states = [psi] if record_states else None
    for _ in range(steps):
        s, psi = sample_step(psi, pair, next(stream))
        outcomes.append(s)
        if states is not None:
            states.append(psi)
    return Trajectory(tuple(outcomes), state, final_state=psi, states=states)


def run_filtered(
    state: PureState,
    steps: int,
    lam: float,
    stream: Iterator[float] | Iterable[float],
    record_states: bool = False,
) -> Trajectory:
    """Odd steps sampled, each even step forced to the opposite outcome."""
    if steps < 2 or steps % 2:
        raise DomainError("the filtered protocol needs an even number of steps")
    if check_strength(lam) >= 1.0:
        raise DomainError("the filtered protocol needs strength < 1")
    pair = build_measurement_pair(lam)
    stream = iter(stream)
    psi = state
    outcomes = []
    states = [psi] if record_states else None
    for _ in range(steps // 2):
        s, psi = sample_step(psi, pair, next(stream))
        forced = apply_outcome(psi, pair, -s).normalized()
        outcomes += [s, -s]
        if states is not None:
            states += [psi, forced]
        psi = forced
    return Trajectory(tuple(outcomes), state, final_state=psi, states=states)


def origin_stats(traj: Trajectory | Sequence[int], truncate_at_k: int | None = None) -> OriginRecord | None:
    """Origin-return statistics of an outcome sequence.

    With ``truncate_at_k`` only the first ``k`` returns (and departures at
    visits 0..k-1) are used; ``None`` is returned when the walk has fewer
    than ``k`` returns.
    """
    outcomes = traj.outcomes if isinstance(traj, Trajectory) else tuple(traj)
    pos = 0
    returns = 0
    departures: list[int] = []
    for s in outcomes:
        if pos == 0:
            departures.append(s)
        pos += s
        if pos == 0:
            returns += 1
            if truncate_at_k is not None and returns == truncate_at_k:
                break
    if truncate_at_k is not None and returns < truncate_at_k:
        return None
    counted = departures[:returns]
    n_plus = sum(1 for s in counted if s > 0)
    return OriginRecord(returns, n_plus, returns - n_plus)


def recurrence_audit(state: PureState, traj: Trajectory | Sequence[int], lam: float, atol: float = 1e-10) -> bool:
    """Replay the outcomes; every balanced prefix must restore the initial state."""
    outcomes = traj.outcomes if isinstance(traj, Trajectory) else tuple(traj)
    pair = build_measurement_pair(lam)
    ref = state.normalized()
    psi = ref
    pos = 0
    for s in outcomes:
        psi = apply_outcome(psi, pair, s)
        if psi.norm_sq == 0.0:
            # zero-probability outcome: the trajectory cannot have occurred
            return False
        psi = psi.normalized()
        pos += s
        if pos == 0 and not psi.close_to(ref, atol):
            return False
    return True


@dataclass
class CampaignResult:
    spec: EnsembleSpec
    config: ProtocolConfig
    copy_index: np.ndarray
    prep_index: np.ndarray
    k: np.ndarray
    n_plus: np.ndarray
    n_minus: np.ndarray
    return_counts: np.ndarray
    generated: int
    workers: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def retained(self) -> int:
        return int(self.k.shape[0])

    @property
    def acceptance_rate(self) -> float:
        return self.retained / self.generated

    @property
    def status(self) -> str:
        return "ok" if self.retained else "empty"

    @property
    def n(self) -> np.ndarray:
        return self.n_plus.astype(np.int64) - self.n_minus

    @property
    def n_over_N(self) -> np.ndarray:
        total = (self.n_plus + self.n_minus).astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(total > 0, self.n / total, np.nan)

    def records(self) -> Iterator[OriginRecord]:
        for k, a, b in zip(self.k, self.n_plus, self.n_minus):
            yield OriginRecord(int(k), int(a), int(b))


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def _blocks(copies: int, block_size: int) -> list[tuple[int, int]]:
    return [(s, min(s + block_size, copies)) for s in range(0, copies, block_size)]


def _run_blocks(args) -> tuple[list[np.ndarray], np.ndarray]:
    seed, blocks, steps, lam, filtered, cond_k, w0s, w1s, cum = args
    hist = np.zeros(steps + 1, np.int64)
    parts: list[list[np.ndarray]] = [[] for _ in range(5)]
    for start, stop in blocks:
        n = stop - start
        out_copy = np.empty(n, np.int64)
        out_prep = np.empty(n, np.int32)
        out_k = np.empty(n, np.int32)
        out_np = np.empty(n, np.int32)
        out_nm = np.empty(n, np.int32)
        kept = _kernels.campaign_block(
            seed, start, stop, steps, lam, filtered, cond_k, w0s, w1s, cum,
            out_copy, out_prep, out_k, out_np, out_nm, hist,
        )
        for dst, arr in zip(parts, (out_copy, out_prep, out_k, out_np, out_nm)):
            dst.append(arr[:kept].copy())
    return [np.concatenate(p) for p in parts], hist


def run_campaign(
    spec: EnsembleSpec,
    config: ProtocolConfig,
    workers: int | None = None,
    block_size: int = BLOCK_SIZE,
) -> CampaignResult:
    """Generate ``config.copies`` trajectories and extract their origin records.

    Output depends only on ``(spec, config)``: every copy owns the counter
    stream indexed by its copy number, and blocks are merged in copy order.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    seed = np.uint64(config.seed & MASK64)
    w0s, w1s = spec.weights_sq()
    cum = spec.cumulative()
    filtered = config.mode == FILTERED
    cond_k = -1 if config.condition_k is None else config.condition_k
    blocks = _blocks(config.copies, block_size)
    common = (config.steps, config.strength, filtered, cond_k, w0s, w1s, cum)

    if workers == 1 or len(blocks) == 1:
        chunks = [_run_blocks((seed, blocks, *common))]
    else:
        # contiguous shards keep the merge in copy order
        shards = [list(b) for b in np.array_split(np.array(blocks), workers) if len(b)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_blocks, [(seed, [tuple(x) for x in s], *common) for s in shards]))

    hist = np.sum([h for _, h in chunks], axis=0)
    cols = [np.concatenate([c[i] for c, _ in chunks]) for i in range(5)]
    result = CampaignResult(spec, config, *cols, return_counts=hist, generated=config.copies, workers=workers)
    log.info("campaign %s: %d/%d retained", config.mode, result.retained, result.generated)
    return result


def simulate_outcomes(spec: EnsembleSpec, config: ProtocolConfig, start: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Full outcome matrix ``(copies, steps)`` with the campaign's randomness layout."""
    w0s, w1s = spec.weights_sq()
    n = config.copies
    prep = np.empty(n, np.int32)
    out = np.empty((n, config.steps), np.int8)
    _kernels.outcomes_block(
        np.uint64(config.seed & MASK64), start, start + n, config.steps, config.strength,
        config.mode == FILTERED, w0s, w1s, spec.cumulative(), prep, out,
    )
    return prep, out


def reference_copy(spec: EnsembleSpec, config: ProtocolConfig, copy: int, record_states: bool = False) -> tuple[int, Trajectory]:
    """One copy through the plain-Python path, using the same stream as the kernels."""
    stream = CounterStream(config.seed, copy)
    idx, state = sample_preparation(spec, stream.uniform())
    runner = run_filtered if config.mode == FILTERED else run_unfiltered
    traj = runner(state, config.steps, config.strength, stream, record_states=record_states)
    traj.initial_index = idx
    return idx, traj
