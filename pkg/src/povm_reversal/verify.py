"""Randomized invariant suites for the measurement algebra.

Each suite draws ``cases`` random inputs and stops at the first violation,
returning it as the counterexample.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import oracle
from . import qubit as qc
from . import trajectory as tr

ALGEBRA_TOL = 1e-12
RECURRENCE_TOL = 1e-10


@dataclass
class SuiteResult:
    name: str
    cases: int
    passed: bool
    counterexample: dict | None = None


def _random_lambda(rng: np.random.Generator) -> float:
    # include the endpoints now and then
    r = rng.random()
    if r < 0.05:
        return 0.0
    if r < 0.10:
        return 1.0
    return float(rng.random())


def _random_unnormalized(rng: np.random.Generator) -> qc.PureState:
    psi = qc.PureState.random(rng)
    scale = 10 ** rng.uniform(-2, 2)
    return qc.PureState(psi.amp0 * scale, psi.amp1 * scale)


def _orderings(n_plus: int, n_minus: int):
    q = n_plus + n_minus
    for pos in itertools.combinations(range(q), n_plus):
        seq = [-1] * q
        for i in pos:
            seq[i] = 1
        yield tuple(seq)


def _apply_sequence(state: qc.PureState, pair: qc.MeasurementPair, seq) -> qc.PureState:
    for s in seq:
        state = qc.apply_outcome(state, pair, s)
    return state


def completeness(rng, cases):
    grid = np.linspace(0.0, 1.0, 101)
    for i in range(cases):
        lam = float(grid[i]) if i < grid.size else _random_lambda(rng)
        pair = qc.build_measurement_pair(lam)
        err = np.abs(pair.e_plus + pair.e_minus - qc.IDENTITY).max()
        n = rng.normal(size=3)
        e_plus, e_minus = qc.effects(lam, n / np.linalg.norm(n))
        err = max(err, np.abs(e_plus + e_minus - qc.IDENTITY).max())
        if err > ALGEBRA_TOL:
            return {"lambda": lam, "error": float(err)}
    return None


def commutation(rng, cases):
    for _ in range(cases):
        lam = _random_lambda(rng)
        pair = qc.build_measurement_pair(lam)
        pm = pair.m_plus @ pair.m_minus
        mp = pair.m_minus @ pair.m_plus
        target = math.sqrt(1.0 - lam * lam) / 2.0 * qc.IDENTITY
        err = max(np.abs(pm - mp).max(), np.abs(pm - target).max(), np.abs(mp - target).max())
        if err > ALGEBRA_TOL:
            return {"lambda": lam, "error": float(err)}
    return None


def probability_conservation(rng, cases):
    for _ in range(cases):
        lam = _random_lambda(rng)
        pair = qc.build_measurement_pair(lam)
        psi = _random_unnormalized(rng)
        after = sum(qc.apply_outcome(psi, pair, s).norm_sq for s in (1, -1))
        p_plus, p_minus = qc.outcome_probabilities(psi, pair)
        err = max(abs(after - psi.norm_sq) / psi.norm_sq, abs(p_plus + p_minus - 1.0))
        if err > ALGEBRA_TOL:
            return {"lambda": lam, "state": psi.as_array().tolist(), "error": err}
    return None


def order_invariance(rng, cases):
    for _ in range(cases):
        lam = _random_lambda(rng)
        pair = qc.build_measurement_pair(lam)
        psi = qc.PureState.random(rng)
        q = int(rng.integers(1, 9))
        a = int(rng.integers(0, q + 1))
        probs = [_apply_sequence(psi, pair, seq).norm_sq for seq in _orderings(a, q - a)]
        ref = qc.sequence_probability(psi, a, q - a, lam)
        err = max(abs(p - ref) for p in probs)
        if err > ALGEBRA_TOL:
            return {"lambda": lam, "state": psi.as_array().tolist(), "plus": a, "minus": q - a, "error": err}
    return None


def recurrence(rng, cases):
    for _ in range(cases):
        lam = _random_lambda(rng)
        pair = qc.build_measurement_pair(lam)
        psi = _random_unnormalized(rng)
        a = int(rng.integers(1, 7))
        seq = rng.permutation([1] * a + [-1] * a)
        out = _apply_sequence(psi, pair, seq).as_array()
        scalar = ((1.0 - lam * lam) / 4.0) ** (a / 2)
        err = np.abs(out - scalar * psi.as_array()).max() / np.abs(psi.as_array()).max()
        if err > ALGEBRA_TOL:
            return {"lambda": lam, "sequence": seq.tolist(), "error": float(err)}
    return None


def dilation(rng, cases):
    for _ in range(cases):
        lam = _random_lambda(rng)
        u = qc.dilation_unitary(lam)
        pair = qc.build_measurement_pair(lam)
        psi = qc.PureState.random(rng)
        plus, minus = qc.dilation_branches(u, psi)
        err = max(
            np.abs(u.conj().T @ u - np.eye(4)).max(),
            np.abs(plus.as_array() - qc.apply_outcome(psi, pair, 1).as_array()).max(),
            np.abs(minus.as_array() - qc.apply_outcome(psi, pair, -1).as_array()).max(),
        )
        if err > ALGEBRA_TOL:
            return {"lambda": lam, "state": psi.as_array().tolist(), "error": float(err)}
    return None


def tomography_consistency(rng, cases):
    for _ in range(cases):
        lam = float(rng.uniform(0.05, 1.0))
        psi = qc.PureState.random(rng)
        v = psi.as_array()
        est = []
        for axis in ("x", "y", "z"):
            e_plus, e_minus = qc.effects(lam, axis)
            p_plus = float(np.real(v.conj() @ e_plus @ v))
            p_minus = float(np.real(v.conj() @ e_minus @ v))
            est.append(qc.expectation_from_frequencies(p_plus, p_minus, lam))
        err = np.abs(np.array(est) - psi.bloch()).max()
        if err > ALGEBRA_TOL:
            return {"lambda": lam, "state": v.tolist(), "error": float(err)}
    return None


def balanced_return(rng, cases):
    for _ in range(cases):
        lam = _random_lambda(rng)
        pair = qc.build_measurement_pair(lam)
        psi = qc.PureState.random(rng)
        q = 2 * int(rng.integers(1, 5))
        total = math.fsum(_apply_sequence(psi, pair, seq).norm_sq for seq in _orderings(q // 2, q // 2))
        err = abs(total - oracle.balanced_return_probability(q, lam))
        if err > ALGEBRA_TOL:
            return {"lambda": lam, "q": q, "error": err}
    return None


def recurrence_audit(rng, cases):
    for _ in range(cases):
        lam = float(rng.uniform(0.0, 0.99))
        psi = qc.PureState.random(rng)
        steps = int(rng.integers(1, 13))
        traj = tr.run_unfiltered(psi, steps, lam, rng.random(steps))
        if not tr.recurrence_audit(psi, traj, lam, RECURRENCE_TOL):
            return {"lambda": lam, "state": psi.as_array().tolist(), "outcomes": list(traj.outcomes)}
    return None


SUITES: dict[str, Callable] = {
    "completeness": completeness,
    "commutation": commutation,
    "probability-conservation": probability_conservation,
    "order-invariance": order_invariance,
    "recurrence": recurrence,
    "dilation": dilation,
    "tomography-consistency": tomography_consistency,
    "balanced-return": balanced_return,
    "recurrence-audit": recurrence_audit,
}


def run_suites(seed: int = 0, cases: int = 1000, names=None) -> list[SuiteResult]:
    results = []
    for name, suite in SUITES.items():
        if names and name not in names:
            continue
        rng = np.random.default_rng([seed, len(results)])
        try:
            cex = suite(rng, cases)
        except Exception as exc:  # a crash is a failure, reported like one
            cex = {"exception": repr(exc)}
        results.append(SuiteResult(name, cases, cex is None, cex))
    return results
