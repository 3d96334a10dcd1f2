"""Compiled inner loops for trajectory campaigns.

The measurement operators are real and diagonal, so only the squared
amplitude magnitudes ``w0 = |a|^2`` and ``w1 = |b|^2`` influence outcome
probabilities; phases ride along unchanged and are not tracked here.
Weights are kept unnormalized and compared against ``u * (w0 + w1)``; they are
rescaled only when their sum approaches underflow.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_INV53 = 1.0 / 9007199254740992.0


@njit(inline="always")
def _mix(z):
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(inline="always")
def _unit(x):
    return (x >> uint64(11)) * _INV53


@njit(inline="always")
def _prep_index(u, cum):
    n = cum.shape[0]
    for i in range(n):
        if u < cum[i]:
            return i
    return n - 1


@njit(cache=True)
def draws(seed, index, count):
    """First ``count`` uniforms of stream ``index``; mirrors ``rng.CounterStream``."""
    out = np.empty(count, np.float64)
    ctr = _mix(uint64(seed) ^ _mix(uint64(index) * _GOLDEN))
    for j in range(count):
        ctr += _GOLDEN
        out[j] = _unit(_mix(ctr))
    return out


@njit(cache=True)
def campaign_block(seed, start, stop, steps, lam, filtered, cond_k,
                   w0s, w1s, cum,
                   out_copy, out_prep, out_k, out_np, out_nm, hist):
    """Run copies ``start..stop-1``; write retained records and return their number.

    Departures are credited when their excursion closes, which counts exactly
    the departures at origin visits 0..k-1. ``cond_k < 0`` retains everything.
    """
    e0 = 0.5 * (1.0 + lam)
    e1 = 0.5 * (1.0 - lam)
    kept = 0
    for c in range(start, stop):
        ctr = _mix(uint64(seed) ^ _mix(uint64(c) * _GOLDEN))
        ctr += _GOLDEN
        prep = _prep_index(_unit(_mix(ctr)), cum)
        w0 = w0s[prep]
        w1 = w1s[prep]
        k = 0
        n_plus = 0
        n_minus = 0
        if filtered:
            for _ in range(steps // 2):
                ctr += _GOLDEN
                u = _unit(_mix(ctr))
                if u * (w0 + w1) < e0 * w0 + e1 * w1:
                    n_plus += 1
                else:
                    n_minus += 1
                # the forced reversal scales both weights by e0*e1: ratio unchanged
                k += 1
        else:
            pos = 0
            for t in range(steps):
                ctr += _GOLDEN
                u = _unit(_mix(ctr))
                s = w0 + w1
                if u * s < e0 * w0 + e1 * w1:
                    w0 *= e0
                    w1 *= e1
                    pos += 1
                    if pos == 0:
                        k += 1
                        n_minus += 1
                else:
                    w0 *= e1
                    w1 *= e0
                    pos -= 1
                    if pos == 0:
                        k += 1
                        n_plus += 1
                if s < 1e-100:
                    w0 /= s
                    w1 /= s
                # unreachable origin: remaining outcomes cannot change the record
                if abs(pos) > steps - t - 1:
                    break
        hist[k] += 1
        if cond_k < 0 or k == cond_k:
            out_copy[kept] = c
            out_prep[kept] = prep
            out_k[kept] = k
            out_np[kept] = n_plus
            out_nm[kept] = n_minus
            kept += 1
    return kept


@njit(cache=True)
def outcomes_block(seed, start, stop, steps, lam, filtered, w0s, w1s, cum,
                   out_prep, out_outcomes):
    """Full outcome sequences (+1/-1) for copies ``start..stop-1``."""
    e0 = 0.5 * (1.0 + lam)
    e1 = 0.5 * (1.0 - lam)
    for row in range(stop - start):
        c = start + row
        ctr = _mix(uint64(seed) ^ _mix(uint64(c) * _GOLDEN))
        ctr += _GOLDEN
        prep = _prep_index(_unit(_mix(ctr)), cum)
        out_prep[row] = prep
        w0 = w0s[prep]
        w1 = w1s[prep]
        t = 0
        while t < steps:
            ctr += _GOLDEN
            u = _unit(_mix(ctr))
            s = w0 + w1
            if u * s < e0 * w0 + e1 * w1:
                sign = 1
                w0 *= e0
                w1 *= e1
            else:
                sign = -1
                w0 *= e1
                w1 *= e0
            out_outcomes[row, t] = sign
            t += 1
            if filtered:
                out_outcomes[row, t] = -sign
                t += 1
                if sign > 0:
                    w0 *= e1
                    w1 *= e0
                else:
                    w0 *= e0
                    w1 *= e1
                s = w0 + w1
                w0 /= s
                w1 /= s
            elif s < 1e-100:
                w0 /= s
                w1 /= s
    return out_prep
