import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from povm_reversal import qubit as qc
from povm_reversal.qubit import DomainError, OutcomeCounts, PureState

S2 = math.sqrt(2.0)


def test_pair_at_zero_strength_is_scaled_identity():
    pair = qc.build_measurement_pair(0.0)
    np.testing.assert_allclose(pair.m_plus, np.eye(2) / S2, atol=1e-15)
    np.testing.assert_allclose(pair.m_minus, np.eye(2) / S2, atol=1e-15)


def test_pair_projective_limit():
    pair = qc.build_measurement_pair(1.0)
    np.testing.assert_allclose(pair.m_plus, np.diag([1.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(pair.m_minus, np.diag([0.0, 1.0]), atol=1e-15)


def test_pair_half_strength_entries():
    pair = qc.build_measurement_pair(0.5)
    np.testing.assert_allclose(np.diag(pair.m_plus), [math.sqrt(1.5) / S2, math.sqrt(0.5) / S2], atol=1e-15)
    np.testing.assert_allclose(np.diag(pair.m_minus), [math.sqrt(0.5) / S2, math.sqrt(1.5) / S2], atol=1e-15)
    assert np.count_nonzero(pair.m_plus - np.diag(np.diag(pair.m_plus))) == 0


@pytest.mark.parametrize("lam", [-0.1, 1.5, float("nan")])
def test_pair_rejects_bad_strength(lam):
    with pytest.raises(DomainError):
        qc.build_measurement_pair(lam)


def test_effects_cases():
    e_plus, e_minus = qc.effects(1.0, "z")
    np.testing.assert_allclose(e_plus, np.diag([1.0, 0.0]))
    np.testing.assert_allclose(e_minus, np.diag([0.0, 1.0]))
    for axis in ("x", "y", [0.6, 0.0, 0.8]):
        e_plus, e_minus = qc.effects(0.0, axis)
        np.testing.assert_allclose(e_plus, np.eye(2) / 2)
    e_plus, _ = qc.effects(0.5, "z")
    np.testing.assert_allclose(e_plus, np.diag([0.75, 0.25]))


def test_effects_match_pair_on_z_axis():
    for lam in np.linspace(0, 1, 11):
        pair = qc.build_measurement_pair(lam)
        e_plus, e_minus = qc.effects(lam, "z")
        np.testing.assert_allclose(pair.e_plus, e_plus, atol=1e-12)
        np.testing.assert_allclose(pair.e_minus, e_minus, atol=1e-12)


def test_effects_positive_semidefinite(rng):
    for _ in range(50):
        n = rng.normal(size=3)
        for e in qc.effects(rng.random(), n / np.linalg.norm(n)):
            assert np.linalg.eigvalsh(e).min() >= -1e-12


def test_effects_rejects_non_unit_axis():
    with pytest.raises(DomainError):
        qc.effects(0.5, [1.0, 1.0, 0.0])


def test_outcome_probabilities_examples():
    half = qc.build_measurement_pair(0.5)
    assert qc.outcome_probabilities(PureState.zero(), half)[0] == pytest.approx(0.75, abs=1e-15)
    for lam in (0.0, 0.3, 1.0):
        p = qc.outcome_probabilities(PureState.plus(), qc.build_measurement_pair(lam))
        assert p[0] == pytest.approx(0.5, abs=1e-15)
    assert qc.outcome_probabilities(PureState.one(), qc.build_measurement_pair(1.0))[0] == 0.0


def test_outcome_probabilities_zero_norm():
    with pytest.raises(DomainError):
        qc.outcome_probabilities(PureState(0, 0), qc.build_measurement_pair(0.5))


def test_apply_outcome_examples():
    half = qc.build_measurement_pair(0.5)
    out = qc.apply_outcome(PureState.zero(), half, 1)
    assert out.amp0 == pytest.approx(math.sqrt(1.5) / S2)
    assert out.norm_sq == pytest.approx(0.75, abs=1e-15)

    psi = PureState(0.3 + 0.4j, -0.2 + 0.1j)
    out = qc.apply_outcome(psi, qc.build_measurement_pair(0.0), -1)
    np.testing.assert_allclose(out.as_array(), psi.as_array() / S2, atol=1e-15)

    out = qc.apply_outcome(PureState.plus(), qc.build_measurement_pair(1.0), 1)
    np.testing.assert_allclose(out.as_array(), [1 / S2, 0], atol=1e-15)


def test_sample_step_examples():
    half = qc.build_measurement_pair(0.5)
    s, psi = qc.sample_step(PureState.zero(), half, 0.5)
    assert s == 1 and psi.close_to(PureState.zero(), 1e-15)
    s, psi = qc.sample_step(PureState.zero(), half, 0.9)
    assert s == -1 and psi.close_to(PureState.zero(), 1e-15)
    s, psi = qc.sample_step(PureState.plus(), half, 0.25)
    # sqrt(1.5)|0> + sqrt(0.5)|1>, renormalized by sqrt(2)
    assert s == 1
    assert psi.close_to(PureState(math.sqrt(0.75), 0.5), 1e-15)
    assert psi.is_normalized


def test_sample_step_threshold_is_strict():
    half = qc.build_measurement_pair(0.5)
    p_plus, _ = qc.outcome_probabilities(PureState.zero(), half)
    assert qc.sample_step(PureState.zero(), half, p_plus)[0] == -1
    assert qc.sample_step(PureState.zero(), half, np.nextafter(p_plus, 0))[0] == 1


def test_sequence_probability_examples(rng):
    for lam in (0.0, 0.4, 0.9):
        psi = PureState.random(rng)
        assert qc.sequence_probability(psi, 1, 1, lam) == pytest.approx((1 - lam**2) / 4, abs=1e-15)
        assert qc.sequence_probability(psi, 0, 0, lam) == pytest.approx(1.0, abs=1e-15)
    assert qc.sequence_probability(PureState.zero(), 2, 0, 0.5) == pytest.approx(0.5625, abs=1e-15)


def test_dilation_examples():
    for lam in (0.0, 0.5, 1.0):
        u = qc.dilation_unitary(lam)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-12)
    plus, minus = qc.dilation_branches(qc.dilation_unitary(1.0), PureState.zero())
    np.testing.assert_allclose(plus.as_array(), [1, 0], atol=1e-15)
    np.testing.assert_allclose(minus.as_array(), [0, 0], atol=1e-15)

    # branch amplitudes written out from the joint-state expansion
    lam = 0.5
    plus, minus = qc.dilation_branches(qc.dilation_unitary(lam), PureState.plus())
    expect_plus = np.array([math.sqrt(1 + lam), math.sqrt(1 - lam)]) / 2
    expect_minus = np.array([math.sqrt(1 - lam), math.sqrt(1 + lam)]) / 2
    np.testing.assert_allclose(plus.as_array(), expect_plus, atol=1e-12)
    np.testing.assert_allclose(minus.as_array(), expect_minus, atol=1e-12)
    pair = qc.build_measurement_pair(lam)
    np.testing.assert_allclose(plus.as_array(), qc.apply_outcome(PureState.plus(), pair, 1).as_array(), atol=1e-12)


def test_dilation_rejects_bad_strength():
    with pytest.raises(DomainError):
        qc.dilation_unitary(2.0)


def test_expectation_examples():
    assert qc.expectation_from_counts(OutcomeCounts(75, 25), 0.5) == pytest.approx(1.0)
    assert qc.expectation_from_counts(OutcomeCounts(40, 40), 0.3) == 0.0
    assert qc.expectation_from_counts(OutcomeCounts(100, 0), 0.5) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        qc.expectation_from_counts(OutcomeCounts(1, 1), 0.0)
    with pytest.raises(DomainError):
        qc.expectation_from_counts(OutcomeCounts(0, 0), 0.5)


def test_tomography_examples():
    # exact per-axis frequencies of |0> at lam=0.5 are 1/2, 1/2, 3/4
    r = qc.tomography_estimate(OutcomeCounts(2, 2), OutcomeCounts(2, 2), OutcomeCounts(3, 1), 0.5)
    np.testing.assert_allclose(r.r, [0, 0, 1], atol=1e-15)
    assert not r.out_of_range
    r = qc.tomography_estimate(OutcomeCounts(5, 5), OutcomeCounts(5, 5), OutcomeCounts(5, 5), 0.5)
    np.testing.assert_allclose(r.r, [0, 0, 0])
    r = qc.tomography_estimate(OutcomeCounts(3, 1), OutcomeCounts(2, 2), OutcomeCounts(2, 2), 0.5)
    np.testing.assert_allclose(r.r, [1, 0, 0], atol=1e-15)


def test_tomography_flags_not_clamps():
    r = qc.tomography_estimate(OutcomeCounts(100, 0), OutcomeCounts(50, 50), OutcomeCounts(50, 50), 0.5)
    assert r.out_of_range
    assert r.r[0] == pytest.approx(2.0)


def test_bloch_of_named_states():
    np.testing.assert_allclose(PureState.zero().bloch(), [0, 0, 1])
    np.testing.assert_allclose(PureState.minus().bloch(), [-1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(PureState(1 / S2, 1j / S2).bloch(), [0, 1, 0], atol=1e-15)


def test_state_validation():
    with pytest.raises(DomainError):
        PureState(float("inf"), 0)
    with pytest.raises(DomainError):
        PureState(0, 0).normalized()


amplitudes = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)
strengths = st.floats(0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(amplitudes, amplitudes, strengths)
def test_probability_conservation(a0, a1, lam):
    psi = PureState(a0, a1)
    if psi.norm_sq < 1e-6:
        return
    pair = qc.build_measurement_pair(lam)
    total = sum(qc.apply_outcome(psi, pair, s).norm_sq for s in (1, -1))
    assert total == pytest.approx(psi.norm_sq, rel=1e-12)
    p_plus, p_minus = qc.outcome_probabilities(psi, pair)
    assert 0.0 <= p_plus <= 1.0 + 1e-15
    assert p_plus + p_minus == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(amplitudes, amplitudes, strengths, st.lists(st.sampled_from([1, -1]), max_size=8), st.randoms())
def test_order_invariance(a0, a1, lam, seq, rnd):
    psi = PureState(a0, a1)
    if psi.norm_sq < 1e-6:
        return
    psi = psi.normalized()
    pair = qc.build_measurement_pair(lam)
    shuffled = list(seq)
    rnd.shuffle(shuffled)
    probs = []
    for order in (seq, shuffled):
        out = psi
        for s in order:
            out = qc.apply_outcome(out, pair, s)
        probs.append(out.norm_sq)
    ref = qc.sequence_probability(psi, seq.count(1), seq.count(-1), lam)
    assert probs[0] == pytest.approx(ref, abs=1e-12)
    assert probs[1] == pytest.approx(ref, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(amplitudes, amplitudes, st.floats(0.0, 0.999), st.integers(1, 6), st.randoms())
def test_balanced_sequence_is_scalar(a0, a1, lam, a, rnd):
    psi = PureState(a0, a1)
    if psi.norm_sq < 1e-6:
        return
    pair = qc.build_measurement_pair(lam)
    seq = [1] * a + [-1] * a
    rnd.shuffle(seq)
    out = psi
    for s in seq:
        out = qc.apply_outcome(out, pair, s)
    scalar = ((1 - lam * lam) / 4) ** (a / 2)
    np.testing.assert_allclose(out.as_array(), scalar * psi.as_array(), rtol=0, atol=1e-12 * max(1, abs(a0), abs(a1)))
