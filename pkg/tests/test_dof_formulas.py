from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from rdic.dof_formulas import (DomainError, SymmetricParams, TwoUserParams, corollary1_dof,
                               feedback_gain_ratio, nofeedback_symmetric_two_user,
                               remark2_nofeedback, remark_nofeedback_three_user, thm1_converse_terms,
                               thm1_feedback, thm2_lower, thm3_upper)


@st.composite
def two_user_params(draw, top=6):
    M1, M2, N1, N2 = (draw(st.integers(1, top)) for _ in range(4))
    return TwoUserParams(M1, M2, N1, N2,
                         draw(st.integers(0, min(M1, N1))), draw(st.integers(0, min(M2, N1))),
                         draw(st.integers(0, min(M1, N2))), draw(st.integers(0, min(M2, N2))))


@st.composite
def symmetric_params(draw, K=3, top=12):
    M = draw(st.integers(1, top))
    return SymmetricParams(K, M, draw(st.integers(0, M)), draw(st.integers(0, M)))


def test_two_user_examples():
    assert thm1_feedback(TwoUserParams.symmetric(2, 1)) == 3
    assert thm1_feedback(TwoUserParams.symmetric(2, 2)) == 2
    assert thm1_feedback(TwoUserParams.symmetric(4, 2)) == 6


def test_full_rank_reduces_to_known_value():
    for M1, M2, N1, N2 in [(2, 2, 2, 2), (3, 1, 2, 4), (1, 4, 3, 2)]:
        p = TwoUserParams(M1, M2, N1, N2, min(M1, N1), min(M2, N1), min(M1, N2), min(M2, N2))
        assert thm1_feedback(p) == min(M1 + M2, N1 + N2, max(M1, N2), max(M2, N1))


def test_nofeedback_examples():
    assert remark2_nofeedback(TwoUserParams(2, 2, 2, 2, 2, 1, 1, 2)) == 3
    assert remark2_nofeedback(TwoUserParams(3, 3, 3, 3, 3, 0, 0, 3)) == 6
    with pytest.raises(DomainError, match="full-rank"):
        remark2_nofeedback(TwoUserParams(4, 4, 4, 4, 2, 2, 2, 2))
    assert nofeedback_symmetric_two_user(4, 2) == 4
    with pytest.raises(DomainError):
        nofeedback_symmetric_two_user(2, 3)


def test_three_user_examples():
    assert thm2_lower(SymmetricParams(3, 5, 1, 5)) == 6
    assert thm2_lower(SymmetricParams(3, 6, 1, 2)) == 9
    assert thm2_lower(SymmetricParams(3, 5, 5, 5)) == Fraction(15, 2)
    with pytest.raises(DomainError):
        thm2_lower(SymmetricParams(4, 5, 1, 1))
    assert remark_nofeedback_three_user(5, 5) == Fraction(15, 2)
    assert remark_nofeedback_three_user(6, 2) == 12


def test_k_user_examples():
    assert thm3_upper(SymmetricParams(3, 5, 1, 2)) == 9
    assert thm3_upper(SymmetricParams(4, 3, 2, 0)) == 8
    assert corollary1_dof(SymmetricParams(3, 5, 1, 2)) == 9
    assert corollary1_dof(SymmetricParams(4, 7, 1, 2)) == 16
    with pytest.raises(DomainError, match="D_d \\+ \\(K-1\\) D_c"):
        corollary1_dof(SymmetricParams(4, 6, 1, 2))
    assert feedback_gain_ratio(SymmetricParams(2, 2, 1, 1)) == Fraction(3, 2)
    with pytest.raises(DomainError):
        feedback_gain_ratio(SymmetricParams(2, 2, 1, 2))


@given(two_user_params())
def test_thm1_equals_converse_minimum(p):
    # the six-term min is the min of the two genie-aided bounds
    assert thm1_feedback(p) == min(thm1_converse_terms(p))


@given(two_user_params())
def test_feedback_never_hurts(q):
    p = TwoUserParams(q.M1, q.M2, q.N1, q.N2, min(q.M1, q.N1), q.D12, q.D21, min(q.M2, q.N2))
    assert thm1_feedback(p) >= remark2_nofeedback(p)


@given(st.integers(1, 20), st.integers(1, 20))
def test_symmetric_two_user_forms(M, D):
    # at D = 0 both values vanish, so the gain statement needs D >= 1
    assume(D <= M)
    fb = thm1_feedback(TwoUserParams.symmetric(M, D))
    assert fb == min(2 * M - D, 3 * D, M + D)
    gain = fb > nofeedback_symmetric_two_user(M, D)
    assert gain == (2 * M > 3 * D)


@given(symmetric_params())
def test_thm2_below_k_user_bound(p):
    assume(p.D_c <= p.M)
    lo, hi = thm2_lower(p), thm3_upper(p)
    assert lo <= hi
    if p.M >= 2 * p.D_c + p.D_d:
        assert lo == hi
    assert (2 * lo).denominator == 1


@given(st.integers(2, 6), st.integers(0, 4), st.integers(0, 4), st.integers(0, 10))
def test_corollary_equals_bound(K, D_d, D_c, extra):
    M = D_d + (K - 1) * D_c + extra
    assume(M >= 1)
    p = SymmetricParams(K, M, D_d, D_c)
    assert corollary1_dof(p) == thm3_upper(p)


def test_params_validation():
    with pytest.raises(DomainError):
        TwoUserParams(2, 2, 2, 2, 3, 0, 0, 0)
    with pytest.raises(DomainError):
        SymmetricParams(1, 2, 1, 1)
    with pytest.raises(DomainError):
        SymmetricParams(3, 2, 1, 3)
