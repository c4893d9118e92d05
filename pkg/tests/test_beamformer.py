from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rdic.beamformer import (K_USER, THREE_USER, TWO_USER, AlignmentError, BeamformerSet,
                             InfeasibleAllocationError, IntegralityError, PreconditionError,
                             SymbolAllocation, alignment_system, alloc_three_user, alloc_two_user,
                             build_k_user_corollary, build_three_user, build_two_user, check_blocks,
                             decode_blocks, rank_conditions, regime, relay_sources,
                             three_user_candidates, three_user_prescription)
from rdic.channel import NetworkConfig, SymmetricConfig, generate
from rdic.dof_formulas import SymmetricParams, TwoUserParams, thm1_feedback, thm2_lower
from rdic.numkernel import span_contains
from rdic.polytope import three_user_constraints


def counts(**kw):
    out = {f"d{t}": 0 for t in range(1, 8)}
    out.update(kw)
    return out


def test_two_user_m2_allocation_and_blocks(two_user_m2):
    alloc = alloc_two_user(two_user_m2.config)
    assert alloc.point() == (1, 0, 1, 0, 1)
    assert alloc.objective() == 3
    bf = build_two_user(two_user_m2, alloc)
    for i in (0, 1):
        assert bf.block(i, "1").shape == (2, 1)
        assert bf.block(i, "2").shape == (2, 0)
        assert bf.block(i, "3").shape == (2, 1)
        j = 1 - i
        assert np.linalg.norm(two_user_m2.H(j, i) @ bf.block(i, "1")) <= 1e-8
        assert np.linalg.norm(two_user_m2.H(i, i) @ bf.block(i, "3")) <= 1e-8
    assert [r[2] for r in rank_conditions(two_user_m2, bf)] == [2, 2]
    assert check_blocks(two_user_m2, bf) == []


@st.composite
def small_two_user(draw):
    M1, M2, N1, N2 = (draw(st.integers(1, 4)) for _ in range(4))
    return NetworkConfig.two_user(M1, M2, N1, N2,
                                  draw(st.integers(0, min(M1, N1))), draw(st.integers(0, min(M2, N1))),
                                  draw(st.integers(0, min(M1, N2))), draw(st.integers(0, min(M2, N2))))


@given(small_two_user(), st.integers(0, 1000))
def test_two_user_allocation_reaches_formula_and_builds(cfg, seed):
    alloc = alloc_two_user(cfg)
    assert alloc.objective() == thm1_feedback(TwoUserParams.from_config(cfg))
    inst = generate(cfg, seed)
    bf = build_two_user(inst, alloc)
    assert all(r[4] for r in rank_conditions(inst, bf))


def test_three_user_m5_prescription():
    name, c, values = three_user_prescription(5, 1, 5)
    assert name == "1.1"
    assert c == counts(d4=1, d5=2)
    alloc = alloc_three_user(SymmetricConfig(3, 5, 1, 5))
    assert alloc.objective() == 6
    assert alloc.block_counts(0) == {"1": 0, "2": 0, "3": 0, "4": 1, "5,1": 1, "5,2": 1, "6": 0, "7": 0}


@pytest.mark.parametrize("M,Dd,Dc,case,expect", [
    (6, 1, 2, "3", counts(d3=1, d6=2, d7=2)),
    (4, 1, 2, "2.1", counts(d1=Fraction(1, 2), d2=Fraction(1, 2), d6=1, d7=1)),
    (4, 3, 2, "2.2", counts(d1=1, d2=1)),
    (3, 1, 2, "1.1", counts(d1=1, d5=Fraction(2, 3))),
    (5, 0, 4, "1.2", counts(d5=2, d6=1, d7=1)),
    (4, 3, 3, "1.3", counts(d1=1, d4=1)),
    (3, 2, 2, "1.3", counts(d1=1, d4=Fraction(1, 2))),
])
def test_case_prescriptions(M, Dd, Dc, case, expect):
    name, c, _ = three_user_prescription(M, Dd, Dc)
    assert name == case
    assert c == expect


def test_tie_prefers_alignment_case():
    # M = D_d + D_c inside case 1: sub-cases 1.1 and 1.2 tie
    name, c, values = three_user_prescription(6, 2, 4)
    assert values == {"1.1": 8, "1.2": 8}
    assert name == "1.1" and c == counts(d1=2, d5=Fraction(4, 3))
    # both sub-cases apply with equal value at (2, 1, 2) and (4, 2, 3) too
    assert three_user_prescription(4, 2, 3)[0] == "1.1"


def test_integrality_error_carries_target():
    with pytest.raises(IntegralityError) as e:
        alloc_three_user(SymmetricConfig(3, 3, 1, 2))
    assert e.value.subcase == "1.1"
    assert e.value.prescription["d5"] == Fraction(2, 3)


@given(st.integers(1, 12).flatmap(lambda M: st.tuples(st.just(M), st.integers(0, M), st.integers(0, M))))
def test_prescriptions_meet_formula_and_constraints(pt):
    M, D_d, D_c = pt
    p = SymmetricParams(3, M, D_d, D_c)
    poly = three_user_constraints(p)
    for name, c in three_user_candidates(M, D_d, D_c):
        assert all(v >= 0 for v in c.values()), name
        assert poly.contains(tuple(c[v] for v in poly.variables)), name
    _, c, values = three_user_prescription(M, D_d, D_c)
    assert max(values.values()) == thm2_lower(p)


def test_regime_labels():
    assert regime(counts(d4=1, d5=2)) == "IA"
    assert regime(counts(d1=1, d5=2)) == "ZF+IA"
    assert regime(counts(d3=1, d6=2)) == "ZF"


def test_three_user_m5_alignment(three_user_m5):
    alloc = alloc_three_user(SymmetricConfig(3, 5, 1, 5))
    bf = build_three_user(three_user_m5, alloc)
    H = three_user_m5.H
    for i in range(3):
        # type-4 images at rx i+1 line up with tx i+2's type-4 images
        a = H(i + 1, i) @ bf.block(i, "4")
        b = H(i + 1, i + 2) @ bf.block(i + 2, "4")
        assert np.linalg.matrix_rank(np.hstack([a, b]), tol=1e-8 * np.linalg.norm(a)) == 1
        # paired halves coincide at the third receiver
        u = H(i + 2, i) @ bf.block(i, "5,1")
        w = H(i + 2, i + 1) @ bf.block(i + 1, "5,2")
        assert span_contains(u, w)
    rows = rank_conditions(three_user_m5, bf)
    assert all(r[4] for r in rows)
    assert {r[2] for r in rows if r[1] == "[A1 A2 A3]"} == {5}


def test_alignment_system_shape(three_user_m5):
    sysm = alignment_system(three_user_m5, 0)
    assert sysm.T.shape == (15, 10)
    # rank M + 2 D_d, so the nullspace has M - 2 D_d = 3 dimensions
    assert sysm.measured_rank == 7 and sysm.nullspace.shape == (10, 3)


@pytest.mark.parametrize("M,Dd,Dc", [(2, 1, 2), (4, 2, 3), (4, 3, 3), (5, 0, 4), (6, 1, 2), (4, 2, 2), (4, 3, 2), (9, 3, 3)])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_three_user_cases_build(M, Dd, Dc, seed):
    cfg = SymmetricConfig(3, M, Dd, Dc)
    alloc = alloc_three_user(cfg)
    inst = generate(cfg, seed)
    bf = build_three_user(inst, alloc)
    assert check_blocks(inst, bf) == []
    assert all(r[4] for r in rank_conditions(inst, bf))


def test_alignment_with_type1_anchor():
    # d1 = M - D_c and d4 > 0: alignment is anchored on the type-1 images
    cfg = SymmetricConfig(3, 4, 2, 3)
    alloc = alloc_three_user(cfg)
    assert alloc.counts["d1"] == 1 and alloc.counts["d4"] == 1
    inst = generate(cfg, 5)
    bf = build_three_user(inst, alloc)
    for i in range(3):
        U = inst.H(i + 1, i) @ bf.block(i, "4")
        W = inst.H(i + 1, i + 2) @ np.hstack([bf.block(i + 2, "1"), bf.block(i + 2, "4")])
        assert span_contains(U, W)


def test_alignment_needs_full_anchor():
    cfg = SymmetricConfig(3, 4, 2, 3)
    inst = generate(cfg, 5)
    # d1 below M - D_c leaves the alignment overdetermined
    alloc = SymbolAllocation(THREE_USER, 3, counts(d4=1))
    with pytest.raises(AlignmentError):
        build_three_user(inst, alloc)


def test_overfull_allocation_rejected(two_user_m2):
    alloc = SymbolAllocation(TWO_USER, 2, {"d1_1": 2, "d1_2": 0, "d2_1": 0, "d2_2": 0, "df": 0})
    with pytest.raises(InfeasibleAllocationError):
        build_two_user(two_user_m2, alloc)


def test_k_user_corollary():
    for K in (2, 3, 4):
        inst = generate(SymmetricConfig(K, K, 1, 1), 3)
        bf, alloc = build_k_user_corollary(inst)
        assert alloc.objective() == K + Fraction(K * (K - 1), 2)
        assert check_blocks(inst, bf) == []
        assert all(r[4] for r in rank_conditions(inst, bf))
    with pytest.raises(PreconditionError, match="D_d \\+ \\(K-1\\) D_c"):
        build_k_user_corollary(generate(SymmetricConfig(3, 2, 1, 1), 0))


def test_scheme_tables_are_consistent():
    # every relayed block is decoded at the relaying transmitter's own receiver
    # and the forwarded block is decoded by the owner of its symbols
    for scheme, K in ((TWO_USER, 2), (THREE_USER, 3), (K_USER, 4)):
        for i in range(K):
            for label, (src_tx, src_label) in relay_sources(scheme, K, i).items():
                assert (src_tx, src_label) in decode_blocks(scheme, K, i)
                assert (i, label) in decode_blocks(scheme, K, src_tx)


def test_json_round_trip(three_user_m5, tmp_path):
    alloc = alloc_three_user(SymmetricConfig(3, 5, 1, 5))
    bf = build_three_user(three_user_m5, alloc)
    path = tmp_path / "bf.json"
    bf.to_json(path)
    back = BeamformerSet.from_json(path, tx_antennas=three_user_m5.config.tx_antennas)
    assert back.alloc == alloc and back.seed == bf.seed
    for i in range(3):
        assert back.labels(i) == bf.labels(i)
        assert np.array_equal(back.V(i), bf.V(i))


def test_allocation_validation():
    with pytest.raises(ValueError):
        SymbolAllocation(THREE_USER, 3, counts(d5=1))
    with pytest.raises(ValueError):
        SymbolAllocation(TWO_USER, 2, {"d1_1": -1, "d1_2": 0, "d2_1": 0, "d2_2": 0, "df": 0})
