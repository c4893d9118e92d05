import numpy as np
import pytest
from hypothesis import given, strategies as st

from rdic.beamformer import (THREE_USER, TWO_USER, BeamformerSet, SymbolAllocation,
                             alloc_three_user, alloc_two_user, build_k_user_corollary,
                             build_three_user, build_two_user)
from rdic.channel import ChannelInstance, NetworkConfig, SymmetricConfig, generate
from rdic.dof_formulas import SymmetricParams, thm3_upper
from rdic.simulator import (DecodeError, dof_from_trace, dof_report, estimate_dof_slope,
                            run_two_slot, sum_rate, verify_rank_conditions)


@pytest.fixture
def two_user_scheme(two_user_m2):
    alloc = alloc_two_user(two_user_m2.config)
    return two_user_m2, build_two_user(two_user_m2, alloc), alloc


@pytest.fixture
def three_user_scheme(three_user_m5):
    alloc = alloc_three_user(SymmetricConfig(3, 5, 1, 5))
    return three_user_m5, build_three_user(three_user_m5, alloc), alloc


def test_two_user_m2_trace(two_user_scheme):
    inst, bf, alloc = two_user_scheme
    trace = run_two_slot(inst, bf, alloc)
    assert trace.intended_decoded() == 6
    assert dof_from_trace(trace) == 3
    assert trace.max_residual() <= 1e-8
    rep = dof_report(inst, trace)
    assert rep.achieved_dof == rep.formula_lower == rep.formula_upper == 3


def test_two_user_m2_relay_ledger(two_user_scheme):
    inst, bf, alloc = two_user_scheme
    trace = run_two_slot(inst, bf, alloc)
    # tx1's slot-one relay symbol is learned by tx2 from feedback and reaches rx1 in slot two
    sid = (0, "3", 1, 0)
    assert trace.feedback[1] == [sid]
    assert "tx2@1" in trace.ledger[sid].decoded_by
    assert "rx1@2" in trace.ledger[sid].decoded_by
    assert trace.carried[1][1]["3"] == [sid]


def test_three_user_m5_trace(three_user_scheme):
    inst, bf, alloc = three_user_scheme
    trace = run_two_slot(inst, bf, alloc)
    assert trace.intended_decoded() == 12
    assert dof_from_trace(trace) == 6
    rep = dof_report(inst, trace)
    assert rep.meets_lower and rep.within_upper and rep.formula_upper == 18
    relayed = [sid for sid, r in trace.ledger.items() if r.label in ("5,1", "5,2")]
    for sid in relayed:
        by = trace.ledger[sid].decoded_by
        assert any(t.startswith("tx") and t.endswith("@1") for t in by)
        assert f"rx{sid[0] + 1}@2" in by


def test_three_user_m5_rank_conditions(three_user_scheme):
    inst, bf, alloc = three_user_scheme
    rep = verify_rank_conditions(inst, bf, alloc)
    assert rep.passed
    assert rep.get(0, "[A1 A2 A3]")[2] == 5
    assert rep.get(1, "[A2 A3]")[2] == 4


def test_corrupted_alignment_detected(three_user_scheme):
    inst, bf, alloc = three_user_scheme
    rng = np.random.default_rng(0)
    blocks = [dict(b) for b in bf.blocks]
    v = rng.standard_normal((5, 1)) + 1j * rng.standard_normal((5, 1))
    blocks[0]["4"] = v / np.linalg.norm(v)
    bad = BeamformerSet(bf.scheme, alloc, blocks, bf.seed)
    rep = verify_rank_conditions(inst, bad, alloc)
    assert not rep.passed
    assert any(f[1] == "[A2 A3]" for f in rep.failures())
    with pytest.raises(DecodeError):
        run_two_slot(inst, bad, alloc)


@pytest.mark.parametrize("seed", range(20))
def test_zero_forcing_rank_conditions(seed):
    cfg = SymmetricConfig(3, 6, 1, 2)
    alloc = alloc_three_user(cfg)
    inst = generate(cfg, seed)
    bf = build_three_user(inst, alloc)
    rep = verify_rank_conditions(inst, bf, alloc)
    assert rep.passed and len(rep.rows) == 15


def test_zero_allocation(two_user_m2):
    alloc = SymbolAllocation.zero(TWO_USER, 2)
    bf = build_two_user(two_user_m2, alloc)
    trace = run_two_slot(two_user_m2, bf, alloc)
    assert trace.ledger == {} and dof_from_trace(trace) == 0
    assert estimate_dof_slope(two_user_m2, bf, alloc, [1e4, 1e8]) == 0.0


def test_replay_from_files(three_user_scheme, tmp_path):
    inst, bf, alloc = three_user_scheme
    inst.to_json(tmp_path / "ch.json")
    bf.to_json(tmp_path / "bf.json")
    inst2 = ChannelInstance.from_json(tmp_path / "ch.json")
    bf2 = BeamformerSet.from_json(tmp_path / "bf.json", inst2.config.tx_antennas)
    a = run_two_slot(inst, bf, alloc)
    b = run_two_slot(inst2, bf2, bf2.alloc)
    assert a.decoded_ledger() == b.decoded_ledger()
    assert a.to_json() == b.to_json()


def test_slopes(two_user_scheme, three_user_scheme):
    assert abs(estimate_dof_slope(*two_user_scheme, [1e4, 1e8]) - 3) <= 0.15
    assert abs(estimate_dof_slope(*three_user_scheme, [1e4, 1e8]) - 6) <= 0.25


def test_slope_preconditions(two_user_scheme):
    with pytest.raises(ValueError):
        estimate_dof_slope(*two_user_scheme, [1e4])
    with pytest.raises(ValueError):
        estimate_dof_slope(*two_user_scheme, [1e4, 1e6])


def test_sum_rate_grows_with_power(two_user_scheme):
    inst, bf, _ = two_user_scheme
    assert 0 < sum_rate(inst, bf, 1.0) < sum_rate(inst, bf, 100.0)


def test_mismatched_allocation_rejected(two_user_scheme):
    inst, bf, _ = two_user_scheme
    with pytest.raises(ValueError):
        run_two_slot(inst, bf, SymbolAllocation.zero(TWO_USER, 2))


def test_k_user_trace():
    inst = generate(SymmetricConfig(4, 7, 1, 2), 1)
    bf, alloc = build_k_user_corollary(inst)
    trace = run_two_slot(inst, bf, alloc)
    assert dof_from_trace(trace) == 16
    assert dof_report(inst, trace).meets_lower


@st.composite
def integral_three_user(draw):
    M = draw(st.integers(1, 7))
    cfg = SymmetricConfig(3, M, draw(st.integers(0, M)), draw(st.integers(0, M)))
    try:
        alloc = alloc_three_user(cfg)
    except ValueError:
        alloc = None
    return cfg, alloc


@given(integral_three_user(), st.integers(0, 10**6))
def test_trace_matches_objective_and_bound(pair, seed):
    cfg, alloc = pair
    if alloc is None:
        return
    inst = generate(cfg, seed)
    bf = build_three_user(inst, alloc)
    trace = run_two_slot(inst, bf, alloc)
    dof = dof_from_trace(trace)
    assert dof == alloc.objective()
    assert dof <= thm3_upper(SymmetricParams(3, cfg.M, cfg.D_d, cfg.D_c))
    assert trace.max_residual() <= 1e-8


@given(st.integers(1, 4).flatmap(lambda M: st.tuples(st.just(M), st.integers(0, M), st.integers(0, M))),
       st.integers(0, 10**6))
def test_two_user_symmetric_bound(pt, seed):
    M, D_d, D_c = pt
    inst = generate(SymmetricConfig(2, M, D_d, D_c), seed)
    alloc = alloc_two_user(inst.config)
    trace = run_two_slot(inst, build_two_user(inst, alloc), alloc)
    assert dof_from_trace(trace) == alloc.objective()
    assert dof_from_trace(trace) <= thm3_upper(SymmetricParams(2, M, D_d, D_c))
