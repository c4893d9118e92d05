"""Two-slot feedback protocol: transmit, decode, relay, and count.

Slot one: every transmitter sends fresh symbols on all of its blocks.
Each receiver decodes the blocks its scheme resolves, and each transmitter
decodes the same blocks from the (perfect, delay-one) feedback of the
output of its paired receiver. Slot two: fresh symbols go out again on
the non-relay blocks while the relay blocks forward what the transmitter
learned in slot one. Decoding is noiseless linear least squares; noise
only enters `estimate_dof_slope`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .beamformer import (K_USER, THREE_USER, TWO_USER, BeamformerSet, SymbolAllocation,
                         decode_blocks, link_roles, rank_conditions, relay_sources)
from .channel import ChannelInstance, complex_gaussian, substream, symmetric_view
from .dof_formulas import (DomainError, SymmetricParams, TwoUserParams, corollary1_dof,
                           thm1_feedback, thm2_lower, thm3_upper)
from .numkernel import DEFAULT_TOL, Tolerance, least_squares, orth_basis, rank_tol, singular_values

SLOTS = 2
_SYMBOL_STREAM = 2


class DecodeError(RuntimeError):
    """A node cannot resolve the symbols it is meant to decode."""

    def __init__(self, message, node=None, slot=None, matrix=None):
        super().__init__(message)
        self.node = node
        self.slot = slot
        self.matrix = matrix


# symbol id: (owner tx, block label, slot introduced, index)
SymbolId = tuple


@dataclass
class SymbolRecord:
    owner: int
    label: str
    slot: int
    index: int
    value: complex
    decoded_by: list = field(default_factory=list)  # node tags such as "rx1@1", "tx2@1"

    @property
    def intended_tag(self) -> str:
        return f"rx{self.owner + 1}"

    def reached_intended(self) -> bool:
        return any(t.split("@")[0] == self.intended_tag for t in self.decoded_by)


@dataclass
class TransmissionTrace:
    scheme: str
    K: int
    x: list            # x[t][i]: transmitted vector of tx i in slot t (0-based slot)
    y: list            # y[t][j]: noiseless output at rx j
    carried: list      # carried[t][i][label]: list of symbol ids on that block
    ledger: dict       # symbol id -> SymbolRecord
    residuals: dict    # node tag "rx1@1" -> relative least-squares residual
    errors: dict       # node tag -> max symbol error against the truth
    feedback: list     # feedback[i]: symbol ids tx i learned from its fed-back output
    slots: int = SLOTS

    def intended_decoded(self) -> int:
        return sum(1 for r in self.ledger.values() if r.reached_intended())

    def undelivered(self) -> list:
        return [sid for sid, r in self.ledger.items() if not r.reached_intended()]

    def max_residual(self) -> float:
        vals = list(self.residuals.values()) + list(self.errors.values())
        return max(vals, default=0.0)

    def decoded_ledger(self) -> dict:
        """Symbol ids mapped to the sorted nodes that decoded them (value-free)."""
        return {sid: sorted(r.decoded_by) for sid, r in self.ledger.items()}

    def to_dict(self) -> dict:
        def sid_str(sid):
            o, lab, t, k = sid
            return f"{o + 1}:{lab}:{t}:{k}"

        return {
            "scheme": self.scheme, "K": self.K, "slots": self.slots,
            "ledger": {sid_str(s): {"owner": r.owner + 1, "type": r.label, "slot": r.slot,
                                    "decoded_by": sorted(r.decoded_by)}
                       for s, r in sorted(self.ledger.items())},
            "residuals": dict(sorted(self.residuals.items())),
            "symbol_errors": dict(sorted(self.errors.items())),
            "feedback": {f"tx{i + 1}": [sid_str(s) for s in fb] for i, fb in enumerate(self.feedback)},
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text


def _symbols(seed, i, label, slot, n):
    code = sum(map(ord, label))  # stable small integer per label
    return complex_gaussian(substream(seed, _SYMBOL_STREAM, i, slot, code), n)


def _check_consistent(instance, bf, alloc):
    if bf.alloc != alloc:
        raise ValueError("beamformer set was built for a different allocation")
    if bf.K != instance.K:
        raise ValueError("beamformer set and channel disagree on K")
    for i in range(bf.K):
        for lab, cnt in alloc.block_counts(i).items():
            V = bf.block(i, lab)
            if V.shape != (instance.config.tx_antennas[i], cnt):
                raise ValueError(f"tx {i + 1} block {lab} has shape {V.shape}")


def _decode(instance, bf, j, y, slot, tag, tol):
    """Least squares at receiver `j`'s output: resolve target blocks, absorb the rest."""
    K = instance.K
    targets = [(i, lab) for i, lab in decode_blocks(bf.scheme, K, j) if bf.block(i, lab).shape[1]]
    A_dec = [instance.H(j, i) @ bf.block(i, lab) for i, lab in targets]
    others = []
    for i in range(K):
        for lab in bf.labels(i):
            if (i, lab) in targets or bf.block(i, lab).shape[1] == 0:
                continue
            if j in link_roles(bf.scheme, K, i, lab)[0]:
                continue
            others.append(instance.H(j, i) @ bf.block(i, lab))
    n_rx = instance.config.rx_antennas[j]
    visible = A_dec + others
    if not visible:
        return {}, float(np.linalg.norm(y))
    scale = float(singular_values(np.hstack(visible))[0])
    Q = orth_basis(np.hstack(others), tol, scale=scale) if others else np.zeros((n_rx, 0))
    A = np.hstack(A_dec + [Q]) if A_dec else Q
    if A.shape[1] > rank_tol(A, tol, scale=scale):
        raise DecodeError(f"{tag}: effective matrix {A.shape} has rank {rank_tol(A, tol, scale=scale)} "
                          f"slot {slot}; cannot separate targets from interference",
                          node=tag, slot=slot, matrix=A)
    sol, res = least_squares(A, y)
    out, pos = {}, 0
    for i, lab in targets:
        n = bf.block(i, lab).shape[1]
        out[(i, lab)] = sol[pos:pos + n]
        pos += n
    ny = float(np.linalg.norm(y))
    return out, (res / ny if ny > 0 else res)


def run_two_slot(instance: ChannelInstance, bf: BeamformerSet, alloc: SymbolAllocation,
                 seed: int | None = None, tol: Tolerance = DEFAULT_TOL) -> TransmissionTrace:
    """Run both slots and return the full trace.

    Raises
    ------
    DecodeError
        If any node's effective matrix is rank deficient, or a decoded
        symbol misses its true value by more than ``tol.residual_tol``.
    """
    _check_consistent(instance, bf, alloc)
    seed = bf.seed if seed is None else seed
    K = instance.K
    H = instance.H
    ledger, residuals, errors = {}, {}, {}
    x_all, y_all, carried_all = [], [], []
    feedback = [[] for _ in range(K)]
    learned = [{} for _ in range(K)]  # tx i: (src tx, label) -> estimated symbols

    for t in (1, 2):
        relays = [relay_sources(bf.scheme, K, i) if t == 2 else {} for i in range(K)]
        carried = []
        sent = {}  # (tx, label) -> transmitted symbol vector
        xs = []
        for i in range(K):
            carry = {}
            x = np.zeros(instance.config.tx_antennas[i], dtype=np.complex128)
            for lab in bf.labels(i):
                V = bf.block(i, lab)
                n = V.shape[1]
                if lab in relays[i]:
                    src = relays[i][lab]
                    ids = carried_all[0][src[0]][src[1]]
                    s = learned[i].get(src, np.zeros(0, dtype=np.complex128))
                else:
                    ids = [(i, lab, t, k) for k in range(n)]
                    s = _symbols(seed, i, lab, t, n)
                    for sid, v in zip(ids, s):
                        ledger[sid] = SymbolRecord(i, lab, t, sid[3], complex(v))
                carry[lab] = ids
                sent[(i, lab)] = s
                if n:
                    x = x + V @ s
            carried.append(carry)
            xs.append(x)
        ys = []
        for j in range(K):
            y = np.zeros(instance.config.rx_antennas[j], dtype=np.complex128)
            for i in range(K):
                y = y + H(j, i) @ xs[i]
            ys.append(y)
        x_all.append(xs)
        y_all.append(ys)
        carried_all.append(carried)

        # receivers, then (slot one only) transmitters via the fed-back outputs
        nodes = [("rx", j, j) for j in range(K)]
        if t == 1:
            nodes += [("tx", i, i) for i in range(K)]
        for kind, node, out_idx in nodes:
            tag = f"{kind}{node + 1}@{t}"
            est, res = _decode(instance, bf, out_idx, ys[out_idx], t, tag, tol)
            residuals[tag] = res
            worst = 0.0
            for (i, lab), s_hat in est.items():
                worst = max(worst, float(np.max(np.abs(s_hat - sent[(i, lab)]), initial=0.0)))
                for sid in carried[i][lab]:
                    ledger[sid].decoded_by.append(tag)
                if kind == "tx":
                    learned[node][(i, lab)] = s_hat
                    if any(src == (i, lab) for src in relay_sources(bf.scheme, K, node).values()):
                        feedback[node].extend(carried[i][lab])
            errors[tag] = worst
            if res > tol.residual_tol or worst > tol.residual_tol:
                raise DecodeError(f"{tag}: residual {res:.3e}, symbol error {worst:.3e} exceed tolerance",
                                  node=tag, slot=t)

    # relayed estimates must match the original symbols
    for i in range(K):
        for (src_tx, src_lab), s_hat in learned[i].items():
            ids = carried_all[0][src_tx][src_lab]
            truth = np.array([ledger[sid].value for sid in ids])
            if ids and float(np.max(np.abs(truth - s_hat))) > tol.residual_tol:
                raise DecodeError(f"tx{i + 1} learned wrong symbols of tx{src_tx + 1} block {src_lab}",
                                  node=f"tx{i + 1}", slot=1)

    trace = TransmissionTrace(bf.scheme, K, x_all, y_all, carried_all, ledger, residuals, errors, feedback)
    missing = trace.undelivered()
    if missing:
        raise DecodeError(f"{len(missing)} symbols never reached their receiver, e.g. {missing[0]}")
    return trace


def dof_from_trace(trace: TransmissionTrace) -> Fraction:
    """Symbols decoded by their intended receivers per slot, exactly."""
    return Fraction(trace.intended_decoded(), trace.slots)


@dataclass
class RankConditionReport:
    rows: list  # (rx, name, measured, expected, ok), 0-based rx

    @property
    def passed(self) -> bool:
        return all(r[4] for r in self.rows)

    def failures(self) -> list:
        return [r for r in self.rows if not r[4]]

    def get(self, rx: int, name: str):
        for r in self.rows:
            if r[0] == rx and r[1] == name:
                return r
        raise KeyError((rx, name))


def verify_rank_conditions(instance: ChannelInstance, bf: BeamformerSet, alloc: SymbolAllocation,
                           tol: Tolerance = DEFAULT_TOL) -> RankConditionReport:
    """Measured vs. predicted ranks of the stacked receive matrices at every receiver."""
    if bf.alloc != alloc:
        raise ValueError("beamformer set was built for a different allocation")
    return RankConditionReport(rank_conditions(instance, bf, tol))


@dataclass
class DofReport:
    decoded_symbols_total: int
    slots: int
    achieved_dof: Fraction
    formula_lower: Fraction | None
    formula_upper: Fraction | None

    @property
    def meets_lower(self) -> bool:
        return self.formula_lower is None or self.achieved_dof == self.formula_lower

    @property
    def within_upper(self) -> bool:
        return self.formula_upper is None or self.achieved_dof <= self.formula_upper

    def to_dict(self) -> dict:
        f = lambda q: None if q is None else str(q)
        return {"decoded_symbols_total": self.decoded_symbols_total, "slots": self.slots,
                "achieved_dof": str(self.achieved_dof), "formula_lower": f(self.formula_lower),
                "formula_upper": f(self.formula_upper), "meets_lower": self.meets_lower,
                "within_upper": self.within_upper}


def dof_report(instance: ChannelInstance, trace: TransmissionTrace) -> DofReport:
    """Compare a trace with the closed forms that apply to its configuration.

    Two users: both bounds are the exact two-user value. Symmetric K users:
    the upper bound is the K-user bound; the lower bound is the three-user
    achievable value or the K-user exact value above its antenna threshold.
    """
    lower = upper = None
    sym = symmetric_view(instance.config)
    if trace.scheme == TWO_USER:
        lower = upper = thm1_feedback(TwoUserParams.from_config(instance.config))
    if sym is not None:
        p = SymmetricParams(sym.K, sym.M, sym.D_d, sym.D_c)
        upper = thm3_upper(p) if upper is None else min(upper, thm3_upper(p))
        if trace.scheme == THREE_USER:
            lower = thm2_lower(p)
        elif trace.scheme == K_USER:
            try:
                lower = corollary1_dof(p)
            except DomainError:
                lower = None
    n = trace.intended_decoded()
    return DofReport(n, trace.slots, Fraction(n, trace.slots), lower, upper)


def _logdet2(A: np.ndarray) -> float:
    sign, ld = np.linalg.slogdet(A)
    if sign.real <= 0 or not np.isfinite(ld):
        raise FloatingPointError("covariance lost positive definiteness")
    return float(ld) / np.log(2.0)


def sum_rate(instance: ChannelInstance, bf: BeamformerSet, P: float) -> float:
    """Per-slot-averaged Gaussian sum rate (bits) of the scheme at power `P`.

    Each transmitter splits `P` evenly across its active columns; noise is
    unit variance. The rate at receiver `j` in a slot is the mutual
    information of its intended streams treating the rest as noise. A
    relayed stream counts toward the receiver that owns it.
    """
    K = instance.K
    total = 0.0
    for t in (1, 2):
        relays = [relay_sources(bf.scheme, K, i) if t == 2 else {} for i in range(K)]
        # owner of the symbols carried on each block this slot
        owner = {}
        for i in range(K):
            for lab in bf.labels(i):
                owner[(i, lab)] = relays[i][lab][0] if lab in relays[i] else i
        for j in range(K):
            n_rx = instance.config.rx_antennas[j]
            S_all = np.zeros((n_rx, n_rx), dtype=np.complex128)
            S_own = np.zeros_like(S_all)
            for i in range(K):
                d_i = bf.V(i).shape[1]
                if d_i == 0:
                    continue
                for lab in bf.labels(i):
                    V = bf.block(i, lab)
                    if V.shape[1] == 0:
                        continue
                    G = instance.H(j, i) @ V
                    C = (P / d_i) * (G @ G.conj().T)
                    S_all += C
                    if owner[(i, lab)] == j and (i, lab) in decode_blocks(bf.scheme, K, j):
                        S_own += C
            I = np.eye(n_rx)
            total += _logdet2(I + S_all) - _logdet2(I + S_all - S_own)
    rate = total / SLOTS
    if not np.isfinite(rate):
        raise FloatingPointError("non-finite sum rate")
    return rate


def estimate_dof_slope(instance: ChannelInstance, bf: BeamformerSet, alloc: SymbolAllocation,
                       powers) -> float:
    """Finite-power DoF surrogate: slope of the sum rate against log2 P.

    Uses the two largest entries of `powers`, which must span at least a
    factor of 1e4.
    """
    powers = sorted(float(p) for p in powers)
    if len(powers) < 2:
        raise ValueError("need at least two power levels")
    if powers[0] <= 0 or powers[-1] / powers[0] < 1e4:
        raise ValueError("powers must be positive with max/min >= 1e4")
    if bf.alloc != alloc:
        raise ValueError("beamformer set was built for a different allocation")
    lo, hi = powers[-2], powers[-1]
    r_lo, r_hi = sum_rate(instance, bf, lo), sum_rate(instance, bf, hi)
    return (r_hi - r_lo) / (np.log2(hi) - np.log2(lo))
