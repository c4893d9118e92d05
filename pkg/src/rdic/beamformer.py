"""Typed beamforming blocks and symbol allocations.

Three schemes are supported:

* ``two_user``: types 1-3 per transmitter (zero-force the cross link,
  random, zero-force the direct link), with a shared relay count ``df``.
* ``three_user``: the symmetric three-user scheme with types 1-7, where
  type 4 aligns interference cyclically and type 5 is split into paired
  halves ``5,1`` / ``5,2`` that align at the third receiver.
* ``k_user``: ``D_d`` direct symbols zero-forced at every cross link plus
  ``D_c`` symbols per cross link zero-forced everywhere else.

Transmitter and receiver indices are 0-based and taken modulo K.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .channel import (ChannelInstance, NetworkConfig, SymmetricConfig, as_network,
                      complex_gaussian, substream, symmetric_view)
from .dof_formulas import SymmetricParams, TwoUserParams
from .numkernel import (DEFAULT_TOL, Tolerance, joint_nullspace, nullspace_basis,
                        orth_basis, projection_residual, rank_tol, span_contains)
from .polytope import d5_cap, three_user_constraints, two_user_constraints

TWO_USER = "two_user"
THREE_USER = "three_user"
K_USER = "k_user"


class InfeasibleAllocationError(ValueError):
    """An allocation asks for more vectors than a nullspace provides."""


class AlignmentError(RuntimeError):
    """A constructed alignment fails its span or rank condition."""

    def __init__(self, message, transmitter=None, residual=None):
        super().__init__(message)
        self.transmitter = transmitter
        self.residual = residual


class IntegralityError(ValueError):
    """The prescribed allocation is not integral (a symbol extension would be needed)."""

    def __init__(self, message, prescription=None, subcase=None):
        super().__init__(message)
        self.prescription = prescription or {}
        self.subcase = subcase


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class SymbolAllocation:
    scheme: str
    K: int
    counts: dict
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for name, v in self.counts.items():
            if int(v) != v or v < 0:
                raise ValueError(f"count {name}={v} must be a nonnegative integer")
        if self.scheme == THREE_USER and self.counts["d5"] % 2:
            raise ValueError("d5 must be even so it splits into paired halves")

    def block_counts(self, i: int) -> dict[str, int]:
        """Ordered column counts of transmitter `i`'s blocks."""
        c = self.counts
        if self.scheme == TWO_USER:
            return {"1": c[f"d{i + 1}_1"], "2": c[f"d{i + 1}_2"], "3": c["df"]}
        if self.scheme == THREE_USER:
            h = c["d5"] // 2
            return {"1": c["d1"], "2": c["d2"], "3": c["d3"], "4": c["d4"],
                    "5,1": h, "5,2": h, "6": c["d6"], "7": c["d7"]}
        if self.scheme == K_USER:
            out = {"direct": c["D_d"]}
            for l in range(self.K):
                if l != i:
                    out[f"cross{l + 1}"] = c["D_c"]
            return out
        raise ValueError(f"unknown scheme {self.scheme!r}")

    def objective(self) -> Fraction:
        """Total DoF the allocation achieves over the two-slot protocol."""
        c = self.counts
        if self.scheme == TWO_USER:
            return Fraction(c["d1_1"] + c["d1_2"] + c["d2_1"] + c["d2_2"] + c["df"])
        if self.scheme == THREE_USER:
            return 3 * Fraction(c["d1"] + c["d2"] + c["d3"] + c["d4"]) + \
                Fraction(3, 2) * (c["d5"] + c["d6"] + c["d7"])
        K = self.K
        return Fraction(K * c["D_d"]) + Fraction(K * (K - 1) * c["D_c"], 2)

    def point(self) -> tuple[int, ...]:
        return tuple(self.counts.values())

    def to_dict(self) -> dict:
        return {"scheme": self.scheme, "K": self.K, "counts": dict(self.counts)}

    @classmethod
    def from_dict(cls, d: dict) -> "SymbolAllocation":
        return cls(d["scheme"], int(d["K"]), {k: int(v) for k, v in d["counts"].items()})

    @classmethod
    def zero(cls, scheme: str, K: int) -> "SymbolAllocation":
        names = {TWO_USER: ("d1_1", "d1_2", "d2_1", "d2_2", "df"),
                 THREE_USER: tuple(f"d{t}" for t in range(1, 8)),
                 K_USER: ("D_d", "D_c")}[scheme]
        return cls(scheme, K, {n: 0 for n in names})


# ---------------------------------------------------------------------------
# scheme tables: which receivers each block must null / must reach, which
# blocks each receiver decodes, and what slot two relays

def link_roles(scheme: str, K: int, i: int, label: str) -> tuple[list[int], list[int]]:
    """(receivers where the block must vanish, receivers where it must not)."""
    a, b = (i + 1) % K, (i + 2) % K
    if scheme == TWO_USER:
        j = 1 - i
        return {"1": ([j], [i]), "2": ([], [i, j]), "3": ([i], [j])}[label]
    if scheme == THREE_USER:
        return {"1": ([a], [i, b]), "2": ([b], [i, a]), "3": ([a, b], [i]),
                "4": ([], [i, a, b]), "5,1": ([i], [a, b]), "5,2": ([i], [a, b]),
                "6": ([i, a], [b]), "7": ([i, b], [a])}[label]
    if scheme == K_USER:
        if label == "direct":
            return [j for j in range(K) if j != i], [i]
        l = int(label[len("cross"):]) - 1
        return [j for j in range(K) if j != l], [l]
    raise ValueError(f"unknown scheme {scheme!r}")


def decode_blocks(scheme: str, K: int, j: int) -> list[tuple[int, str]]:
    """Blocks receiver `j` resolves individually in every slot."""
    if scheme == TWO_USER:
        o = 1 - j
        return [(j, "1"), (j, "2"), (o, "2"), (o, "3")]
    if scheme == THREE_USER:
        a, b = (j + 1) % 3, (j + 2) % 3
        return [(j, "1"), (j, "2"), (j, "3"), (j, "4"),
                (a, "5,2"), (a, "6"), (b, "5,1"), (b, "7")]
    if scheme == K_USER:
        return [(j, "direct")] + [(i, f"cross{j + 1}") for i in range(K) if i != j]
    raise ValueError(f"unknown scheme {scheme!r}")


def relay_sources(scheme: str, K: int, i: int) -> dict[str, tuple[int, str]]:
    """Slot-two relabeling: block label of tx `i` -> slot-one block whose symbols it forwards.

    Transmitter `i` learned those symbols from the fed-back ``y_i(1)``.
    """
    if scheme == TWO_USER:
        return {"3": (1 - i, "3")}
    if scheme == THREE_USER:
        a, b = (i + 1) % 3, (i + 2) % 3
        return {"5,1": (a, "5,2"), "5,2": (b, "5,1"), "6": (b, "7"), "7": (a, "6")}
    if scheme == K_USER:
        return {f"cross{l + 1}": (l, f"cross{i + 1}") for l in range(K) if l != i}
    raise ValueError(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------------------

@dataclass
class BeamformerSet:
    scheme: str
    alloc: SymbolAllocation
    blocks: list  # per transmitter: dict label -> (M_i x count) complex array
    seed: int = 0

    @property
    def K(self) -> int:
        return len(self.blocks)

    def block(self, i: int, label: str) -> np.ndarray:
        return self.blocks[i % self.K][label]

    def V(self, i: int) -> np.ndarray:
        bl = self.blocks[i % self.K]
        return np.hstack(list(bl.values()))

    def labels(self, i: int) -> list[str]:
        return list(self.blocks[i % self.K].keys())

    def to_dict(self) -> dict:
        out = {"scheme": self.scheme, "seed": int(self.seed), "allocation": self.alloc.to_dict(),
               "blocks": {}}
        for i, bl in enumerate(self.blocks):
            out["blocks"][str(i + 1)] = {
                lab: [[[float(z.real), float(z.imag)] for z in row] for row in V]
                for lab, V in bl.items()}
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, d: dict, tx_antennas=None) -> "BeamformerSet":
        alloc = SymbolAllocation.from_dict(d["allocation"])
        K = alloc.K
        blocks = []
        for i in range(K):
            raw = d["blocks"][str(i + 1)]
            bl = {}
            for lab, cnt in alloc.block_counts(i).items():
                rows = raw[lab]
                if rows:
                    V = np.array([[complex(re, im) for re, im in row] for row in rows],
                                 dtype=np.complex128).reshape(len(rows), -1)
                else:
                    V = np.zeros((tx_antennas[i] if tx_antennas else 0, 0), dtype=np.complex128)
                if V.shape[1] != cnt:
                    raise ValueError(f"block {lab} of tx {i + 1} has {V.shape[1]} columns, expected {cnt}")
                bl[lab] = V
            blocks.append(bl)
        return cls(d["scheme"], alloc, blocks, int(d.get("seed", 0)))

    @classmethod
    def from_json(cls, source, tx_antennas=None) -> "BeamformerSet":
        p = Path(source) if not str(source).lstrip().startswith("{") else None
        text = p.read_text() if p is not None else str(source)
        return cls.from_dict(json.loads(text), tx_antennas)


def _random_in_span(basis: np.ndarray, d: int, rng, what: str) -> np.ndarray:
    """`d` orthonormal columns spanning a generic subspace of span(basis)."""
    M, n = basis.shape
    if d > n:
        raise InfeasibleAllocationError(f"{what}: need {d} vectors, nullspace has dimension {n}")
    if d == 0:
        return np.zeros((M, 0), dtype=np.complex128)
    G = complex_gaussian(rng, (n, d))
    Q, _ = np.linalg.qr(basis @ G)
    return Q


def _unit_columns(X: np.ndarray) -> np.ndarray:
    if X.shape[1] == 0:
        return X
    return X / np.linalg.norm(X, axis=0, keepdims=True)


# stream namespaces for beamformer draws
_BF_STREAM = 1
_TYPE_CODE = {"1": 1, "2": 2, "3": 3, "4": 4, "5,1": 5, "5,2": 5, "6": 6, "7": 7, "direct": 8}


def _stream(seed, i, label, extra=0):
    code = _TYPE_CODE.get(label)
    if code is None:  # crossN
        code = 100 + int(label[len("cross"):])
    return substream(seed, _BF_STREAM, i, code, extra)


def check_blocks(instance: ChannelInstance, bf: BeamformerSet, tol: Tolerance = DEFAULT_TOL) -> list[str]:
    """Zero-forcing and visibility conditions of every block; returns violation messages."""
    out = []
    K = instance.K
    for i in range(K):
        for lab, V in bf.blocks[i].items():
            if V.shape[1] == 0:
                continue
            zero_at, reach = link_roles(bf.scheme, K, i, lab)
            for j in zero_at:
                r = float(np.max(np.linalg.norm(instance.H(j, i) @ V, axis=0)))
                if r > tol.residual_tol:
                    out.append(f"tx {i + 1} block {lab}: ||H[{j + 1},{i + 1}] V|| = {r:.3e} should vanish")
            for j in reach:
                if instance.config.rank(j, i) == 0:
                    continue
                r = float(np.min(np.linalg.norm(instance.H(j, i) @ V, axis=0)))
                if r <= tol.residual_tol:
                    out.append(f"tx {i + 1} block {lab}: vanishes at rx {j + 1}")
    return out


def _finalize(instance, bf, tol):
    for i in range(bf.K):
        V = bf.V(i)
        if V.shape[1] and rank_tol(V, tol) < V.shape[1]:
            raise InfeasibleAllocationError(f"stacked beamformer of tx {i + 1} is rank deficient")
    bad = check_blocks(instance, bf, tol)
    if bad:
        raise InfeasibleAllocationError("; ".join(bad))
    return bf


# ---------------------------------------------------------------------------
# two users

def alloc_two_user(config) -> SymbolAllocation:
    """Best integral allocation under the two-user conditions, by enumeration.

    Ties on total DoF prefer more relay symbols, then more zero-forced
    symbols.
    """
    config = as_network(config)
    if config.K != 2:
        raise ValueError("two-user allocation needs K = 2")
    p = TwoUserParams.from_config(config)
    # box bounds implied by the single- and two-variable rows
    b11 = min(p.M1 - p.D21, p.D11)
    b21 = min(p.M2 - p.D12, p.D22)
    bf = min(p.M1 - p.D11, p.M2 - p.D22, p.D21, p.D12)
    b12 = min(p.D11, p.D21)
    b22 = min(p.D22, p.D12)
    best, best_key = (0, 0, 0, 0, 0), None
    for df in range(bf + 1):
        for d11, d21 in itertools.product(range(b11 + 1), range(b21 + 1)):
            for d12 in range(min(b12 - 0, p.D11 - d11, p.D21 - df) + 1):
                for d22 in range(min(b22, p.D22 - d21, p.D12 - df) + 1):
                    if d12 + df + d21 + d22 > p.N2 or d22 + df + d11 + d12 > p.N1:
                        continue
                    key = (d11 + d12 + d21 + d22 + df, df, d11 + d21, d11, d21, d12)
                    if best_key is None or key > best_key:
                        best_key, best = key, (d11, d12, d21, d22, df)
    poly = two_user_constraints(p)
    if not poly.contains(best):
        raise AssertionError(f"enumerated allocation {best} violates the constraint system")
    names = ("d1_1", "d1_2", "d2_1", "d2_2", "df")
    return SymbolAllocation(TWO_USER, 2, dict(zip(names, best)))


def build_two_user(instance: ChannelInstance, alloc: SymbolAllocation, seed: int | None = None,
                   tol: Tolerance = DEFAULT_TOL) -> BeamformerSet:
    if alloc.scheme != TWO_USER or instance.K != 2:
        raise ValueError("build_two_user needs a two-user instance and allocation")
    seed = instance.seed if seed is None else seed
    blocks = []
    for i in (0, 1):
        j = 1 - i
        cnt = alloc.block_counts(i)
        V1 = _random_in_span(nullspace_basis(instance.H(j, i), tol), cnt["1"], _stream(seed, i, "1"),
                             f"type-1 vectors of tx {i + 1}")
        V2 = _random_type2(instance, i, cnt["2"], [i, j], seed, tol)
        V3 = _random_in_span(nullspace_basis(instance.H(i, i), tol), cnt["3"], _stream(seed, i, "3"),
                             f"type-3 vectors of tx {i + 1}")
        blocks.append({"1": V1, "2": V2, "3": V3})
    bf = BeamformerSet(TWO_USER, alloc, blocks, seed)
    _finalize(instance, bf, tol)
    for row in rank_conditions(instance, bf, tol):
        if not row[4]:
            raise InfeasibleAllocationError(
                f"receive matrix at rx {row[0] + 1} has rank {row[2]}, expected {row[3]}")
    return bf


def _random_type2(instance, i, d, reach, seed, tol, tries=8):
    M = instance.config.tx_antennas[i]
    for attempt in range(tries):
        V = _unit_columns(complex_gaussian(_stream(seed, i, "2", attempt), (M, d)))
        ok = all(instance.config.rank(j, i) == 0 or d == 0 or
                 np.min(np.linalg.norm(instance.H(j, i) @ V, axis=0)) > tol.residual_tol
                 for j in reach)
        if ok:
            return V
    raise InfeasibleAllocationError(f"could not draw generic type-2 vectors for tx {i + 1}")


# ---------------------------------------------------------------------------
# three users

def three_user_candidates(M: int, D_d: int, D_c: int) -> list[tuple[str, dict]]:
    """Case prescriptions applicable at (M, D_d, D_c), as exact rationals.

    Boundary points between the alignment and zero-forcing regimes resolve
    to the zero-forcing prescription.
    """
    F = Fraction
    zero = {f"d{t}": F(0) for t in range(1, 8)}

    def pres(**kw):
        out = dict(zero)
        out.update({k: F(v) for k, v in kw.items()})
        return out

    if M >= 2 * D_c + D_d:
        return [("3", pres(d3=D_d, d6=D_c, d7=D_c))]
    if M >= 2 * D_c:
        if M >= D_c + D_d:
            h = F(2 * D_c + D_d - M, 2)
            return [("2.1", pres(d1=h, d2=h, d3=M - 2 * D_c, d6=M - D_c - D_d, d7=M - D_c - D_d))]
        return [("2.2", pres(d1=F(D_c, 2), d2=F(D_c, 2), d3=M - 2 * D_c))]
    if M < D_c:
        raise PreconditionError("three-user prescriptions need D_c <= M")
    cands = []
    if 2 * D_d <= M <= D_d + D_c:
        cands.append(("1.1", pres(d1=M - D_c, d4=D_d + D_c - M, d5=F(2 * M - 4 * D_d, 3))))
    if M >= 2 * D_d and M >= D_d + D_c:
        cands.append(("1.2", pres(d1=F(D_d, 2), d2=F(D_d, 2), d5=F(4 * D_c - 2 * M, 3),
                                  d6=M - D_c - D_d, d7=M - D_c - D_d)))
    if M <= 2 * D_d:
        cands.append(("1.3", pres(d1=M - D_c, d4=F(D_c) - F(M, 2))))
    return cands


def prescription_value(counts: dict) -> Fraction:
    c = counts
    return 3 * (c["d1"] + c["d2"] + c["d3"] + c["d4"]) + Fraction(3, 2) * (c["d5"] + c["d6"] + c["d7"])


def _integral(counts: dict) -> bool:
    return all(v.denominator == 1 for v in counts.values()) and counts["d5"].numerator % 2 == 0


def three_user_prescription(M: int, D_d: int, D_c: int) -> tuple[str, dict, dict]:
    """Chosen sub-case, its rational counts, and the value of every candidate.

    The best-valued candidates are ranked integral first, then in the
    order 1.1, 1.2, 1.3.
    """
    cands = three_user_candidates(M, D_d, D_c)
    values = {name: prescription_value(c) for name, c in cands}
    top = max(values.values())
    best = [(name, c) for name, c in cands if values[name] == top]
    best.sort(key=lambda nc: (not _integral(nc[1]), nc[0]))
    name, counts = best[0]
    return name, counts, values


def regime(counts: dict) -> str:
    """Label a prescription: IA (alignment only), ZF+IA, or ZF."""
    ia = counts["d4"] > 0 or counts["d5"] > 0
    zf = any(counts[k] > 0 for k in ("d1", "d2", "d3", "d6", "d7"))
    if ia and zf:
        return "ZF+IA"
    return "IA" if ia else "ZF"


def alloc_three_user(config: SymmetricConfig) -> SymbolAllocation:
    if isinstance(config, NetworkConfig):
        config = symmetric_view(config)
        if config is None:
            raise PreconditionError("three-user scheme needs a symmetric configuration")
    if config.K != 3:
        raise PreconditionError("three-user allocation needs K = 3")
    name, counts, values = three_user_prescription(config.M, config.D_d, config.D_c)
    if not _integral(counts):
        shown = ", ".join(f"{k}={v}" for k, v in counts.items() if v)
        raise IntegralityError(
            f"case {name} prescribes non-integral or odd-d5 counts ({shown}); "
            "a symbol extension would be required", counts, name)
    poly = three_user_constraints(SymmetricParams(3, config.M, config.D_d, config.D_c))
    pt = tuple(counts[v] for v in poly.variables)
    if not poly.contains(pt):
        raise AssertionError(f"case {name} prescription violates the constraint system")
    meta = {"subcase": name, "candidates": {k: str(v) for k, v in values.items()}}
    return SymbolAllocation(THREE_USER, 3, {k: int(v) for k, v in counts.items()}, meta)


@dataclass
class AlignmentSystem:
    """Linear system pairing ``V_i^[5,1]`` with ``V_{i+1}^[5,2]``.

    ``T [v; w] = 0`` means both halves vanish at their own receivers and
    their images coincide at receiver ``i+2``.
    """

    T: np.ndarray
    nullspace: np.ndarray
    measured_rank: int


def alignment_system(instance: ChannelInstance, i: int, tol: Tolerance = DEFAULT_TOL) -> AlignmentSystem:
    M = instance.config.tx_antennas[i % 3]
    Z = np.zeros((M, M), dtype=np.complex128)
    T = np.block([[instance.H(i + 2, i), -instance.H(i + 2, i + 1)],
                  [instance.H(i, i), Z],
                  [Z, instance.H(i + 1, i + 1)]])
    return AlignmentSystem(T, nullspace_basis(T, tol), rank_tol(T, tol))


def _oblique_transfer(instance, i, V1_next, tol):
    """Linear map sending a type-4 column of tx i+2 to a partner column of tx i.

    The partner's image at rx i+1 lies in the span of the given column's
    image and the type-1 images of tx i+2 there.
    """
    Hd = instance.H(i + 1, i)
    Hc = instance.H(i + 1, i + 2)
    M = Hd.shape[0]
    R = orth_basis(Hd, tol)
    W = Hc @ V1_next
    if R.shape[1] + W.shape[1] != M:
        raise AlignmentError(
            f"type-4 alignment at rx {(i + 1) % 3 + 1} needs d1 = M - D_c "
            f"(range {R.shape[1]} + type-1 images {W.shape[1]} != {M})", transmitter=i)
    B = np.hstack([R, W])
    if rank_tol(B, tol) < M:
        raise AlignmentError("type-1 images overlap the cross-link range", transmitter=i)
    P = R @ np.linalg.solve(B, np.eye(M))[:R.shape[1], :]
    return np.linalg.pinv(Hd, rcond=tol.relative_rank_tol) @ P @ Hc


def _cyclic_alignment(instance, V1, d4, tol):
    M = instance.config.tx_antennas[0]
    if d4 == 0:
        return [np.zeros((M, 0), dtype=np.complex128)] * 3
    F = [_oblique_transfer(instance, i, V1[(i + 2) % 3], tol) for i in range(3)]
    G = F[0] @ F[2] @ F[1]
    lam, vecs = np.linalg.eig(G)
    order = np.argsort(-np.abs(lam), kind="stable")
    scale = np.abs(lam[order[0]])
    good = [k for k in order if np.abs(lam[k]) > tol.relative_rank_tol * scale]
    if scale == 0.0 or len(good) < d4:
        raise AlignmentError(f"cyclic closure yields {len(good) if scale else 0} directions, need {d4}")
    v0 = vecs[:, good[:d4]]
    v1 = F[1] @ v0
    v2 = F[2] @ v1
    return [_unit_columns(v) for v in (v0, v1, v2)]


def build_three_user(instance: ChannelInstance, alloc: SymbolAllocation, seed: int | None = None,
                     tol: Tolerance = DEFAULT_TOL) -> BeamformerSet:
    if alloc.scheme != THREE_USER or instance.K != 3:
        raise ValueError("build_three_user needs a three-user instance and allocation")
    if symmetric_view(instance.config) is None:
        raise PreconditionError("three-user scheme needs a symmetric channel")
    seed = instance.seed if seed is None else seed
    c = alloc.counts
    H = instance.H
    M = instance.config.tx_antennas[0]

    def pick(i, label, mats, d):
        return _random_in_span(joint_nullspace(mats, tol), d, _stream(seed, i, label),
                               f"type-{label} vectors of tx {i + 1}")

    V1 = [pick(i, "1", [H(i + 1, i)], c["d1"]) for i in range(3)]
    V2 = [pick(i, "2", [H(i + 2, i)], c["d2"]) for i in range(3)]
    V3 = [pick(i, "3", [H(i + 1, i), H(i + 2, i)], c["d3"]) for i in range(3)]
    V6 = [pick(i, "6", [H(i, i), H(i + 1, i)], c["d6"]) for i in range(3)]
    V7 = [pick(i, "7", [H(i, i), H(i + 2, i)], c["d7"]) for i in range(3)]
    V4 = _cyclic_alignment(instance, V1, c["d4"], tol)

    half = c["d5"] // 2
    V51 = [np.zeros((M, 0), dtype=np.complex128)] * 3
    V52 = [np.zeros((M, 0), dtype=np.complex128)] * 3
    if half:
        V51, V52 = list(V51), list(V52)
        for i in range(3):
            sysm = alignment_system(instance, i, tol)
            X = _random_in_span(sysm.nullspace, half, _stream(seed, i, "5,1"),
                                f"paired vectors of tx {i + 1}/{(i + 1) % 3 + 1}")
            V51[i] = _unit_columns(X[:M])
            V52[(i + 1) % 3] = _unit_columns(X[M:])

    blocks = [{"1": V1[i], "2": V2[i], "3": V3[i], "4": V4[i], "5,1": V51[i], "5,2": V52[i],
               "6": V6[i], "7": V7[i]} for i in range(3)]
    bf = BeamformerSet(THREE_USER, alloc, blocks, seed)

    if c["d4"]:
        for i in range(3):
            U = H(i + 1, i) @ V4[i]
            W = H(i + 1, i + 2) @ np.hstack([V1[(i + 2) % 3], V4[(i + 2) % 3]])
            if not span_contains(U, W, tol):
                raise AlignmentError(f"type-4 images of tx {i + 1} escape the aligned span",
                                     transmitter=i, residual=projection_residual(U, W, tol))
    _finalize(instance, bf, tol)
    for row in rank_conditions(instance, bf, tol):
        if not row[4]:
            raise AlignmentError(f"rx {row[0] + 1}: rank({row[1]}) = {row[2]}, expected {row[3]}",
                                 transmitter=row[0])
    return bf


# ---------------------------------------------------------------------------
# K users

def build_k_user_corollary(instance: ChannelInstance, seed: int | None = None,
                           tol: Tolerance = DEFAULT_TOL) -> tuple[BeamformerSet, SymbolAllocation]:
    sym = symmetric_view(instance.config)
    if sym is None:
        raise PreconditionError("K-user scheme needs a symmetric channel")
    K, M, Dd, Dc = sym.K, sym.M, sym.D_d, sym.D_c
    if M < Dd + (K - 1) * Dc:
        raise PreconditionError(f"K-user scheme needs M >= D_d + (K-1) D_c = {Dd + (K - 1) * Dc}, got M={M}")
    seed = instance.seed if seed is None else seed
    alloc = SymbolAllocation(K_USER, K, {"D_d": Dd, "D_c": Dc})
    H = instance.H
    blocks = []
    for i in range(K):
        others = [j for j in range(K) if j != i]
        bl = {"direct": _random_in_span(joint_nullspace([H(j, i) for j in others], tol), Dd,
                                        _stream(seed, i, "direct"), f"direct vectors of tx {i + 1}")}
        for l in others:
            mats = [H(i, i)] + [H(j, i) for j in others if j != l]
            lab = f"cross{l + 1}"
            bl[lab] = _random_in_span(joint_nullspace(mats, tol), Dc, _stream(seed, i, lab),
                                      f"vectors of tx {i + 1} toward rx {l + 1}")
        blocks.append(bl)
    bf = BeamformerSet(K_USER, alloc, blocks, seed)
    _finalize(instance, bf, tol)
    for row in rank_conditions(instance, bf, tol):
        if not row[4]:
            raise InfeasibleAllocationError(f"receive matrix at rx {row[0] + 1} is rank deficient")
    return bf, alloc


# ---------------------------------------------------------------------------
# receive-side rank identities

def rank_conditions(instance: ChannelInstance, bf: BeamformerSet,
                    tol: Tolerance = DEFAULT_TOL) -> list[tuple[int, str, int, int, bool]]:
    """Rows ``(rx, name, measured, expected, ok)`` of the scheme's rank identities."""
    K = instance.K
    H = instance.H
    c = bf.alloc.counts
    rows = []

    def add(j, name, mats, expected):
        X = np.hstack(mats) if mats else np.zeros((instance.config.rx_antennas[j], 0))
        r = rank_tol(X, tol)
        rows.append((j, name, r, int(expected), r == int(expected)))

    if bf.scheme == TWO_USER:
        for i in (0, 1):
            j = 1 - i
            mats = [H(i, i) @ bf.block(i, "1"), H(i, i) @ bf.block(i, "2"),
                    H(i, j) @ bf.block(j, "2"), H(i, j) @ bf.block(j, "3")]
            exp = c[f"d{i + 1}_1"] + c[f"d{i + 1}_2"] + c[f"d{j + 1}_2"] + c["df"]
            add(i, "receive matrix", mats, exp)
        return rows
    if bf.scheme == K_USER:
        for j in range(K):
            mats = [H(j, j) @ bf.block(j, "direct")] + \
                [H(j, i) @ bf.block(i, f"cross{j + 1}") for i in range(K) if i != j]
            add(j, "receive matrix", mats, c["D_d"] + (K - 1) * c["D_c"])
        return rows

    d = [None] + [c[f"d{t}"] for t in range(1, 8)]
    for i in range(3):
        a, b = (i + 1) % 3, (i + 2) % 3
        A1 = [H(i, i) @ bf.block(i, t) for t in ("1", "2", "3", "4")]
        A2 = [H(i, a) @ bf.block(a, t) for t in ("1", "4", "5,1", "5,2", "6")]
        A3 = [H(i, b) @ bf.block(b, t) for t in ("2", "4", "5,1", "5,2", "7")]
        add(i, "A1", A1, d[1] + d[2] + d[3] + d[4])
        add(i, "A2", A2, d[1] + d[4] + d[5] + d[6])
        add(i, "A3", A3, d[2] + d[4] + d[5] + d[7])
        add(i, "[A2 A3]", A2 + A3, d[1] + d[2] + d[4] + Fraction(3, 2) * d[5] + d[6] + d[7])
        add(i, "[A1 A2 A3]", A1 + A2 + A3,
            2 * d[1] + 2 * d[2] + d[3] + 2 * d[4] + Fraction(3, 2) * d[5] + d[6] + d[7])
    return rows
