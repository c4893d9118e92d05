"""Closed-form total-DoF expressions, evaluated over exact rationals."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class DomainError(ValueError):
    """Parameters fall outside the region where an expression is stated."""


@dataclass(frozen=True)
class TwoUserParams:
    M1: int
    M2: int
    N1: int
    N2: int
    D11: int
    D12: int
    D21: int
    D22: int

    def __post_init__(self):
        if min(self.M1, self.M2, self.N1, self.N2) < 1:
            raise DomainError("antenna counts must be positive")
        for name, d, cap in (("D11", self.D11, min(self.M1, self.N1)),
                             ("D12", self.D12, min(self.M2, self.N1)),
                             ("D21", self.D21, min(self.M1, self.N2)),
                             ("D22", self.D22, min(self.M2, self.N2))):
            if not 0 <= d <= cap:
                raise DomainError(f"{name}={d} outside [0, {cap}]")

    @classmethod
    def symmetric(cls, M: int, D: int) -> "TwoUserParams":
        return cls(M, M, M, M, D, D, D, D)

    @classmethod
    def from_config(cls, config) -> "TwoUserParams":
        (M1, M2), (N1, N2) = config.tx_antennas, config.rx_antennas
        (D11, D12), (D21, D22) = config.rank_map
        return cls(M1, M2, N1, N2, D11, D12, D21, D22)

    def astuple(self) -> tuple:
        return (self.M1, self.M2, self.N1, self.N2, self.D11, self.D12, self.D21, self.D22)


@dataclass(frozen=True)
class SymmetricParams:
    K: int
    M: int
    D_d: int
    D_c: int

    def __post_init__(self):
        if self.K < 2:
            raise DomainError(f"K must be at least 2, got {self.K}")
        if self.M < 1:
            raise DomainError("M must be positive")
        if not 0 <= self.D_d <= self.M:
            raise DomainError(f"D_d={self.D_d} outside [0, M={self.M}]")
        if not 0 <= self.D_c <= self.M:
            raise DomainError(f"D_c={self.D_c} outside [0, M={self.M}]")


def thm1_feedback(p: TwoUserParams) -> Fraction:
    """Two-user total DoF with feedback (six-term minimum)."""
    return Fraction(min(
        p.M1 + p.N2 - p.D21,
        p.M2 + p.N1 - p.D12,
        p.D11 + p.D22 + p.D12,
        p.D11 + p.D22 + p.D21,
        min(p.M1, p.N1) + p.D22,
        min(p.M2, p.N2) + p.D11,
    ))


def thm1_converse_terms(p: TwoUserParams) -> tuple[Fraction, Fraction]:
    """The two genie-aided bounds whose minimum is `thm1_feedback`."""
    b13 = min(p.N2, p.D22 + p.D21) + min(p.M1 - p.D21, p.D11)
    b14 = min(p.N1, p.D11 + p.D12) + min(p.M2 - p.D12, p.D22)
    return Fraction(b13), Fraction(b14)


def remark2_nofeedback(p: TwoUserParams) -> Fraction:
    """Non-feedback two-user DoF, stated only for full-rank direct links."""
    if p.D11 != min(p.M1, p.N1) or p.D22 != min(p.M2, p.N2):
        raise DomainError("non-feedback expression requires full-rank direct links "
                          "(D11 = min(M1,N1) and D22 = min(M2,N2))")
    return _nofeedback_terms(p)


def _nofeedback_terms(p: TwoUserParams) -> Fraction:
    return Fraction(min(p.M1 + p.N2 - p.D21, p.N1 + p.M2 - p.D12, p.D11 + p.D22))


def nofeedback_symmetric_two_user(M: int, D: int) -> Fraction:
    """Non-feedback DoF at the symmetric point: min{2M - D, 2D}.

    This is the three-term non-feedback minimum at ``M_i = N_j = M`` and
    all ranks ``D``; no full-rank direct-link gate is applied.
    """
    if not 0 <= D <= M:
        raise DomainError(f"need 0 <= D <= M, got D={D}, M={M}")
    return _nofeedback_terms(TwoUserParams.symmetric(M, D))


def _thm2_branches(M: int, D_d: int, D_c: int) -> list[Fraction]:
    vals = []
    if D_c <= M <= 2 * D_c:
        vals.append(max(min(Fraction(3 * M, 2), Fraction(M + D_d)), Fraction(2 * M - D_c)))
    if 2 * D_c <= M <= 2 * D_c + D_d:
        vals.append(Fraction(3 * M - 3 * D_c))
    if 2 * D_c + D_d <= M:
        vals.append(Fraction(3 * D_d + 3 * D_c))
    return vals


def thm2_lower(p: SymmetricParams) -> Fraction:
    """Achievable three-user total DoF with feedback (piecewise in M)."""
    if p.K != 3:
        raise DomainError(f"three-user expression evaluated at K={p.K}")
    if p.D_c > p.M:
        raise DomainError("requires D_c <= M")
    vals = _thm2_branches(p.M, p.D_d, p.D_c)
    if not vals:
        raise DomainError(f"no branch covers M={p.M}, D_d={p.D_d}, D_c={p.D_c}")
    if len(set(vals)) != 1:
        raise AssertionError(f"branches disagree at a shared boundary: {vals}")
    return vals[0]


def remark_nofeedback_three_user(M: int, D_c: int) -> Fraction:
    """Non-feedback three-user value with full-rank direct links."""
    if D_c <= M <= 2 * D_c:
        return Fraction(3 * M, 2)
    if 2 * D_c <= M:
        return Fraction(3 * M - 3 * D_c)
    raise DomainError("requires D_c <= M")


def thm3_upper(p: SymmetricParams) -> Fraction:
    """K-user upper bound K*D_d + D_c*K*(K-1)/2."""
    return Fraction(p.K * p.D_d) + Fraction(p.D_c * p.K * (p.K - 1), 2)


def corollary1_threshold(p: SymmetricParams) -> int:
    return p.D_d + (p.K - 1) * p.D_c


def corollary1_dof(p: SymmetricParams) -> Fraction:
    """Exact K-user DoF once M reaches D_d + (K-1) D_c."""
    if p.M < corollary1_threshold(p):
        raise DomainError(f"needs M >= D_d + (K-1) D_c = {corollary1_threshold(p)}, got M={p.M}")
    return thm3_upper(p)


def feedback_gain_ratio(p: SymmetricParams) -> Fraction:
    """Ratio of the feedback DoF to the interference-free baseline K*D at D_d = D_c."""
    if p.D_d != p.D_c or p.D_d == 0:
        raise DomainError("ratio is stated for D_d = D_c = D > 0")
    return corollary1_dof(p) / (p.K * p.D_d)
