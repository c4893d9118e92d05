"""Exact rational linear-inequality systems.

A `Polyhedron` is ``{x : A x <= b}`` over named variables, together with a
linear objective. `maximize` is a two-phase tableau simplex with Bland's
rule; `fm_eliminate` is a plain Fourier-Motzkin projection step. No
floating point appears anywhere in this module.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Sequence

from .dof_formulas import SymmetricParams, TwoUserParams

try:
    from gmpy2 import mpq as _q
except ImportError:  # pragma: no cover
    _q = Fraction


class UnboundedError(ArithmeticError):
    """The objective is unbounded above on the polyhedron."""


class InfeasibleError(ArithmeticError):
    """The polyhedron is empty."""


_SMALL = {k: Fraction(k) for k in range(-64, 65)}


def _frac(x) -> Fraction:
    if type(x) is Fraction:
        return x
    if type(x) is int:
        return _SMALL.get(x) or Fraction(x)
    num, den = getattr(x, "numerator", None), getattr(x, "denominator", None)
    if num is not None and den is not None:
        return Fraction(int(num), int(den))
    return Fraction(x)


@dataclass
class Polyhedron:
    variables: tuple[str, ...]
    rows: list[tuple[tuple[Fraction, ...], Fraction]] = field(default_factory=list)
    objective: tuple[Fraction, ...] | None = None
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.variables = tuple(self.variables)
        n = len(self.variables)
        if len(set(self.variables)) != n:
            raise ValueError("duplicate variable names")
        if self.objective is None:
            self.objective = (Fraction(0),) * n
        self.objective = tuple(_frac(c) for c in self.objective)
        if len(self.objective) != n:
            raise ValueError("objective length does not match variable count")
        rows, self.rows = self.rows, []
        labels, self.labels = list(self.labels), []
        for k, (coeffs, bound) in enumerate(rows):
            self.add_row(coeffs, bound, labels[k] if k < len(labels) else "")

    @property
    def nvars(self) -> int:
        return len(self.variables)

    def index(self, name: str) -> int:
        return self.variables.index(name)

    def add_row(self, coeffs, bound, label: str = "") -> None:
        if isinstance(coeffs, dict):
            vec = [Fraction(0)] * self.nvars
            for name, c in coeffs.items():
                vec[self.index(name)] += _frac(c)
            coeffs = vec
        coeffs = tuple(_frac(c) for c in coeffs)
        if len(coeffs) != self.nvars:
            raise ValueError("row length does not match variable count")
        self.rows.append((coeffs, _frac(bound)))
        self.labels.append(label)

    def add_nonnegativity(self) -> None:
        for k, name in enumerate(self.variables):
            row = [Fraction(0)] * self.nvars
            row[k] = Fraction(-1)
            self.add_row(row, 0, f"{name} >= 0")

    def objective_value(self, point: Sequence) -> Fraction:
        return sum((c * _frac(x) for c, x in zip(self.objective, point)), Fraction(0))

    def violations(self, point: Sequence) -> list[int]:
        """Indices of rows violated by `point` (exact)."""
        x = [_frac(v) for v in point]
        return [k for k, (a, b) in enumerate(self.rows)
                if sum((ai * xi for ai, xi in zip(a, x)), Fraction(0)) > b]

    def contains(self, point: Sequence) -> bool:
        return not self.violations(point)

    def copy(self) -> "Polyhedron":
        return Polyhedron(self.variables, list(self.rows), self.objective, list(self.labels))

    def dump(self) -> str:
        """One line per item, exact fractions. Inverse of `Polyhedron.parse`."""
        lines = ["variables: " + ", ".join(self.variables),
                 "maximize: " + _render(self.objective, self.variables)]
        for (a, b) in self.rows:
            lines.append(f"{_render(a, self.variables)} <= {_fmt(b)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text: str) -> "Polyhedron":
        variables = None
        objective = None
        rows = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("variables:"):
                variables = tuple(v.strip() for v in line[len("variables:"):].split(",") if v.strip())
            elif line.startswith("maximize:"):
                objective = line[len("maximize:"):]
            else:
                if variables is None:
                    raise ValueError("'variables:' line must come first")
                lhs, sep, rhs = line.partition("<=")
                if not sep:
                    raise ValueError(f"cannot parse row: {raw!r}")
                rows.append((_parse_linear(lhs, variables), Fraction(rhs.strip())))
        if variables is None:
            raise ValueError("missing 'variables:' line")
        obj = _parse_linear(objective, variables) if objective is not None else None
        return cls(variables, rows, obj)


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _render(coeffs, variables) -> str:
    parts = []
    for c, name in zip(coeffs, variables):
        if c == 0:
            continue
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        term = name if mag == 1 else f"{_fmt(mag)} {name}"
        parts.append((sign, term))
    if not parts:
        return "0"
    out = ("- " if parts[0][0] == "-" else "") + parts[0][1]
    for sign, term in parts[1:]:
        out += f" {sign} {term}"
    return out


_TERM = re.compile(r"([+-])?\s*(\d+(?:/\d+)?)?\s*\*?\s*([A-Za-z_][A-Za-z0-9_]*)?")


def _parse_linear(expr: str, variables) -> tuple[Fraction, ...]:
    vec = [Fraction(0)] * len(variables)
    s = expr.strip()
    if s == "0":
        return tuple(vec)
    pos = 0
    while pos < len(s):
        if s[pos].isspace():
            pos += 1
            continue
        m = _TERM.match(s, pos)
        if not m or m.end() == pos or m.group(3) is None:
            raise ValueError(f"cannot parse linear expression {expr!r}")
        sign = -1 if m.group(1) == "-" else 1
        coef = Fraction(m.group(2)) if m.group(2) else Fraction(1)
        vec[variables.index(m.group(3))] += sign * coef
        pos = m.end()
    return tuple(vec)


# ---------------------------------------------------------------------------
# constraint systems

TWO_USER_VARS = ("d1_1", "d1_2", "d2_1", "d2_2", "df")
THREE_USER_VARS = ("d1", "d2", "d3", "d4", "d5", "d6", "d7")


def two_user_constraints(p: TwoUserParams) -> Polyhedron:
    """Symbol-count conditions of the two-user feedback scheme.

    ``d{i}_{t}`` counts type-t vectors of transmitter i; ``df`` is the
    shared type-3 (relay) count.
    """
    poly = Polyhedron(TWO_USER_VARS, objective=(1, 1, 1, 1, 1))
    row = poly.add_row
    row({"d1_1": 1}, p.M1 - p.D21, "tx1 zero-forcing to rx2")
    row({"d2_1": 1}, p.M2 - p.D12, "tx2 zero-forcing to rx1")
    row({"df": 1}, p.M1 - p.D11, "relay vectors in null(H11)")
    row({"df": 1}, p.M2 - p.D22, "relay vectors in null(H22)")
    row({"d1_1": 1, "d1_2": 1}, p.D11, "rank of H11")
    row({"d2_1": 1, "d2_2": 1}, p.D22, "rank of H22")
    row({"d1_2": 1, "df": 1}, p.D21, "rank of H21")
    row({"d2_2": 1, "df": 1}, p.D12, "rank of H12")
    row({"d1_2": 1, "df": 1, "d2_1": 1, "d2_2": 1}, p.N2, "antennas at rx2")
    row({"d2_2": 1, "df": 1, "d1_1": 1, "d1_2": 1}, p.N1, "antennas at rx1")
    poly.add_nonnegativity()
    return poly


def d5_cap(M: int, D_d: int, D_c: int) -> int:
    """Bound on the paired-alignment count: 2M - 4D_d inside 2D_d <= M <= 2D_c, else 0."""
    return 2 * M - 4 * D_d if 2 * D_d <= M <= 2 * D_c else 0


def three_user_constraints(p: SymmetricParams) -> Polyhedron:
    """Per-user symbol-count conditions of the three-user feedback scheme.

    The objective is the per-user DoF; the total is three times it.
    """
    if p.K != 3:
        raise ValueError(f"three-user system requested with K={p.K}")
    M, Dd, Dc = p.M, p.D_d, p.D_c
    half = Fraction(1, 2)
    poly = Polyhedron(THREE_USER_VARS, objective=(1, 1, 1, 1, half, half, half))
    row = poly.add_row
    row({"d1": 1}, M - Dc, "type 1: null of next cross link")
    row({"d2": 1}, M - Dc, "type 2: null of previous cross link")
    row({"d3": 1}, max(M - 2 * Dc, 0), "type 3: null of both cross links")
    row({"d5": 1}, d5_cap(M, Dd, Dc), "type 5: paired alignment")
    row({"d6": 1}, max(M - Dc - Dd, 0), "type 6: null of direct + next cross")
    row({"d7": 1}, max(M - Dc - Dd, 0), "type 7: null of direct + previous cross")
    row({"d1": 1, "d2": 1, "d3": 1, "d4": 1}, Dd, "rank of direct link")
    row({"d1": 1, "d4": 1, "d5": 1, "d6": 1}, Dc, "rank of cross link from i+1")
    row({"d2": 1, "d4": 1, "d5": 1, "d7": 1}, Dc, "rank of cross link from i+2")
    row({"d1": 2, "d2": 2, "d3": 1, "d4": 2, "d5": Fraction(3, 2), "d6": 1, "d7": 1}, M, "receive dimensions")
    row({v: 1 for v in THREE_USER_VARS}, M, "transmit dimensions")
    poly.add_nonnegativity()
    return poly


# ---------------------------------------------------------------------------
# simplex

def _is_nonneg_row(a, b) -> int | None:
    if b != 0:
        return None
    nz = [k for k, c in enumerate(a) if c != 0]
    if len(nz) == 1 and a[nz[0]] < 0:
        return nz[0]
    return None


def maximize(poly: Polyhedron) -> tuple[Fraction, tuple[Fraction, ...]]:
    """Exact maximum of the objective and a witness point achieving it."""
    n = poly.nvars
    nonneg = set()
    general = []
    for a, b in poly.rows:
        k = _is_nonneg_row(a, b)
        if k is not None:
            nonneg.add(k)
        else:
            general.append((a, b))
    # columns: nonnegative originals, then split parts of free variables
    colmap = []  # (original index, sign)
    for k in range(n):
        colmap.append((k, 1))
        if k not in nonneg:
            colmap.append((k, -1))
    nc = len(colmap)
    m = len(general)
    A = [[_q(a[k]) if sgn > 0 else -_q(a[k]) for k, sgn in colmap] for a, _ in general]
    b = [_q(bb) for _, bb in general]
    c = [_q(poly.objective[k]) if sgn > 0 else -_q(poly.objective[k]) for k, sgn in colmap]

    # slack s_r for each row; rows with b < 0 are negated and get an artificial
    zero, one = _q(0), _q(1)
    neg_rows = [r for r in range(m) if b[r] < 0]
    na = len(neg_rows)
    width = nc + m + na
    T = []
    basis = []
    art_of = {r: nc + m + t for t, r in enumerate(neg_rows)}
    for r in range(m):
        row = A[r] + [zero] * (m + na) + [b[r]]
        row[nc + r] = one
        if r in art_of:
            row = [-v for v in row]
            row[art_of[r]] = one
            basis.append(art_of[r])
        else:
            basis.append(nc + r)
        T.append(row)

    if na:
        # phase one: maximise minus the sum of artificials
        z = [zero] * (width + 1)
        for r in neg_rows:
            z = [zi + ti for zi, ti in zip(z, T[r])]
        for col in art_of.values():
            z[col] = zero
        _run_simplex(T, basis, z, width, allowed=width)
        if z[width] != 0:
            raise InfeasibleError("constraint system is empty")
        # drive any artificial still basic (at zero level) out of the basis
        for r, bv in enumerate(basis):
            if bv >= nc + m:
                piv = next((j for j in range(nc + m) if T[r][j] != 0), None)
                if piv is not None:
                    _pivot(T, basis, None, r, piv)
        width_ph2 = nc + m
    else:
        width_ph2 = width

    # phase two objective row in reduced form: z_j = c_j - c_B B^-1 a_j
    z = c + [zero] * (m + na) + [zero]
    for r, bv in enumerate(basis):
        cb = z[bv]
        if cb != 0:
            Tr = T[r]
            z = [zi - cb * ti for zi, ti in zip(z, Tr)]
    _run_simplex(T, basis, z, width, allowed=width_ph2)

    x_cols = [zero] * width
    for r, bv in enumerate(basis):
        x_cols[bv] = T[r][width]
    xq = [zero] * n
    for col, (k, sgn) in enumerate(colmap):
        if x_cols[col] != 0:
            xq[k] = xq[k] + x_cols[col] if sgn > 0 else xq[k] - x_cols[col]
    value = -z[width]
    return _frac(value), tuple(_frac(v) for v in xq)


def _pivot(T, basis, z, r, col):
    Tr = T[r]
    p = Tr[col]
    if p != 1:
        Tr[:] = [v / p for v in Tr]
    nz = [j for j, v in enumerate(Tr) if v != 0]
    for k, Tk in enumerate(T):
        if k != r:
            f = Tk[col]
            if f != 0:
                for j in nz:
                    Tk[j] -= f * Tr[j]
    if z is not None:
        f = z[col]
        if f != 0:
            for j in nz:
                z[j] -= f * Tr[j]
    basis[r] = col


def _run_simplex(T, basis, z, width, allowed):
    """Bland's rule on reduced costs `z` (maximisation); z[width] tracks -objective."""
    while True:
        col = next((j for j in range(allowed) if z[j] > 0), None)
        if col is None:
            return
        best = None
        for r, Tr in enumerate(T):
            a = Tr[col]
            if a > 0:
                ratio = Tr[width] / a
                if best is None or ratio < best[0] or (ratio == best[0] and basis[r] < basis[best[1]]):
                    best = (ratio, r)
        if best is None:
            raise UnboundedError("objective is unbounded above")
        _pivot(T, basis, z, best[1], col)


# ---------------------------------------------------------------------------
# Fourier-Motzkin

def _normalize(a: tuple, b: Fraction) -> tuple[tuple, Fraction]:
    """Scale a row by a positive factor to coprime integers."""
    dens = [q.denominator for q in a if q != 0] + [b.denominator]
    L = lcm(*dens)
    ints = [int(q * L) for q in a] + [int(b * L)]
    g = 0
    for v in ints:
        g = gcd(g, v)
    if g > 1:
        ints = [v // g for v in ints]
    return tuple(Fraction(v) for v in ints[:-1]), Fraction(ints[-1])


def fm_eliminate(poly: Polyhedron, var: str) -> Polyhedron:
    """Project `var` out of the system (exact Fourier-Motzkin step)."""
    k = poly.index(var)
    keep = [j for j in range(poly.nvars) if j != k]
    pos, neg, out = [], [], []
    for a, b in poly.rows:
        if a[k] > 0:
            pos.append((a, b))
        elif a[k] < 0:
            neg.append((a, b))
        else:
            out.append((a, b))
    for ap, bp in pos:
        for an, bn in neg:
            lp, ln = -an[k], ap[k]
            a = tuple(lp * ap[j] + ln * an[j] for j in range(poly.nvars))
            out.append((a, lp * bp + ln * bn))
    seen = set()
    rows = []
    for a, b in out:
        a2 = tuple(a[j] for j in keep)
        if all(c == 0 for c in a2) and b >= 0:
            continue
        if any(c != 0 for c in a2):
            a2, b = _normalize(a2, b)
        key = (a2, b)
        if key not in seen:
            seen.add(key)
            rows.append(key)
    variables = tuple(poly.variables[j] for j in keep)
    objective = tuple(poly.objective[j] for j in keep)
    return Polyhedron(variables, rows, objective)


def objective_bound_fm(poly: Polyhedron, order: Iterable[str] | None = None,
                       bound_var: str = "t") -> Fraction:
    """Maximum objective value via Fourier-Motzkin.

    Adds ``t <= objective``, eliminates every original variable (in `order`
    when given) and reads the tightest upper bound on ``t``.
    """
    if bound_var in poly.variables:
        raise ValueError(f"bound variable name {bound_var!r} already in use")
    variables = poly.variables + (bound_var,)
    rows = [(a + (Fraction(0),), b) for a, b in poly.rows]
    rows.append((tuple(-c for c in poly.objective) + (Fraction(1),), Fraction(0)))
    ext = Polyhedron(variables, rows, (Fraction(0),) * poly.nvars + (Fraction(1),))
    order = list(poly.variables) if order is None else list(order)
    if sorted(order) != sorted(poly.variables):
        raise ValueError("elimination order must list every variable exactly once")
    for v in order:
        ext = fm_eliminate(ext, v)
    upper, lower = None, None
    for (a,), b in ext.rows:
        if a == 0:
            if b < 0:
                raise InfeasibleError("constraint system is empty")
        elif a > 0:
            upper = b / a if upper is None else min(upper, b / a)
        else:
            lo = b / a
            lower = lo if lower is None else max(lower, lo)
    if upper is None:
        raise UnboundedError("objective is unbounded above")
    if lower is not None and lower > upper:
        raise InfeasibleError("constraint system is empty")
    return upper
