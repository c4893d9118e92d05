"""Figure-data sweeps and grid verification, with CSV and SVG output."""
from __future__ import annotations

import csv
import io
import itertools
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

from .beamformer import (IntegralityError, alloc_three_user, alloc_two_user, build_three_user,
                         build_two_user, regime, three_user_prescription)
from .channel import DegenerateDrawError, NetworkConfig, SymmetricConfig, generate
from .dof_formulas import (SymmetricParams, TwoUserParams, nofeedback_symmetric_two_user,
                           thm1_feedback, thm2_lower, thm3_upper)
from .numkernel import DEFAULT_TOL, Tolerance, format_rational
from .polytope import maximize, three_user_constraints, two_user_constraints
from .simulator import DecodeError, dof_from_trace, run_two_slot, verify_rank_conditions


def _cell(v) -> str:
    if isinstance(v, Fraction):
        return format_rational(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


@dataclass
class Table:
    header: tuple
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (point, reason, detail)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()

    def column(self, name: str) -> list:
        k = self.header.index(name)
        return [r[k] for r in self.rows]


def sweep_fig2(D: int, M_range) -> Table:
    """Symmetric two-user DoF with and without feedback as M varies."""
    if D % 2:
        warnings.warn(f"D={D} is odd; the figure assumes even D but the formulas still apply")
    t = Table(("M", "dof_feedback", "dof_nofeedback", "gain"))
    for M in sorted(M_range):
        if M < D:
            t.skipped.append((M, "invariant", f"M={M} < D={D}"))
            continue
        fb = thm1_feedback(TwoUserParams.symmetric(M, D))
        nofb = nofeedback_symmetric_two_user(M, D)
        t.rows.append((M, fb, nofb, fb - nofb))
    return t


def sweep_fig4(D_d: int, M_range) -> Table:
    """Three-user achievable DoF and K-user bound with D_c = 2 D_d."""
    D_c = 2 * D_d
    t = Table(("M", "thm2_lower", "thm3_upper", "regime"))
    for M in sorted(M_range):
        if M < D_c:
            t.skipped.append((M, "invariant", f"M={M} < D_c={D_c}"))
            continue
        p = SymmetricParams(3, M, D_d, D_c)
        _, counts, _ = three_user_prescription(M, D_d, D_c)
        t.rows.append((M, thm2_lower(p), thm3_upper(p), regime(counts)))
    return t


# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class CheckRow:
    point: tuple
    check: str
    ok: bool
    detail: str = ""
    seed: int | None = None


@dataclass
class VerificationReport:
    kind: str
    rows: list = field(default_factory=list)
    skipped: list = field(default_factory=list)  # (point, reason, detail)

    @property
    def failures(self) -> list:
        return [r for r in self.rows if not r.ok]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("point", "check", "ok", "detail", "seed"))
        for r in self.rows:
            w.writerow((" ".join(map(str, r.point)), r.check, _cell(r.ok), r.detail,
                        "" if r.seed is None else r.seed))
        for pt, reason, detail in self.skipped:
            w.writerow((" ".join(map(str, pt)), "skipped", "", f"{reason}: {detail}", ""))
        return buf.getvalue()

    def summary(self) -> str:
        return (f"{self.kind}: {len(self.rows)} checks, {len(self.failures)} failures, "
                f"{len(self.skipped)} skipped")


def instance_seed(seed_base: int, index: int, replicate: int) -> int:
    """Seed of replicate `replicate` at grid point `index`: (seed_base XOR index) * 2**16 + replicate."""
    return ((seed_base ^ index) << 16) + replicate


def two_user_points(max_antennas: int):
    R = range(1, max_antennas + 1)
    for M1, M2, N1, N2 in itertools.product(R, R, R, R):
        for D11 in range(min(M1, N1) + 1):
            for D12 in range(min(M2, N1) + 1):
                for D21 in range(min(M1, N2) + 1):
                    for D22 in range(min(M2, N2) + 1):
                        yield (M1, M2, N1, N2, D11, D12, D21, D22)


def three_user_points(max_antennas: int):
    for M in range(1, max_antennas + 1):
        for D_d in range(M + 1):
            for D_c in range(M + 1):
                yield (M, D_d, D_c)


def _simulate(point, cfg, alloc, build, expected, seeds, seed_base, index, tol, rows):
    for r in range(seeds):
        s = instance_seed(seed_base, index, r)
        try:
            inst = generate(cfg, s, tol)
            bf = build(inst, alloc, tol=tol)
            trace = run_two_slot(inst, bf, alloc, tol=tol)
            rep = verify_rank_conditions(inst, bf, alloc, tol)
        except (DegenerateDrawError, DecodeError, ArithmeticError, RuntimeError, ValueError) as e:
            rows.append(CheckRow(point, "simulate", False, f"{type(e).__name__}: {e}", s))
            continue
        got = dof_from_trace(trace)
        rows.append(CheckRow(point, "simulate", got == expected,
                             f"dof {format_rational(got)} vs {format_rational(expected)}", s))
        bad = rep.failures()
        rows.append(CheckRow(point, "rank conditions", not bad,
                             "; ".join(f"rx{f[0] + 1} {f[1]}: {f[2]} != {f[3]}" for f in bad), s))


def _check_two_user(args):
    index, point, seeds, seed_base, tol = args
    p = TwoUserParams(*point)
    rows = []
    target = thm1_feedback(p)
    lp, _ = maximize(two_user_constraints(p))
    rows.append(CheckRow(point, "lp = formula", lp == target,
                         f"{format_rational(lp)} vs {format_rational(target)}"))
    if seeds:
        cfg = NetworkConfig.two_user(*point)
        alloc = alloc_two_user(cfg)
        rows.append(CheckRow(point, "allocation = formula", alloc.objective() == target,
                             f"{format_rational(alloc.objective())} vs {format_rational(target)}"))
        _simulate(point, cfg, alloc, build_two_user, target, seeds, seed_base, index, tol, rows)
    return rows, []


def _check_three_user(args):
    index, point, seeds, seed_base, tol = args
    M, D_d, D_c = point
    p = SymmetricParams(3, M, D_d, D_c)
    rows, skipped = [], []
    target = thm2_lower(p)
    lp, _ = maximize(three_user_constraints(p))
    rows.append(CheckRow(point, "3 x lp = formula", 3 * lp == target,
                         f"{format_rational(3 * lp)} vs {format_rational(target)}"))
    name, counts, _ = three_user_prescription(M, D_d, D_c)
    val = 3 * sum(counts[f"d{t}"] for t in range(1, 5)) + Fraction(3, 2) * sum(
        counts[f"d{t}"] for t in range(5, 8))
    rows.append(CheckRow(point, "prescription = formula", val == target,
                         f"case {name}: {format_rational(val)} vs {format_rational(target)}"))
    if seeds:
        cfg = SymmetricConfig(3, M, D_d, D_c)
        try:
            alloc = alloc_three_user(cfg)
        except IntegralityError as e:
            shown = ",".join(f"{k}={format_rational(v)}" for k, v in e.prescription.items() if v)
            skipped.append((point, "integrality", f"case {e.subcase} needs {shown}"))
            return rows, skipped
        _simulate(point, cfg, alloc, build_three_user, target, seeds, seed_base, index, tol, rows)
    return rows, skipped


def verify_grid(kind: str, max_antennas: int, seeds: int, seed_base: int = 0, workers: int = 1,
                tol: Tolerance = DEFAULT_TOL) -> VerificationReport:
    """Check formulas, LP optima and (for `seeds` > 0) full simulations over a grid.

    Parameters
    ----------
    kind : {"two_user", "three_user"}
    max_antennas : int
        Largest antenna count on the grid, at most 8.
    seeds : int
        Random instances simulated per integral point; 0 checks formulas only.
    workers : int
        Process-pool size; results do not depend on it.
    """
    if max_antennas > 8 or max_antennas < 1:
        raise ValueError("max_antennas must lie in [1, 8]")
    if seeds < 0:
        raise ValueError("seeds must be nonnegative")
    if kind == "two_user":
        points, fn = two_user_points(max_antennas), _check_two_user
    elif kind == "three_user":
        points, fn = three_user_points(max_antennas), _check_three_user
    else:
        raise ValueError(f"unknown grid kind {kind!r}")
    jobs = [(k, pt, seeds, seed_base, tol) for k, pt in enumerate(points)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(fn, jobs, chunksize=64))
    else:
        results = [fn(j) for j in jobs]
    report = VerificationReport(kind)
    for rows, skipped in results:
        report.rows.extend(rows)
        report.skipped.extend(skipped)
    report.rows.sort()
    report.skipped.sort()
    return report


# ---------------------------------------------------------------------------

def svg_lines(xs, series: dict, title: str = "", width: int = 480, height: int = 320) -> str:
    """Minimal SVG line chart; `series` maps a legend label to y values."""
    pad = 40
    ys = [float(v) for vals in series.values() for v in vals]
    if not xs or not ys:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"></svg>\n'
    x0, x1 = min(xs), max(xs)
    y0, y1 = 0.0, max(ys) * 1.1 or 1.0

    def px(x):
        return pad + (width - 2 * pad) * ((x - x0) / (x1 - x0) if x1 > x0 else 0.5)

    def py(y):
        return height - pad - (height - 2 * pad) * (float(y) - y0) / (y1 - y0)

    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>']
    for x in xs:
        out.append(f'<text x="{px(x):.1f}" y="{height - pad + 16}" text-anchor="middle" font-size="11">{x}</text>')
    for k, (label, vals) in enumerate(series.items()):
        c = colors[k % len(colors)]
        pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(xs, vals))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="2" points="{pts}"/>')
        out.append(f'<text x="{width - pad}" y="{pad + 14 * k}" text-anchor="end" font-size="11" fill="{c}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
