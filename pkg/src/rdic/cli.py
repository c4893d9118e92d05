"""Command-line front end.

Examples
--------
    rdic channel gen --K 3 --M 5 --Dd 1 --Dc 5 --seed 42 --out ch.json
    rdic run three-user --M 5 --Dd 1 --Dc 5 --seeds 20
    rdic sweep fig2 --D 2 --M 2:8 --out fig2.csv --svg fig2.svg
    rdic verify grid --kind two_user --max-antennas 4 --seeds 5
    rdic lp solve two-user --antennas 2 2 2 2 --ranks 1 1 1 1
    rdic fm project two-user --antennas 2 2 2 2 --ranks 1 1 1 1 --eliminate d1_1 df

Exit status is 0 iff no verification failed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import beamformer as bfm
from .channel import ChannelInstance, NetworkConfig, SymmetricConfig, generate
from .dof_formulas import SymmetricParams, TwoUserParams
from .numkernel import Tolerance, format_rational
from .polytope import (Polyhedron, fm_eliminate, maximize, objective_bound_fm,
                       three_user_constraints, two_user_constraints)
from .simulator import dof_report, estimate_dof_slope, run_two_slot, verify_rank_conditions
from .sweeps import svg_lines, sweep_fig2, sweep_fig4, verify_grid


def _range(text: str) -> range:
    """Parse "a:b" (inclusive) or a single integer."""
    if ":" in text:
        a, b = text.split(":")
        return range(int(a), int(b) + 1)
    return range(int(text), int(text) + 1)


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _tol(args) -> Tolerance:
    return Tolerance(args.tol_rank, args.tol_residual)


def _config(args):
    if getattr(args, "antennas", None):
        return NetworkConfig.two_user(*args.antennas, *args.ranks)
    if args.M is None:
        raise SystemExit("give --M/--Dd/--Dc, --antennas/--ranks, or --channel")
    K = args.K if args.K is not None else 2
    return SymmetricConfig(K, args.M, args.Dd, args.Dc).network()


def _add_params(p, with_K=True):
    if with_K:
        p.add_argument("--K", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--Dd", type=int, default=0)
    p.add_argument("--Dc", type=int, default=0)
    p.add_argument("--antennas", type=int, nargs=4, metavar=("M1", "M2", "N1", "N2"))
    p.add_argument("--ranks", type=int, nargs=4, metavar=("D11", "D12", "D21", "D22"))


def cmd_channel_gen(args) -> int:
    inst = generate(_config(args), args.seed, _tol(args))
    _emit(args, inst.to_json())
    return 0


def cmd_run(args) -> int:
    tol = _tol(args)
    scheme = args.scheme
    results, failures = [], 0
    seeds = [args.seed + k for k in range(args.seeds)]
    for s in seeds:
        if args.channel:
            inst = ChannelInstance.from_json(args.channel)
        else:
            cfg = _config(args)
            if scheme == "three-user":
                cfg = SymmetricConfig(3, args.M, args.Dd, args.Dc).network()
            inst = generate(cfg, s, tol)
        if scheme == "two-user":
            alloc = bfm.alloc_two_user(inst.config)
            bf = bfm.build_two_user(inst, alloc, tol=tol)
        elif scheme == "three-user":
            alloc = bfm.alloc_three_user(bfm.symmetric_view(inst.config))
            bf = bfm.build_three_user(inst, alloc, tol=tol)
        else:
            bf, alloc = bfm.build_k_user_corollary(inst, tol=tol)
        trace = run_two_slot(inst, bf, alloc, tol=tol)
        report = dof_report(inst, trace)
        ranks = verify_rank_conditions(inst, bf, alloc, tol)
        row = {"seed": inst.seed, "allocation": alloc.counts, **report.to_dict(),
               "rank_conditions_pass": ranks.passed, "max_residual": trace.max_residual()}
        if args.slope:
            row["slope"] = estimate_dof_slope(inst, bf, alloc, [1e4, 1e8])
        ok = ranks.passed and report.meets_lower and report.within_upper
        failures += not ok
        results.append(row)
        if args.trace:
            trace.to_json(args.trace)
        if args.beamformers:
            bf.to_json(args.beamformers)
        if args.channel:
            break
    if args.json:
        _emit(args, json.dumps(results, indent=1))
    else:
        lines = [f"seed {r['seed']}: decoded {r['decoded_symbols_total']} symbols in {r['slots']} slots, "
                 f"DoF {r['achieved_dof']} (lower {r['formula_lower']}, upper {r['formula_upper']}), "
                 f"rank conditions {'pass' if r['rank_conditions_pass'] else 'FAIL'}"
                 + (f", slope {r['slope']:.3f}" if "slope" in r else "") for r in results]
        _emit(args, "\n".join(lines))
    return 1 if failures else 0


def cmd_sweep(args) -> int:
    if args.figure == "fig2":
        table = sweep_fig2(args.D, _range(args.M))
        series = {"feedback": table.column("dof_feedback"), "no feedback": table.column("dof_nofeedback")}
        title = f"two users, D={args.D}"
    else:
        table = sweep_fig4(args.Dd, _range(args.M))
        series = {"achievable": table.column("thm2_lower"), "upper bound": table.column("thm3_upper")}
        title = f"three users, D_d={args.Dd}, D_c={2 * args.Dd}"
    for pt, reason, detail in table.skipped:
        print(f"skipped M={pt}: {reason} ({detail})", file=sys.stderr)
    _emit(args, table.to_csv())
    if args.svg:
        Path(args.svg).write_text(svg_lines(table.column("M"), series, title))
    return 0


def cmd_verify(args) -> int:
    rep = verify_grid(args.kind, args.max_antennas, args.seeds, seed_base=args.seed,
                      workers=args.workers, tol=_tol(args))
    if args.json:
        _emit(args, json.dumps({"summary": rep.summary(),
                                "failures": [r.__dict__ for r in rep.failures],
                                "skipped": [list(s) for s in rep.skipped]}, indent=1, default=str))
    else:
        _emit(args, rep.to_csv())
    print(rep.summary(), file=sys.stderr)
    for r in rep.failures[:20]:
        print(f"FAIL {r.point} {r.check}: {r.detail} (seed {r.seed})", file=sys.stderr)
    return 0 if rep.passed else 1


def _system(args) -> Polyhedron:
    if args.system:
        return Polyhedron.parse(Path(args.system).read_text())
    if args.kind == "two-user":
        if args.antennas:
            return two_user_constraints(TwoUserParams(*args.antennas, *args.ranks))
        return two_user_constraints(TwoUserParams.symmetric(args.M, args.Dd))
    return three_user_constraints(SymmetricParams(3, args.M, args.Dd, args.Dc))


def cmd_lp(args) -> int:
    poly = _system(args)
    value, witness = maximize(poly)
    out = {"value": format_rational(value), "witness": dict(zip(poly.variables, map(format_rational, witness)))}
    if args.json:
        _emit(args, json.dumps(out, indent=1))
    else:
        w = ", ".join(f"{k}={v}" for k, v in out["witness"].items())
        _emit(args, f"max {out['value']} at {w}")
    return 0


def cmd_fm(args) -> int:
    poly = _system(args)
    if args.eliminate:
        for v in args.eliminate:
            poly = fm_eliminate(poly, v)
        _emit(args, poly.dump())
    else:
        _emit(args, f"objective bound {format_rational(objective_bound_fm(poly))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdic", description="Rank-deficient MIMO interference channel with feedback")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol-rank", type=float, default=1e-9)
    ap.add_argument("--tol-residual", type=float, default=1e-8)
    ap.add_argument("--out")
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    sub = ap.add_subparsers(dest="command", required=True)

    ch = sub.add_parser("channel").add_subparsers(dest="action", required=True)
    gen = ch.add_parser("gen", help="draw and validate a channel instance")
    _add_params(gen)
    gen.set_defaults(func=cmd_channel_gen)

    run = sub.add_parser("run", help="build a scheme and simulate two slots")
    run.add_argument("scheme", choices=("two-user", "three-user", "k-user"))
    _add_params(run)
    run.add_argument("--channel", help="channel JSON to load instead of drawing")
    run.add_argument("--seeds", type=int, default=1, help="consecutive seeds starting at --seed")
    run.add_argument("--slope", action="store_true", help="also estimate the high-power rate slope")
    run.add_argument("--trace", help="write the last trace JSON here")
    run.add_argument("--beamformers", help="write the last beamformer JSON here")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="figure data as CSV")
    sw.add_argument("figure", choices=("fig2", "fig4"))
    sw.add_argument("--D", type=int, default=2)
    sw.add_argument("--Dd", type=int, default=1)
    sw.add_argument("--M", default="2:8", help="inclusive range a:b")
    sw.add_argument("--svg")
    sw.set_defaults(func=cmd_sweep)

    ver = sub.add_parser("verify").add_subparsers(dest="action", required=True)
    grid = ver.add_parser("grid", help="formula, LP and simulation checks over a grid")
    grid.add_argument("--kind", choices=("two_user", "three_user"), default="two_user")
    grid.add_argument("--max-antennas", type=int, default=3)
    grid.add_argument("--seeds", type=int, default=1)
    grid.add_argument("--workers", type=int, default=1)
    grid.set_defaults(func=cmd_verify)

    for name, func, helptext in (("lp", cmd_lp, "solve"), ("fm", cmd_fm, "project")):
        grp = sub.add_parser(name).add_subparsers(dest="action", required=True)
        p = grp.add_parser(helptext)
        p.add_argument("kind", choices=("two-user", "three-user"), nargs="?", default="two-user")
        _add_params(p, with_K=False)
        p.add_argument("--system", help="constraint system in dump format")
        if name == "fm":
            p.add_argument("--eliminate", nargs="*", help="variables to eliminate; omit for the full objective bound")
        p.set_defaults(func=func)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, ArithmeticError, RuntimeError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
