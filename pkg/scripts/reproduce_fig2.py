"""Two-user DoF with and without feedback against M (all ranks D)."""
import argparse
from pathlib import Path

from rdic.sweeps import svg_lines, sweep_fig2

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--D", type=int, default=2)
ap.add_argument("--M-max", type=int, default=8)
ap.add_argument("--outdir", default="results")
args = ap.parse_args()

out = Path(args.outdir)
out.mkdir(parents=True, exist_ok=True)
table = sweep_fig2(args.D, range(args.D, args.M_max + 1))
(out / "fig2.csv").write_text(table.to_csv())
(out / "fig2.svg").write_text(svg_lines(
    table.column("M"),
    {"feedback": table.column("dof_feedback"), "no feedback": table.column("dof_nofeedback")},
    f"two users, D={args.D}"))
print(table.to_csv(), end="")
