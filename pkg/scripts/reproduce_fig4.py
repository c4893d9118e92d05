"""Three-user achievable DoF and the K-user bound against M, with D_c = 2 D_d."""
import argparse
from pathlib import Path

from rdic.sweeps import svg_lines, sweep_fig4

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--Dd", type=int, default=1)
ap.add_argument("--M-max", type=int, default=8)
ap.add_argument("--outdir", default="results")
args = ap.parse_args()

out = Path(args.outdir)
out.mkdir(parents=True, exist_ok=True)
table = sweep_fig4(args.Dd, range(2 * args.Dd, args.M_max + 1))
(out / "fig4.csv").write_text(table.to_csv())
(out / "fig4.svg").write_text(svg_lines(
    table.column("M"),
    {"achievable": table.column("thm2_lower"), "upper bound": table.column("thm3_upper")},
    f"three users, D_d={args.Dd}, D_c={2 * args.Dd}"))
print(table.to_csv(), end="")
