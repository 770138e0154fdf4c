"""Which convergence result covers a point (alpha, lambda), drawn as a character map.

Run: python demos/regime_map.py [m]
"""

import sys
from fractions import Fraction

from thinhandles.regimes import ParamPoint, Theorem, classify, region_vertices

m = int(sys.argv[1]) if len(sys.argv) > 1 else 3
SYMBOL = {
    Theorem.ADHERING_GENERAL: "A",
    Theorem.ADHERING_TWO_COPIES: "a",
    Theorem.FADING_II: "F",
    Theorem.FADING_I: "f",
}

print(f"dimension m={m}: best result per cell (A adhering, a adhering two copies, F/f fading, . none)\n")
cols, rows = 60, 24
for j in range(rows, 0, -1):
    lam = Fraction(3 * j, rows)
    line = []
    for i in range(cols):
        alpha = Fraction(i, cols)
        rep = classify(ParamPoint(m, alpha, lam))
        line.append(SYMBOL[rep.best[0]] if rep.best else ".")
    print(f"{float(lam):5.2f} |" + "".join(line))
print("      +" + "-" * cols)
print("       alpha = 0" + " " * (cols - 18) + "alpha -> 1\n")

print("named points of the adhering figure:")
for name, (a, lam) in region_vertices(m, "adhering").items():
    print(f"  {name:>3} = ({a}, {lam})")

for point in [(0, "1/2"), ("4/5", 1), ("55/100", 1)]:
    rep = classify(ParamPoint(m, *point))
    best = "uncovered" if rep.best is None else f"{rep.best[0].value} with exponent {rep.best[1]}"
    print(f"\n(alpha, lambda) = {point}: {best}")
