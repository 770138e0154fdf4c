"""Two flat tori joined by many short handles: the spectrum splits into two branches.

Functions that agree on both tori see the identified torus; functions that
differ are pushed up by the handles. Run: python demos/adhering_spectra.py
"""

import numpy as np

from thinhandles.spectra import adhering_two_tori, eigenvalues, resolvent_distance, sector_eigenvalues

print(f"{'n':>4} {'handles':>8} {'vertices':>9} {'lowest odd':>11} {'even spectrum (nonzero)':>40} {'resolvent':>10}")
for n in (12, 24, 48, 96):
    model, limit = adhering_two_tori(1.6 / n)
    g = model.manifold
    odd = sector_eigenvalues(model, 1, "antisymmetric")[0]
    even = sector_eigenvalues(model, 6, "symmetric")[1:]
    print(f"{n:>4} {g.meta['handles']:>8} {g.n_vertices:>9} {odd:>11.2f} "
          f"{np.array2string(even, precision=2):>40} {resolvent_distance(model, limit):>10.3f}")

ref = eigenvalues(limit, 6)[1:]
print(f"\nidentified limit: {np.array2string(ref, precision=2)}  (4 pi^2 = {4 * np.pi**2:.2f})")
print("The odd branch escapes upward while the even branch drifts towards the limit;")
print("the approach is slow because the removed area shrinks only like a small power of eps.")
