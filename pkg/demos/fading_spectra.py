"""A torus with two fixed handles of length sqrt(eps): the handles fade away.

Run: python demos/fading_spectra.py
"""

import numpy as np

from thinhandles.spectra import fading_torus, sweep

study = sweep(fading_torus, [1.6 / n for n in (16, 32, 64, 128)], 5, resolvent=True)
for eps, v, d, r in zip(study.eps_values, study.eigenvalues, study.distances, study.resolvent_distances):
    print(f"eps={eps:.4f}  eigenvalues {np.array2string(v, precision=3)}  max error {d.max():.3f}  resolvent {r:.3f}")
print(f"\nlimit (intact torus): {np.array2string(study.limit_eigenvalues[-1], precision=3)}")
print("error reduction per halving of eps:", [round(x, 2) for x in study.error_reduction()])
print("fitted log-log slopes over the last decade:", [round(x, 3) for x in study.fitted_rates])
