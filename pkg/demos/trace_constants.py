"""How the trace and non-concentration constants of a small ball behave.

Run: python demos/trace_constants.py
"""

from thinhandles.constants import (
    nonconc_asymptotic,
    oracle_trace_constants,
    trace_const_annulus,
    trace_const_ball,
    trace_const_full,
    trace_const_asymptotic,
)

eta = 0.3
print(f"Squared trace constants of the sphere |x| = r inside a ball of radius {eta}\n")
print(f"{'m':>2} {'r':>8} {'annulus':>14} {'ball':>14} {'full':>14} {'ODE check':>10}")
for m in (2, 3, 4):
    for r in (0.1, 0.01, 0.001):
        full = trace_const_full(m, r, eta)
        dev = abs(oracle_trace_constants(m, r, eta)[2] / full - 1)
        print(f"{m:>2} {r:>8g} {trace_const_annulus(m, r, eta):>14.6e} {trace_const_ball(m, r):>14.6e} "
              f"{full:>14.6e} {dev:>10.1e}")

print("\nThe full constant is dominated by a radius-only correction as r shrinks;")
print("the ratio remainder / remainder-scale settles to a constant:\n")
for m in (2, 3):
    for r in (1e-2, 1e-3, 1e-4, 1e-5):
        res = trace_const_asymptotic(m, r, eta)
        print(f"  m={m} r={r:<7g} value={res.value:.6e} leading={res.leading_term:.6e} "
              f"remainder/scale={abs(res.remainder) / res.remainder_scale:.4f}")

print("\nNon-concentration constant of B_eps in B_eta (squared):\n")
for eps in (1e-2, 1e-3, 1e-4):
    res = nonconc_asymptotic(3, eps, eta)
    print(f"  m=3 eps={eps:<6g} value={res.value:.6e} leading={res.leading_term:.6e} "
          f"relative remainder={res.remainder / res.value:.2e}")
