# Constructing global solutions with the monotone Picard tower.
#
# For v^(n) = h(v) with positive data the iteration
#     v_j(t) = sum_i b_i t^i/i! + 1/(n-1)! int_0^t (t-tau)^(n-1) h(v_{j-1}) dtau
# increases pointwise in j and stays below a majorant obtained by
# quadrature inversion: solving F(U) = t where
#     F(U) = 1/n int_{u0}^{U} g(s)^(-1/n) s^(1/n - 1) ds
# and g is the rescaled growth function g(s) = h(s/beta) / (alpha (n-1)!)
# with alpha = 1/2^(n+1), beta = 1/(1+2^n).

import math

import numpy as np

from blowup import (
    comparison_constants,
    majorant_growth,
    make_constant,
    make_power,
    picard_solve,
    solve_autonomous_quadrature,
    verify_comparison_bound,
)

print("comparison constants (depend only on n):")
for n in (1, 2, 3, 4):
    c = comparison_constants(n)
    print(f"  n={n}: alpha = {c.alpha}, beta = {c.beta}")

print()
print("quadrature inversion, three closed forms:")
print(f"  u' = u,  u(0)=1,  u(1)   = {solve_autonomous_quadrature(make_power(1), 1, 1.0, [1.0])[0]:.12f}"
      f"  (e = {math.e:.12f})")
print(f"  n=2, g=1, u(0)=1, u(1)   = {solve_autonomous_quadrature(make_constant(1), 2, 1.0, [1.0])[0]:.12f}"
      "  ((1+t)^2 = 4)")
print(f"  u' = u^2, u(0)=1, u(0.5) = {solve_autonomous_quadrature(make_power(2), 1, 1.0, [0.5])[0]:.12f}"
      "  (1/(1-t) = 2)")

print()
print("the comparison inequality, checked on a grid (u' = u, so u = e^t):")
rep = verify_comparison_bound(make_power(1), 1, 1.0, 3.0, 200)
print(f"  min slack over 200 points: {rep.min_slack:.6f} at t = {rep.t_at_min} -> passed = {rep.passed}")
print("  (at t = 3 the two sides are e^3 - 1 and (e^3 - 1)/12: the product")
print("   alpha * beta = 1/12 is exactly the decay both constants buy)")

print()
print("the tower for v' = v, v(0) = 1 rebuilds the exponential series:")
tw = picard_solve(make_power(1), 1, [1.0], 1.0, tol=1e-10)
print(f"  converged in {tw.iterations} iterations on {len(tw.grid)} grid points")
for j in (1, 2, 3, 4):
    print(f"  iterate {j} at t=1: {tw.iterates[j][-1]:.10f}"
          f"  (partial sum {sum(1 / math.factorial(i) for i in range(j + 1)):.10f})")
print(f"  final value {tw.iterates[-1][-1]:.12f} vs e = {math.e:.12f}")

g = majorant_growth(make_power(1), 1)
print(f"  majorant growth g(s) = {g(1.0):.0f} s, so the dominating solution is"
      f" e^(12 t): tower max {tw.iterates[-1].max():.3f} << {tw.majorant[-1]:.3f}")
