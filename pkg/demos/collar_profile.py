"""Build convexity profiles joining two boundary germs and verify the
resulting contact form directly.

build_profile searches a small parametric family for an interpolant
h1(s) whose pairing with the fixed transverse profile u(s) keeps the
contact volume positive across the whole collar. verify_convex_form
then assembles the full (2n+1)-dimensional form on a model band and
evaluates its top wedge power at random points. Nothing in the second
step reuses the construction; agreement is the point.
"""

import numpy as np

from charfol import build_profile, standard_gamma, verify_convex_form
from charfol.certify import verification_grid

left = (1.0, 0.6)    # value and slope of the germ at s = -1
right = (1.0, -0.6)  # value and slope at s = +1

for n in (1, 2, 3):
    prof = build_profile(left, right, n)
    rep = verify_convex_form(prof, standard_gamma(n), n, samples=500,
                             rng=np.random.default_rng(n))
    print(f"n = {n}:")
    print(f"  swept parameters: rho = {prof.params['rho']:.4f}, "
          f"nu = {prof.params['nu']:.4f}, "
          f"stiffness = {prof.params['stiffness']:.0f}")
    print(f"  worst grid residual: {prof.grid_residuals:.3e} (positive)")
    print(f"  volume positive at all {rep['samples']} sampled points: "
          f"{rep['positive']}, min volume {rep['min_volume']:.3e}")
    print(f"  closed-form match: max rel dev {rep['max_rel_dev']:.2e}")

# the grid used throughout is interior midpoints, never the endpoints
grid = verification_grid()
print(f"\nverification grid: {grid.size} points in "
      f"({grid[0]:+.4f}, {grid[-1]:+.4f})")
