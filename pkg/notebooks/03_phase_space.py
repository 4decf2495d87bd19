# %% [markdown]
# # The autonomous phase system
#
# Stationary points, their linearisation and the manifold partition scans.

# %%
import numpy as np

from pucci_lane_emden import ProblemParams
from pucci_lane_emden.phase import (jacobian_eigen, label_runs, partition_scan,
                                    refine_boundary, stationary_coordinates)

par = ProblemParams(1, 1, 3, 2.0, 2.0)
for name, y in stationary_coordinates(par).items():
    vals = jacobian_eigen(y, par)[0]
    print(f"{name:4s}", np.round(y, 4), np.round(vals, 3))

# %% [markdown]
# Seeds on the unstable manifold of `N0` split into two blow-up families.
# The separating trajectory is a simultaneous blow-up below the hyperbola
# and a ground state above it.

# %%
for pq in [(2.0, 2.0), (7.0, 7.0)]:
    p = ProblemParams(1, 1, 3, *pq)
    scan = partition_scan("N0", p, 32)
    runs = label_runs(scan)
    b = refine_boundary("N0", p, scan[runs[0][2]].angle, scan[runs[-1][1]].angle)
    print(pq, runs, b.label)

# %% [markdown]
# Off the diagonal, the stable-manifold chart at `A0` squeezes the separatrix
# against an axis. Bisecting between seeds next to the two axes still finds it.

# %%
print(refine_boundary("A0", ProblemParams(1, 1, 3, 5.0, 8.0), 1e-8, np.pi / 2 - 1e-8).label)
