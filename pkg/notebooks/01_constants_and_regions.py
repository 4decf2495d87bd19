# %% [markdown]
# # Scaling constants and the exponent regions
#
# Every computation starts from a `ProblemParams`: ellipticity constants,
# dimension, exponents and the operator. The derived constants decide which
# region of the `(p, q)` quadrant a pair falls into.

# %%
import numpy as np

from pucci_lane_emden import ProblemParams, region_flags
from pucci_lane_emden.core import hyperbola_q

par = ProblemParams(1, 2, 3, 2.0, 3.0, "+")
c = par.constants
print(f"alpha={c.alpha:.4f} beta={c.beta:.4f} n_plus={c.n_plus:.3f} n_minus={c.n_minus:.3f}")

# %% [markdown]
# With equal constants the dividing curve is the classical hyperbola.

# %%
for p in (3.0, 5.0, 8.0):
    print(p, hyperbola_q(p, 1 / 3))

# %% [markdown]
# Region membership on a coarse log grid, for both operators.

# %%
grid = np.geomspace(0.5, 20, 12)
for op in "+-":
    counts = {"Rd": 0, "Ru": 0, "other": 0}
    for p in grid:
        for q in grid:
            if p * q <= 1:
                continue
            f = region_flags(ProblemParams(1, 2, 3, p, q, op))
            counts["Rd" if f.in_Rd else "Ru" if f.in_Ru else "other"] += 1
    print(op, counts)
