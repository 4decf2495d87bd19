# %% [markdown]
# # Critical shots and the critical curve
#
# `critical_eta` bisects `eta` at fixed `xi` between "v vanishes first" and
# "u vanishes first". The boundary shot is either a ball (compact support)
# or a ground state.

# %%
import numpy as np

from pucci_lane_emden import ProblemParams
from pucci_lane_emden.classify import classify_pq, critical_eta, trace_critical_curve
from pucci_lane_emden.core import hyperbola_q

lap = ProblemParams(1, 1, 3, 2.0, 3.0)
cs = critical_eta(1.0, lap)
print(cs.verdict, cs.eta_star, cs.slope_c)

# %%
for pq in [(2, 2), (7, 7), (5, 8)]:
    print(pq, classify_pq(ProblemParams(1, 1, 3, *pq)).verdict)

# %% [markdown]
# The traced curve reproduces the hyperbola for equal constants.
# Pucci operators move it.

# %%
grid = np.array([3.0, 5.0, 8.0])
for base in (ProblemParams(1, 1, 3, 2, 2), ProblemParams(1, 2, 3, 2, 2, "-")):
    pts = trace_critical_curve(grid, base, q_range=(None, 40.0), tol=1e-3)
    print(base.op, base.Lam, [(c.p, round(c.q_star, 4)) for c in pts])
print([round(hyperbola_q(p, 1 / 3), 4) for p in grid])
