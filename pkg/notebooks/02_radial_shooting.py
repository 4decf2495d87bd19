# %% [markdown]
# # Shooting from the centre
#
# `shoot` integrates the radial system from small `r` with regular data
# `(xi, eta)` and tags the outcome.

# %%
import numpy as np

from pucci_lane_emden import ProblemParams
from pucci_lane_emden.radial import ShootOptions, shoot

lap = ProblemParams(1, 1, 3, 5.0, 5.0)
o = shoot(1.0, 1.0, lap, ShootOptions(dense=True))
print(o.tag, o.decay)

# %% [markdown]
# The critical Laplacian case has the explicit profile `(1 + r^2/3)^(-1/2)`.

# %%
r = np.linspace(0.01, 50, 6)
u = np.array([np.ravel(o.trajectory.evaluate(x))[0] for x in r])
print(np.max(np.abs(u / (1 + r * r / 3) ** -0.5 - 1)))

# %% [markdown]
# Below the critical curve a symmetric shot is a ball; changing `eta`
# makes one component vanish first.

# %%
sub = ProblemParams(1, 2, 3, 2.0, 2.0)
for eta in (0.5, 1.0, 2.0):
    s = shoot(1.0, eta, sub)
    print(eta, s.tag, s.radius)
