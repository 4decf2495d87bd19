# %% [markdown]
# # Branch-wise energy along trajectories
#
# The energy depends on which concavity branch each component sits in.
# Presets of the weight `sigma` give a monotone energy in each region.

# %%
from pucci_lane_emden import ProblemParams, region_flags
from pucci_lane_emden.energy import (check_trend, energy_along, expected_trend,
                                     sigma_preset)
from pucci_lane_emden.radial import shoot

for pars, region in [((1, 2, 3, 2.0, 2.5, "+"), "Rd"), ((1, 2, 5, 9.0, 9.0, "+"), "Ru")]:
    par = ProblemParams(*pars)
    print(pars, region_flags(par).in_Rd, region_flags(par).in_Ru)
    sigma = sigma_preset(par, region)
    path = energy_along(shoot(1.0, 1.0, par).trajectory, sigma, par)
    print(region, sigma, check_trend(path, expected_trend(region)))

# %% [markdown]
# The energy vanishes identically at the stationary points with a zero amplitude.

# %%
from pucci_lane_emden.energy import ZERO_ENERGY_POINTS, energy
from pucci_lane_emden.phase import PhaseState, stationary_coordinates

par = ProblemParams(1, 2, 3, 2.0, 3.0)
pts = stationary_coordinates(par)
print({n: energy(PhaseState(0.0, *pts[n]), 3.0, par).value for n in ZERO_ENERGY_POINTS})
