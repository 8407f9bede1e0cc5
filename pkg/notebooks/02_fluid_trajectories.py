# coding: utf-8

# # Integrating the fluid model
#
# Start from an empty system and watch the state settle; then start from a
# loaded one and see the long drain before x[0,0] turns positive.

# In[1]:

import numpy as np

from sqdn import FluidState, IntegratorConfig, ModelParams, fit_decay_rate, fixed_point, integrate
from sqdn.analysis import decay_window, liftoff_time
from sqdn.integrator import distance_to, summary_table


# In[2]:

p = ModelParams(0.45, 2, 20)
target = fixed_point(p).fixed_point.x
traj = integrate(FluidState.empty_system(20).x, p, IntegratorConfig(t_end=20.0))
table = summary_table(traj, target)
for k in range(0, len(traj.times), 25):
    print(f"t={table['t'][k]:5.1f}  L_S={table['L_S'][k]:.4f}  x00={table['x00'][k]:.4f}  "
          f"dist={table['dist_to_fixed_point'][k]:.2e}")


# The distance falls on a straight line in log scale.

# In[3]:

dist = distance_to(traj, target)
fit = fit_decay_rate(dist, decay_window(traj, dist))
print(fit)


# A loaded start. Each server clears at most one job per unit time while
# arrivals keep coming, so the backlog takes a while to clear.

# In[4]:

x0 = FluidState.random(20, np.random.default_rng(0)).x
loaded = integrate(x0, p, IntegratorConfig(t_end=20.0))
print("L_S(0) =", loaded.mass_functionals()[0][0], " lift-off at t =", liftoff_time(loaded))
print("distance at t=20:", distance_to(loaded, target)[-1, 1])
