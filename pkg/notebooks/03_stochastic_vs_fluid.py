# coding: utf-8

# # Finite systems against the fluid path
#
# Simulate N = 100 and N = 1000 servers from an empty start and measure the
# largest gap to the fluid trajectory over ten time units.

# In[1]:

from sqdn import FluidState, IntegratorConfig, ModelParams, SimConfig, integrate, simulate, sup_distance
from sqdn.state import offset


# In[2]:

p = ModelParams(0.45, 2)
fluid = integrate(FluidState.empty_system(p.buffer).x, p, IntegratorConfig(t_end=10.0))

for n in (100, 1000):
    gaps = [sup_distance(simulate(SimConfig(p, n_servers=n, horizon=10.0, seed=s)), fluid) for s in range(5)]
    print(n, [round(g, 3) for g in gaps])


# Most servers end up idle and known to be idle, or idle with an observation
# of one, or busy with one job.

# In[3]:

res = simulate(SimConfig(p, n_servers=1000, horizon=10.0, seed=0))
cells = [(0, 0), (0, 1), (1, 1)]
print({c: res.states[-1, offset(*c, p.buffer)] for c in cells})
print(res.steady)
