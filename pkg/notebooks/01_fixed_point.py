# coding: utf-8

# # Where the fluid model comes to rest
#
# For loads below 1 - 1/d the resting point sits on three cells only. Above
# that it spreads over two observation columns, j* and j*+1, and the largest
# queue anywhere is j*+1.

# In[1]:

import numpy as np

from sqdn import ModelParams, fixed_point, j_star, lambda_star


# In[2]:

rep = fixed_point(ModelParams(0.45, 2))
for i, j, v in rep.support():
    print(f"x[{i},{j}] = {v:.6f}")
print("L_S", rep.L_S, "L_M", rep.L_M)


# The gap between believed and true load is always 1/d.

# In[3]:

for lam in (0.6, 0.9, 0.99):
    rep = fixed_point(ModelParams(lam, 2))
    print(lam, rep.jstar, round(rep.L_M - rep.L_S, 12), [(i, j) for i, j, _ in rep.support(1e-14)])


# Threshold loads where j* steps up, for a few values of d.

# In[4]:

for d in (2, 3, 4, 5):
    print(d, np.round([lambda_star(n, d) for n in range(6)], 6))


# Maximum queue length j*+1 at heavy load: even at 99.5% utilization with
# two samples no queue holds more than five jobs.

# In[5]:

print([j_star(ModelParams(0.995, d)) + 1 for d in (2, 3, 4, 5)])
