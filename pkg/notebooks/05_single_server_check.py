# coding: utf-8

# # One server, one queue
#
# With a single server every policy sends every job to it, so the simulator
# must reproduce the truncated geometric law of an M/M/1 queue with room for I jobs.

# In[1]:

import numpy as np

from sqdn import ModelParams, SimConfig, simulate
from sqdn.analysis import batch_means, mm1k_distribution, mm1k_mean_queue


# In[2]:

cfg = SimConfig(ModelParams(0.5, 1, 10), n_servers=1, horizon=2e5, sample_every=50.0, warmup=100.0, seed=1)
res = simulate(cfg)
mean, se = batch_means(res, 50)
print(res.n_events, "events")
print("simulated", mean, "+-", se, " exact", mm1k_mean_queue(0.5, 10))


# In[3]:

print(np.round(mm1k_distribution(0.5, 10), 5))
print("blocked fraction", res.steady["blocked_frac"], " exact", mm1k_distribution(0.5, 10)[-1])
