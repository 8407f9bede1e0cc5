# coding: utf-8

# # Memory against plain sampling
#
# Same seeds for every policy, so differences are paired.

# In[1]:

from sqdn import ModelParams, PolicySpec, SimConfig, compare_policies


# In[2]:

cfg = SimConfig(ModelParams(0.45, 2), n_servers=500, horizon=40.0, warmup=10.0, seed=100,
                departure_mode="potential-departure")
policies = [PolicySpec(), PolicySpec(kind="sqd-classic"), PolicySpec(kind="random"), PolicySpec(kind="jsq")]
cmp = compare_policies(cfg, policies, replications=10)
for row in cmp.rows:
    print(f"{row['policy']:>12}  L_S={row['L_S']:.4f} +- {row['L_S_ci']:.4f}  idle={row['idle_assign_frac']:.4f}")


# In[3]:

print("memory - classic:", cmp.paired("sqdn-memory", "sqd-classic"))
print("memory - jsq:    ", cmp.paired("sqdn-memory", "jsq"))


# The variants behave almost identically at this load.

# In[4]:

variants = [PolicySpec(), PolicySpec(replacement="without"), PolicySpec(order="assign-then-sample"),
            PolicySpec(tiebreak="oldest-timer")]
for row in compare_policies(cfg, variants, replications=5).rows:
    print(f"{row['policy']:>40}  L_S={row['L_S']:.4f}")
