# coding: utf-8

# # Running the named experiments
#
# Every experiment writes CSV tables plus a manifest into one directory.
# The same runs are available from the shell, e.g.
#
#     sqdn experiment fig3-left --out out/fig3-left
#     sqdn fixed-point --lambda 0.9 --d 2

# In[1]:

import json
import tempfile
from pathlib import Path

from sqdn import run_experiment
from sqdn.cli import main
from sqdn.io import read_table


# In[2]:

out = Path(tempfile.mkdtemp())
manifest = run_experiment("fig3-right", {"replications": 4}, out_dir=out / "fig3-right")
print(json.dumps({k: manifest[k] for k in ("files", "seeds", "max_sup_gap", "sup_gap_of_mean")}, indent=1))


# In[3]:

table = read_table(out / "fig3-right" / "fig3_right_L_S.csv")
for k in range(0, len(table["t"]), 20):
    print(f"{table['t'][k]:5.1f}  {table['L_S_stochastic'][k]:.3f}  {table['L_S_fluid'][k]:.3f}")


# In[4]:

main(["thresholds", "--d", "3", "--n-max", "4"])
