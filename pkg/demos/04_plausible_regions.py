"""
Plausible regions for separation and centroid
=============================================

Treat every point of a (d, x_c) lattice as its own hypothesis.  Points with
RB > 1 form the plausible region, which shrinks as data accumulate.
"""

# %%
import numpy as np

from rbspade import presets
from rbspade.analysis import plausible_map
from rbspade.scene import Dataset, SceneParams, simulate_dataset

pair = presets.source_pair()
v = pair[0].variances
S, C = presets.SEPARATION, presets.CENTROID
data = simulate_dataset(*pair, SceneParams(0.5, C, S), v, 10000, seed=77)

dg = S - 0.5 + np.arange(100) / 100
xg = C - 1.0 + np.arange(100) * 0.02

# %%
# The first n samples are nested inside the full dataset.
for n in (10, 100, 1000, 10000):
    m = plausible_map(Dataset(data.samples[:n]), *pair, v, d=dg, x_c=xg, q=0.5)
    print(f"n = {n:5d}: {int(m.plausible.sum()):4d} plausible points, argmax {m.argmax}, "
          f"box {m.bounding_box()}")
