"""
Using the wrong calibration
===========================

If both sources are modelled with the curves of source 2, the model can no
longer tell them apart at small separation, so the separation needed for a
reliable decision grows.  It still stays below the Rayleigh limit.
"""

# %%
import numpy as np

from rbspade import presets
from rbspade.analysis import mc_success_sweep, mismatch_study, plausible_map
from rbspade.scene import SceneParams, simulate_dataset

pair = presets.source_pair()
v = pair[0].variances
scene = SceneParams(presets.IMBALANCE, presets.CENTROID)
seps = np.concatenate([np.linspace(0, 10, 21), np.linspace(20, 320, 31)])

matched = mc_success_sweep(seps, 500, "known", scene, *pair, v, seed=88)
wrong = mismatch_study(seps, 500, pair, pair[1], v, 88, scene)
print(f"1-eps threshold, matched model:    {matched.threshold(presets.EPSILON):.2f} um")
print(f"1-eps threshold, mismatched model: {wrong.threshold(presets.EPSILON):.2f} um")
print(f"Rayleigh limit:                    {presets.RAYLEIGH} um")

# %%
# On a fine lattice around the truth the mismatched model concentrates on a
# biased point instead of widening its plausible region.
S, C = presets.SEPARATION, presets.CENTROID
data = simulate_dataset(*pair, SceneParams(presets.IMBALANCE, C, S), v, 10000, seed=89)
dg = S - 0.5 + np.arange(100) / 100
xg = C - 1.0 + np.arange(100) * 0.02
for name, cals in (("matched", pair), ("mismatched", (pair[1], pair[1]))):
    m = plausible_map(data, *cals, v, d=dg, x_c=xg, q=presets.IMBALANCE)
    print(f"{name:10s}: argmax {m.argmax}, {int(m.plausible.sum())} plausible points")
