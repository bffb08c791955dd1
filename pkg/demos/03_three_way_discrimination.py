"""
Which scene produced the data?
==============================

Three hypotheses compete: source 1 alone, source 2 alone, or both at once
with unknown brightness share, centroid and separation.  Nuisance parameters
are integrated out under their priors, and the relative belief of each
hypothesis is its posterior over its prior.
"""

# %%
import time

from rbspade import presets
from rbspade.inference import DiscriminationConfig, discriminate
from rbspade.scene import SceneParams, simulate_dataset

pair = presets.source_pair()
v = pair[0].variances
cfg = DiscriminationConfig.default_for(*pair)
hyps = cfg.hypotheses()
print("hypotheses:", [h.label for h in hyps])

# %%
# Simulate 10000 samples from each scene and score all three hypotheses.
C, S, Q = presets.CENTROID, presets.SEPARATION, presets.IMBALANCE
scenes = {"src1": SceneParams(1.0, C), "src2": SceneParams(0.0, C),
          "combined": SceneParams(Q, C, S)}
for seed, (truth, scene) in enumerate(scenes.items()):
    data = simulate_dataset(*pair, scene, v, 10000, seed=seed)
    t0 = time.perf_counter()
    res = discriminate(data, hyps, *pair, v, cfg.grids)
    print(f"truth {truth:9s} -> RB", {k: round(res[k]["rb"], 4) for k in res.labels},
          f"evidence {res[truth]['evidence']:.4f}", f"({time.perf_counter() - t0:.2f} s)")

# %%
# Smaller datasets: the argmax of each 50-sample chunk.
picks = [discriminate(c, hyps, *pair, v, cfg.grids).selected for c in data.chunks(50)]
print("chunk argmax counts:", {p: picks.count(p) for p in set(picks)})
