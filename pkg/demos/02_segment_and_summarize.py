"""
From frame features to a key-shot summary
=========================================

Kernel temporal segmentation splits a feature sequence into shots, and a
0/1 knapsack then picks the shots that fit a 15% length budget.
"""

# %%
import numpy as np

from vjmht.segmentation import KtsConfig, kts
from vjmht.summarize import generate_summary
from vjmht.synth import synth_videos

video = synth_videos(seed=1, n_videos=1, n_frames=64, dim=16, n_clusters=1)[0]
feats = video["features"]
print("planted cuts ", video["cuts"])

# %% Segment count chosen by the penalised cost
cuts = kts(feats, KtsConfig(max_segments=10))
print("recovered cuts", cuts)

# %% Score every frame with its ground-truth importance and build the summary
summary = generate_summary(video["gt_scores"], cuts, gamma=0.15)
print("selected shots", summary.selected_shots)
print("summary frames", summary.run_length(), "budget", int(0.15 * len(feats)))

# %% Mean versus summed shot values
noisy = np.clip(video["gt_scores"] + np.random.default_rng(2).normal(0, 0.3, len(feats)), 0, None)
for mode in ("mean", "sum"):
    print(mode, generate_summary(noisy, cuts, value_mode=mode).selected_shots)
