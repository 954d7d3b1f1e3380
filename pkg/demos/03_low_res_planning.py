"""
Can we plan on thumbnails?
==========================

The planner scores simulated edits on a downscaled copy of the image. That is
only safe if the ranking of candidates survives the downscale. Here we measure
how often it does.
"""

from photoloop.analysis import sim2real_experiment, synthetic_photos
from photoloop.core import Scale

images = synthetic_photos(20)

for scale in (Scale.FULL, Scale.HALF, Scale.QUARTER):
    r = sim2real_experiment(images, actions_per_image=10, scale=scale)
    print(f"{scale.label:<8} spearman {r.spearman:.3f}  kendall {r.kendall_tau:.3f}  "
          f"top-1 {r.top1_retention:.2f}  top-3 {r.top3_retention:.2f}")

# full resolution is the control: identical inputs, identical ranks.
# half keeps the ordering well enough that the true best stays in the top 3,
# which is why the loop re-scores its top-K at full resolution.
