# %% [markdown]
# # Intake analysis and the Healthy Score
#
# Weekly logs become nine-value intake vectors.  The Mahalanobis distance
# to the optimal ranges is min-max normalised over the batch and turned
# into a score in [0, 1].  Scores above a threshold count as healthy.

# %%
from collections import defaultdict

import numpy as np

from dietsynth import (
    EVALUATION_PROFILES,
    GROUP_NAMES,
    analyze_logs,
    best_threshold,
    evaluate,
    generate_dataset,
    load_default_pool,
    load_default_profiles,
    load_mapping,
    load_ranges,
    score_rows,
)
from dietsynth.cli import plot_rows

pool = load_default_pool()
ds = generate_dataset(load_default_profiles(), pool, seed=1, n_weeks=4, profile_ids=EVALUATION_PROFILES, workers=4)
rows = analyze_logs(ds.logs, load_mapping(), pool)
print(len(rows), "diets")

# %%
ranges = load_ranges()
for name, lo, hi, sd in zip(GROUP_NAMES, ranges.lower, ranges.upper, ranges.sigma):
    print(f"{name:<13} [{lo:g}, {hi:g}]  sigma {sd:g}")

# %%
by_type = defaultdict(list)
for r in rows:
    by_type[r.profile_type.value].append(r.intake.as_array())
for t, xs in by_type.items():
    print(f"{t:<9}", np.round(np.mean(xs, axis=0), 2))

# %%
scores = score_rows(rows, ranges)
for t in ("Healthy", "Medium", "Unhealthy"):
    hs = np.array([s.healthy_score for s in scores if s.profile_type.value == t])
    print(f"{t:<9} mean {hs.mean():.3f}  range [{hs.min():.3f}, {hs.max():.3f}]")

# %%
fixed = evaluate(scores, 0.36)
best = best_threshold(scores)
print("threshold 0.36:", fixed.to_json())
print("best threshold:", best.to_json())

# %% [markdown]
# The scatter export orders diets by group and subject.  With matplotlib
# installed it can be drawn directly.

# %%
points = plot_rows(scores)
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    fig, ax = plt.subplots(figsize=(8, 3))
    for group in ("Healthy", "Medium", "Unhealthy"):
        pts = [(i, s) for i, s, g, *_ in points if g == group]
        ax.scatter(*zip(*pts), s=2, label=group)
    ax.axhline(0.36, color="k", lw=0.8)
    ax.set_xlabel("diet")
    ax.set_ylabel("Healthy Score")
    ax.legend(markerscale=4)
