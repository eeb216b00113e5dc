# %% [markdown]
# # Generating weekly meal logs
#
# Each subject draws its meal structure and weekly counts from its own
# seeded generator.  Counts are spread over the week so that daily loads
# differ by at most one record, then placed into meal slots.

# %%
from collections import Counter

import numpy as np

from dietsynth import generate_dataset, load_default_pool, load_default_profiles
from dietsynth.synthesis import (
    balance_week,
    compose_meals,
    day_layout,
    instantiate_subject,
    owner_affinity,
    structure_of,
)

pool = load_default_pool()
profiles = load_default_profiles()
by_id = {p.id: p for p in profiles}

# %% [markdown]
# ## One subject, step by step

# %%
rng = np.random.default_rng(7)
spec = instantiate_subject(by_id["3"], "Europe", 4, rng, pool=pool)
print(spec.n_meals, "meals a day,", spec.n_main_meals, "of them main meals")
{str(k): v for k, v in spec.counts(1).items()}

# %%
for slot in day_layout(spec.n_meals, spec.n_main_meals):
    print(slot.meal_index, slot.position, "main" if slot.main else "light", [t.value for t in slot.accepts])

# %%
assignment = balance_week(spec, 1, rng, owner_affinity(pool, spec, 1))
print("records per day:", dict(sorted(Counter(k.day for k in assignment).items())))
log = compose_meals(assignment, pool, spec, rng, week=1)
for r in log.records[:10]:
    print(r.day, r.meal_index, r.meal_type.value, r.item_id)

# %%
structure_of(log)

# %% [markdown]
# ## The full cohort
#
# Fifteen profiles with 80 subjects each and four weeks per subject.

# %%
ds = generate_dataset(profiles, pool, seed=42, n_weeks=4, workers=4)
print(ds.n_subjects, "subjects,", len(ds.logs), "weekly logs")
print(Counter(lg.ground_truth.value for lg in ds.logs))
print("soft fallbacks:", ds.report)
