# %% [markdown]
# # Profiles and the specificity rule
#
# A profile sets a frequency range for every nutritional level and may add
# ranges for categories or subcategories.  The most specific configured
# node owns a leaf, and its leaves no longer count toward any ancestor.

# %%
from dietsynth import GroupSelector, load_default_profiles, parse_profiles, resolve_effective_params
from dietsynth.taxonomy import Taxonomy

tax = Taxonomy.default()
profiles = {p.id: p for p in load_default_profiles()}
for p in profiles.values():
    print(f"{p.id:>4}  {p.profile_type.value:<9} {p.description}")

# %% [markdown]
# Profile 1 configures level 5 (vegetables) and the Fruits category
# separately, so level 5 only governs what is left of it.

# %%
eff = resolve_effective_params(profiles["1"], tax)
for g in eff.groups:
    r = g.param.range
    print(f"{str(g.owner):<32} {g.param.unit.value:<6} [{r.min}, {r.max}]  {len(g.leaves):>2} leaves")

# %% [markdown]
# A hand-written profile: a level-4 quota with a stricter Sushi quota inside.

# %%
def lv(n, lo, hi):
    return {"selector": {"tier": "level", "value": n}, "unit": "Weekly", "range": [lo, hi]}


doc = {"profiles": [{
    "id": "demo",
    "profile_type": "Healthy",
    "general": {"n_subjects": 10, "meals_range": [3, 5], "main_meals_range": [1, 3]},
    "food_params": [lv(n, 1, 3) for n in range(1, 7)]
    + [{"selector": {"tier": "subcategory", "value": "Sushi"}, "unit": "Weekly", "range": [0, 1]}],
}]}
demo = resolve_effective_params(parse_profiles(doc)[0], tax)
sushi = tax.leaves_under(GroupSelector.subcategory("Sushi"))[0]
print("Sushi owned by", demo.owner_of(sushi))
print("level 4 keeps", len(demo.group(GroupSelector.level(4)).leaves), "of",
      len(tax.leaves_under(GroupSelector.level(4))), "leaves")

# %% [markdown]
# Variable profiles borrow another profile's parameters for a fixed share
# of their weeks.

# %%
for pid in ("4.1", "4.2", "4.3"):
    sec = profiles[pid].general.secondary
    print(pid, "->", sec.profile_id, float(sec.fraction), profiles[pid].general.regularity.value)
