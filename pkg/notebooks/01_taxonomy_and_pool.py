# %% [markdown]
# # Food taxonomy and the item pool
#
# The taxonomy has three tiers: nutritional level, category, subcategory.
# Some subcategories hang straight off a level and some categories have no
# subcategories, so a leaf is a `(level, category, subcategory)` triple
# with optional names.

# %%
from collections import Counter

from dietsynth import GroupSelector, Region, Taxonomy, load_default_pool, query

tax = Taxonomy.default()
print(len(tax.leaves), "leaves,", len(tax.categories), "categories,", len(tax.subcategories), "subcategories")
Counter(leaf.level for leaf in tax.leaves)

# %% [markdown]
# Every node can be addressed with a selector.  `ancestors` lists the
# selectors above a leaf, most specific first.

# %%
leaf = tax.leaves_under(GroupSelector.subcategory("Red Meat"))[0]
print(leaf, "->", [str(s) for s in tax.ancestors(leaf)])
loose = tax.leaves_under(GroupSelector.subcategory("Sushi"))[0]
print(loose, "->", [str(s) for s in tax.ancestors(loose)])

# %% [markdown]
# ## The bundled pool
#
# Items carry one leaf, a set of regions and the meal types they may be
# served as.  `International` items are available everywhere.

# %%
pool = load_default_pool()
print(len(pool), "items, manifest sha256", pool.source_hash[:12])
pool.get("apple")

# %%
for region in (Region.Europe, Region.EastSoutheastAsia):
    sushi = query(pool, GroupSelector.subcategory("Sushi"), region)
    print(region.value, [it.id for it in sushi])

# %%
fruit_eu = query(pool, GroupSelector.category("Fruits"), Region.Europe)
level5_eu = query(pool, GroupSelector.level(5), Region.Europe)
print(len(fruit_eu), "fruits within", len(level5_eu), "level-5 items")
assert set(fruit_eu) <= set(level5_eu)
