import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import level_params, profile_doc
from dietsynth import ConfigError, GroupSelector, ProfileType, parse_profiles, resolve_effective_params, serialize_profiles
from dietsynth.profiles import Regularity
from dietsynth.taxonomy import Taxonomy, Tier

TAX = Taxonomy.default()


def parse_one(food_params=None, **kw):
    return parse_profiles({"profiles": [profile_doc(food_params or level_params(), **kw)]})[0]


def test_fixture_has_fifteen_profiles(profiles):
    assert len(profiles) == 15
    assert sum(p.general.n_subjects for p in profiles) == 1200
    types = [p.profile_type for p in profiles]
    assert types.count(ProfileType.Healthy) == 4
    assert types.count(ProfileType.Unhealthy) == 4
    assert types.count(ProfileType.Medium) == 4
    assert types.count(ProfileType.Variable) == 3


def test_levels_only_profile_parses():
    p = parse_one(n_subjects=80)
    assert p.general.n_subjects == 80
    assert (p.general.meals_range.min, p.general.meals_range.max) == (3, 5)
    assert p.general.regularity is Regularity.Regular


def test_missing_level_rejected():
    params = [fp for fp in level_params() if fp["selector"]["value"] != 4]
    with pytest.raises(ConfigError, match=r"profile 'p'.*missing level.*4"):
        parse_one(params)


def test_secondary_forces_irregular(by_id):
    p = by_id["4.3"]
    assert p.general.secondary.profile_id == "1"
    assert p.general.secondary.fraction == Fraction(1, 4)
    assert p.general.regularity is Regularity.Irregular


def test_secondary_id_alias():
    doc = {"profiles": [
        profile_doc(level_params(), pid="a"),
        profile_doc(level_params(), pid="b", secondary={"id": "a", "fraction": 0.25}),
    ]}
    b = parse_profiles(doc)[1]
    assert b.general.secondary.profile_id == "a"


@pytest.mark.parametrize(
    "general, msg",
    [
        ({"secondary": {"profile_id": "nope", "fraction": 0.5}}, "does not exist"),
        ({"secondary": {"profile_id": "p", "fraction": 0.5}}, "itself"),
        ({"secondary": {"profile_id": "p", "fraction": 1.0}}, "strictly between"),
        ({"regularity": "Irregular"}, "needs a secondary"),
    ],
)
def test_secondary_validation(general, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_one(**general)


@pytest.mark.parametrize(
    "kw, msg",
    [
        (dict(meals=(2, 5)), "meals_range"),
        (dict(mains=(1, 4)), "main_meals_range"),
        (dict(meals=(3, 5), mains=(2, 4)), "main_meals_range"),
        (dict(meals=(3, 3), mains=(1, 2), n_subjects=0), "n_subjects"),
    ],
)
def test_general_bounds(kw, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_one(**kw)


def test_all_meals_main_is_allowed():
    p = parse_one(meals=(3, 3), mains=(3, 3))
    assert p.general.main_meals_range.max == p.general.meals_range.min == 3


def test_duplicate_and_unknown_selectors():
    dup = level_params() + [level_params()[0]]
    with pytest.raises(ConfigError, match="twice"):
        parse_one(dup)
    bad = level_params() + [{"selector": {"tier": "category", "value": "Citrus"}, "unit": "Daily", "range": [1, 2]}]
    with pytest.raises(ConfigError, match="Citrus"):
        parse_one(bad)


def test_bad_range_and_json():
    params = level_params()
    params[0]["range"] = [3, 1]
    with pytest.raises(ConfigError):
        parse_one(params)
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_profiles("{not json")


def test_duplicate_profile_ids():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_profiles({"profiles": [profile_doc(level_params()), profile_doc(level_params())]})


def test_round_trip(profiles):
    again = parse_profiles(json.loads(json.dumps(serialize_profiles(profiles))))
    assert again == profiles


def test_category_overrides_level():
    params = level_params({5: (2, 4)}, unit="Daily") + [
        {"selector": {"tier": "category", "value": "Fruits"}, "unit": "Daily", "range": [4, 6]}
    ]
    eff = resolve_effective_params(parse_one(params), TAX)
    fruits = GroupSelector.category("Fruits")
    for leaf in TAX.leaves_under(fruits):
        assert eff.owner_of(leaf) == fruits
    for leaf in TAX.leaves_under(GroupSelector.category("Vegetables")):
        assert eff.owner_of(leaf) == GroupSelector.level(5)
    assert eff.group(GroupSelector.level(5)).leaves.isdisjoint(TAX.leaves_under(fruits))


def test_levels_only_every_leaf_owned_by_level():
    eff = resolve_effective_params(parse_one(), TAX)
    for leaf in TAX.leaves:
        assert eff.owner_of(leaf) == GroupSelector.level(leaf.level)


def test_subcategory_overrides_level():
    sushi = GroupSelector.subcategory("Sushi")
    params = level_params() + [{"selector": sushi.to_json(), "unit": "Weekly", "range": [0, 1]}]
    eff = resolve_effective_params(parse_one(params), TAX)
    level4 = set(TAX.leaves_under(GroupSelector.level(4)))
    sushi_leaves = set(TAX.leaves_under(sushi))
    # tree-walk oracle: climb from each leaf until a configured node is hit
    for leaf in level4:
        expected = sushi if leaf.subcategory == "Sushi" else GroupSelector.level(4)
        assert eff.owner_of(leaf) == expected
    assert eff.group(GroupSelector.level(4)).leaves == frozenset(level4 - sushi_leaves)


def test_fully_overridden_parent_drops_out():
    # a category whose every subcategory is configured owns nothing
    cat = next(c for c in TAX.categories if all(l.subcategory for l in TAX.leaves_under(GroupSelector.category(c))))
    subs = sorted({l.subcategory for l in TAX.leaves_under(GroupSelector.category(cat))})
    params = level_params() + [{"selector": {"tier": "category", "value": cat}, "unit": "Weekly", "range": [1, 1]}]
    params += [{"selector": {"tier": "subcategory", "value": s}, "unit": "Weekly", "range": [0, 1]} for s in subs]
    eff = resolve_effective_params(parse_one(params), TAX)
    assert GroupSelector.category(cat) not in eff.owners


NON_LEVEL = [s for s in TAX.selectors() if s.tier is not Tier.Level]


@st.composite
def configs(draw):
    chosen = draw(st.lists(st.sampled_from(NON_LEVEL), unique=True, max_size=25))
    params = level_params()
    for sel in chosen:
        lo = draw(st.integers(0, 3))
        params.append({"selector": sel.to_json(), "unit": draw(st.sampled_from(["Daily", "Weekly"])),
                       "range": [lo, lo + draw(st.integers(0, 3))]})
    return parse_one(params)


@settings(max_examples=200, deadline=None)
@given(configs())
def test_most_specific_configured_ancestor_owns(profile):
    eff = resolve_effective_params(profile, TAX)
    configured = {p.selector for p in profile.food_params}
    spec = {Tier.Subcategory: 2, Tier.Category: 1, Tier.Level: 0}
    for leaf in TAX.leaves:
        covering = [s for s in configured if TAX.contains(s, leaf)]
        best = max(covering, key=lambda s: spec[s.tier])
        assert eff.owner_of(leaf) == best
        assert all(spec[s.tier] < spec[best.tier] for s in covering if s != best)

    # quotas partition the leaves; a parent never counts a leaf claimed below it
    seen = set()
    for g in eff.groups:
        assert g.leaves and seen.isdisjoint(g.leaves)
        seen |= g.leaves
        under = set(TAX.leaves_under(g.owner))
        claimed_below = {
            leaf for s in configured if spec[s.tier] > spec[g.owner.tier]
            for leaf in TAX.leaves_under(s) if leaf in under
        }
        assert g.leaves == frozenset(under - claimed_below)
    assert seen == set(TAX.leaves)
