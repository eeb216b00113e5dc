"""Food taxonomy and the food-item pool sampled by the synthesizer.

The taxonomy is a three-tier tree: nutritional level (1..6), category and
subcategory.  Some subcategories hang directly from a level and some
categories have no subcategories, so a *leaf* is a ``(level, category,
subcategory)`` triple where either name may be ``None``.  Items in the pool
are attached to exactly one leaf.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Union

from .errors import ConfigError

LEVELS = (1, 2, 3, 4, 5, 6)


class Region(str, enum.Enum):
    International = "International"
    NorthernAmerica = "NorthernAmerica"
    LatinAmericaCaribbean = "LatinAmericaCaribbean"
    Europe = "Europe"
    AfricaWestAsia = "AfricaWestAsia"
    CentralAsia = "CentralAsia"
    EastSoutheastAsia = "EastSoutheastAsia"

    @classmethod
    def specific(cls):
        return [r for r in cls if r is not cls.International]


class MealType(str, enum.Enum):
    MainMeal = "MainMeal"
    Appetizer = "Appetizer"
    Snack = "Snack"
    Dessert = "Dessert"
    SideDish = "SideDish"
    Bread = "Bread"
    Drinks = "Drinks"


class Tier(str, enum.Enum):
    Level = "level"
    Category = "category"
    Subcategory = "subcategory"

    @property
    def specificity(self) -> int:
        return {"level": 0, "category": 1, "subcategory": 2}[self.value]


def parse_enum(enum_cls, value, what):
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(value)
    except ValueError:
        pass
    # tolerate case differences ("daily", "LEVEL") but nothing fuzzier
    for member in enum_cls:
        if isinstance(value, str) and value.lower() in (member.value.lower(), member.name.lower()):
            return member
    raise ConfigError(f"unknown {what}: {value!r}")


def parse_region(value) -> Region:
    return parse_enum(Region, value, "region")


def parse_meal_type(value) -> MealType:
    return parse_enum(MealType, value, "meal type")


@dataclass(frozen=True)
class GroupSelector:
    """Names one node of the taxonomy: a level number, a category or a subcategory."""

    tier: Tier
    value: Union[int, str]

    def __post_init__(self):
        tier = parse_enum(Tier, self.tier, "selector tier")
        object.__setattr__(self, "tier", tier)
        if tier is Tier.Level:
            if isinstance(self.value, bool) or not isinstance(self.value, int):
                try:
                    object.__setattr__(self, "value", int(self.value))
                except (TypeError, ValueError):
                    raise ConfigError(f"level selector needs an integer, got {self.value!r}") from None
            if self.value not in LEVELS:
                raise ConfigError(f"unknown nutritional level: {self.value}")
        elif not isinstance(self.value, str) or not self.value:
            raise ConfigError(f"{tier.value} selector needs a non-empty name, got {self.value!r}")

    @classmethod
    def level(cls, n: int) -> "GroupSelector":
        return cls(Tier.Level, n)

    @classmethod
    def category(cls, name: str) -> "GroupSelector":
        return cls(Tier.Category, name)

    @classmethod
    def subcategory(cls, name: str) -> "GroupSelector":
        return cls(Tier.Subcategory, name)

    @classmethod
    def from_json(cls, obj) -> "GroupSelector":
        if not isinstance(obj, dict) or "tier" not in obj or "value" not in obj:
            raise ConfigError(f"selector must be an object with 'tier' and 'value': {obj!r}")
        return cls(obj["tier"], obj["value"])

    def to_json(self) -> dict:
        return {"tier": self.tier.value, "value": self.value}

    def sort_key(self):
        return (self.tier.specificity, str(self.value))

    def __str__(self):
        return f"{self.tier.value}:{self.value}"


class Leaf(NamedTuple):
    level: int
    category: Optional[str]
    subcategory: Optional[str]

    def __str__(self):
        return " / ".join(str(p) for p in self if p is not None)


class Taxonomy:
    """The level → category → subcategory tree, loaded from data."""

    def __init__(self, leaves: Iterable[Leaf]):
        self.leaves = tuple(leaves)
        self._leaf_set = frozenset(self.leaves)
        if len(self._leaf_set) != len(self.leaves):
            raise ConfigError("taxonomy contains duplicate leaves")
        self._category_level = {}
        self._subcategory_leaf = {}
        for leaf in self.leaves:
            if leaf.level not in LEVELS:
                raise ConfigError(f"taxonomy leaf {leaf} has invalid level")
            if leaf.category is None and leaf.subcategory is None:
                raise ConfigError(f"taxonomy leaf at level {leaf.level} has no name")
            if leaf.category is not None:
                prev = self._category_level.setdefault(leaf.category, leaf.level)
                if prev != leaf.level:
                    raise ConfigError(f"category {leaf.category!r} appears under two levels")
            if leaf.subcategory is not None:
                if leaf.subcategory in self._subcategory_leaf:
                    raise ConfigError(f"subcategory {leaf.subcategory!r} appears twice")
                self._subcategory_leaf[leaf.subcategory] = leaf
        missing = set(LEVELS) - {leaf.level for leaf in self.leaves}
        if missing:
            raise ConfigError(f"taxonomy has no leaves for levels {sorted(missing)}")

    @classmethod
    def from_json(cls, doc: dict) -> "Taxonomy":
        leaves = []
        for lvl in doc["levels"]:
            level = int(lvl["level"])
            for cat in lvl.get("categories", []):
                subs = cat.get("subcategories", [])
                if subs:
                    leaves.extend(Leaf(level, cat["name"], s) for s in subs)
                else:
                    leaves.append(Leaf(level, cat["name"], None))
            leaves.extend(Leaf(level, None, s) for s in lvl.get("subcategories", []))
        return cls(leaves)

    @classmethod
    def default(cls) -> "Taxonomy":
        return _default_taxonomy()

    @property
    def categories(self) -> list:
        return sorted(self._category_level)

    @property
    def subcategories(self) -> list:
        return sorted(self._subcategory_leaf)

    def selectors(self) -> list:
        """Every node of the tree as a selector, least specific first."""
        out = [GroupSelector.level(n) for n in LEVELS]
        out += [GroupSelector.category(c) for c in self.categories]
        out += [GroupSelector.subcategory(s) for s in self.subcategories]
        return out

    def has_node(self, selector: GroupSelector) -> bool:
        if selector.tier is Tier.Level:
            return selector.value in LEVELS
        if selector.tier is Tier.Category:
            return selector.value in self._category_level
        return selector.value in self._subcategory_leaf

    def check(self, selector: GroupSelector) -> None:
        if not self.has_node(selector):
            raise ConfigError(f"unknown {selector.tier.value} {selector.value!r}")

    def contains(self, selector: GroupSelector, leaf: Leaf) -> bool:
        if selector.tier is Tier.Level:
            return leaf.level == selector.value
        if selector.tier is Tier.Category:
            return leaf.category == selector.value
        return leaf.subcategory == selector.value

    def leaves_under(self, selector: GroupSelector) -> tuple:
        self.check(selector)
        return tuple(leaf for leaf in self.leaves if self.contains(selector, leaf))

    def ancestors(self, leaf: Leaf) -> list:
        """Selectors whose subtree holds ``leaf``, most specific first."""
        out = []
        if leaf.subcategory is not None:
            out.append(GroupSelector.subcategory(leaf.subcategory))
        if leaf.category is not None:
            out.append(GroupSelector.category(leaf.category))
        out.append(GroupSelector.level(leaf.level))
        return out

    def resolve(self, level, category, subcategory) -> Leaf:
        leaf = Leaf(int(level), category or None, subcategory or None)
        if leaf not in self._leaf_set:
            raise ConfigError(f"({level}, {category!r}, {subcategory!r}) is not a taxonomy leaf")
        return leaf


@lru_cache(maxsize=None)
def _default_taxonomy() -> Taxonomy:
    text = resources.files("dietsynth.data").joinpath("taxonomy.json").read_text(encoding="utf-8")
    return Taxonomy.from_json(json.loads(text))


@dataclass(frozen=True)
class FoodItem:
    id: str
    name: str
    level: int
    category: Optional[str]
    subcategory: Optional[str]
    regions: frozenset
    meal_types: frozenset

    @property
    def leaf(self) -> Leaf:
        return Leaf(self.level, self.category, self.subcategory)

    def available_in(self, region: Region) -> bool:
        return region in self.regions or Region.International in self.regions

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "level": self.level,
            "category": self.category,
            "subcategory": self.subcategory,
            "regions": sorted(r.value for r in self.regions),
            "meal_types": sorted(m.value for m in self.meal_types),
        }


@dataclass(frozen=True)
class FoodPool:
    items: tuple
    taxonomy: Taxonomy = field(repr=False)
    source_hash: str = ""

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {item.id: item for item in self.items})
        by_leaf = {}
        for item in self.items:
            by_leaf.setdefault(item.leaf, []).append(item)
        object.__setattr__(self, "_by_leaf", {k: tuple(v) for k, v in by_leaf.items()})

    def __len__(self):
        return len(self.items)

    def __contains__(self, item_id):
        return item_id in self._by_id

    def get(self, item_id: str) -> FoodItem:
        return self._by_id[item_id]

    def items_in(self, leaves: Iterable[Leaf]) -> list:
        out = []
        for leaf in leaves:
            out.extend(self._by_leaf.get(leaf, ()))
        return sorted(out, key=lambda it: it.id)


def _parse_item(row, taxonomy: Taxonomy) -> FoodItem:
    if not isinstance(row, dict):
        raise ConfigError(f"manifest row must be an object: {row!r}")
    try:
        item_id = row["id"]
        level = row["level"]
    except KeyError as exc:
        raise ConfigError(f"manifest row missing field {exc}") from None
    if not isinstance(item_id, str) or not item_id:
        raise ConfigError(f"item id must be a non-empty string: {item_id!r}")
    if isinstance(level, bool) or not isinstance(level, int):
        raise ConfigError(f"item {item_id!r}: level must be an integer")
    leaf = taxonomy.resolve(level, row.get("category"), row.get("subcategory"))
    regions = frozenset(parse_region(r) for r in row.get("regions") or [])
    meal_types = frozenset(parse_meal_type(m) for m in row.get("meal_types") or [])
    if not regions:
        raise ConfigError(f"item {item_id!r} has no regions")
    if not meal_types:
        raise ConfigError(f"item {item_id!r} has no meal types")
    return FoodItem(
        id=item_id,
        name=row.get("name", item_id),
        level=leaf.level,
        category=leaf.category,
        subcategory=leaf.subcategory,
        regions=regions,
        meal_types=meal_types,
    )


def load_pool(manifest, taxonomy: Optional[Taxonomy] = None) -> FoodPool:
    """Build a validated pool from a manifest.

    ``manifest`` is a path to a JSON file, raw JSON bytes/str, or an already
    parsed list of item objects.
    """
    taxonomy = taxonomy or Taxonomy.default()
    if isinstance(manifest, Path) or (isinstance(manifest, str) and not manifest.lstrip().startswith("[")):
        raw = Path(manifest).read_bytes()
    elif isinstance(manifest, (bytes, str)):
        raw = manifest.encode("utf-8") if isinstance(manifest, str) else manifest
    else:
        raw = None
    if raw is not None:
        try:
            rows = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ConfigError(f"manifest is not valid UTF-8 JSON: {exc}") from None
    else:
        rows = manifest
        raw = json.dumps(rows, sort_keys=True, ensure_ascii=False).encode("utf-8")
    if not isinstance(rows, list):
        raise ConfigError("manifest must be a JSON array of items")

    items = []
    seen = set()
    for row in rows:
        item = _parse_item(row, taxonomy)
        if item.id in seen:
            raise ConfigError(f"duplicate item id {item.id!r}")
        seen.add(item.id)
        items.append(item)
    items.sort(key=lambda it: it.id)
    return FoodPool(tuple(items), taxonomy, hashlib.sha256(raw).hexdigest())


def default_manifest_path() -> Path:
    return Path(str(resources.files("dietsynth.data").joinpath("manifest.json")))


def load_default_pool() -> FoodPool:
    return load_pool(default_manifest_path())


def query(pool: FoodPool, selector: GroupSelector, region: Region) -> list:
    """Items under ``selector`` that can be served to a subject from ``region``.

    Sorted by id.
    """
    leaves = pool.taxonomy.leaves_under(selector)
    region = parse_region(region)
    return [item for item in pool.items_in(leaves) if item.available_in(region)]
