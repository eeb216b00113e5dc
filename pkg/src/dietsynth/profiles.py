"""Eating-behaviour profiles: parsing, validation and hierarchy resolution.

A profile carries six general parameters (subjects, meals, main meals,
region slots, regularity, secondary profile) and a set of food-group
parameters.  Each food-group parameter gives a daily or weekly frequency
range for one taxonomy node.  When nodes at several tiers are configured,
the most specific one governs the leaves below it and its subtree is removed
from the quota of every ancestor.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .taxonomy import LEVELS, GroupSelector, Leaf, Region, Taxonomy, parse_enum, parse_region

MEALS_BOUNDS = (3, 5)
MAIN_MEALS_BOUNDS = (1, 3)

DEFAULT_REGION_SLOTS = tuple(Region.specific()) + (Region.International, Region.International)


class FrequencyUnit(str, enum.Enum):
    Daily = "Daily"
    Weekly = "Weekly"

    @property
    def days(self) -> int:
        return 7 if self is FrequencyUnit.Daily else 1


class ProfileType(str, enum.Enum):
    Healthy = "Healthy"
    Unhealthy = "Unhealthy"
    Medium = "Medium"
    Variable = "Variable"


class Regularity(str, enum.Enum):
    Regular = "Regular"
    Irregular = "Irregular"


@dataclass(frozen=True)
class FreqRange:
    min: int
    max: int

    def __post_init__(self):
        for v in (self.min, self.max):
            if isinstance(v, bool) or not isinstance(v, int) or v < 0:
                raise ConfigError(f"frequency bounds must be non-negative integers, got {v!r}")
        if self.min > self.max:
            raise ConfigError(f"range min {self.min} exceeds max {self.max}")

    @classmethod
    def from_json(cls, obj) -> "FreqRange":
        if isinstance(obj, (list, tuple)) and len(obj) == 2:
            return cls(obj[0], obj[1])
        if isinstance(obj, dict) and "min" in obj and "max" in obj:
            return cls(obj["min"], obj["max"])
        raise ConfigError(f"range must be {{min, max}} or [min, max]: {obj!r}")

    def to_json(self) -> dict:
        return {"min": self.min, "max": self.max}

    def __contains__(self, value) -> bool:
        return self.min <= value <= self.max

    def within(self, lo: int, hi: int) -> bool:
        return lo <= self.min and self.max <= hi


@dataclass(frozen=True)
class FoodGroupParam:
    selector: GroupSelector
    unit: FrequencyUnit
    range: FreqRange

    @property
    def weekly_range(self) -> FreqRange:
        return FreqRange(self.range.min * self.unit.days, self.range.max * self.unit.days)

    def to_json(self) -> dict:
        return {"selector": self.selector.to_json(), "unit": self.unit.value, "range": self.range.to_json()}


@dataclass(frozen=True)
class SecondaryProfile:
    profile_id: str
    fraction: Fraction

    def to_json(self) -> dict:
        as_float = float(self.fraction)
        frac = as_float if Fraction(repr(as_float)) == self.fraction else str(self.fraction)
        return {"profile_id": self.profile_id, "fraction": frac}


@dataclass(frozen=True)
class GeneralParams:
    n_subjects: int
    meals_range: FreqRange
    main_meals_range: FreqRange
    region_slots: tuple = DEFAULT_REGION_SLOTS
    regularity: Regularity = Regularity.Regular
    secondary: Optional[SecondaryProfile] = None

    def to_json(self) -> dict:
        out = {
            "n_subjects": self.n_subjects,
            "meals_range": self.meals_range.to_json(),
            "main_meals_range": self.main_meals_range.to_json(),
            "region_slots": [r.value for r in self.region_slots],
            "regularity": self.regularity.value,
        }
        if self.secondary is not None:
            out["secondary"] = self.secondary.to_json()
        return out


@dataclass(frozen=True)
class ProfileConfig:
    id: str
    profile_type: ProfileType
    general: GeneralParams
    food_params: tuple
    weekly_resample: bool = False
    description: str = ""

    def param_for(self, selector: GroupSelector) -> Optional[FoodGroupParam]:
        for p in self.food_params:
            if p.selector == selector:
                return p
        return None

    def to_json(self) -> dict:
        out = {
            "id": self.id,
            "profile_type": self.profile_type.value,
            "general": self.general.to_json(),
            "food_params": [p.to_json() for p in self.food_params],
            "weekly_resample": self.weekly_resample,
        }
        if self.description:
            out["description"] = self.description
        return out


@dataclass(frozen=True)
class OwnedGroup:
    """One quota: the parameter and every leaf it governs."""

    param: FoodGroupParam
    leaves: frozenset

    @property
    def owner(self) -> GroupSelector:
        return self.param.selector


@dataclass(frozen=True)
class EffectiveParams:
    """Leaf → governing parameter, after applying the specificity rule."""

    profile_id: str
    by_leaf: dict = field(repr=False)
    groups: tuple = ()

    def owner_of(self, leaf: Leaf) -> GroupSelector:
        return self.by_leaf[leaf].selector

    def param_of(self, leaf: Leaf) -> FoodGroupParam:
        return self.by_leaf[leaf]

    def group(self, owner: GroupSelector) -> OwnedGroup:
        for g in self.groups:
            if g.owner == owner:
                return g
        raise KeyError(owner)

    @property
    def owners(self) -> list:
        return [g.owner for g in self.groups]


def _require(obj, key, where):
    if key not in obj:
        raise ConfigError(f"{where}: missing field {key!r}")
    return obj[key]


def _parse_fraction(value, where) -> Fraction:
    try:
        if isinstance(value, float):
            frac = Fraction(repr(value))
        elif isinstance(value, bool):
            raise ValueError
        else:
            frac = Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise ConfigError(f"{where}: secondary fraction must be a rational, got {value!r}") from None
    if not 0 < frac < 1:
        raise ConfigError(f"{where}: secondary fraction {value} must lie strictly between 0 and 1")
    return frac


def _parse_general(obj, where) -> GeneralParams:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: 'general' must be an object")
    n_subjects = _require(obj, "n_subjects", where)
    if isinstance(n_subjects, bool) or not isinstance(n_subjects, int) or n_subjects < 1:
        raise ConfigError(f"{where}: n_subjects must be a positive integer")
    meals = FreqRange.from_json(_require(obj, "meals_range", where))
    mains = FreqRange.from_json(_require(obj, "main_meals_range", where))
    if not meals.within(*MEALS_BOUNDS):
        raise ConfigError(f"{where}: meals_range must lie within {list(MEALS_BOUNDS)}")
    if not mains.within(*MAIN_MEALS_BOUNDS):
        raise ConfigError(f"{where}: main_meals_range must lie within {list(MAIN_MEALS_BOUNDS)}")
    if mains.max > meals.min:
        raise ConfigError(f"{where}: main_meals_range max {mains.max} exceeds meals_range min {meals.min}")

    slots = obj.get("region_slots")
    if slots is None:
        region_slots = DEFAULT_REGION_SLOTS
    else:
        if not isinstance(slots, list) or not slots:
            raise ConfigError(f"{where}: region_slots must be a non-empty list")
        region_slots = tuple(parse_region(r) for r in slots)

    secondary = None
    if obj.get("secondary") is not None:
        sec = obj["secondary"]
        if not isinstance(sec, dict):
            raise ConfigError(f"{where}: secondary must be an object")
        sec_id = sec.get("profile_id", sec.get("id"))
        if not isinstance(sec_id, str) or not sec_id:
            raise ConfigError(f"{where}: secondary needs a profile_id")
        secondary = SecondaryProfile(sec_id, _parse_fraction(_require(sec, "fraction", where), where))

    regularity = obj.get("regularity")
    if regularity is not None:
        regularity = parse_enum(Regularity, regularity, "regularity")
    if secondary is not None:
        regularity = Regularity.Irregular
    elif regularity is Regularity.Irregular:
        raise ConfigError(f"{where}: irregular profile needs a secondary profile")
    else:
        regularity = Regularity.Regular
    return GeneralParams(n_subjects, meals, mains, region_slots, regularity, secondary)


def _parse_profile(obj, taxonomy: Taxonomy) -> ProfileConfig:
    if not isinstance(obj, dict):
        raise ConfigError(f"profile entry must be an object: {obj!r}")
    pid = _require(obj, "id", "profile")
    if not isinstance(pid, str) or not pid:
        raise ConfigError(f"profile id must be a non-empty string: {pid!r}")
    where = f"profile {pid!r}"
    ptype = parse_enum(ProfileType, _require(obj, "profile_type", where), "profile type")
    general = _parse_general(_require(obj, "general", where), where)

    params = []
    seen = set()
    for raw in _require(obj, "food_params", where):
        try:
            selector = GroupSelector.from_json(_require(raw, "selector", where))
            taxonomy.check(selector)
            unit = parse_enum(FrequencyUnit, _require(raw, "unit", where), "frequency unit")
            rng = FreqRange.from_json(_require(raw, "range", where))
        except ConfigError as exc:
            raise ConfigError(f"{where}: {exc}") from None
        if selector in seen:
            raise ConfigError(f"{where}: parameter for {selector} given twice")
        seen.add(selector)
        params.append(FoodGroupParam(selector, unit, rng))

    missing = [n for n in LEVELS if GroupSelector.level(n) not in seen]
    if missing:
        raise ConfigError(f"{where}: missing level parameter(s) {', '.join(map(str, missing))}")
    resample = obj.get("weekly_resample", False)
    if not isinstance(resample, bool):
        raise ConfigError(f"{where}: weekly_resample must be a boolean")
    return ProfileConfig(
        id=pid,
        profile_type=ptype,
        general=general,
        food_params=tuple(params),
        weekly_resample=resample,
        description=obj.get("description", ""),
    )


def _read_doc(doc):
    if isinstance(doc, (str, Path)) and not (isinstance(doc, str) and doc.lstrip().startswith("{")):
        doc = Path(doc).read_text(encoding="utf-8")
    if isinstance(doc, bytes):
        doc = doc.decode("utf-8")
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"profile file is not valid JSON: {exc}") from None
    return doc


def parse_profiles(doc, taxonomy: Optional[Taxonomy] = None) -> list:
    """Parse a ``{"profiles": [...]}`` document into validated profiles.

    ``doc`` may be a path, a JSON string or an already decoded object.
    """
    taxonomy = taxonomy or Taxonomy.default()
    doc = _read_doc(doc)
    if not isinstance(doc, dict) or not isinstance(doc.get("profiles"), list):
        raise ConfigError("profile document must be an object with a 'profiles' list")
    profiles = [_parse_profile(p, taxonomy) for p in doc["profiles"]]

    ids = [p.id for p in profiles]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ConfigError(f"duplicate profile ids: {', '.join(dupes)}")
    for p in profiles:
        sec = p.general.secondary
        if sec is None:
            continue
        if sec.profile_id not in ids:
            raise ConfigError(f"profile {p.id!r}: secondary profile {sec.profile_id!r} does not exist")
        if sec.profile_id == p.id:
            raise ConfigError(f"profile {p.id!r}: secondary profile cannot be itself")
    return profiles


def serialize_profiles(profiles) -> dict:
    return {"profiles": [p.to_json() for p in profiles]}


def default_profiles_path() -> Path:
    return Path(str(resources.files("dietsynth.data").joinpath("profiles.json")))


def load_default_profiles() -> list:
    return parse_profiles(default_profiles_path())


def resolve_effective_params(profile: ProfileConfig, pool) -> EffectiveParams:
    """Assign every taxonomy leaf to its most specific configured ancestor.

    ``pool`` may be a ``FoodPool`` or a bare ``Taxonomy``.  Parameters that end
    up governing no leaf at all (every child overridden) drop out.
    """
    taxonomy = getattr(pool, "taxonomy", pool)
    configured = {}
    for p in profile.food_params:
        if not taxonomy.has_node(p.selector):
            raise ConfigError(f"profile {profile.id!r}: {p.selector} is absent from the pool taxonomy")
        configured[p.selector] = p

    by_leaf = {}
    owned = {}
    for leaf in taxonomy.leaves:
        for anc in taxonomy.ancestors(leaf):
            if anc in configured:
                by_leaf[leaf] = configured[anc]
                owned.setdefault(anc, set()).add(leaf)
                break
        else:
            # unreachable for validated profiles: every level is configured
            raise ConfigError(f"profile {profile.id!r}: no parameter governs {leaf}")

    groups = tuple(
        OwnedGroup(configured[sel], frozenset(leaves))
        for sel, leaves in sorted(owned.items(), key=lambda kv: kv[0].sort_key())
    )
    return EffectiveParams(profile.id, by_leaf, groups)
