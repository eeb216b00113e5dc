"""Weekly intake analysis.

A week of meal records is reduced to nine frequencies: daily averages for
fruits, vegetables and cereals, and weekly counts for meat, fish & seafood,
eggs, legumes, level-1 and level-2 products.  Group membership is data (a
mapping file); an item may count in several groups, e.g. a red-meat dish is
both "meat" and "level_2".

Labels come from a recognizer.  The default one is a pass-through that
returns the taxonomy labels the item was generated with.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Protocol

import numpy as np

from .errors import ConfigError, DataError
from .profiles import FrequencyUnit, ProfileType
from .taxonomy import FoodPool, Leaf, parse_enum

GROUP_NAMES = (
    "fruits", "vegetables", "cereals",
    "meat", "fish_seafood", "eggs", "legumes", "level_1", "level_2",
)
GROUP_UNITS = (FrequencyUnit.Daily,) * 3 + (FrequencyUnit.Weekly,) * 6


@dataclass(frozen=True)
class GroupRule:
    name: str
    unit: FrequencyUnit
    levels: frozenset = frozenset()
    categories: frozenset = frozenset()
    subcategories: frozenset = frozenset()

    def matches(self, leaf: Leaf) -> bool:
        return (
            leaf.level in self.levels
            or (leaf.category is not None and leaf.category in self.categories)
            or (leaf.subcategory is not None and leaf.subcategory in self.subcategories)
        )

    def to_json(self) -> dict:
        return {
            "group": self.name,
            "unit": self.unit.value,
            "match": {
                "levels": sorted(self.levels),
                "categories": sorted(self.categories),
                "subcategories": sorted(self.subcategories),
            },
        }


@dataclass(frozen=True)
class GroupMapping:
    rules: tuple

    def __post_init__(self):
        names = tuple(r.name for r in self.rules)
        if names != GROUP_NAMES:
            raise ConfigError(f"mapping must define exactly the groups {list(GROUP_NAMES)} in order, got {list(names)}")
        units = tuple(r.unit for r in self.rules)
        if units != GROUP_UNITS:
            raise ConfigError("mapping units must be Daily for the first three groups and Weekly for the rest")

    @classmethod
    def from_json(cls, doc, taxonomy=None) -> "GroupMapping":
        if isinstance(doc, dict):
            doc = doc.get("groups")
        if not isinstance(doc, list):
            raise ConfigError("mapping must be a JSON array of 9 group rules")
        rules = []
        for obj in doc:
            try:
                match = obj.get("match", {})
                rule = GroupRule(
                    name=obj["group"],
                    unit=parse_enum(FrequencyUnit, obj["unit"], "frequency unit"),
                    levels=frozenset(int(v) for v in match.get("levels", [])),
                    categories=frozenset(match.get("categories", [])),
                    subcategories=frozenset(match.get("subcategories", [])),
                )
            except (AttributeError, KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"malformed mapping rule {obj!r}") from None
            if taxonomy is not None:
                bad = [c for c in rule.categories if c not in taxonomy.categories]
                bad += [s for s in rule.subcategories if s not in taxonomy.subcategories]
                if bad:
                    raise ConfigError(f"mapping rule {rule.name!r} names unknown nodes: {bad}")
            rules.append(rule)
        return cls(tuple(rules))

    def to_json(self) -> list:
        return [r.to_json() for r in self.rules]


def load_mapping(path=None, taxonomy=None) -> GroupMapping:
    if path is None:
        text = resources.files("dietsynth.data").joinpath("mapping.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"mapping is not valid JSON: {exc}") from None
    return GroupMapping.from_json(doc, taxonomy)


@dataclass(frozen=True)
class IntakeVector:
    """Nine group frequencies: per day for the first three, per week for the rest."""

    values: tuple

    @classmethod
    def from_counts(cls, counts) -> "IntakeVector":
        return cls(tuple(c / u.days for c, u in zip(counts, GROUP_UNITS)))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __getitem__(self, name: str) -> float:
        return self.values[GROUP_NAMES.index(name)]


class Recognizer(Protocol):
    def labels(self, item_id: str) -> tuple: ...


class PassThroughRecognizer:
    """Returns the ground-truth labels of the pool item."""

    def __init__(self, pool: FoodPool):
        self.pool = pool
        self.taxonomy = pool.taxonomy

    def labels(self, item_id: str) -> tuple:
        try:
            return tuple(self.pool.get(item_id).leaf)
        except KeyError:
            raise DataError(f"unknown item id {item_id!r}") from None


class NoisyRecognizer(PassThroughRecognizer):
    """Pass-through that swaps the label for a random other leaf with probability ``flip_rate``."""

    def __init__(self, pool: FoodPool, flip_rate: float, seed: int = 0):
        super().__init__(pool)
        if not 0 <= flip_rate <= 1:
            raise ValueError("flip_rate must lie in [0, 1]")
        self.flip_rate = flip_rate
        self.rng = np.random.default_rng(seed)
        self._leaves = self.taxonomy.leaves

    def labels(self, item_id: str) -> tuple:
        true = super().labels(item_id)
        if self.rng.random() >= self.flip_rate:
            return true
        others = [leaf for leaf in self._leaves if tuple(leaf) != true]
        return tuple(others[int(self.rng.integers(len(others)))])


def recognize(record, recognizer) -> Leaf:
    """Labels for one meal record, validated against the taxonomy."""
    item_id = getattr(record, "item_id", record)
    try:
        labels = recognizer.labels(item_id)
    except DataError:
        raise
    except Exception as exc:
        raise DataError(f"recognizer failed on item {item_id!r}: {exc}") from exc
    taxonomy = getattr(recognizer, "taxonomy", None)
    if taxonomy is None:
        return Leaf(*labels)
    try:
        return taxonomy.resolve(*labels)
    except (ConfigError, TypeError, ValueError):
        raise DataError(f"recognizer returned unknown labels {labels!r} for item {item_id!r}") from None


def aggregate_week(log, mapping: GroupMapping, recognizer) -> IntakeVector:
    """Count the records of one weekly log into the nine intake groups.

    ``recognizer`` may be a ``FoodPool``, which is wrapped in a pass-through.
    """
    if isinstance(recognizer, FoodPool):
        recognizer = PassThroughRecognizer(recognizer)
    counts = [0] * len(mapping.rules)
    for record in log.records:
        leaf = recognize(record, recognizer)
        for j, rule in enumerate(mapping.rules):
            if rule.matches(leaf):
                counts[j] += 1
    return IntakeVector.from_counts(counts)


@dataclass(frozen=True)
class IntakeRow:
    subject_id: str
    profile_id: str
    week: int
    intake: IntakeVector
    profile_type: ProfileType
    ground_truth: ProfileType


def analyze_logs(logs, mapping: GroupMapping, recognizer) -> list:
    if isinstance(recognizer, FoodPool):
        recognizer = PassThroughRecognizer(recognizer)
    return [
        IntakeRow(lg.subject_id, lg.profile_id, lg.week, aggregate_week(lg, mapping, recognizer),
                  lg.profile_type, lg.ground_truth)
        for lg in logs
    ]


INTAKE_COLUMNS = ("subject_id", "profile_id", "week") + GROUP_NAMES + ("profile_type", "ground_truth")


def write_intakes_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INTAKE_COLUMNS)
        for r in rows:
            w.writerow(
                [r.subject_id, r.profile_id, r.week]
                + [repr(float(v)) for v in r.intake.values]
                + [r.profile_type.value, r.ground_truth.value]
            )


def read_intakes_csv(path) -> list:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(INTAKE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                values = tuple(float(row[g]) for g in GROUP_NAMES)
                if any(v < 0 or v != v for v in values):
                    raise ValueError("intake values must be non-negative numbers")
                out.append(
                    IntakeRow(
                        row["subject_id"], row["profile_id"], int(row["week"]), IntakeVector(values),
                        ProfileType(row["profile_type"]), ProfileType(row["ground_truth"]),
                    )
                )
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
    return out
