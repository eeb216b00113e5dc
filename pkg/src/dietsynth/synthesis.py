"""Cohort synthesis: subjects, weekly balancing and meal composition.

Every subject gets its own ``numpy.random.Generator`` seeded from a stable
hash of ``(master seed, subject id)``, so subjects can be generated in any
order or in parallel and the merged output is the same.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .errors import CapacityError, ConfigError, DataError, GenerationError
from .profiles import EffectiveParams, FrequencyUnit, ProfileConfig, ProfileType, resolve_effective_params
from .taxonomy import FoodPool, GroupSelector, MealType, Region, parse_region

log = logging.getLogger(__name__)

DAYS = 7

# Per-meal record slots: a main meal holds up to 4 dishes, any other meal 2.
MAIN_MEAL_SLOTS = (
    (MealType.MainMeal,),
    (MealType.SideDish, MealType.Bread, MealType.Appetizer),
    (MealType.Dessert,),
    (MealType.Drinks,),
)
LIGHT_MEAL_SLOTS = (
    (MealType.Snack, MealType.Dessert, MealType.Appetizer, MealType.Bread),
    (MealType.Drinks,),
)


class WeekKind(str, enum.Enum):
    Primary = "Primary"
    Secondary = "Secondary"


class SlotSpec(NamedTuple):
    meal_index: int
    position: int
    accepts: tuple
    main: bool


class SlotKey(NamedTuple):
    day: int
    meal_index: int
    position: int


def main_meal_indices(n_meals: int, n_main: int) -> tuple:
    """Which meals of the day are main meals, spread as evenly as possible."""
    if n_main == 1:
        return ((n_meals - 1) // 2,)
    return tuple(sorted({round(i * (n_meals - 1) / (n_main - 1)) for i in range(n_main)}))


def day_layout(n_meals: int, n_main: int) -> list:
    mains = set(main_meal_indices(n_meals, n_main))
    slots = []
    for m in range(n_meals):
        kinds = MAIN_MEAL_SLOTS if m in mains else LIGHT_MEAL_SLOTS
        slots.extend(SlotSpec(m, pos, accepts, m in mains) for pos, accepts in enumerate(kinds))
    return slots


def day_capacity(n_meals: int, n_main: int) -> int:
    return n_main * len(MAIN_MEAL_SLOTS) + (n_meals - n_main) * len(LIGHT_MEAL_SLOTS)


@dataclass(frozen=True)
class SubjectSpec:
    subject_id: str
    profile_id: str
    profile_type: ProfileType
    region: Region
    n_meals: int
    n_main_meals: int
    week_kinds: tuple
    week_types: tuple
    week_params: tuple = field(repr=False)
    sampled_freqs: tuple = field(repr=False)

    @property
    def n_weeks(self) -> int:
        return len(self.week_kinds)

    def params(self, week: int) -> EffectiveParams:
        return self.week_params[week - 1]

    def counts(self, week: int) -> dict:
        return self.sampled_freqs[week - 1]

    def unit(self, week: int, owner: GroupSelector) -> FrequencyUnit:
        return self.params(week).group(owner).param.unit


@dataclass(frozen=True)
class MealRecord:
    day: int
    meal_index: int
    meal_type: MealType
    item_id: str


@dataclass(frozen=True)
class WeeklyLog:
    subject_id: str
    profile_id: str
    week: int
    records: tuple
    ground_truth: ProfileType
    profile_type: ProfileType
    region: Optional[Region] = None


@dataclass
class GenerationReport:
    """Counts of soft fallbacks taken while composing meals."""

    routing_fallbacks: int = 0
    item_fallbacks: int = 0

    def merge(self, other: "GenerationReport") -> None:
        self.routing_fallbacks += other.routing_fallbacks
        self.item_fallbacks += other.item_fallbacks


@dataclass(frozen=True)
class Dataset:
    manifest_hash: str
    seed: int
    n_weeks: int
    logs: tuple
    subjects: tuple = field(default=(), repr=False)
    report: GenerationReport = field(default_factory=GenerationReport)

    @property
    def n_subjects(self) -> int:
        return len({lg.subject_id for lg in self.logs})


def subject_seed(seed: int, subject_id: str) -> int:
    digest = hashlib.blake2b(f"{int(seed)}:{subject_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _draw(rng: np.random.Generator, lo: int, hi: int) -> int:
    return int(rng.integers(lo, hi + 1))


def _sample_counts(eff: EffectiveParams, rng) -> dict:
    return {
        g.owner: _draw(rng, g.param.range.min, g.param.range.max) * g.param.unit.days
        for g in eff.groups
    }


def instantiate_subject(
    profile: ProfileConfig,
    region,
    n_weeks: int,
    rng: np.random.Generator,
    *,
    pool=None,
    secondary: Optional[ProfileConfig] = None,
    subject_id: str = "0001",
    effective: Optional[dict] = None,
) -> SubjectSpec:
    """Draw one subject's meal structure, week kinds and weekly counts.

    ``pool`` (a FoodPool or Taxonomy) is only needed when ``effective``, a
    cache of resolved parameters keyed by profile id, does not already hold
    the profiles involved.
    """
    if n_weeks < 1:
        raise ValueError("n_weeks must be at least 1")
    sec_spec = profile.general.secondary
    if sec_spec is not None and (secondary is None or secondary.id != sec_spec.profile_id):
        raise ConfigError(f"profile {profile.id!r} needs its secondary profile {sec_spec.profile_id!r}")

    effective = dict(effective or {})

    def eff_for(p):
        if p.id not in effective:
            if pool is None:
                from .taxonomy import Taxonomy

                effective[p.id] = resolve_effective_params(p, Taxonomy.default())
            else:
                effective[p.id] = resolve_effective_params(p, pool)
        return effective[p.id]

    g = profile.general
    n_meals = _draw(rng, g.meals_range.min, g.meals_range.max)
    n_main = _draw(rng, g.main_meals_range.min, g.main_meals_range.max)

    kinds = [WeekKind.Primary] * n_weeks
    if sec_spec is not None:
        n_secondary = math.ceil(sec_spec.fraction * n_weeks)
        for w in rng.choice(n_weeks, size=min(n_secondary, n_weeks), replace=False):
            kinds[int(w)] = WeekKind.Secondary

    once = {}
    week_params, week_freqs, week_types = [], [], []
    for kind in kinds:
        p = profile if kind is WeekKind.Primary else secondary
        eff = eff_for(p)
        if p.weekly_resample:
            counts = _sample_counts(eff, rng)
        else:
            if p.id not in once:
                once[p.id] = _sample_counts(eff, rng)
            counts = once[p.id]
        week_params.append(eff)
        week_freqs.append(counts)
        week_types.append(p.profile_type)

    return SubjectSpec(
        subject_id=subject_id,
        profile_id=profile.id,
        profile_type=profile.profile_type,
        region=parse_region(region),
        n_meals=n_meals,
        n_main_meals=n_main,
        week_kinds=tuple(kinds),
        week_types=tuple(week_types),
        week_params=tuple(week_params),
        sampled_freqs=tuple(week_freqs),
    )


def _spread_over_days(spec: SubjectSpec, week: int, rng) -> list:
    """Per-day counts for every owner; day loads never differ by more than one."""
    counts = spec.counts(week)
    eff = spec.params(week)
    loads = np.zeros(DAYS, dtype=int)
    per_day = {}

    daily = [g for g in eff.groups if g.param.unit is FrequencyUnit.Daily]
    weekly = [g for g in eff.groups if g.param.unit is FrequencyUnit.Weekly]

    for g in daily:
        n = counts[g.owner]
        base, extra = divmod(n, DAYS)
        row = np.full(DAYS, base, dtype=int)
        loads += base
        if extra:
            # largest-remainder: the leftover units go to the lightest days
            tie = rng.random(DAYS)
            order = np.lexsort((tie, loads))
            row[order[:extra]] += 1
            loads[order[:extra]] += 1
        per_day[g.owner] = row

    for g in weekly:
        row = np.zeros(DAYS, dtype=int)
        for _ in range(counts[g.owner]):
            tie = rng.random(DAYS)
            d = np.lexsort((tie, row, loads))[0]
            row[d] += 1
            loads[d] += 1
        per_day[g.owner] = row

    return [
        [owner for owner in per_day for _ in range(int(per_day[owner][d]))]
        for d in range(DAYS)
    ]


def balance_week(
    spec: SubjectSpec,
    week: int,
    rng: np.random.Generator,
    affinity: Optional[dict] = None,
    report: Optional[GenerationReport] = None,
) -> dict:
    """Place every sampled unit of ``week`` into a (day, meal, slot) position.

    ``affinity`` maps owner → set of meal types its candidate items support;
    without it every slot accepts every owner.  Returns ``{SlotKey: owner}``.
    """
    layout = day_layout(spec.n_meals, spec.n_main_meals)
    cap = len(layout)
    by_day = _spread_over_days(spec, week, rng)

    def fits(owner, slot):
        return affinity is None or bool(affinity.get(owner, frozenset()) & set(slot.accepts))

    assignment = {}
    for d, units in enumerate(by_day, start=1):
        if len(units) > cap:
            raise CapacityError(
                f"subject {spec.subject_id} week {week}: day {d} needs {len(units)} records "
                f"but {spec.n_meals} meals ({spec.n_main_meals} main) hold {cap}",
                day=d,
            )
        if len(units) < spec.n_meals:
            raise CapacityError(
                f"subject {spec.subject_id} week {week}: day {d} has {len(units)} records "
                f"for {spec.n_meals} meals",
                day=d,
            )
        units = [units[i] for i in rng.permutation(len(units))]
        free = list(layout)
        taken = {}

        def take(unit_idx, slot, fallback):
            taken[slot] = units.pop(unit_idx)
            free.remove(slot)
            if fallback and report is not None:
                report.routing_fallbacks += 1

        # every meal must be present: main dish of each main meal, then one
        # dish for each light meal
        for m in sorted({s.meal_index for s in layout}):
            meal_slots = [s for s in free if s.meal_index == m]
            if meal_slots[0].main:
                meal_slots = meal_slots[:1]
            hit = next(((i, s) for i, u in enumerate(units) for s in meal_slots if fits(u, s)), None)
            if hit is None:
                take(0, meal_slots[0], True)
            else:
                take(hit[0], hit[1], False)

        # most constrained owners first so flexible ones do not crowd them out
        def flexibility(owner):
            return sum(fits(owner, s) for s in free)

        units.sort(key=flexibility)
        while units:
            owner = units[0]
            for group in ([s for s in free if s.main], [s for s in free if not s.main]):
                ok = [s for s in group if fits(owner, s)]
                if ok:
                    take(0, ok[int(rng.integers(len(ok)))], False)
                    break
            else:
                group = [s for s in free if s.main] or free
                take(0, group[int(rng.integers(len(group)))], True)

        for slot, owner in taken.items():
            assignment[SlotKey(d, slot.meal_index, slot.position)] = owner
    return dict(sorted(assignment.items()))


def owner_affinity(pool: FoodPool, spec: SubjectSpec, week: int) -> dict:
    out = {}
    for g in spec.params(week).groups:
        types = set()
        for item in pool.items_in(g.leaves):
            if item.available_in(spec.region):
                types |= item.meal_types
        out[g.owner] = frozenset(types)
    return out


def compose_meals(
    assignment: dict,
    pool: FoodPool,
    spec: SubjectSpec,
    rng: np.random.Generator,
    week: int = 1,
    report: Optional[GenerationReport] = None,
) -> WeeklyLog:
    """Turn an assignment into meal records by drawing one item per slot."""
    eff = spec.params(week)
    slot_accepts = {(s.meal_index, s.position): s.accepts for s in day_layout(spec.n_meals, spec.n_main_meals)}
    candidates = {}
    records = []
    for key in sorted(assignment):
        owner = assignment[key]
        if owner not in candidates:
            leaves = eff.group(owner).leaves
            candidates[owner] = [it for it in pool.items_in(leaves) if it.available_in(spec.region)]
        cands = candidates[owner]
        if not cands:
            raise GenerationError(f"no item for {owner} in region {spec.region.value}")
        accepts = slot_accepts[(key.meal_index, key.position)]
        fitting = [it for it in cands if it.meal_types.intersection(accepts)]
        if not fitting:
            log.debug("subject %s: %s has no %s item, using any", spec.subject_id, owner, accepts[0].value)
            if report is not None:
                report.item_fallbacks += 1
            fitting = cands
        item = fitting[int(rng.integers(len(fitting)))]
        meal_type = next((t for t in accepts if t in item.meal_types), accepts[0])
        records.append(MealRecord(key.day, key.meal_index, meal_type, item.id))
    return WeeklyLog(
        subject_id=spec.subject_id,
        profile_id=spec.profile_id,
        week=week,
        records=tuple(records),
        ground_truth=spec.week_types[week - 1],
        profile_type=spec.profile_type,
        region=spec.region,
    )


def simulate_subject(profile, region, n_weeks, seed, subject_id, pool, secondary=None, effective=None):
    """Generate every week of one subject from its own seeded generator."""
    rng = np.random.default_rng(subject_seed(seed, subject_id))
    spec = instantiate_subject(
        profile, region, n_weeks, rng, pool=pool, secondary=secondary,
        subject_id=subject_id, effective=effective,
    )
    report = GenerationReport()
    logs = []
    for week in range(1, n_weeks + 1):
        affinity = owner_affinity(pool, spec, week)
        assignment = balance_week(spec, week, rng, affinity, report)
        logs.append(compose_meals(assignment, pool, spec, rng, week, report))
    return spec, logs, report


def _check_resolvable(profile, eff: EffectiveParams, pool: FoodPool, regions) -> None:
    for g in eff.groups:
        if g.param.range.max == 0:
            continue
        items = pool.items_in(g.leaves)
        for region in set(regions):
            if not any(it.available_in(region) for it in items):
                raise GenerationError(
                    f"profile {profile.id!r}: no item for {g.owner} in region {region.value}"
                )


def _run_task(task):
    return simulate_subject(*task)


def generate_dataset(
    profiles,
    pool: FoodPool,
    seed: int,
    n_weeks: int = 4,
    *,
    profile_ids=None,
    workers: int = 1,
) -> Dataset:
    """Synthesise every subject of the selected profiles.

    Subjects are numbered 0001, 0002, ... across profiles in file order.
    ``profile_ids`` restricts generation to a subset; secondary profiles
    referenced by the subset are still looked up in ``profiles``.
    """
    profiles = list(profiles)
    by_id = {p.id: p for p in profiles}
    if profile_ids is not None:
        unknown = [i for i in profile_ids if i not in by_id]
        if unknown:
            raise ConfigError(f"unknown profile ids: {', '.join(unknown)}")
        wanted = set(profile_ids)
        selected = [p for p in profiles if p.id in wanted]
    else:
        selected = profiles

    effective = {}
    for p in selected:
        used = [p]
        if p.general.secondary is not None:
            used.append(by_id[p.general.secondary.profile_id])
        for q in used:
            if q.id not in effective:
                effective[q.id] = resolve_effective_params(q, pool)
            _check_resolvable(q, effective[q.id], pool, p.general.region_slots)

    tasks = []
    counter = 0
    for p in selected:
        secondary = by_id[p.general.secondary.profile_id] if p.general.secondary else None
        slots = p.general.region_slots
        sub_eff = {q: effective[q] for q in (p.id, secondary.id if secondary else p.id)}
        for k in range(p.general.n_subjects):
            counter += 1
            tasks.append((p, slots[k % len(slots)], n_weeks, seed, f"{counter:04d}", pool, secondary, sub_eff))

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_run_task(t) for t in tasks]

    report = GenerationReport()
    specs, logs = [], []
    for spec, subject_logs, rep in results:
        specs.append(spec)
        logs.extend(subject_logs)
        report.merge(rep)
    if report.routing_fallbacks or report.item_fallbacks:
        log.info(
            "generation used %d slot-routing and %d item fallbacks",
            report.routing_fallbacks, report.item_fallbacks,
        )
    return Dataset(pool.source_hash, int(seed), n_weeks, tuple(logs), tuple(specs), report)


# ---------------------------------------------------------------------------
# JSON-Lines serialisation

RECORD_FIELDS = (
    "subject_id", "profile_id", "week", "day", "meal_index", "meal_type",
    "item_id", "level", "category", "subcategory", "profile_type", "ground_truth",
)


def iter_jsonl_rows(dataset: Dataset, pool: FoodPool):
    for lg in dataset.logs:
        for r in lg.records:
            item = pool.get(r.item_id)
            yield {
                "subject_id": lg.subject_id,
                "profile_id": lg.profile_id,
                "week": lg.week,
                "day": r.day,
                "meal_index": r.meal_index,
                "meal_type": r.meal_type.value,
                "item_id": r.item_id,
                "level": item.level,
                "category": item.category,
                "subcategory": item.subcategory,
                "profile_type": lg.profile_type.value,
                "ground_truth": lg.ground_truth.value,
            }


def write_jsonl(dataset: Dataset, pool: FoodPool, path) -> str:
    """Write the dataset as JSON Lines; returns the sha256 of the file."""
    h = hashlib.sha256()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in iter_jsonl_rows(dataset, pool):
            line = json.dumps(row, ensure_ascii=False, separators=(",", ":")) + "\n"
            fh.write(line)
            h.update(line.encode("utf-8"))
    return h.hexdigest()


def read_jsonl(path, pool: Optional[FoodPool] = None) -> list:
    """Rebuild weekly logs from a JSON-Lines dataset.

    With ``pool`` given, unknown item ids raise ``DataError``.
    """
    logs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                key = (row["subject_id"], int(row["week"]))
                rec = MealRecord(int(row["day"]), int(row["meal_index"]), MealType(row["meal_type"]), row["item_id"])
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed record ({exc})") from None
            if pool is not None and rec.item_id not in pool:
                raise DataError(
                    f"{path}:{lineno}: unknown item id {rec.item_id!r} "
                    f"(subject {key[0]}, week {key[1]}, day {rec.day})"
                )
            if key not in logs:
                logs[key] = (row, [])
            logs[key][1].append(rec)
    out = []
    for (sid, week), (row, recs) in logs.items():
        out.append(
            WeeklyLog(
                subject_id=sid,
                profile_id=row["profile_id"],
                week=week,
                records=tuple(recs),
                ground_truth=ProfileType(row.get("ground_truth", row.get("profile_type"))),
                profile_type=ProfileType(row.get("profile_type", row.get("ground_truth"))),
            )
        )
    return out


def structure_of(log_: WeeklyLog) -> dict:
    """Per-day (n_meals, n_main_meals) recomputed from a log's records."""
    meals = {}
    for r in log_.records:
        meals.setdefault(r.day, {}).setdefault(r.meal_index, set()).add(r.meal_type)
    return {
        day: (len(m), sum(MealType.MainMeal in types for types in m.values()))
        for day, m in meals.items()
    }


def recount_by_owner(log_: WeeklyLog, pool: FoodPool, eff: EffectiveParams) -> Counter:
    return Counter(eff.owner_of(pool.get(r.item_id).leaf) for r in log_.records)


def weekly_total_bounds(eff: EffectiveParams) -> tuple:
    lo = sum(g.param.weekly_range.min for g in eff.groups)
    hi = sum(g.param.weekly_range.max for g in eff.groups)
    return lo, hi


def capacity_problems(profile: ProfileConfig, profiles, pool) -> list:
    """Ways in which some draw of ``profile`` could overflow or underfill a day.

    A week always fits when its total lies between ``7 * max meals`` and
    ``7 * capacity(min meals, min main meals)``, because day loads differ by
    at most one record.
    """
    by_id = {p.id: p for p in profiles}
    used = [profile]
    if profile.general.secondary is not None:
        used.append(by_id[profile.general.secondary.profile_id])
    g = profile.general
    need = DAYS * g.meals_range.max
    room = DAYS * day_capacity(g.meals_range.min, g.main_meals_range.min)
    problems = []
    for p in used:
        lo, hi = weekly_total_bounds(resolve_effective_params(p, pool))
        if lo < need:
            problems.append(f"{profile.id}: {p.id} can draw {lo} records/week, below {need} meals")
        if hi > room:
            problems.append(f"{profile.id}: {p.id} can draw {hi} records/week, above {room} slots")
    return problems
