import json

import pytest

from dietsynth import load_default_pool, load_default_profiles, load_mapping, load_ranges
from dietsynth.synthesis import generate_dataset


@pytest.fixture(scope="session")
def pool():
    return load_default_pool()


@pytest.fixture(scope="session")
def taxonomy(pool):
    return pool.taxonomy


@pytest.fixture(scope="session")
def profiles():
    return load_default_profiles()


@pytest.fixture(scope="session")
def by_id(profiles):
    return {p.id: p for p in profiles}


@pytest.fixture(scope="session")
def mapping(taxonomy):
    return load_mapping(taxonomy=taxonomy)


@pytest.fixture(scope="session")
def ranges():
    return load_ranges()


@pytest.fixture(scope="session")
def small_dataset(profiles, pool):
    """One subject per fixture profile, 4 weeks."""
    doc = {"profiles": [dict(p.to_json(), general=dict(p.general.to_json(), n_subjects=1)) for p in profiles]}
    from dietsynth import parse_profiles

    small = parse_profiles(doc)
    return small, generate_dataset(small, pool, seed=7, n_weeks=4)


def profile_doc(food_params, pid="p", ptype="Healthy", meals=(3, 5), mains=(1, 3), n_subjects=2, **general):
    g = {
        "n_subjects": n_subjects,
        "meals_range": {"min": meals[0], "max": meals[1]},
        "main_meals_range": {"min": mains[0], "max": mains[1]},
        **general,
    }
    return {"id": pid, "profile_type": ptype, "general": g, "food_params": food_params}


def level_params(ranges=None, unit="Weekly"):
    ranges = ranges or {}
    return [
        {"selector": {"tier": "level", "value": n}, "unit": unit, "range": list(ranges.get(n, (1, 2)))}
        for n in range(1, 7)
    ]


def dump(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
