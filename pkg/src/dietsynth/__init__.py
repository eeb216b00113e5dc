"""Synthesis and automatic analysis of longitudinal eating-behaviour datasets."""

from .analysis import (
    GROUP_NAMES,
    GroupMapping,
    IntakeVector,
    NoisyRecognizer,
    PassThroughRecognizer,
    aggregate_week,
    analyze_logs,
    load_mapping,
    recognize,
)
from .errors import CapacityError, ConfigError, DataError, DietSynthError, GenerationError
from .profiles import (
    EffectiveParams,
    FoodGroupParam,
    FreqRange,
    FrequencyUnit,
    GeneralParams,
    ProfileConfig,
    ProfileType,
    load_default_profiles,
    parse_profiles,
    resolve_effective_params,
    serialize_profiles,
)
from .scoring import (
    BatchMinMax,
    EvalReport,
    OptimalRanges,
    Reference,
    best_threshold,
    classify,
    evaluate,
    healthy_score,
    load_ranges,
    mahalanobis,
    normalize,
    score_rows,
)
from .synthesis import (
    Dataset,
    MealRecord,
    SubjectSpec,
    WeeklyLog,
    balance_week,
    compose_meals,
    generate_dataset,
    instantiate_subject,
)
from .taxonomy import FoodItem, FoodPool, GroupSelector, MealType, Region, Taxonomy, load_default_pool, load_pool, query

__version__ = "0.1.0"

# Evaluation subset for the binary metrics: 4 healthy, 4 unhealthy
# and 2 of the 4 medium profiles (1280 / 1280 / 640 diets at 80 subjects x 4 weeks).
EVALUATION_PROFILES = ("1", "1.1", "1.2", "1.3", "2", "2.1", "2.2", "2.3", "3", "3.1")
