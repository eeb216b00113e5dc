"""Healthy Score: Mahalanobis distance to the optimal intake ranges.

Each of the nine groups has an optimal band ``[lower, upper]``.  The band
midpoint is the reference mean and its half-width the per-group standard
deviation, so the covariance is ``diag(sigma**2)``.  Distances are squashed
into [0, 1] (NMD) and the Healthy Score is ``1 - NMD``.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .analysis import GROUP_NAMES
from .errors import ConfigError, DataError
from .profiles import ProfileType

SIGMA_FLOOR = 0.5
DEFAULT_THRESHOLD = 0.36


@dataclass(frozen=True)
class OptimalRanges:
    lower: tuple
    upper: tuple
    names: tuple = GROUP_NAMES
    sigma_floor: float = SIGMA_FLOOR

    def __post_init__(self):
        if not len(self.lower) == len(self.upper) == len(self.names):
            raise ConfigError("ranges need one lower and one upper bound per group")
        for name, lo, hi in zip(self.names, self.lower, self.upper):
            if not lo <= hi:
                raise ConfigError(f"range for {name!r}: lower {lo} exceeds upper {hi}")
        if self.sigma_floor <= 0:
            raise ConfigError("sigma_floor must be positive")

    @classmethod
    def from_json(cls, doc, sigma_floor: float = SIGMA_FLOOR) -> "OptimalRanges":
        if not isinstance(doc, list) or len(doc) != len(GROUP_NAMES):
            raise ConfigError(f"ranges must be a JSON array of {len(GROUP_NAMES)} objects")
        by_name = {}
        for obj in doc:
            try:
                by_name[obj["group"]] = (float(obj["lower"]), float(obj["upper"]))
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"malformed range entry {obj!r}") from None
        if set(by_name) != set(GROUP_NAMES):
            raise ConfigError(f"ranges must cover exactly {list(GROUP_NAMES)}")
        lower = tuple(by_name[g][0] for g in GROUP_NAMES)
        upper = tuple(by_name[g][1] for g in GROUP_NAMES)
        return cls(lower, upper, GROUP_NAMES, sigma_floor)

    @property
    def midpoint(self) -> np.ndarray:
        return (np.asarray(self.lower, float) + np.asarray(self.upper, float)) / 2

    @property
    def sigma(self) -> np.ndarray:
        half = (np.asarray(self.upper, float) - np.asarray(self.lower, float)) / 2
        return np.maximum(half, self.sigma_floor)

    @property
    def covariance(self) -> np.ndarray:
        return np.diag(self.sigma ** 2)


def load_ranges(path=None) -> OptimalRanges:
    if path is None:
        text = resources.files("dietsynth.data").joinpath("ranges.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    try:
        return OptimalRanges.from_json(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"ranges file is not valid JSON: {exc}") from None


def mahalanobis_cov(x, mean, cov) -> Union[float, np.ndarray]:
    """sqrt((x - mean) C^-1 (x - mean)^T) for one vector or a stack of rows."""
    x = np.asarray(x, dtype=float)
    diff = np.atleast_2d(x) - np.asarray(mean, dtype=float)
    chol = np.linalg.cholesky(np.asarray(cov, dtype=float))
    # C = L L^T, so the quadratic form is |L^-1 diff|^2
    z = np.linalg.solve(chol, diff.T)
    md = np.sqrt(np.sum(z * z, axis=0))
    return float(md[0]) if x.ndim == 1 else md


def mahalanobis(x, ranges: OptimalRanges):
    """Distance of an intake vector (or an ``(n, 9)`` array) from the optimal ranges."""
    if hasattr(x, "as_array"):
        x = x.as_array()
    return mahalanobis_cov(x, ranges.midpoint, ranges.covariance)


@dataclass(frozen=True)
class BatchMinMax:
    def __str__(self):
        return "batch"


@dataclass(frozen=True)
class Reference:
    md_ref: float

    def __post_init__(self):
        if not self.md_ref > 0:
            raise ConfigError(f"reference distance must be positive, got {self.md_ref}")

    def __str__(self):
        return f"reference:{self.md_ref:g}"


def parse_norm(text: str):
    """``"batch"`` or ``"reference:<float>"``."""
    if text == "batch":
        return BatchMinMax()
    kind, _, value = text.partition(":")
    if kind == "reference":
        try:
            return Reference(float(value))
        except ValueError:
            pass
    raise ConfigError(f"normalisation must be 'batch' or 'reference:<float>', got {text!r}")


def normalize(mds, mode=BatchMinMax()) -> np.ndarray:
    mds = np.asarray(mds, dtype=float)
    if isinstance(mode, Reference):
        return np.minimum(mds / mode.md_ref, 1.0)
    if mds.size < 2:
        raise DataError("batch min-max normalisation needs at least two distances")
    lo, hi = mds.min(), mds.max()
    if hi == lo:
        return np.zeros_like(mds)
    return (mds - lo) / (hi - lo)


def healthy_score(nmd):
    if np.any(np.asarray(nmd) < 0) or np.any(np.asarray(nmd) > 1):
        raise ValueError(f"NMD must lie in [0, 1], got {nmd}")
    return 1 - nmd


def classify(score: float, threshold: float = DEFAULT_THRESHOLD) -> ProfileType:
    if not 0 <= score <= 1:
        raise ValueError(f"score must lie in [0, 1], got {score}")
    return ProfileType.Healthy if score > threshold else ProfileType.Unhealthy


@dataclass(frozen=True)
class ScoreRecord:
    subject_id: str
    week: int
    md: float
    nmd: float
    healthy_score: float
    predicted: ProfileType
    actual: ProfileType
    profile_id: str = ""
    profile_type: Optional[ProfileType] = None


def score_rows(rows, ranges: OptimalRanges, mode=BatchMinMax(), threshold: float = DEFAULT_THRESHOLD) -> list:
    """Score intake rows (from ``analysis.analyze_logs`` or an intake CSV)."""
    rows = list(rows)
    if not rows:
        return []
    x = np.array([r.intake.as_array() for r in rows])
    md = np.atleast_1d(mahalanobis(x, ranges))
    nmd = normalize(md, mode)
    hs = healthy_score(nmd)
    return [
        ScoreRecord(
            subject_id=r.subject_id,
            week=r.week,
            md=float(d),
            nmd=float(n),
            healthy_score=float(s),
            predicted=classify(float(s), threshold),
            actual=r.ground_truth,
            profile_id=r.profile_id,
            profile_type=r.profile_type,
        )
        for r, d, n, s in zip(rows, md, nmd, hs)
    ]


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fn: int
    fp: int
    tn: int
    threshold: float

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.tp + self.tn, self.total)

    @property
    def sensitivity(self) -> Fraction:
        pos = self.tp + self.fn
        return Fraction(self.tp, pos) if pos else Fraction(0)

    def to_json(self) -> dict:
        return {
            "threshold": round(float(self.threshold), 4),
            "confusion": {
                "actual_healthy": {"predicted_healthy": self.tp, "predicted_unhealthy": self.fn},
                "actual_unhealthy": {"predicted_healthy": self.fp, "predicted_unhealthy": self.tn},
            },
            "total": self.total,
            "accuracy": round(float(self.accuracy), 4),
            "sensitivity": round(float(self.sensitivity), 4),
        }


def _binary_truth(records) -> np.ndarray:
    actual = [r.actual for r in records]
    if ProfileType.Variable in actual:
        raise DataError("variable-profile records must be excluded before evaluation")
    return np.array([a is ProfileType.Healthy for a in actual])


def evaluate(records, threshold: float = DEFAULT_THRESHOLD) -> EvalReport:
    """Confusion matrix with Healthy as the positive class.

    Medium and Unhealthy diets both count as negatives.
    """
    healthy = ProfileType.Healthy
    cells = Counter((r.actual, r.predicted is healthy) for r in records)
    if not cells:
        raise DataError("nothing to evaluate")
    if any(actual is ProfileType.Variable for actual, _ in cells):
        raise DataError("variable-profile records must be excluded before evaluation")
    pos = {True: 0, False: 0}
    neg = {True: 0, False: 0}
    for (actual, pred_healthy), n in cells.items():
        (pos if actual is healthy else neg)[pred_healthy] += n
    return EvalReport(tp=pos[True], fn=pos[False], fp=neg[True], tn=neg[False], threshold=threshold)


def threshold_sweep(records) -> list:
    """Reports at every threshold that changes the classification.

    Thresholds sit halfway between consecutive distinct scores, plus one
    just below the lowest score and one at the highest.
    """
    records = list(records)
    if not records:
        raise DataError("nothing to evaluate")
    truth = _binary_truth(records)
    scores = np.array([r.healthy_score for r in records])
    uniq = np.unique(scores)
    cuts = np.concatenate([[uniq[0] - 1e-6], (uniq[:-1] + uniq[1:]) / 2, [uniq[-1]]])
    out = []
    for t in cuts:
        pred = scores > t
        out.append(
            EvalReport(
                tp=int(np.sum(truth & pred)),
                fn=int(np.sum(truth & ~pred)),
                fp=int(np.sum(~truth & pred)),
                tn=int(np.sum(~truth & ~pred)),
                threshold=float(t),
            )
        )
    return out


def best_threshold(records) -> EvalReport:
    """Highest-accuracy threshold; ties go to higher sensitivity, then the lower threshold."""
    sweep = threshold_sweep(records)
    return max(sweep, key=lambda r: (r.accuracy, r.sensitivity, -r.threshold))


SCORE_COLUMNS = (
    "subject_id", "week", "md", "nmd", "healthy_score", "predicted", "actual", "profile_id", "profile_type",
)


def write_scores_csv(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCORE_COLUMNS)
        for r in records:
            w.writerow([
                r.subject_id, r.week, repr(r.md), repr(r.nmd), repr(r.healthy_score),
                r.predicted.value, r.actual.value, r.profile_id,
                r.profile_type.value if r.profile_type else "",
            ])


def read_scores_csv(path) -> list:
    out = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(ScoreRecord(
                    subject_id=row["subject_id"],
                    week=int(row["week"]),
                    md=float(row["md"]),
                    nmd=float(row["nmd"]),
                    healthy_score=float(row["healthy_score"]),
                    predicted=ProfileType(row["predicted"]),
                    actual=ProfileType(row["actual"]),
                    profile_id=row.get("profile_id", ""),
                    profile_type=ProfileType(row["profile_type"]) if row.get("profile_type") else None,
                ))
            except (KeyError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: malformed score row ({exc})") from None
    return out
