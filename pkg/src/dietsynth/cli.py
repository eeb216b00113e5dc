"""Command-line pipeline: generate -> analyze -> score -> plot-data.

Each stage reads and writes files so it can be run and checked on its own.
Every output is accompanied by a ``*.run.json`` manifest recording the
command, input hashes, seed and output hash.

Exit codes: 0 success, 2 configuration error, 3 data error, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from collections import Counter
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analysis import analyze_logs, load_mapping, write_intakes_csv, read_intakes_csv
from .errors import ConfigError, DataError
from .profiles import ProfileType, default_profiles_path, parse_profiles
from .scoring import (
    DEFAULT_THRESHOLD,
    best_threshold,
    evaluate,
    load_ranges,
    parse_norm,
    read_scores_csv,
    score_rows,
    write_scores_csv,
)
from .synthesis import generate_dataset, read_jsonl, write_jsonl
from .taxonomy import default_manifest_path, load_pool

log = logging.getLogger("dietsynth")

EXIT_OK, EXIT_UNEXPECTED, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3

GROUP_ORDER = (ProfileType.Healthy, ProfileType.Medium, ProfileType.Unhealthy, ProfileType.Variable)
PLOT_COLUMNS = ("diet_index", "healthy_score", "group", "subject_id", "week", "profile_id")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _readable(path, what) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _read_text(path, what) -> str:
    try:
        return _readable(path, what).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{what} is not UTF-8: {exc}") from None


def write_run_manifest(path, command: str, argv, inputs: dict, outputs: dict, **extra) -> dict:
    doc = {
        "command": command,
        "argv": list(argv),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "inputs": {k: {"path": str(v), "sha256": sha256_file(v)} for k, v in inputs.items()},
        "outputs": {k: {"path": str(v), "sha256": sha256_file(v)} for k, v in outputs.items()},
        **extra,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return doc


def _sidecar(out: Path) -> Path:
    return out.with_name(out.stem + ".run.json")


def cmd_generate(args) -> int:
    config = _readable(args.config or default_profiles_path(), "profile config")
    manifest = _readable(args.manifest or default_manifest_path(), "food manifest")
    profiles = parse_profiles(_read_text(config, "profile config"))
    pool = load_pool(manifest)
    if args.weeks < 1:
        raise ConfigError("--weeks must be at least 1")
    ids = [s.strip() for s in args.profiles.split(",")] if args.profiles else None

    dataset = generate_dataset(profiles, pool, args.seed, args.weeks, profile_ids=ids, workers=args.workers)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    data_path = out_dir / "dataset.jsonl"
    digest = write_jsonl(dataset, pool, data_path)
    write_run_manifest(
        out_dir / "run_manifest.json", "generate", args.argv,
        inputs={"config": config, "manifest": manifest},
        outputs={"dataset": data_path},
        seed=args.seed,
        n_weeks=args.weeks,
        manifest_hash=pool.source_hash,
        counts={
            "subjects": dataset.n_subjects,
            "weekly_logs": len(dataset.logs),
            "records": sum(len(lg.records) for lg in dataset.logs),
        },
        fallbacks={
            "slot_routing": dataset.report.routing_fallbacks,
            "item": dataset.report.item_fallbacks,
        },
    )
    print(f"wrote {len(dataset.logs)} weekly logs for {dataset.n_subjects} subjects to {data_path} (sha256 {digest[:12]})")
    return EXIT_OK


def cmd_analyze(args) -> int:
    dataset = _readable(args.dataset, "dataset")
    manifest = _readable(args.manifest or default_manifest_path(), "food manifest")
    pool = load_pool(manifest)
    mapping = load_mapping(args.mapping, pool.taxonomy)
    logs = read_jsonl(dataset, pool)
    rows = analyze_logs(logs, mapping, pool)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_intakes_csv(rows, out)
    inputs = {"dataset": dataset, "manifest": manifest}
    if args.mapping:
        inputs["mapping"] = Path(args.mapping)
    write_run_manifest(_sidecar(out), "analyze", args.argv, inputs, {"intakes": out}, counts={"rows": len(rows)})
    print(f"wrote {len(rows)} intake rows to {out}")
    return EXIT_OK


def _report(records, threshold: float, norm) -> dict:
    scored = len(records)
    evaluated = [r for r in records if r.profile_type is not ProfileType.Variable]
    doc = {
        "norm": str(norm),
        "n_scored": scored,
        "n_evaluated": len(evaluated),
        "n_excluded_variable": scored - len(evaluated),
        "mean_healthy_score": {},
        "fixed_threshold": None,
        "best_threshold": None,
    }
    sums = Counter()
    counts = Counter()
    for r in records:
        key = r.profile_type.value if r.profile_type else r.actual.value
        sums[key] += r.healthy_score
        counts[key] += 1
    doc["mean_healthy_score"] = {k: round(sums[k] / counts[k], 6) for k in sorted(counts)}
    if evaluated:
        doc["fixed_threshold"] = evaluate(evaluated, threshold).to_json()
        doc["best_threshold"] = best_threshold(evaluated).to_json()
    return doc


def cmd_score(args) -> int:
    intakes = _readable(args.intakes, "intake CSV")
    norm = parse_norm(args.norm)
    if not 0 <= args.threshold <= 1:
        raise ConfigError("--threshold must lie in [0, 1]")
    ranges = load_ranges(_readable(args.ranges, "ranges file") if args.ranges else None)
    rows = read_intakes_csv(intakes)
    if not rows:
        raise DataError(f"{intakes}: no intake rows to score")
    records = score_rows(rows, ranges, norm, args.threshold)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_scores_csv(records, out)
    report_path = Path(args.report) if args.report else out.with_name(out.stem + "_report.json")
    report = _report(records, args.threshold, norm)
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")

    inputs = {"intakes": intakes}
    if args.ranges:
        inputs["ranges"] = Path(args.ranges)
    write_run_manifest(
        _sidecar(out), "score", args.argv, inputs, {"scores": out, "report": report_path},
        norm=str(norm), threshold=args.threshold,
    )
    fixed = report["fixed_threshold"]
    if fixed:
        print(f"scored {len(records)} diets; at {args.threshold}: accuracy {fixed['accuracy']:.4f}, "
              f"sensitivity {fixed['sensitivity']:.4f}")
    else:
        print(f"scored {len(records)} diets; nothing to evaluate")
    return EXIT_OK


def plot_rows(records) -> list:
    """Scatter rows ordered by profile group, then subject, then week."""
    rank = {g: i for i, g in enumerate(GROUP_ORDER)}

    def group(r):
        return r.profile_type or r.actual

    ordered = sorted(records, key=lambda r: (rank[group(r)], r.subject_id, r.week))
    return [
        (i, r.healthy_score, group(r).value, r.subject_id, r.week, r.profile_id)
        for i, r in enumerate(ordered)
    ]


def cmd_plot_data(args) -> int:
    scores = _readable(args.scores, "scores CSV")
    records = read_scores_csv(scores)
    if not records:
        raise DataError(f"{scores}: no scores to export")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = plot_rows(records)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PLOT_COLUMNS)
        for idx, score, grp, sid, week, pid in rows:
            w.writerow([idx, repr(score), grp, sid, week, pid])
    write_run_manifest(_sidecar(out), "plot-data", args.argv, {"scores": scores}, {"plot_data": out})
    print(f"wrote {len(rows)} scatter rows to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dietsynth", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log generation details")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesise weekly meal logs")
    g.add_argument("--config", help="profile configuration JSON (default: bundled fixture)")
    g.add_argument("--manifest", help="food item manifest JSON (default: bundled fixture)")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--weeks", type=int, default=4)
    g.add_argument("--profiles", help="comma-separated profile ids to generate (default: all)")
    g.add_argument("--workers", type=int, default=1, help="worker processes")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("analyze", help="reduce weekly logs to intake vectors")
    a.add_argument("--dataset", required=True, help="dataset.jsonl from generate")
    a.add_argument("--manifest", help="food item manifest JSON (default: bundled fixture)")
    a.add_argument("--mapping", help="group mapping JSON (default: bundled mapping)")
    a.add_argument("--out", required=True, help="intake CSV to write")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("score", help="Healthy Score, classification and evaluation")
    s.add_argument("--intakes", required=True, help="intake CSV from analyze")
    s.add_argument("--ranges", help="optimal ranges JSON (default: bundled ranges)")
    s.add_argument("--norm", default="batch", help="'batch' or 'reference:<md_ref>'")
    s.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    s.add_argument("--out", required=True, help="scores CSV to write")
    s.add_argument("--report", help="report JSON (default: <out>_report.json)")
    s.set_defaults(func=cmd_score)

    p = sub.add_parser("plot-data", help="export scores for a scatter plot")
    p.add_argument("--scores", required=True, help="scores CSV from score")
    p.add_argument("--out", required=True, help="scatter CSV to write")
    p.set_defaults(func=cmd_plot_data)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"dietsynth: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"dietsynth: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"dietsynth: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED
    except Exception as exc:  # noqa: BLE001
        log.debug("unexpected failure", exc_info=True)
        print(f"dietsynth: unexpected error: {exc!r}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
