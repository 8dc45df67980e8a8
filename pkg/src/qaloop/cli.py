"""Command-line interface.

Subcommands: serve, import, export, evaluate, analyze, adjudicate, replay.
Usage errors exit 2 (argparse convention); data and platform errors exit 1
with a message on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import analysis, store
from .adversary import AdversaryRegistry
from .config import load_config
from .engine import Engine, utc_now
from .errors import PlatformError
from .events import EventLog, read_events
from .metrics import AdjudicationPolicy, MatchScore, adjudicate


def _load_golds(dataset_path: str) -> dict[str, str]:
    """Question id to single gold answer, majority-consolidated if needed."""
    imported = store.import_squad(dataset_path)
    golds = {}
    for question in imported.questions:
        golds[question.id] = store.consolidate_majority(question.answers).text
    return golds


def cmd_adjudicate(args) -> int:
    policy = AdjudicationPolicy(win_threshold=args.threshold)
    score = adjudicate(args.gold, args.pred, policy)
    print(
        f"f1={score.f1:.3f} em={str(score.em).lower()} "
        f"model_win={str(score.model_win).lower()}"
    )
    return 0


def cmd_evaluate(args) -> int:
    golds = _load_golds(args.dataset)
    predictions = json.loads(Path(args.predictions).read_text(encoding="utf-8"))
    result = analysis.evaluate(golds, predictions)
    if args.json:
        print(
            json.dumps(
                {
                    "em": result.em,
                    "f1": result.f1,
                    "count": len(result.per_question),
                },
                sort_keys=True,
            )
        )
    else:
        print(f"EM {result.em:.1f} / F1 {result.f1:.1f}")
    return 0


def cmd_analyze(args) -> int:
    imported = store.import_squad(args.dataset)
    passages_by_id = imported.passages_by_id
    questions = []
    for iq in imported.questions:
        gold = store.consolidate_majority(iq.answers)
        questions.append(
            store.QuestionRecord(
                id=iq.id,
                passage_id=iq.passage_id,
                worker_id="",
                text=iq.text,
                gold=gold,
                model_answer_at_collection=store.PredictionView(
                    text="", char_start=None, char_end=None, adversary_id=""
                ),
                collection_score=MatchScore(em=False, f1=0.0, model_win=False),
                split="",
            )
        )
    report = analysis.compute_stats(questions, passages_by_id)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "stats.json").write_bytes(
        store.json_bytes(analysis.stats_to_json(report))
    )
    _write_histogram_csv(
        out_dir / "question_length_histogram.csv",
        "question_words",
        report.question_length_histogram,
    )
    _write_histogram_csv(
        out_dir / "answer_length_histogram.csv",
        "answer_words",
        report.answer_length_histogram,
    )
    _write_histogram_csv(
        out_dir / "ngram_overlap_histogram.csv",
        "longest_ngram_overlap",
        report.ngram_overlap_histogram,
    )
    _write_distribution_csv(
        out_dir / "wh_distribution.csv", "wh_word", report.wh_distribution
    )
    _write_distribution_csv(
        out_dir / "answer_type_distribution.csv",
        "answer_type",
        report.answer_type_distribution,
    )

    print(f"questions       {len(questions)}")
    print(f"question words  {report.mean_question_words:.1f}")
    print(f"answer words    {report.mean_answer_words:.1f}")
    print(f"n-gram overlap  {report.mean_longest_ngram_overlap:.1f}")
    print(f"reports written to {out_dir}")
    return 0


def _write_histogram_csv(path: Path, key: str, histogram: dict[int, int]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([key, "count"])
        for value, count in histogram.items():
            writer.writerow([value, count])


def _write_distribution_csv(
    path: Path, key: str, distribution: dict[str, float]
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow([key, "fraction"])
        for value, fraction in distribution.items():
            writer.writerow([value, repr(fraction)])


def _open_engine(args, need_adversaries: bool = False) -> Engine:
    config = load_config(args.config) if args.config else load_config()
    if args.data_dir:
        config.data_dir = Path(args.data_dir)
    if args.seed is not None:
        config.seed = args.seed
    if args.policy_threshold is not None:
        config.win_threshold = args.policy_threshold
    if need_adversaries:
        config.validate()
    config.data_dir.mkdir(parents=True, exist_ok=True)
    log = EventLog(config.data_dir / "events.ndjson", utc_now)
    registry = AdversaryRegistry(config.adversaries)
    return Engine(config.engine_config(), registry=registry, log=log)


def cmd_import(args) -> int:
    imported = store.import_squad(args.file)
    if args.check_only:
        print(
            f"{len(imported.passages)} passages, "
            f"{len(imported.questions)} qas"
        )
        return 0
    engine = _open_engine(args)
    added = 0
    for passage in imported.passages:
        if passage.id in engine.passages:
            continue
        engine.add_passage(passage, args.split)
        added += 1
    engine.close()
    print(
        f"imported {added} passages into split {args.split!r} "
        f"({len(imported.questions)} source qas)"
    )
    return 0


def cmd_export(args) -> int:
    engine = _open_engine(args)
    splits = args.splits.split(",") if args.splits else ["train", "dev", "test"]
    manifest = engine.export(args.name, args.out, splits)
    engine.close()
    for split, counts in manifest.counts.items():
        print(f"{split}: {counts['qas']} qas over {counts['passages']} passages")
    print(f"manifest written to {Path(args.out) / (args.name + '-manifest.json')}")
    return 0


def cmd_replay(args) -> int:
    events = read_events(args.log)
    config = load_config(args.config) if args.config else load_config()
    engine = Engine.from_events(events, config.engine_config())
    written = engine.write_snapshots(args.out)
    print(f"replayed {len(events)} events; wrote {len(written)} snapshots")
    return 0


def cmd_serve(args) -> int:
    from .gateway import serve

    config = load_config(args.config) if args.config else load_config()
    if args.data_dir:
        config.data_dir = Path(args.data_dir)
    if args.seed is not None:
        config.seed = args.seed
    if args.policy_threshold is not None:
        config.win_threshold = args.policy_threshold
    if args.host:
        config.listen_host = args.host
    if args.port:
        config.listen_port = args.port
    serve(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qaloop",
        description=(
            "Adversarial annotation platform for extractive QA with a "
            "model in the loop"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="platform config JSON")
        p.add_argument("--data-dir", help="platform data directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument(
            "--policy-threshold",
            type=float,
            default=None,
            help="model-win F1 threshold override",
        )

    p = sub.add_parser("serve", help="run the HTTP platform")
    common(p)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("import", help="load SQuAD-shaped passages")
    common(p)
    p.add_argument("--file", required=True)
    p.add_argument("--split", default="train", choices=store.SPLITS)
    p.add_argument(
        "--check-only",
        action="store_true",
        help="validate and count without touching the data dir",
    )
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("export", help="export collected datasets")
    common(p)
    p.add_argument("--name", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--splits", default=None, help="comma-separated split list")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("evaluate", help="EM/F1 of a prediction file")
    p.add_argument("--dataset", required=True, help="SQuAD-shaped gold file")
    p.add_argument("--predictions", required=True, help="JSON map id->answer")
    p.add_argument("--json", action="store_true", help="full-precision JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="dataset statistics reports")
    p.add_argument("--dataset", required=True, help="SQuAD-shaped file")
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("adjudicate", help="score one answer pair")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--threshold", type=float, default=0.4)
    p.set_defaults(func=cmd_adjudicate)

    p = sub.add_parser("replay", help="rebuild snapshots from an event log")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PlatformError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
