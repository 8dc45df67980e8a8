"""Acceptance suite: protocol-level quantitative checks.

Each test prints one PASS line (with timing) after its assertions hold, so a
verbose run doubles as an acceptance report.
"""

import json
import math
import os
import random
import time
from pathlib import Path

import pytest

from qaloop import analysis, store
from qaloop.adversary import AdversaryDescriptor, build_adversary
from qaloop.engine import Engine, EngineConfig, review_sample_size, utc_now
from qaloop.events import EventLog, read_events
from qaloop.metrics import AdjudicationPolicy, adjudicate
from qaloop.store import Passage

from .conftest import TRAINING_ARTIFACTS, make_registry
from .reference_evaluator import evaluate as reference_evaluate
from .test_metrics import bag_f1_oracle

POLICY = AdjudicationPolicy()


def report(name, started):
    print(f"[ACCEPTANCE] {name}: PASS ({time.perf_counter() - started:.2f}s)")


# ----------------------------------------------------------------------
# 1. Metric parity with the reference evaluator on a 50-question fixture.

METRIC_PARITY_PAIRS = [
    # exact and near-exact
    ("the market", "the market"),
    ("The Market", "market"),
    ("water", "Water!"),
    ("Samuel Reshevsky", "samuel reshevsky"),
    ("a severe drought", "severe drought"),
    # partial overlaps
    ("New York", "New York City"),
    ("water", "water vapor"),
    ("the design of electric motors", "electric motors"),
    ("three hundred sixty schools", "three hundred schools"),
    ("Ted Ginn, Jr.", "Ted Ginn"),
    ("painting and art", "painting"),
    ("Lucas Cranach the Elder", "Lucas Cranach"),
    ("jurisdictional and central conferences", "central conferences"),
    ("about 300 km", "roughly 300 km"),
    ("disagreements on the Eucharist", "disagreements"),
    ("the United Methodist Church", "United Methodist"),
    ("his brothers heeded the order", "his brothers"),
    ("advances in engine design", "design advances"),
    ("keelmen of Sandgate", "the keelmen"),
    ("colliers for export", "export colliers"),
    # disjoint
    ("mercury", "the market"),
    ("Newcastle", "Sandgate"),
    ("four", "five"),
    ("1224", "1223"),
    ("Rajendra Pachauri", "Robert Watson"),
    ("oxygen", "hydrogen"),
    ("the Baltic Sea", "Berlin"),
    ("violin", "chess"),
    ("red fox", "blue whale"),
    ("plague", "drought"),
    # punctuation and casing traps
    ("U.S.", "US"),
    ("don't stop", "dont stop"),
    ("O'Neill's", "ONeills"),
    ("co-operate", "cooperate"),
    ("1,000 HITs", "1000 HITs"),
    ("(parenthetical)", "parenthetical"),
    ("semi-colon; here", "semicolon here"),
    ("quote \"unquote\"", "quote unquote"),
    ("trailing period.", "trailing period"),
    ("spaced   out", "spaced out"),
    # number and date shapes
    ("12 March 1990", "March 1990"),
    ("30%", "30"),
    ("seven touchdowns", "7 touchdowns"),
    ("1,104 yards", "1104 yards"),
    ("the 20th century", "20th century"),
    # longer spans
    (
        "the first individuals to be martyred by the Roman Catholic Church",
        "first individuals martyred by the Church",
    ),
    (
        "a load balancer and a t2.xlarge EC2 instance",
        "a load balancer",
    ),
    (
        "the psychological school of behaviorism",
        "school of behaviorism",
    ),
    (
        "non-toxic and unreactive chemistry",
        "unreactive chemistry",
    ),
    (
        "wages work in the same way as prices",
        "prices work in the same way as wages",
    ),
]


def test_metric_parity_with_reference_evaluator():
    started = time.perf_counter()
    assert len(METRIC_PARITY_PAIRS) == 50
    golds = {f"q{i:02d}": gold for i, (gold, _) in enumerate(METRIC_PARITY_PAIRS)}
    predictions = {
        f"q{i:02d}": pred for i, (_, pred) in enumerate(METRIC_PARITY_PAIRS)
    }
    result = analysis.evaluate(golds, predictions)

    reference_dataset = [
        {
            "paragraphs": [
                {
                    "qas": [
                        {"id": qid, "answers": [{"text": gold}]}
                        for qid, gold in golds.items()
                    ]
                }
            ]
        }
    ]
    expected = reference_evaluate(reference_dataset, predictions)
    assert round(result.em, 4) == round(expected["exact_match"], 4)
    assert round(result.f1, 4) == round(expected["f1"], 4)
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    report("metric parity (50-question fixture, 4 decimals)", started)


# ----------------------------------------------------------------------
# 2. Adjudication agrees with a brute-force counting oracle on 10,000 pairs.

ORACLE_VOCAB = [
    "cat", "dog", "market", "water", "york", "new", "city", "run",
    "12", "sand", "king", "blue",
]


def test_adjudication_oracle_10k_pairs():
    started = time.perf_counter()
    rng = random.Random(1870)
    checked = 0
    for _ in range(10_000):
        gold_tokens = [rng.choice(ORACLE_VOCAB) for _ in range(rng.randint(1, 7))]
        pred_tokens = [rng.choice(ORACLE_VOCAB) for _ in range(rng.randint(1, 7))]
        expected = bag_f1_oracle(gold_tokens, pred_tokens)
        score = adjudicate(
            " ".join(gold_tokens), " ".join(pred_tokens), POLICY
        )
        assert math.isclose(score.f1, expected, abs_tol=1e-12)
        assert score.model_win == (expected >= 0.4)
        checked += 1
    assert checked == 10_000

    # Constructed boundary cases: shared tokens k, disjoint padding to make
    # F1 land on 0.4 exactly; the win rule is inclusive there.
    for k in (1, 2, 3):
        shared = ORACLE_VOCAB[:k]
        padding = [f"pad{i}" for i in range(3 * k)]
        gold = " ".join(shared)
        pred = " ".join(shared + padding)
        score = adjudicate(gold, pred, POLICY)
        assert score.f1 == 0.4
        assert score.model_win is True
        # and mirrored (long gold, short prediction)
        mirrored = adjudicate(pred, gold, POLICY)
        assert mirrored.f1 == 0.4
        assert mirrored.model_win is True

    elapsed = time.perf_counter() - started
    assert elapsed < 5.0
    report("adjudication oracle (10,000 pairs + 0.4 boundary)", started)


# ----------------------------------------------------------------------
# 3. Filter soundness: the in-loop adversary scores 0.0 EM on its own export.

FILTER_VOCAB = [
    "storm", "harbor", "signal", "cobalt", "meadow", "lantern", "summit",
    "timber", "anchor", "breeze", "canyon", "ember", "falcon", "garnet",
    "hollow", "island", "jasper", "kettle", "ledger", "marble", "nectar",
    "orchid", "pebble", "quartz",
]


LEX_IN_LOOP = AdversaryDescriptor(
    id="lex", kind="lexical_window", config={"context_tokens": 0}
)


def synthesize_annotation_log(tmp_path, min_attempts=240):
    from qaloop.adversary import AdversaryRegistry

    rng = random.Random(42)
    config = EngineConfig(seed=9)
    log = EventLog(tmp_path / "events.ndjson", utc_now)
    engine = Engine(config, registry=AdversaryRegistry([LEX_IN_LOOP]), log=log)

    passages = []
    for index in range(90):
        words = [rng.choice(FILTER_VOCAB) for _ in range(45)]
        passages.append((f"syn-{index:03d}", words))
        engine.add_passage(
            Passage(id=f"syn-{index:03d}", title=f"doc-{index // 3}",
                    text=" ".join(words)),
            "train",
        )

    words_by_pid = dict(passages)
    for worker_id in ("w-alpha", "w-beta"):
        engine.register_worker(worker_id, "CA", 0.99, 4000)
        engine.qualification_flow(worker_id, TRAINING_ARTIFACTS)
        engine.review_qualification(worker_id, approved=True)

    attempts = model_wins = 0
    while attempts < min_attempts:
        worker_id = "w-alpha" if attempts % 2 == 0 else "w-beta"
        hit = engine.open_generation_hit(worker_id, "lex", "train")
        words = words_by_pid[hit.passage_id]
        for _ in range(rng.randint(3, 6)):
            if len(engine.get_hit(hit.id).retained) >= hit.max_questions:
                break
            span_len = rng.randint(1, 4)
            start_token = rng.randint(0, len(words) - span_len)
            span_tokens = words[start_token : start_token + span_len]
            char_start = sum(len(w) + 1 for w in words[:start_token])
            char_end = char_start + len(" ".join(span_tokens))
            if rng.random() < 0.45:
                # Point the question at the chosen span: the window model
                # tends to answer there, a likely model win.
                query = span_tokens + [words[max(0, start_token - 1)]]
            else:
                far = (start_token + 20) % (len(words) - 3)
                query = words[far : far + 3]
            question = "which " + " ".join(query) + "?"
            attempt = engine.submit_question(
                hit.id, question, char_start, char_end
            )
            attempts += 1
            if attempt.score.model_win:
                model_wins += 1
        engine.complete_hit(hit.id)
    engine.close()
    return attempts, model_wins


def test_filter_soundness_in_loop_adversary_scores_zero_em(tmp_path):
    started = time.perf_counter()
    attempts, model_wins = synthesize_annotation_log(tmp_path)
    assert attempts >= 200
    assert model_wins >= 30, "fixture must exercise the reject path"

    events = read_events(tmp_path / "events.ndjson")
    engine = Engine.from_events(events, EngineConfig(seed=9))
    retained = engine.exportable_questions("train")
    assert len(retained) >= 60, "fixture must exercise the retain path"
    assert attempts - model_wins == len(retained)

    out_dir = tmp_path / "export"
    engine.export("synthetic", out_dir, splits=("train",))
    imported = store.import_squad(out_dir / "synthetic-train.json")

    adversary = build_adversary(LEX_IN_LOOP)
    passages_by_id = imported.passages_by_id
    golds = {}
    predictions = {}
    for question in imported.questions:
        golds[question.id] = question.answers[0].text
        prediction = adversary.predict(
            passages_by_id[question.passage_id], question.text
        )
        predictions[question.id] = prediction.text

    result = analysis.evaluate(golds, predictions)
    assert result.em == 0.0
    assert result.f1 < 40.0
    for score in result.per_question:
        assert score.f1 < 0.4 * 100 or math.isclose(score.f1, 0.0)

    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    report(
        f"filter soundness ({attempts} attempts, {len(retained)} retained, "
        f"EM {result.em}, F1 {result.f1:.1f})",
        started,
    )


# ----------------------------------------------------------------------
# 4. Review sampling formula.


def test_review_sampling_formula():
    started = time.perf_counter()
    expected = {1: 1, 10: 6, 100: 11, 1000: 16, 10**6: 31}
    for n, size in expected.items():
        assert review_sample_size(n) == size
    report("review sampling floor(5*log10(n)+1)", started)


# ----------------------------------------------------------------------
# 5. Quality-control replay: revocation and answerability attrition.


def build_quality_control_log(tmp_path):
    config = EngineConfig(seed=4)
    log = EventLog(tmp_path / "events.ndjson", utc_now)
    engine = Engine(config, registry=make_registry(), log=log)

    rng = random.Random(6)
    for index in range(30):
        words = [rng.choice(FILTER_VOCAB) for _ in range(30)]
        engine.add_passage(
            Passage(id=f"qc-{index:03d}", title=f"qc-doc-{index}",
                    text=" ".join(words)),
            "train" if index < 15 else "dev",
        )

    for worker_id in ("honest", "sloppy", "vague", "v1", "v2", "v3"):
        engine.register_worker(worker_id, "US", 0.99, 3000)
        engine.qualification_flow(worker_id, TRAINING_ARTIFACTS)
        engine.review_qualification(worker_id, approved=True)

    def collect(worker_id, split, count):
        question_ids = []
        for _ in range(count):
            hit = engine.open_generation_hit(worker_id, "echo", split)
            passage = engine.get_passage(hit.passage_id)
            attempt = engine.submit_question(
                hit.id, f"what about {passage.id}?", 0, 13
            )
            question_ids.append(attempt.question_id)
            engine.complete_hit(hit.id)
        return question_ids

    honest_train = collect("honest", "train", 3)
    honest_dev = collect("honest", "dev", 4)
    sloppy_train = collect("sloppy", "train", 3)
    vague_dev = collect("vague", "dev", 3)

    # Manual review: sloppy falls to 2/3 ok and is revoked with all work.
    sloppy_hits = sorted(
        h.id for h in engine.hits.values() if h.worker_id == "sloppy"
    )
    engine.record_review("sloppy", sloppy_hits[0], "ok")
    engine.record_review("sloppy", sloppy_hits[1], "ok")
    engine.record_review("sloppy", sloppy_hits[2], "bad")
    assert engine.get_worker("sloppy").state == "revoked"

    # Answerability: honest gets 3/4 matches; vague gets 0/3 and is
    # discarded wholesale (0 < 0.5).
    def validate(question_id, matching):
        question = engine.get_question(question_id)
        gold = question.gold
        for validator in ("v1", "v2", "v3"):
            if matching:
                engine.add_validation(
                    question_id, validator, gold.char_start, gold.char_end
                )
            else:
                passage = engine.get_passage(question.passage_id)
                start = gold.char_end + 2
                engine.add_validation(
                    question_id, validator, start, min(start + 10, len(passage.text))
                )

    for question_id in honest_dev[:3]:
        validate(question_id, matching=True)
    validate(honest_dev[3], matching=False)
    for question_id in vague_dev:
        validate(question_id, matching=False)

    report_dev = engine.run_answerability("dev")
    assert "vague" in report_dev.discarded_worker_ids
    engine.close()
    return {
        "honest_train": honest_train,
        "honest_dev": honest_dev,
        "sloppy_train": sloppy_train,
        "vague_dev": vague_dev,
    }


def test_quality_control_replay(tmp_path):
    started = time.perf_counter()
    collected = build_quality_control_log(tmp_path)

    events = read_events(tmp_path / "events.ndjson")
    engine = Engine.from_events(events, EngineConfig(seed=4))
    assert engine.get_worker("sloppy").state == "revoked"
    assert engine.get_worker("vague").state == "revoked"
    assert engine.get_worker("honest").state == "qualified"

    out_dir = tmp_path / "export"
    engine.export("qc", out_dir, splits=("train", "dev"))

    # Exhaustive scan of everything exported.
    exported_ids = set()
    for split in ("train", "dev"):
        payload = json.loads((out_dir / f"qc-{split}.json").read_text())
        for article in payload["data"]:
            for paragraph in article["paragraphs"]:
                for qa in paragraph["qas"]:
                    exported_ids.add(qa["id"])

    discarded_authors = {"sloppy", "vague"}
    for question_id in exported_ids:
        question = engine.get_question(question_id)
        assert question.worker_id not in discarded_authors
        assert question.status == "retained"
        if question.split in ("dev", "test"):
            assignments = engine.validations[question_id]
            validators = {v.validator_id for v in assignments}
            assert len(validators) >= 3
            assert question.worker_id not in validators

    for question_id in collected["sloppy_train"] + collected["vague_dev"]:
        assert question_id not in exported_ids
    assert collected["honest_dev"][3] not in exported_ids  # unanswerable
    assert set(collected["honest_train"]) <= exported_ids
    assert set(collected["honest_dev"][:3]) <= exported_ids

    report(
        f"quality-control replay ({len(exported_ids)} exported, "
        "0 discarded artifacts)",
        started,
    )


# ----------------------------------------------------------------------
# 6. Statistics reproduction on the SQuAD 1.1 dev file, when available.


def locate_squad_dev():
    candidates = [os.environ.get("QALOOP_SQUAD_DEV")]
    candidates += [
        "data/dev-v1.1.json",
        "dev-v1.1.json",
        str(Path.home() / "data" / "dev-v1.1.json"),
    ]
    for candidate in candidates:
        if candidate and Path(candidate).is_file():
            return Path(candidate)
    return None


def test_statistics_reproduction_squad_dev():
    path = locate_squad_dev()
    if path is None:
        pytest.skip(
            "SQuAD 1.1 dev file not found (set QALOOP_SQUAD_DEV to enable)"
        )
    started = time.perf_counter()
    imported = store.import_squad(path)
    assert len(imported.questions) == 10_570

    qa_counts: dict[str, int] = {}
    for question in imported.questions:
        qa_counts[question.passage_id] = qa_counts.get(question.passage_id, 0) + 1
    part_a, part_b = store.split_stratified(
        imported.passages, 0.5, seed=13, weights=qa_counts
    )
    count_a = sum(qa_counts.get(p.id, 0) for p in part_a)
    count_b = sum(qa_counts.get(p.id, 0) for p in part_b)
    for observed, target in zip(sorted((count_a, count_b)), (5278, 5292)):
        assert abs(observed - target) <= 300

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
                collection_score=None,
                split="dev",
            )
        )
    stats = analysis.compute_stats(questions, imported.passages_by_id)
    assert abs(stats.mean_longest_ngram_overlap - 3.0) <= 0.5
    assert abs(stats.mean_question_words - 10.3) <= 0.5

    elapsed = time.perf_counter() - started
    assert elapsed < 120.0
    report(
        f"statistics reproduction (overlap {stats.mean_longest_ngram_overlap:.2f}, "
        f"question words {stats.mean_question_words:.2f}, "
        f"halves {count_a}/{count_b})",
        started,
    )


# ----------------------------------------------------------------------
# 7. Round-trip identity and replay determinism.


def test_round_trip_and_replay_determinism(tmp_path):
    started = time.perf_counter()
    build_quality_control_log(tmp_path)
    events = read_events(tmp_path / "events.ndjson")

    engines = [Engine.from_events(events, EngineConfig(seed=4)) for _ in range(2)]
    snap_dirs = []
    for index, engine in enumerate(engines):
        snap_dir = tmp_path / f"snap-{index}"
        engine.write_snapshots(snap_dir)
        snap_dirs.append(snap_dir)
    names = sorted(p.name for p in snap_dirs[0].iterdir())
    assert names
    for name in names:
        assert (snap_dirs[0] / name).read_bytes() == (
            snap_dirs[1] / name
        ).read_bytes()

    engine = engines[0]
    export_one = tmp_path / "export-one"
    export_two = tmp_path / "export-two"
    engine.export("rt", export_one, splits=("train", "dev"))

    # import(export(D)) must reproduce D field-for-field.
    for split in ("train", "dev"):
        imported = store.import_squad(export_one / f"rt-{split}.json")
        original = engine.exportable_questions(split)
        assert len(imported.questions) == len(original)
        originals_by_id = {q.id: q for q in original}
        for question in imported.questions:
            source = originals_by_id[question.id]
            assert question.text == source.text
            assert question.passage_id == source.passage_id
            assert question.answers[0] == source.gold
        for passage in imported.passages:
            source_passage = engine.passages[passage.id]
            assert passage.title == source_passage.title
            assert passage.text == source_passage.text

        # Re-exporting the imported dataset yields identical bytes.
        reimported_questions = [
            store.QuestionRecord(
                id=iq.id,
                passage_id=iq.passage_id,
                worker_id=originals_by_id[iq.id].worker_id,
                text=iq.text,
                gold=iq.answers[0],
                model_answer_at_collection=originals_by_id[
                    iq.id
                ].model_answer_at_collection,
                collection_score=originals_by_id[iq.id].collection_score,
                split=split,
            )
            for iq in imported.questions
        ]
        store.export_dataset(
            "rt",
            export_two,
            imported.passages_by_id,
            {split: reimported_questions},
            adversary_id="echo",
            validated_question_ids={q.id for q in reimported_questions},
        )
        assert (export_one / f"rt-{split}.json").read_bytes() == (
            export_two / f"rt-{split}.json"
        ).read_bytes()

    report("round-trip identity + byte-identical replay", started)
