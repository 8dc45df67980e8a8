import pytest

from qaloop.adversary import AdversaryDescriptor, AdversaryRegistry
from qaloop.engine import Engine, EngineConfig, utc_now
from qaloop.events import EventLog
from qaloop.store import Passage

PASSAGE_TEXTS = {
    "p-wages": (
        "In a purely capitalist mode of production the workers wages will "
        "be controlled by the market. Wages work in the same way as prices "
        "for any other good."
    ),
    "p-fluid": (
        "Normally water is the fluid of choice due to its favourable "
        "properties. Mercury is the working fluid in the mercury vapor "
        "turbine."
    ),
    "p-tyne": (
        "The river Tyne flows through Newcastle toward the North Sea, "
        "past the old keelmen quarter of Sandgate."
    ),
}

TRAINING_ARTIFACTS = [
    {"kind": "question_for_answer", "question": "What sets wages?"},
    {"kind": "question_for_answer", "question": "Which fluid is preferred?"},
    {"kind": "answer_for_question", "char_start": 0, "char_end": 4},
    {"kind": "answer_for_question", "char_start": 5, "char_end": 10},
    {"kind": "full_pair", "question": "Where is Sandgate?", "char_start": 0, "char_end": 3},
    {"kind": "sample_hit", "hit": "demo"},
]


def make_registry(script=None):
    descriptors = [
        AdversaryDescriptor(id="echo", kind="stub", config={"default": ""}),
        AdversaryDescriptor(id="lex", kind="lexical_window"),
    ]
    if script is not None:
        descriptors.append(
            AdversaryDescriptor(id="scripted", kind="stub", config={"script": script})
        )
    return AdversaryRegistry(descriptors)


def make_engine(tmp_path, script=None, config=None, with_passages=True):
    log = EventLog(tmp_path / "events.ndjson", utc_now)
    engine = Engine(
        config or EngineConfig(),
        registry=make_registry(script),
        log=log,
    )
    if with_passages:
        for pid, text in PASSAGE_TEXTS.items():
            engine.add_passage(Passage(id=pid, title=pid, text=text), "train")
    return engine


def qualify_worker(engine, worker_id, country="GB"):
    engine.register_worker(worker_id, country, 0.99, 5000)
    engine.qualification_flow(worker_id, TRAINING_ARTIFACTS)
    engine.review_qualification(worker_id, approved=True)
    return engine.get_worker(worker_id)


@pytest.fixture
def engine(tmp_path):
    return make_engine(tmp_path)
