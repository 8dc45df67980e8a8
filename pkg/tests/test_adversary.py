import json
import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from qaloop.adversary import (
    AdversaryDescriptor,
    AdversaryRegistry,
    LexicalWindowAdversary,
    RemoteAdversary,
    StubAdversary,
    build_adversary,
    score_window,
)
from qaloop.errors import MalformedResponse, RemoteUnavailable, UnknownEntity
from qaloop.metrics import normalize
from qaloop.store import Passage


def make_passage(text, pid="p1", title="T"):
    return Passage(id=pid, title=title, text=text)


class TestStub:
    def test_configured_answer(self):
        stub = StubAdversary(
            AdversaryDescriptor(
                id="stub",
                kind="stub",
                config={"answers": {"what sets wages?": "the market"}},
            )
        )
        passage = make_passage("wages are set by the market and nothing else")
        prediction = stub.predict(passage, "what sets wages?")
        assert prediction.text == "the market"
        assert prediction.adversary_id == "stub"
        # Answer occurs in the passage, so offsets resolve.
        assert passage.text[prediction.char_start : prediction.char_end] == (
            "the market"
        )

    def test_free_text_has_no_offsets(self):
        stub = StubAdversary(
            AdversaryDescriptor(id="s", kind="stub", config={"default": "made up"})
        )
        prediction = stub.predict(make_passage("something entirely different"), "q?")
        assert prediction.text == "made up"
        assert prediction.char_start is None
        assert prediction.char_end is None

    def test_script_consumed_in_order(self):
        stub = StubAdversary(
            AdversaryDescriptor(
                id="s", kind="stub", config={"script": ["first", "second"], "default": "later"}
            )
        )
        passage = make_passage("first second later")
        assert stub.predict(passage, "q?").text == "first"
        assert stub.predict(passage, "q?").text == "second"
        assert stub.predict(passage, "q?").text == "later"

    def test_rejects_empty_inputs(self):
        stub = StubAdversary(AdversaryDescriptor(id="s", kind="stub"))
        with pytest.raises(ValueError):
            stub.predict(make_passage("text"), "")


def brute_force_best(tokens, question_tokens, max_span, context):
    """Independent argmax: enumerate spans, count overlap by hand."""
    best = None
    for start in range(len(tokens)):
        for length in range(1, min(max_span, len(tokens) - start) + 1):
            lo = max(0, start - context)
            hi = min(len(tokens), start + length + context)
            window = list(tokens[lo:hi])
            overlap = 0
            pool = list(question_tokens)
            for token in window:
                if token in pool:
                    pool.remove(token)
                    overlap += 1
            score = overlap / (1 + length)
            key = (-score, start, length)
            if best is None or key < best[0]:
                best = (key, start, length, score)
    return best


class TestScoreWindow:
    def test_overlap_beats_no_overlap(self):
        tokens = normalize("the cat sat on the mat")  # [cat, sat, on, mat]
        question = normalize("where did the cat sit")
        with_cat = score_window(tokens, 0, 2, question, context=0)
        without = score_window(tokens, 2, 2, question, context=0)
        assert with_cat > without

    def test_length_penalty(self):
        tokens = ["cat", "mat", "dog"]
        question = ["cat"]
        short = score_window(tokens, 0, 1, question, context=0)
        long = score_window(tokens, 0, 3, question, context=0)
        assert short > long

    def test_bounds_checked(self):
        with pytest.raises(ValueError):
            score_window(["a1", "b2"], 1, 5, ["a1"])
        with pytest.raises(ValueError):
            score_window(["a1"], 0, 0, ["a1"])


class TestLexicalWindow:
    def make(self, max_span=3, context=3):
        return LexicalWindowAdversary(
            AdversaryDescriptor(
                id="lex",
                kind="lexical_window",
                config={"max_span_tokens": max_span, "context_tokens": context},
            )
        )

    def test_finds_question_overlap_window(self):
        adversary = self.make(max_span=3, context=0)
        passage = make_passage("the cat sat on the mat")
        prediction = adversary.predict(passage, "where did the cat sit")
        assert "cat" in prediction.text
        span_text = passage.text[prediction.char_start : prediction.char_end]
        assert span_text == prediction.text

    def test_deterministic(self):
        adversary = self.make()
        passage = make_passage("one flew over the nest while two stayed put")
        question = "how many flew over the nest"
        first = adversary.predict(passage, question)
        for _ in range(3):
            again = adversary.predict(passage, question)
            assert (again.text, again.char_start, again.char_end) == (
                first.text,
                first.char_start,
                first.char_end,
            )

    def test_tie_broken_by_earliest_start(self):
        adversary = self.make(max_span=1, context=0)
        # "red" appears twice; both spans score identically.
        passage = make_passage("red fish and red fowl")
        prediction = adversary.predict(passage, "which red")
        assert prediction.char_start == 0

    @pytest.mark.parametrize("seed", range(8))
    def test_argmax_matches_brute_force(self, seed):
        rng = random.Random(seed)
        vocab = ["cat", "dog", "sat", "mat", "ran", "blue", "red", "sky", "sea"]
        words = [rng.choice(vocab) for _ in range(50)]
        passage = make_passage(" ".join(words))
        question = " ".join(rng.choice(vocab) for _ in range(6))
        adversary = self.make(max_span=4, context=2)
        prediction = adversary.predict(passage, question)

        tokens = normalize(passage.text)
        question_tokens = normalize(question)
        _, start, length, best_score = brute_force_best(
            tokens, question_tokens, max_span=4, context=2
        )
        returned_score = score_window(
            tokens,
            start_from_chars(words, prediction.char_start),
            len(prediction.text.split()),
            question_tokens,
            context=2,
        )
        assert returned_score == pytest.approx(best_score)
        # Tie-break rule: earliest start, then shortest span.
        assert start_from_chars(words, prediction.char_start) == start
        assert len(prediction.text.split()) == length

    def test_offsets_round_trip(self):
        adversary = self.make()
        passage = make_passage("Punctuation, oddly-spaced text; the works!")
        prediction = adversary.predict(passage, "what text")
        assert passage.text[prediction.char_start : prediction.char_end] == (
            prediction.text
        )


def start_from_chars(words, char_start):
    """Token index whose character offset matches char_start."""
    offset = 0
    for index, word in enumerate(words):
        if offset == char_start:
            return index
        offset += len(word) + 1
    raise AssertionError(f"no token starts at {char_start}")


class _ModelHandler(BaseHTTPRequestHandler):
    responses = []
    calls = 0

    def do_POST(self):
        cls = type(self)
        raw = self.rfile.read(int(self.headers["Content-Length"]))
        body = json.loads(raw)
        status, payload = cls.responses[min(cls.calls, len(cls.responses) - 1)]
        cls.calls += 1
        if callable(payload):
            payload = payload(body)
        blob = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(blob)))
        self.end_headers()
        self.wfile.write(blob)

    def log_message(self, *args):
        pass


@pytest.fixture
def model_server():
    server = HTTPServer(("127.0.0.1", 0), _ModelHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _ModelHandler.calls = 0
    yield server
    server.shutdown()


def remote(endpoint, **config):
    return RemoteAdversary(
        AdversaryDescriptor(id="rm", kind="remote", endpoint=endpoint, config=config)
    )


class TestRemote:
    def test_loopback_echo(self, model_server):
        def answer(body):
            text = body["passage"][4:14]
            return {"answer": text, "char_start": 4, "char_end": 14}

        _ModelHandler.responses = [(200, answer)]
        adversary = remote(f"http://127.0.0.1:{model_server.server_port}")
        passage = make_passage("the workforce draws wages from the market")
        prediction = adversary.predict(passage, "what pays wages")
        assert prediction.text == "workforce "
        assert (prediction.char_start, prediction.char_end) == (4, 14)
        adversary.close()

    def test_unreachable_raises_retryable(self):
        adversary = remote("http://127.0.0.1:9", timeout_s=0.2, retries=0)
        with pytest.raises(RemoteUnavailable) as excinfo:
            adversary.predict(make_passage("text here"), "q?")
        assert excinfo.value.retryable
        adversary.close()

    def test_server_error_retried_then_unavailable(self, model_server):
        _ModelHandler.responses = [(500, {}), (500, {}), (500, {})]
        adversary = remote(
            f"http://127.0.0.1:{model_server.server_port}", retries=2
        )
        with pytest.raises(RemoteUnavailable):
            adversary.predict(make_passage("text here"), "q?")
        assert _ModelHandler.calls == 3
        adversary.close()

    def test_recovers_after_transient_error(self, model_server):
        _ModelHandler.responses = [
            (500, {}),
            (200, {"answer": "text", "char_start": 0, "char_end": 4}),
        ]
        adversary = remote(
            f"http://127.0.0.1:{model_server.server_port}", retries=2
        )
        prediction = adversary.predict(make_passage("text here"), "q?")
        assert prediction.text == "text"
        adversary.close()

    def test_missing_fields_malformed(self, model_server):
        _ModelHandler.responses = [(200, {"answer": "text"})]
        adversary = remote(f"http://127.0.0.1:{model_server.server_port}")
        with pytest.raises(MalformedResponse):
            adversary.predict(make_passage("text here"), "q?")
        adversary.close()

    def test_offset_text_mismatch_malformed(self, model_server):
        _ModelHandler.responses = [
            (200, {"answer": "wrong", "char_start": 0, "char_end": 4})
        ]
        adversary = remote(f"http://127.0.0.1:{model_server.server_port}")
        with pytest.raises(MalformedResponse):
            adversary.predict(make_passage("text here"), "q?")
        adversary.close()


class TestRegistry:
    def test_build_and_lookup(self):
        registry = AdversaryRegistry(
            [AdversaryDescriptor(id="s", kind="stub", config={"default": "x"})]
        )
        assert "s" in registry
        assert registry.ids() == ["s"]
        assert registry.get("s").id == "s"

    def test_unknown_id(self):
        registry = AdversaryRegistry()
        with pytest.raises(UnknownEntity):
            registry.get("nope")

    def test_remote_requires_endpoint(self):
        with pytest.raises(ValueError):
            AdversaryDescriptor(id="r", kind="remote")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            AdversaryDescriptor(id="x", kind="neural")

    def test_build_adversary_dispatch(self):
        descriptor = AdversaryDescriptor(id="lex", kind="lexical_window")
        assert isinstance(build_adversary(descriptor), LexicalWindowAdversary)
