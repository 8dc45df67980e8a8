import json

import pytest

from qaloop.cli import main
from qaloop.events import read_events

from .conftest import make_engine, qualify_worker
from .test_store import squad_fixture


class TestAdjudicate:
    def test_partial_overlap_win(self, capsys):
        exit_code = main(
            ["adjudicate", "--gold", "New York", "--pred", "New York City"]
        )
        assert exit_code == 0
        out = capsys.readouterr().out
        assert "f1=0.800" in out
        assert "model_win=true" in out

    def test_disjoint_loss(self, capsys):
        exit_code = main(["adjudicate", "--gold", "the market", "--pred", "mercury"])
        assert exit_code == 0
        out = capsys.readouterr().out
        assert "f1=0.000" in out
        assert "model_win=false" in out

    def test_custom_threshold(self, capsys):
        exit_code = main(
            [
                "adjudicate",
                "--gold",
                "New York",
                "--pred",
                "New York City",
                "--threshold",
                "0.9",
            ]
        )
        assert exit_code == 0
        assert "model_win=false" in capsys.readouterr().out


class TestEvaluate:
    def write_fixture(self, tmp_path):
        dataset = tmp_path / "dataset.json"
        dataset.write_text(json.dumps(squad_fixture()))
        return dataset

    def test_golds_as_predictions(self, tmp_path, capsys):
        dataset = self.write_fixture(tmp_path)
        predictions = tmp_path / "predictions.json"
        predictions.write_text(json.dumps({"q1": "Tyne"}))
        exit_code = main(
            ["evaluate", "--dataset", str(dataset), "--predictions", str(predictions)]
        )
        assert exit_code == 0
        assert "EM 100.0 / F1 100.0" in capsys.readouterr().out

    def test_json_output_full_precision(self, tmp_path, capsys):
        dataset = self.write_fixture(tmp_path)
        predictions = tmp_path / "predictions.json"
        predictions.write_text(json.dumps({"q1": "the Tyne river"}))
        exit_code = main(
            [
                "evaluate",
                "--dataset",
                str(dataset),
                "--predictions",
                str(predictions),
                "--json",
            ]
        )
        assert exit_code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["count"] == 1
        assert payload["em"] == 0.0
        assert payload["f1"] == pytest.approx(2 / 3 * 100)

    def test_missing_prediction_is_data_error(self, tmp_path, capsys):
        dataset = self.write_fixture(tmp_path)
        predictions = tmp_path / "predictions.json"
        predictions.write_text("{}")
        exit_code = main(
            ["evaluate", "--dataset", str(dataset), "--predictions", str(predictions)]
        )
        assert exit_code == 1
        assert "missing_predictions" in capsys.readouterr().err


class TestAnalyze:
    def test_reports_written(self, tmp_path, capsys):
        dataset = tmp_path / "dataset.json"
        dataset.write_text(json.dumps(squad_fixture()))
        out_dir = tmp_path / "reports"
        exit_code = main(["analyze", "--dataset", str(dataset), "--out", str(out_dir)])
        assert exit_code == 0
        stats = json.loads((out_dir / "stats.json").read_text())
        assert stats["wh_distribution"]["which"] == 1.0
        for name in (
            "question_length_histogram.csv",
            "answer_length_histogram.csv",
            "ngram_overlap_histogram.csv",
            "wh_distribution.csv",
            "answer_type_distribution.csv",
        ):
            assert (out_dir / name).exists()


class TestImport:
    def test_check_only(self, tmp_path, capsys):
        dataset = tmp_path / "dataset.json"
        dataset.write_text(json.dumps(squad_fixture()))
        exit_code = main(["import", "--file", str(dataset), "--check-only"])
        assert exit_code == 0
        assert "1 passages, 1 qas" in capsys.readouterr().out

    def test_import_seeds_event_log(self, tmp_path, capsys):
        dataset = tmp_path / "dataset.json"
        dataset.write_text(json.dumps(squad_fixture()))
        data_dir = tmp_path / "data"
        exit_code = main(
            [
                "import",
                "--file",
                str(dataset),
                "--data-dir",
                str(data_dir),
                "--split",
                "dev",
            ]
        )
        assert exit_code == 0
        events = read_events(data_dir / "events.ndjson")
        assert [e.kind for e in events] == ["passage_added"]
        assert events[0].payload["split"] == "dev"

    def test_bad_file_is_data_error(self, tmp_path, capsys):
        dataset = tmp_path / "broken.json"
        dataset.write_text("{oops")
        exit_code = main(["import", "--file", str(dataset), "--check-only"])
        assert exit_code == 1
        assert "malformed_json" in capsys.readouterr().err


class TestExportAndReplay:
    def collect(self, tmp_path):
        engine = make_engine(tmp_path / "data")
        qualify_worker(engine, "w1")
        hit = engine.open_generation_hit("w1", "echo", "train")
        engine.submit_question(hit.id, "What flows where?", 0, 9)
        engine.complete_hit(hit.id)
        engine.close()

    def test_export_writes_files(self, tmp_path, capsys):
        self.collect(tmp_path)
        out_dir = tmp_path / "exports"
        exit_code = main(
            [
                "export",
                "--data-dir",
                str(tmp_path / "data"),
                "--name",
                "demo",
                "--out",
                str(out_dir),
                "--splits",
                "train",
            ]
        )
        assert exit_code == 0
        assert (out_dir / "demo-train.json").exists()
        assert (out_dir / "demo-manifest.json").exists()

    def test_replay_deterministic(self, tmp_path, capsys):
        self.collect(tmp_path)
        log = tmp_path / "data" / "events.ndjson"
        for run in ("one", "two"):
            exit_code = main(
                ["replay", "--log", str(log), "--out", str(tmp_path / run)]
            )
            assert exit_code == 0
        for path in sorted((tmp_path / "one").iterdir()):
            assert path.read_bytes() == (tmp_path / "two" / path.name).read_bytes()


class TestUsageErrors:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == 2

    def test_missing_required_flag_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["evaluate", "--dataset", "only.json"])
        assert excinfo.value.code == 2
