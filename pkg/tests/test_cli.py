import json
from pathlib import Path

import pytest

from geoseek.cli import main

DEMO = Path(__file__).parent.parent / "data" / "demo"
FIXTURES = Path(__file__).parent / "data" / "geocode_fixtures"


def write_jsonl(path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return str(path)


@pytest.fixture
def reward_files(tmp_path):
    truth = write_jsonl(
        tmp_path / "truth.jsonl",
        [{"id": "q1", "lat": 52.37, "lon": 4.89, "country": "Netherlands",
          "region": "North Holland", "precise": "Dam Square"}],
    )
    candidates = write_jsonl(
        tmp_path / "cands.jsonl",
        [
            {"id": "q1", "reasoning": ["The plates indicate Netherlands.",
                                        "This is North Holland.",
                                        "This is Dam Square."],
             "country": "Netherlands", "region": "North Holland",
             "precise": "Dam Square", "lat": 52.37, "lon": 4.89},
            {"id": "q1", "reasoning": ["This is France.", "This is Paris.", ""],
             "country": "France", "region": "Paris", "precise": "Louvre",
             "lat": 48.85, "lon": 2.35},
        ],
    )
    return truth, candidates


class TestUsage:
    def test_no_command_is_usage_error(self, capsys):
        assert main([]) == 1

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_missing_required_flag(self):
        assert main(["eval", "--truth", "x.jsonl"]) == 1

    def test_help_exits_zero(self):
        assert main(["--help"]) == 0


class TestEvalCommand:
    def test_table_output(self, capsys):
        code = main([
            "eval", "--truth", str(DEMO / "demo_truth.jsonl"),
            "--pred", str(DEMO / "demo_pred.jsonl"),
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "City" in out and "geoscore" in out

    def test_json_output_matches_golden(self, capsys):
        code = main([
            "eval", "--truth", str(DEMO / "demo_truth.jsonl"),
            "--pred", str(DEMO / "demo_pred.jsonl"), "--out", "json",
        ])
        assert code == 0
        out = capsys.readouterr().out
        golden = (Path(__file__).parent / "data" / "golden_report.json").read_text()
        assert out == golden

    def test_dataset_mismatch_is_data_error(self, tmp_path, capsys):
        truth = write_jsonl(tmp_path / "t.jsonl",
                            [{"id": "a", "lat": 0, "lon": 0, "country": "X"}])
        pred = write_jsonl(tmp_path / "p.jsonl",
                           [{"id": "ghost", "country": "X", "lat": 0, "lon": 0}])
        assert main(["eval", "--truth", truth, "--pred", pred]) == 2

    def test_unresolvable_without_geocoding_is_degraded(self, tmp_path, capsys, monkeypatch):
        monkeypatch.delenv("GEOSEEK_GEOCODE_KEY", raising=False)
        truth = write_jsonl(tmp_path / "t.jsonl",
                            [{"id": "a", "lat": 0, "lon": 0, "country": "X"}])
        pred = write_jsonl(tmp_path / "p.jsonl", [{"id": "a", "country": "X"}])
        code = main(["eval", "--truth", truth, "--pred", pred, "--out", "json"])
        assert code == 3
        report = json.loads(capsys.readouterr().out)
        assert report["unresolved"] == 1
        assert report["accuracy"]["Continent"] == 0.0

    def test_fixture_resolution(self, tmp_path, capsys):
        truth = write_jsonl(tmp_path / "t.jsonl",
                            [{"id": "a", "lat": 48.8584, "lon": 2.2945,
                              "country": "France"}])
        pred = write_jsonl(tmp_path / "p.jsonl",
                           [{"id": "a", "country": "Eiffel Tower", "region": "Paris"}])
        code = main(["eval", "--truth", truth, "--pred", pred,
                     "--fixtures", str(FIXTURES), "--out", "json"])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["accuracy"]["City"] == 100.0


class TestRewardCommand:
    def test_emits_breakdown_per_candidate(self, reward_files, capsys):
        truth, candidates = reward_files
        code = main(["reward", "--truth", truth, "--candidates", candidates])
        captured = capsys.readouterr()
        assert code == 0
        lines = [json.loads(l) for l in captured.out.strip().splitlines()]
        assert len(lines) == 2
        assert lines[0]["r_spa"] == 1.0
        assert lines[0]["total"] > lines[1]["total"]
        assert set(lines[0]) == {"id", "r_spa", "r_sem", "r_con", "total"}
        # defaults are announced when no config file is given
        assert "tau=200" in captured.err

    def test_honors_config_file(self, reward_files, tmp_path, capsys):
        truth, candidates = reward_files
        config = tmp_path / "cfg.toml"
        config.write_text("tau = 100.0\na1 = 2.0\n")
        code = main(["reward", "--truth", truth, "--candidates", candidates,
                     "--config", str(config)])
        assert code == 0
        lines = [json.loads(l) for l in capsys.readouterr().out.strip().splitlines()]
        assert lines[0]["total"] == pytest.approx(
            2.0 * lines[0]["r_spa"] + 1.0 * lines[0]["r_sem"] + 0.5 * lines[0]["r_con"]
        )

    def test_unknown_config_key_is_data_error(self, reward_files, tmp_path):
        truth, candidates = reward_files
        config = tmp_path / "cfg.toml"
        config.write_text("tua = 100.0\n")
        assert main(["reward", "--truth", truth, "--candidates", candidates,
                     "--config", str(config)]) == 2

    def test_unresolvable_candidate_degrades(self, tmp_path, monkeypatch):
        monkeypatch.delenv("GEOSEEK_GEOCODE_KEY", raising=False)
        truth = write_jsonl(tmp_path / "t.jsonl",
                            [{"id": "q", "lat": 0, "lon": 0, "country": "X"}])
        candidates = write_jsonl(tmp_path / "c.jsonl",
                                 [{"id": "q", "country": "X"}])
        assert main(["reward", "--truth", truth, "--candidates", candidates]) == 3


class TestSimulateCommand:
    def test_csv_deterministic(self, tmp_path):
        args = ["simulate", "--steps", "20", "--cells", "16", "--seed", "3",
                "--out", str(tmp_path / "a.csv")]
        assert main(args) == 0
        assert main(["simulate", "--steps", "20", "--cells", "16", "--seed", "3",
                     "--out", str(tmp_path / "b.csv")]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        header = (tmp_path / "a.csv").read_text().splitlines()[0]
        assert header == "step,mean_r_spa,mean_r_sem,mean_r_con,mean_total"

    def test_json_summary(self, capsys):
        code = main(["simulate", "--steps", "5", "--cells", "16", "--seed", "1", "--json"])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["cells"] == 16
        assert "argmax_cell" in summary and "truth_cell" in summary

    def test_bad_cell_count_is_data_error(self):
        assert main(["simulate", "--steps", "5", "--cells", "20"]) == 2


class TestSampleCommand:
    @pytest.fixture
    def sample_files(self, tmp_path):
        stats = tmp_path / "stats.csv"
        stats.write_text(
            "code,road_km,population,area_km2\nAA,600,500,500\nBB,400,500,500\n"
        )
        grid = tmp_path / "grid.csv"
        grid.write_text(
            "lat_index,lon_index,population,country\n"
            "100,200,1000,AA\n100,201,10,AA\n120,300,500,BB\n"
        )
        return str(stats), str(grid)

    def test_draws_written_and_deterministic(self, sample_files, tmp_path, capsys):
        stats, grid = sample_files
        out_a = tmp_path / "a.jsonl"
        code = main(["sample", "--stats", stats, "--grid", grid, "--total", "100",
                     "--seed", "5", "--out", str(out_a)])
        assert code == 0
        assert capsys.readouterr().out == "AA 55\nBB 45\n"
        out_b = tmp_path / "b.jsonl"
        main(["sample", "--stats", stats, "--grid", grid, "--total", "100",
              "--seed", "5", "--out", str(out_b)])
        assert out_a.read_bytes() == out_b.read_bytes()
        rows = [json.loads(l) for l in out_a.read_text().splitlines()]
        assert len(rows) == 100
        assert {r["country"] for r in rows} == {"AA", "BB"}

    def test_json_summary(self, sample_files, capsys):
        stats, grid = sample_files
        code = main(["sample", "--stats", stats, "--grid", grid, "--total", "20",
                     "--seed", "1", "--json"])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["per_country"] == {"AA": 11, "BB": 9}


class TestGeocodeCacheCommand:
    def test_warm_then_stats(self, tmp_path, capsys):
        cache = tmp_path / "cache.jsonl"
        queries = tmp_path / "q.txt"
        queries.write_text("Eiffel Tower, Paris\n48.858400,2.294500\n")
        code = main(["geocode-cache", "warm", "--cache", str(cache),
                     "--queries", str(queries), "--fixtures", str(FIXTURES)])
        assert code == 0
        assert "warmed 2" in capsys.readouterr().out
        code = main(["geocode-cache", "stats", "--cache", str(cache), "--json"])
        assert code == 0
        assert json.loads(capsys.readouterr().out)["entries"] == 2

    def test_warm_requires_queries(self, tmp_path):
        assert main(["geocode-cache", "warm", "--cache", str(tmp_path / "c.jsonl")]) == 1

    def test_warm_missing_fixture_degrades(self, tmp_path, capsys):
        queries = tmp_path / "q.txt"
        queries.write_text("Atlantis\n")
        code = main(["geocode-cache", "warm", "--cache", str(tmp_path / "c.jsonl"),
                     "--queries", str(queries), "--fixtures", str(FIXTURES)])
        assert code == 3


class TestCompareCommand:
    def test_zero_delta_for_identical_runs(self, tmp_path, capsys):
        report = tmp_path / "r.json"
        main(["eval", "--truth", str(DEMO / "demo_truth.jsonl"),
              "--pred", str(DEMO / "demo_pred.jsonl"), "--out", "json"])
        report.write_text(capsys.readouterr().out)
        code = main(["compare", "--a", str(report), "--b", str(report), "--json"])
        assert code == 0
        delta = json.loads(capsys.readouterr().out)
        assert all(v == 0.0 for v in delta["accuracy"].values())

    def test_demo_pair_matches_golden(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["eval", "--truth", str(DEMO / "demo_truth.jsonl"),
              "--pred", str(DEMO / "demo_pred.jsonl"), "--out", "json"])
        a.write_text(capsys.readouterr().out)
        main(["eval", "--truth", str(DEMO / "demo_truth.jsonl"),
              "--pred", str(DEMO / "demo_pred_b.jsonl"), "--out", "json"])
        b.write_text(capsys.readouterr().out)
        code = main(["compare", "--a", str(a), "--b", str(b), "--json"])
        assert code == 0
        delta = json.loads(capsys.readouterr().out)
        golden = json.loads(
            (Path(__file__).parent / "data" / "golden_compare.json").read_text()
        )
        assert delta == golden

    def test_mismatched_datasets_rejected(self, tmp_path, capsys):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["eval", "--truth", str(DEMO / "demo_truth.jsonl"),
              "--pred", str(DEMO / "demo_pred.jsonl"), "--out", "json"])
        a.write_text(capsys.readouterr().out)
        truth = write_jsonl(tmp_path / "t.jsonl",
                            [{"id": "z", "lat": 0, "lon": 0, "country": "X"}])
        pred = write_jsonl(tmp_path / "p.jsonl",
                           [{"id": "z", "country": "X", "lat": 0, "lon": 0}])
        main(["eval", "--truth", truth, "--pred", pred, "--out", "json"])
        b.write_text(capsys.readouterr().out)
        assert main(["compare", "--a", str(a), "--b", str(b)]) == 2
