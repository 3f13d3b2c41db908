"""End-to-end command-line behavior, driven in process through main()."""

import csv
import json

import pytest

from benchtuner.cli import main
from benchtuner.util import canonical_json

from conftest import small_arith_config

BISECT_TUNE = {
    "env": "synthetic",
    "rho": 0.5,
    "designer": {"strategy": "scripted-bisection", "knob": "level"},
    "target": {"backend": "synthetic-logistic", "weights": [1.0],
               "slope": 8.0, "offset": 4.0, "seed": 7},
    "I": 4,
    "n_s": 50,
    "seed": 0,
}


def _write_json(path, payload):
    path.write_text(json.dumps(payload) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture()
def tune_config(tmp_path):
    config = dict(BISECT_TUNE, out_dir=str(tmp_path / "out"))
    return _write_json(tmp_path / "tune.json", config), tmp_path / "out"


class TestTune:
    def test_writes_log_and_best_config(self, tune_config, capsys):
        config_path, out_dir = tune_config
        assert main(["tune", "--config", config_path]) == 0
        log_lines = (out_dir / "run_log.jsonl").read_text().splitlines()
        assert len(log_lines) == 4 + 2  # header, I iterations, footer
        best = json.loads((out_dir / "best_config.json").read_text())
        assert best["env"] == "synthetic"
        assert best["rho"] == 0.5
        assert best["level"] is None
        assert best["best_index"] in range(1, 5)
        assert 0.0 <= best["best_gap"] <= 1.0
        assert set(best["config"]) == {"level"}
        assert "best iteration" in capsys.readouterr().out

    def test_level_flag_resolves_to_named_rho(self, tmp_path):
        config = dict(BISECT_TUNE, out_dir=str(tmp_path / "out"))
        del config["rho"]
        config_path = _write_json(tmp_path / "tune.json", config)
        assert main(["tune", "--config", config_path, "--level", "hard"]) == 0
        best = json.loads((tmp_path / "out" / "best_config.json").read_text())
        assert best["level"] == "hard"
        assert best["rho"] == 0.25

    def test_level_and_rho_flags_conflict(self, tune_config, capsys):
        config_path, _ = tune_config
        code = main(["tune", "--config", config_path,
                     "--level", "hard", "--rho", "0.3"])
        assert code == 2
        assert "not both" in capsys.readouterr().err

    def test_unknown_level_name(self, tmp_path, capsys):
        config = dict(BISECT_TUNE, out_dir=str(tmp_path / "out"))
        del config["rho"]
        config["level"] = "nightmare"
        config_path = _write_json(tmp_path / "tune.json", config)
        assert main(["tune", "--config", config_path]) == 2
        assert "nightmare" in capsys.readouterr().err

    def test_malformed_config_file(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{oops")
        assert main(["tune", "--config", str(path)]) == 2
        assert "malformed JSON" in capsys.readouterr().err

    def test_missing_designer_section(self, tmp_path, capsys):
        config = dict(BISECT_TUNE, out_dir=str(tmp_path / "out"))
        del config["designer"]
        config_path = _write_json(tmp_path / "tune.json", config)
        assert main(["tune", "--config", config_path]) == 2
        assert "designer" in capsys.readouterr().err

    def test_reruns_replace_the_log(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        out_dir = tmp_path / "out"
        out_dir.mkdir()
        (out_dir / "run_log.jsonl").write_text("stale junk\n")
        config = dict(BISECT_TUNE, out_dir=str(out_dir))
        config_path = _write_json(tmp_path / "tune.json", config)
        assert main(["tune", "--config", config_path]) == 0
        first = (out_dir / "run_log.jsonl").read_bytes()
        assert b"stale junk" not in first
        assert main(["tune", "--config", config_path]) == 0
        assert (out_dir / "run_log.jsonl").read_bytes() == first

    def test_llm_designer_with_missing_replay_store(self, tmp_path, capsys):
        config = dict(BISECT_TUNE, out_dir=str(tmp_path / "out"))
        config["designer"] = {"strategy": "llm", "model": "designer"}
        config["gateway"] = {"mode": "replay",
                             "store": str(tmp_path / "absent.jsonl")}
        config_path = _write_json(tmp_path / "tune.json", config)
        assert main(["tune", "--config", config_path]) == 3
        assert "error:" in capsys.readouterr().err


@pytest.fixture()
def arith_files(tmp_path):
    config_path = _write_json(tmp_path / "run.json",
                              {"env": "arith", "rho": 0.5, "seed": 3})
    params_path = _write_json(tmp_path / "params.json", small_arith_config())
    return config_path, params_path


class TestGenerate:
    def test_writes_canonical_jsonl(self, arith_files, tmp_path, capsys):
        config_path, params_path = arith_files
        out = tmp_path / "data.jsonl"
        code = main(["generate", "--config", config_path,
                     "--params", params_path, "--n", "6", "--out", str(out)])
        assert code == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 6
        for line in lines:
            record = json.loads(line)
            assert canonical_json(record) == line
            assert {"x", "y", "ground_truth", "prompt"} <= set(record)
        assert "wrote 6 problems" in capsys.readouterr().out

    def test_output_is_deterministic(self, arith_files, tmp_path):
        config_path, params_path = arith_files
        outputs = []
        for name in ("a.jsonl", "b.jsonl"):
            out = tmp_path / name
            assert main(["generate", "--config", config_path,
                         "--params", params_path, "--n", "5",
                         "--out", str(out)]) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]

    def test_n_zero_gives_an_empty_file(self, arith_files, tmp_path):
        config_path, params_path = arith_files
        out = tmp_path / "empty.jsonl"
        assert main(["generate", "--config", config_path,
                     "--params", params_path, "--n", "0",
                     "--out", str(out)]) == 0
        assert out.read_text() == ""

    def test_negative_n_is_rejected(self, arith_files, tmp_path, capsys):
        config_path, params_path = arith_files
        code = main(["generate", "--config", config_path,
                     "--params", params_path, "--n", "-1",
                     "--out", str(tmp_path / "x.jsonl")])
        assert code == 2
        assert "non-negative" in capsys.readouterr().err

    def test_out_of_domain_params(self, tmp_path, capsys):
        config_path = _write_json(tmp_path / "run.json",
                                  {"env": "spatial", "rho": 0.5})
        params_path = _write_json(tmp_path / "params.json",
                                  {"width": 3})
        code = main(["generate", "--config", config_path,
                     "--params", params_path, "--n", "2",
                     "--out", str(tmp_path / "x.jsonl")])
        assert code == 2
        err = capsys.readouterr().err
        assert "params out of domain" in err
        assert "width" in err


def _generate_arith(tmp_path, n=8):
    config_path = _write_json(tmp_path / "run.json",
                              {"env": "arith", "rho": 0.5, "seed": 3,
                               "target": {"backend": "oracle-noisy"}})
    params_path = _write_json(tmp_path / "params.json", small_arith_config())
    dataset = tmp_path / "data.jsonl"
    assert main(["generate", "--config", config_path,
                 "--params", params_path, "--n", str(n),
                 "--out", str(dataset)]) == 0
    return config_path, params_path, dataset


class TestEvaluate:
    def test_noiseless_oracle_scores_everything(self, tmp_path, capsys):
        config_path, _, dataset = _generate_arith(tmp_path)
        out = tmp_path / "eval.json"
        code = main(["evaluate", "--config", config_path,
                     "--dataset", str(dataset), "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["rho_hat"] == 1.0
        assert payload["n"] == 8
        assert payload["rho"] == 0.5
        assert payload["level"] is None
        assert len(payload["per_item"]) == 8
        assert "rho_hat 1.0000" in capsys.readouterr().out

    def test_synthetic_backend_without_params(self, tmp_path, capsys):
        config_path = _write_json(
            tmp_path / "run.json",
            {"env": "synthetic", "rho": 0.5,
             "target": {"backend": "synthetic-logistic", "weights": [1.0]}})
        params_path = _write_json(tmp_path / "params.json", {"level": 50})
        dataset = tmp_path / "data.jsonl"
        assert main(["generate", "--config", config_path,
                     "--params", params_path, "--n", "4",
                     "--out", str(dataset)]) == 0
        code = main(["evaluate", "--config", config_path,
                     "--dataset", str(dataset),
                     "--out", str(tmp_path / "eval.json")])
        assert code == 2
        assert "config" in capsys.readouterr().err

    def test_bad_dataset_line_names_the_line(self, tmp_path, capsys):
        config_path, _, dataset = _generate_arith(tmp_path, n=3)
        lines = dataset.read_text().splitlines()
        lines[1] = "{not json"
        dataset.write_text("\n".join(lines) + "\n")
        code = main(["evaluate", "--config", config_path,
                     "--dataset", str(dataset),
                     "--out", str(tmp_path / "eval.json")])
        assert code == 2
        assert ":2:" in capsys.readouterr().err

    def test_empty_dataset_is_rejected(self, tmp_path, capsys):
        config_path, _, dataset = _generate_arith(tmp_path, n=3)
        dataset.write_text("\n")
        code = main(["evaluate", "--config", config_path,
                     "--dataset", str(dataset),
                     "--out", str(tmp_path / "eval.json")])
        assert code == 2
        assert "no problems" in capsys.readouterr().err

    def test_rho_out_of_range(self, tmp_path, capsys):
        config_path, _, dataset = _generate_arith(tmp_path, n=3)
        code = main(["evaluate", "--config", config_path,
                     "--dataset", str(dataset), "--rho", "1.5",
                     "--out", str(tmp_path / "eval.json")])
        assert code == 2
        assert "rho" in capsys.readouterr().err


def _eval_record(tmp_path, name, rho_hat, level="medium", rho=0.5):
    return _write_json(tmp_path / name,
                       {"level": level, "rho": rho, "rho_hat": rho_hat})


class TestReport:
    def test_groups_replicates_into_one_row(self, tmp_path, capsys):
        evals = [_eval_record(tmp_path, f"e{i}.json", rho_hat)
                 for i, rho_hat in enumerate([0.45, 0.50, 0.55])]
        out_dir = tmp_path / "report"
        argv = ["report", "--out_dir", str(out_dir)]
        for path in evals:
            argv += ["--eval", path]
        assert main(argv) == 0
        with open(out_dir / "report.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["level", "rho", "mean_rho_hat", "mean_gap",
                           "ci_half_width", "n_seeds"]
        assert len(rows) == 2
        level, rho, mean_rho_hat, mean_gap, half, n_seeds = rows[1]
        assert (level, rho, n_seeds) == ("medium", "0.5", "3")
        assert float(mean_rho_hat) == pytest.approx(0.5)
        assert float(mean_gap) == pytest.approx(0.1 / 3, abs=1e-6)
        assert float(half) > 0
        mirrored = json.loads((out_dir / "report.json").read_text())
        assert mirrored[0]["n_seeds"] == 3
        assert (out_dir / "gap_by_level.png").stat().st_size > 0
        assert not (out_dir / "convergence.png").exists()
        assert capsys.readouterr().err == ""

    def test_single_record_warns_and_omits_interval(self, tmp_path, capsys):
        eval_path = _eval_record(tmp_path, "solo.json", 0.42)
        out_dir = tmp_path / "report"
        assert main(["report", "--eval", eval_path,
                     "--out_dir", str(out_dir)]) == 0
        assert "single record" in capsys.readouterr().err
        with open(out_dir / "report.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[1][4] == ""

    def test_logs_add_a_convergence_figure(self, tune_config, tmp_path,
                                           capsys):
        config_path, out_dir = tune_config
        assert main(["tune", "--config", config_path]) == 0
        eval_path = _eval_record(tmp_path, "e.json", 0.48)
        report_dir = tmp_path / "report"
        assert main(["report", "--eval", eval_path,
                     "--log", str(out_dir / "run_log.jsonl"),
                     "--out_dir", str(report_dir)]) == 0
        assert (report_dir / "convergence.png").stat().st_size > 0
        assert "convergence.png" in capsys.readouterr().out

    def test_tables_and_figures_are_byte_stable(self, tmp_path):
        evals = [_eval_record(tmp_path, f"e{i}.json", rho_hat)
                 for i, rho_hat in enumerate([0.45, 0.55])]
        snapshots = []
        for name in ("r1", "r2"):
            out_dir = tmp_path / name
            argv = ["report", "--out_dir", str(out_dir)]
            for path in evals:
                argv += ["--eval", path]
            assert main(argv) == 0
            snapshots.append({f.name: f.read_bytes()
                              for f in sorted(out_dir.iterdir())})
        assert snapshots[0] == snapshots[1]
        assert set(snapshots[0]) == {"report.csv", "report.json",
                                     "gap_by_level.png"}

    def test_requires_at_least_one_input(self, tmp_path, capsys):
        assert main(["report", "--out_dir", str(tmp_path / "r")]) == 2
        assert "--eval or --log" in capsys.readouterr().err

    def test_record_missing_rho_hat(self, tmp_path, capsys):
        bad = _write_json(tmp_path / "bad.json", {"rho": 0.5})
        assert main(["report", "--eval", bad,
                     "--out_dir", str(tmp_path / "r")]) == 2
        assert "rho_hat" in capsys.readouterr().err

    def test_corrupt_log_is_a_config_error(self, tmp_path, capsys):
        log = tmp_path / "bad.jsonl"
        log.write_text("not json\n")
        assert main(["report", "--log", str(log),
                     "--out_dir", str(tmp_path / "r")]) == 2
        assert "error:" in capsys.readouterr().err
