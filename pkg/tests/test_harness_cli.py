import json

import pytest

from qpush import cli, harness

TINY = {
    "seed": 5,
    "experiments": {
        "identities": {"samples": 3000, "cases": [{"N": 1, "T": 1, "q": 0.5, "u": 0.4},
                                                  {"N": 2, "T": 2, "q": 0.5, "u": 0.4}], "cap": 20},
        "meixner": {"ks": {"samples": 3000}, "rsk": {"matrices": 100}, "trace": {"N_max": 4},
                    "lower_tail": {"N": 12, "samples": 1000, "q_grid": [0.2, 0.8]}},
        "moments": {"asymptotics": {"N_grid": [50]}, "poly": {"N_grid": [50, 100]}, "lemmas": {"N_grid": [5]},
                    "crude_tail": {"N_grid": [50]}, "dual": {"k_max": 4, "N_max": 5}},
        "laplace": {"k_grid": [10, 50]},
        "concentration": {"sum_samples": 50000},
        "main-theorem": {"decomposition": {"N": 8, "samples": 100}, "lln": {"N": 16, "samples": 50}},
    },
}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "suite.json"
    path.write_text(json.dumps(TINY))
    return path


class TestConfig:
    def test_defaults_fill_in(self):
        c = harness.ExperimentConfig("laplace", {"k_grid": [10]})
        assert c.params["k_grid"] == [10]
        assert c.params["q_grid"] == harness.DEFAULTS["laplace"]["q_grid"]

    def test_json_round_trip(self):
        c = harness.ExperimentConfig("meixner", {"ks": {"N": 4}}, seed=9, precision_bits=300)
        back = harness.ExperimentConfig.from_json(c.to_json())
        assert back.to_dict() == c.to_dict()
        assert back.hash == c.hash

    def test_hash_depends_on_seed(self):
        assert harness.ExperimentConfig("laplace", seed=1).hash != harness.ExperimentConfig("laplace", seed=2).hash

    @pytest.mark.parametrize("kwargs", [
        {"name": "nope"},
        {"name": "laplace", "params": {"k_grid_typo": [1]}},
        {"name": "meixner", "params": {"ks": 3}},
        {"name": "laplace", "seed": -1},
        {"name": "laplace", "precision_bits": 16},
    ])
    def test_rejects_bad_config(self, kwargs):
        with pytest.raises(harness.ConfigError):
            harness.ExperimentConfig.from_dict(kwargs)

    def test_rejects_unknown_keys(self):
        with pytest.raises(harness.ConfigError):
            harness.ExperimentConfig.from_dict({"name": "laplace", "colour": "red"})
        with pytest.raises(harness.ConfigError):
            harness.load_suite('{"experiment": {}}')

    def test_suite_overrides(self):
        cfgs = harness.load_suite(json.dumps(TINY), seed=11, only="laplace")
        assert [c.name for c in cfgs] == ["laplace"] and cfgs[0].seed == 11

    def test_default_suite_lists_everything(self):
        assert [c.name for c in harness.load_suite(None)] == list(harness.EXPERIMENTS)


class TestCli:
    def test_empty_suite_exit_zero(self, tmp_path):
        cfg = tmp_path / "empty.json"
        cfg.write_text('{"experiments": {}}')
        assert cli.main(["report", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert rep["verdicts"] == []

    def test_corrupted_config_exit_two(self, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text('{"experiments": ')
        assert cli.main(["report", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
        assert "line" in capsys.readouterr().err

    def test_missing_config_exit_two(self, tmp_path):
        assert cli.main(["report", "--config", str(tmp_path / "absent.json")]) == 2

    def test_usage_errors_exit_two(self, tmp_path):
        assert cli.main(["verify", "nonsense"]) == 2
        assert cli.main(["report", "--threads", "0", "--out", str(tmp_path)]) == 2
        assert cli.main([]) == 2

    def test_zero_samples_is_inconclusive(self, tmp_path):
        cfg = tmp_path / "z.json"
        cfg.write_text('{"experiments": {"identities": {"samples": 0}}}')
        assert cli.main(["report", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
        rep = json.loads((tmp_path / "o" / "report.json").read_text())
        assert {v["status"] for v in rep["verdicts"]} == {"inconclusive"}

    def test_verify_one_experiment(self, tiny_config, tmp_path):
        out = tmp_path / "o"
        assert cli.main(["verify", "laplace", "--config", str(tiny_config), "--out", str(out)]) == 0
        rep = json.loads((out / "report.json").read_text())
        assert [c["name"] for c in rep["config"]] == ["laplace"]
        assert all(v["status"] == "pass" for v in rep["verdicts"])
        assert (out / "timings.json").exists()

    def test_failure_exit_one(self, tmp_path):
        cfg = tmp_path / "f.json"
        # a band that cannot contain the ratio forces a failed check
        cfg.write_text('{"experiments": {"laplace": {"k_grid": [10], "band": [100.0, 200.0]}}}')
        assert cli.main(["report", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


class TestDeterminism:
    def test_report_identical_across_threads(self, tiny_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        cli.main(["report", "--config", str(tiny_config), "--out", str(a), "--threads", "1"])
        cli.main(["report", "--config", str(tiny_config), "--out", str(b), "--threads", "4"])
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
        for csv in a.glob("*.csv"):
            assert csv.read_bytes() == (b / csv.name).read_bytes()

    def test_report_structure(self, tiny_config, tmp_path):
        cli.main(["report", "--config", str(tiny_config), "--out", str(tmp_path)])
        rep = json.loads((tmp_path / "report.json").read_text())
        assert {c["name"] for c in rep["config"]} == set(harness.EXPERIMENTS)
        assert all(len(c["hash"]) == 16 for c in rep["config"])
        assert {v["status"] for v in rep["verdicts"]} <= {"pass", "fail", "inconclusive"}
