import json

import pytest

from crowdtier import ConfigError, ExperimentConfig, run_experiment
from crowdtier.cli import main
from crowdtier.harness import (
    find_avr_witness,
    find_greedy_witness,
    find_ntbfm_witness,
    synthetic_graph,
)
from crowdtier import nam_select, ntbfm, psm


class TestRunExperiment:
    def test_tier1_budget_feasible_every_round(self):
        config = ExperimentConfig(mechanism="tenm", synthetic_n=25, seed=3, rounds=5)
        report = run_experiment(config)
        assert report.budget_feasible
        assert len(report.rounds) == 5
        for r in report.rounds:
            assert r.metrics["budget_feasible"]

    def test_deterministic_bytes(self):
        config = ExperimentConfig(mechanism="psm", synthetic_n=20, seed=7, rounds=5)
        a = run_experiment(config).to_json()
        b = run_experiment(config).to_json()
        assert a == b

    def test_zero_deviation_matches_plain_run(self):
        base = ExperimentConfig(mechanism="ntbfm", synthetic_n=20, seed=5, rounds=3)
        zero = ExperimentConfig(
            mechanism="ntbfm", synthetic_n=20, seed=5, rounds=3, deviation_frac=0.0
        )
        assert run_experiment(base).to_json() == run_experiment(zero).to_json()

    def test_deviation_fraction_marks_deviators(self):
        config = ExperimentConfig(
            mechanism="tenm", synthetic_n=20, seed=5, rounds=2, deviation_frac=0.3
        )
        report = run_experiment(config)
        for r in report.rounds:
            assert len(r.metrics["deviators"]) == 6

    def test_quality_mechanisms_partition(self):
        config = ExperimentConfig(
            mechanism="ectai", synthetic_n=12, seed=2, rounds=2, f=3, g=3
        )
        report = run_experiment(config)
        for r in report.rounds:
            assert r.metrics["batches"] == 4

    def test_wipd_rounds_settle(self):
        config = ExperimentConfig(
            mechanism="wipd", seed=4, rounds=2, num_tasks=4, num_bidders=2,
            val_lo=3, val_hi=9,
        )
        report = run_experiment(config)
        for r in report.rounds:
            assert r.metrics["rounds_to_settle"] >= 1

    def test_greedy_reports_winners(self):
        config = ExperimentConfig(mechanism="greedy", seed=4, rounds=3)
        report = run_experiment(config)
        assert all("winners" in r.metrics for r in report.rounds)

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig(mechanism="nope"))
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig(mechanism="tenm", rounds=0))
        with pytest.raises(ConfigError):
            run_experiment(ExperimentConfig(mechanism="tenm", deviation_frac=1.5))

    def test_budget_sweep_winner_count_monotone(self):
        graph = synthetic_graph(20, 0.3, 11)
        costs = {i: 20 + (i * 7) % 31 for i in range(20)}
        for mechanism in ("tenm", "ntbfm", "psm"):
            previous = -1
            for budget in range(100, 1100, 100):
                if mechanism == "tenm":
                    count = len(nam_select(graph, costs, budget)[0])
                elif mechanism == "ntbfm":
                    count = len(ntbfm(graph, costs, budget).selected)
                else:
                    count = len(psm(costs, budget, graph).selected)
                assert count >= previous
                previous = count


class TestWitnessSearches:
    def test_ntbfm_witness_found(self):
        witness = find_ntbfm_witness(instances=50, seed=0)
        assert witness is not None
        assert witness["deviation_utility"] > witness["truthful_utility"]

    def test_greedy_witness_found(self):
        witness = find_greedy_witness(instances=50, seed=0)
        assert witness is not None

    def test_avr_witness_found(self):
        witness = find_avr_witness(profiles=20, seed=0)
        assert witness is not None
        assert witness["deviation_gap"] < witness["truthful_gap"]


class TestCli:
    def test_tenm_example(self, capsys, ex6_paths):
        graph, costs = ex6_paths
        code = main(["tenm", "--graph", graph, "--budget", "12", "--costs", costs])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["selected"] == [1, 6]
        assert payload["payments"] == {"1": "2", "6": "3"}
        assert payload["total_payment"] == "5"

    def test_graph_info(self, capsys, ex6_paths):
        code = main(["graph-info", "--graph", ex6_paths[0]])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload == {
            "nodes": 6, "edges": 10, "max_degree": 4, "min_degree": 3,
            "isolated": 0,
        }

    def test_estimate_prints_plain_value(self, capsys):
        assert main(["estimate", "--degree", "4", "--p", "0.5"]) == 0
        assert capsys.readouterr().out == "2.0\n"

    def test_unknown_subcommand_exits_1(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_unknown_flag_exits_1(self, capsys):
        assert main(["estimate", "--degree", "4", "--bogus"]) == 1

    def test_missing_graph_file_exits_1(self, capsys):
        assert main(["graph-info", "--graph", "/no/such/file"]) == 1

    def test_bad_cost_range_exits_1(self, capsys, ex6_paths):
        code = main([
            "tenm", "--graph", ex6_paths[0], "--budget", "10",
            "--cost-range", "50:20",
        ])
        assert code == 1

    def test_experiment_deterministic_across_worker_counts(self, tmp_path):
        out1 = tmp_path / "a.json"
        out8 = tmp_path / "b.json"
        base = ["experiment", "--mechanism", "psm", "--rounds", "5",
                "--seed", "7", "--n", "20"]
        assert main(base + ["--workers", "1", "--out", str(out1)]) == 0
        assert main(base + ["--workers", "8", "--out", str(out8)]) == 0
        assert out1.read_bytes() == out8.read_bytes()

    def test_experiment_csv_format(self, capsys):
        code = main([
            "experiment", "--mechanism", "psm", "--rounds", "2",
            "--seed", "1", "--n", "10", "--format", "csv",
        ])
        assert code == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "round,mechanism,metric,value"
        assert all(line.split(",")[1] == "psm" for line in lines[1:])

    def test_quality_cli(self, capsys):
        code = main(["ectai", "--devices", "12", "--f", "3", "--g", "3",
                     "--seed", "2"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert len(payload["ordered"]) == 4

    def test_wipd_cli(self, capsys):
        code = main(["wipd", "--num-tasks", "3", "--bidders", "2",
                     "--val-range", "3:6", "--seed", "1"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["rounds"] >= 1

    def test_out_file_written(self, tmp_path, ex6_paths):
        out = tmp_path / "r.json"
        graph, costs = ex6_paths
        code = main(["tenm", "--graph", graph, "--budget", "12",
                     "--costs", costs, "--out", str(out)])
        assert code == 0
        assert json.loads(out.read_text())["selected"] == [1, 6]
