import json
import math

import numpy as np
import pytest

from kstep_lln.cli import EXIT_OK, EXIT_TREEFILE, EXIT_USAGE, EXIT_VERIFY, main
from kstep_lln.treefile import TreeBundle, save_tree
from kstep_lln.trees import random_tree
from tests.test_treefile import full_bundle


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestBound:
    def test_csv_row_and_config_comment(self, capsys):
        code, out, _ = run(capsys, "bound", "--N", "100", "--K", "5", "--epsilon", "0.05")
        assert code == EXIT_OK
        lines = out.strip().splitlines()
        assert lines[0].startswith("# config: ")
        assert lines[1].split(",")[:4] == ["N", "K", "epsilon", "threshold"]
        threshold = float(lines[2].split(",")[3])
        assert threshold == pytest.approx(158.63212504992021, abs=1e-6)

    def test_json_format(self, capsys):
        code, out, _ = run(
            capsys, "--format", "json", "bound", "--N", "3", "--K", "1",
            "--epsilon", repr(math.exp(-1)),
        )
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["result"][0]["threshold"] == 8.0

    def test_output_flags_accepted_after_subcommand(self, capsys):
        code, out, _ = run(
            capsys, "bound", "--N", "3", "--K", "1", "--epsilon", repr(math.exp(-1)),
            "--format", "json",
        )
        assert code == EXIT_OK
        assert json.loads(out)["result"][0]["threshold"] == 8.0

    def test_rejects_out_of_range_epsilon(self, capsys):
        code, _, err = run(capsys, "bound", "--N", "100", "--K", "5", "--epsilon", "0.75")
        assert code == EXIT_USAGE
        assert "0.7" in err


class TestInvert:
    def test_worked_instance(self, capsys):
        eps = math.exp(-1) / 15
        code, out, _ = run(capsys, "invert", "--N", "64", "--K", "1", "--epsilon", repr(eps))
        assert code == EXIT_OK
        row = out.strip().splitlines()[2].split(",")
        header = out.strip().splitlines()[1].split(",")
        rec = dict(zip(header, row))
        assert float(rec["threshold"]) == pytest.approx(4.0, abs=1e-9)
        assert rec["valid"] == "true"
        assert float(rec["kr_threshold"]) == pytest.approx(7.199096228721912, abs=1e-9)

    def test_rejects_epsilon_out_of_domain(self, capsys):
        code, _, err = run(capsys, "invert", "--N", "64", "--K", "1", "--epsilon", "0.2")
        assert code == EXIT_USAGE

    def test_direct_binomial_query(self, capsys):
        code, out, _ = run(capsys, "invert", "--m", "8", "--t", "1")
        assert code == EXIT_OK
        header, row = [line.split(",") for line in out.strip().splitlines()[1:3]]
        rec = dict(zip(header, row))
        assert float(rec["lower_bound"]) == pytest.approx(0.009022352215774179, rel=1e-12)
        assert float(rec["exact_tail"]) == pytest.approx(93 / 256, rel=1e-12)

    def test_direct_query_rejects_out_of_range_t(self, capsys):
        code, _, err = run(capsys, "invert", "--m", "8", "--t", "2")
        assert code == EXIT_USAGE
        assert "m/8" in err

    def test_incomplete_arguments_rejected(self, capsys):
        code, _, err = run(capsys, "invert", "--m", "8")
        assert code == EXIT_USAGE
        code, _, err = run(capsys, "invert", "--N", "64")
        assert code == EXIT_USAGE


class TestConstruct:
    def test_min_imbalance_scan(self, capsys):
        code, out, _ = run(capsys, "construct", "--min-imbalance", "--m-max", "100")
        assert code == EXIT_OK
        header, row = out.strip().splitlines()[1:3]
        rec = dict(zip(header.split(","), row.split(",")))
        assert rec["m_star"] == "6"
        assert float(rec["p_star"]) == 0.109375
        assert rec["p_star_exact"] == "7/64"

    def test_single_imbalance(self, capsys):
        code, out, _ = run(capsys, "construct", "--imbalance", "6")
        assert code == EXIT_OK
        assert "0.109375" in out

    def test_block_sample_deterministic(self, capsys):
        code1, out1, _ = run(capsys, "construct", "--N", "6", "--K", "3", "--seed", "11")
        code2, out2, _ = run(capsys, "construct", "--N", "6", "--K", "3", "--seed", "11")
        assert code1 == code2 == EXIT_OK
        assert out1 == out2
        values = [int(line.split(",")[1]) for line in out1.strip().splitlines()[2:]]
        assert values[0] == values[1] == values[2]
        assert values[3] == values[4] == values[5]

    def test_requires_a_mode(self, capsys):
        code, _, err = run(capsys, "construct")
        assert code == EXIT_USAGE


class TestScan:
    def test_mv_audit(self, capsys):
        code, out, _ = run(capsys, "scan", "--what", "mv-audit", "--m-max", "16")
        assert code == EXIT_OK
        assert "violations" in out

    def test_dominance(self, capsys):
        code, out, _ = run(capsys, "scan", "--what", "dominance")
        assert code == EXIT_OK
        rows = out.strip().splitlines()[2:]
        assert len(rows) == 125
        assert all(row.endswith("true") for row in rows)


class TestSimulate:
    def test_block_exact_only(self, capsys):
        code, out, _ = run(
            capsys, "simulate", "--N", "6", "--K", "1", "--C", repr(math.sqrt(6))
        )
        assert code == EXIT_OK
        rec = dict(zip(*[line.split(",") for line in out.strip().splitlines()[1:3]]))
        assert float(rec["exact_tail"]) == 0.109375

    def test_block_with_monte_carlo(self, capsys):
        code, out, _ = run(
            capsys, "simulate", "--N", "6", "--K", "1", "--C", repr(math.sqrt(6)),
            "--trials", "20000",
        )
        assert code == EXIT_OK
        rec = dict(zip(*[line.split(",") for line in out.strip().splitlines()[1:3]]))
        assert rec["ci_contains_exact"] == "true"

    def test_tree_file_two_sided(self, capsys, tmp_path):
        path = tmp_path / "t.json"
        save_tree(path, full_bundle())
        code, out, _ = run(
            capsys, "simulate", "--tree-file", str(path), "--K", "2", "--C", "1.0",
            "--sided", "two_sided",
        )
        assert code == EXIT_OK
        assert "exact_tail" in out

    def test_unreadable_tree_file(self, capsys, tmp_path):
        code, _, err = run(
            capsys, "simulate", "--tree-file", str(tmp_path / "missing.json"),
            "--K", "1", "--C", "1.0",
        )
        assert code == EXIT_TREEFILE

    def test_tree_without_values_rejected(self, capsys, tmp_path):
        tree, _ = random_tree(2, 2, seed=1)
        path = tmp_path / "bare.json"
        save_tree(path, TreeBundle(tree=tree))
        code, _, err = run(
            capsys, "simulate", "--tree-file", str(path), "--K", "1", "--C", "1.0"
        )
        assert code == EXIT_TREEFILE
        assert "no Y values" in err


class TestDecide:
    def test_regret_report(self, capsys, tmp_path):
        path = tmp_path / "d.json"
        save_tree(path, full_bundle())
        code, out, _ = run(capsys, "decide", "--tree-file", str(path), "--epsilon", "0.3")
        assert code == EXIT_OK
        header, row = [line.split(",") for line in out.strip().splitlines()[1:3]]
        rec = dict(zip(header, row))
        assert rec["bound_holds"] == "true"
        assert rec["shift_check_passed"] == "true"

    def test_missing_losses(self, capsys, tmp_path):
        tree, seq = random_tree(3, 2, seed=2)
        path = tmp_path / "nolosses.json"
        save_tree(path, TreeBundle(tree=tree, sequence=seq))
        code, _, err = run(capsys, "decide", "--tree-file", str(path))
        assert code == EXIT_TREEFILE
        assert "no losses" in err


class TestOutputHandling:
    def test_byte_identical_reruns(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for target in (a, b):
            code, _, _ = run(
                capsys, "--output", str(target), "simulate", "--N", "12", "--K", "2",
                "--C", "4.0", "--trials", "5000",
            )
            assert code == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_output_dir_environment_variable(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("KSTEP_LLN_OUTPUT_DIR", str(tmp_path))
        code, _, _ = run(capsys, "--output", "row.csv", "bound", "--N", "10", "--K", "1",
                         "--epsilon", "0.1")
        assert code == EXIT_OK
        assert (tmp_path / "row.csv").exists()

    def test_unknown_command_exits_with_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == EXIT_USAGE


class TestVerifyAllQuick:
    def test_quick_tier_passes_and_writes_artifacts(self, capsys, tmp_path):
        code, out, _ = run(
            capsys, "verify-all", "--quick", "--artifact-dir", str(tmp_path)
        )
        assert code == EXIT_OK
        lines = [l for l in out.splitlines() if l.startswith("[criterion")]
        assert len(lines) == 10
        assert all("PASS" in l for l in lines)
        assert (tmp_path / "criterion_7.csv").exists()
        assert (tmp_path / "criterion_8.csv").exists()
        assert (tmp_path / "criterion_9.csv").exists()
