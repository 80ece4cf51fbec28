"""Campaign driver: config parsing, report determinism, metrics consistency,
reproduction, interruption, and the command-line interface."""

import json
import subprocess
import sys

import pytest

from specleak.campaign import (
    CampaignConfig, SeedMismatch, TypeMismatch, UnknownKey, config_fingerprint,
    format_stats, load_report, parse_config_text, reproduce, run_campaign,
)
from specleak.cli import main as cli_main
from specleak.dut import UarchConfig

SMALL_V1 = CampaignConfig(
    instruction_categories=["cond", "dxfr", "nop", "logi"],
    program_size=12, mem_accesses=3, basic_blocks=3,
    num_programs=25, inputs_per_program=15, seed=11,
    dut=UarchConfig(cond_predictor=True))


APPENDIX_STYLE_CONFIG = """\
instruction_categories:
  - BASE-BINARY
  - BASE-STRINGOP
contract_observation_clause: ct
contract_execution_clause:
  - seq
enable_speculation_filter: true
enable_observation_filter: true
inputs_per_class: 2
"""


class TestParseConfig:
    def test_appendix_style_file(self):
        cfg = parse_config_text(APPENDIX_STYLE_CONFIG)
        assert cfg.instruction_categories == ["strn"]
        assert cfg.contract_execution_clause == "seq"
        assert cfg.enable_speculation_filter and cfg.enable_observation_filter
        assert cfg.inputs_per_class == 2

    def test_empty_file_gives_defaults(self):
        cfg = parse_config_text("")
        assert cfg.program_size == 32
        assert cfg.mem_accesses == 8
        assert cfg.input_entropy_bits == 16
        assert cfg.contract_execution_clause == "seq"
        assert cfg.enable_speculation_filter and cfg.enable_observation_filter

    def test_unknown_key_is_a_hard_error_with_line(self):
        with pytest.raises(UnknownKey) as exc:
            parse_config_text("inputs_per_clas: 2\n")
        assert exc.value.line == 1

    def test_unknown_dut_key(self):
        with pytest.raises(UnknownKey) as exc:
            parse_config_text("dut:\n  cond_predicto: true\n")
        assert exc.value.line == 2

    def test_type_mismatch_with_line(self):
        with pytest.raises(TypeMismatch) as exc:
            parse_config_text("program_size: big\n")
        assert exc.value.line == 1
        with pytest.raises(TypeMismatch):
            parse_config_text("enable_speculation_filter: 3\n")

    def test_dut_section(self):
        cfg = parse_config_text(
            "dut:\n  store_bypass: true\n  speculation_window: 64\n  noise_rate: 0.5\n")
        assert cfg.dut.store_bypass
        assert cfg.dut.speculation_window == 64
        assert cfg.dut.noise_rate == 0.5


class TestRunCampaign:
    def test_round_accounting(self):
        report = run_campaign(SMALL_V1)
        s = report.summary
        assert s["cases_total"] == 25
        assert s["cases_discarded"] + s["cases_analyzed"] == 25
        assert len(report.records) == 25

    def test_deterministic_byte_identical_reports(self, tmp_path):
        a_path, b_path = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run_campaign(SMALL_V1, out_path=str(a_path))
        run_campaign(SMALL_V1, out_path=str(b_path))
        assert a_path.read_bytes() == b_path.read_bytes()

    def test_different_seed_changes_report(self, tmp_path):
        a = run_campaign(SMALL_V1)
        other = CampaignConfig(**{**SMALL_V1.as_dict(), "seed": 12, "dut": None})
        other.dut = UarchConfig(cond_predictor=True)
        b = run_campaign(other)
        assert a.to_lines() != b.to_lines()

    def test_metrics_recompute_from_records(self):
        report = run_campaign(SMALL_V1)
        s = report.summary
        total_runs = sum(r["runs"] for r in report.records)
        assert s["total_runs"] == total_runs
        violations = sum(len(r["violations"]) for r in report.records)
        assert s["violations"] == violations
        assert s["detection_rate_per_case"] == pytest.approx(violations / 25)
        assert s["testing_speed_cases_per_krun"] == pytest.approx(25 * 1000 / total_runs)
        # detection time consistency within one test-case quantum
        if s["detection_time_runs"] is not None:
            acc = 0
            for record in report.records:
                acc += record["runs"]
                if record["violations"]:
                    break
            assert s["detection_time_runs"] == acc

    def test_interruptible_with_partial_report(self, tmp_path):
        calls = []

        def bomb(record):
            calls.append(record)
            if len(calls) == 5:
                raise KeyboardInterrupt

        report = run_campaign(SMALL_V1, out_path=str(tmp_path / "p.jsonl"), on_round=bomb)
        assert report.summary["interrupted"]
        assert len(report.records) == 5
        loaded = load_report(str(tmp_path / "p.jsonl"))
        assert len(loaded.records) == 5

    def test_report_round_trips_through_file(self, tmp_path):
        path = tmp_path / "r.jsonl"
        report = run_campaign(SMALL_V1, out_path=str(path))
        loaded = load_report(str(path))
        assert loaded.fingerprint == report.fingerprint
        assert loaded.records == report.records
        assert loaded.summary == report.summary
        assert loaded.config.as_dict() == SMALL_V1.as_dict()


@pytest.fixture(scope="module")
def report():
    return run_campaign(SMALL_V1)


class TestReproduce:
    def test_confirms_stored_violation(self, report):
        violations = report.violations
        assert violations, "fixture campaign found no violations"
        verdict = reproduce(report, violations[0]["id"])
        assert verdict.confirmed

    def test_unknown_id(self, report):
        with pytest.raises(KeyError):
            reproduce(report, "r999v9")

    def test_tampered_seed_raises(self, report):
        import copy
        tampered = copy.deepcopy(report)
        _, violation = tampered.find_violation(tampered.violations[0]["id"])
        violation["seeds"]["generator"] ^= 1
        with pytest.raises(SeedMismatch):
            reproduce(tampered, violation["id"])

    def test_stale_fingerprint_raises(self, report):
        import copy
        tampered = copy.deepcopy(report)
        _, violation = tampered.find_violation(tampered.violations[0]["id"])
        violation["config_fingerprint"] = "0" * 16
        with pytest.raises(SeedMismatch):
            reproduce(tampered, violation["id"])

    def test_refuted_when_enabling_clause_disabled(self, report):
        verdict = reproduce(report, report.violations[0]["id"],
                            clause_overrides={"cond_predictor": False})
        assert not verdict.confirmed

    def test_stats_formatting(self, report):
        text = format_stats(report)
        assert "violations" in text
        assert "detection" in text


class TestFingerprint:
    def test_stable_for_equal_configs(self):
        clone = CampaignConfig.from_dict(SMALL_V1.as_dict())
        assert config_fingerprint(clone) == config_fingerprint(SMALL_V1)
        assert len(config_fingerprint(SMALL_V1)) == 16

    def test_changes_with_config(self):
        other = CampaignConfig.from_dict(SMALL_V1.as_dict())
        other.seed = 99
        assert config_fingerprint(other) != config_fingerprint(SMALL_V1)


class TestCli:
    def test_fuzz_exit_codes(self, tmp_path):
        config = tmp_path / "c.yaml"
        config.write_text(
            "instruction_categories:\n  - cond\n  - dxfr\nbasic_blocks: 2\n"
            "program_size: 10\nmem_accesses: 3\n"
            "dut:\n  cond_predictor: true\n")
        out = tmp_path / "r.jsonl"
        code = cli_main(["fuzz", "-c", str(config), "-n", "15", "-i", "10",
                         "--seed", "11", "--out", str(out), "-q"])
        assert code in (0, 1)
        report = load_report(str(out))
        assert code == (1 if report.summary["violations"] else 0)

    def test_quiet_device_exits_zero(self, tmp_path):
        config = tmp_path / "c.yaml"
        config.write_text(
            "instruction_categories:\n  - logi\n"
            "program_size: 6\nmem_accesses: 1\n"
            "dut:\n  cond_predictor: false\n")
        code = cli_main(["fuzz", "-c", str(config), "-n", "5", "-i", "5", "-q"])
        assert code == 0

    def test_config_error_exits_two(self, tmp_path):
        config = tmp_path / "bad.yaml"
        config.write_text("inputs_per_clas: 2\n")
        assert cli_main(["fuzz", "-c", str(config), "-q"]) == 2

    def test_usage_error_exits_two(self):
        assert cli_main(["frobnicate"]) == 2

    def test_stats_and_reproduce_commands(self, tmp_path, capsys):
        config = tmp_path / "c.yaml"
        config.write_text(
            "instruction_categories:\n  - cond\n  - dxfr\nbasic_blocks: 2\n"
            "program_size: 10\nmem_accesses: 3\n"
            "dut:\n  cond_predictor: true\n")
        out = tmp_path / "r.jsonl"
        cli_main(["fuzz", "-c", str(config), "-n", "20", "-i", "10",
                  "--seed", "11", "--out", str(out), "-q"])
        assert cli_main(["stats", "--report", str(out)]) == 0
        report = load_report(str(out))
        if report.violations:
            vid = report.violations[0]["id"]
            assert cli_main(["reproduce", "--report", str(out), "--violation", vid]) == 0
            captured = capsys.readouterr()
            assert "confirmed" in captured.out

    def test_minimize_command(self, tmp_path, capsys):
        config = tmp_path / "c.yaml"
        config.write_text(
            "instruction_categories:\n  - cond\n  - dxfr\nbasic_blocks: 2\n"
            "program_size: 10\nmem_accesses: 3\n"
            "dut:\n  cond_predictor: true\n")
        out = tmp_path / "r.jsonl"
        cli_main(["fuzz", "-c", str(config), "-n", "30", "-i", "10",
                  "--seed", "11", "--out", str(out), "-q"])
        report = load_report(str(out))
        if report.violations:
            vid = report.violations[0]["id"]
            code = cli_main(["minimize", "-c", str(config), "--report", str(out),
                             "--violation", vid])
            assert code == 0
            captured = capsys.readouterr()
            assert captured.out.strip()  # the shrunk program was printed

    def test_console_entry_point(self):
        result = subprocess.run([sys.executable, "-m", "specleak.cli", "--help"],
                                capture_output=True, text=True)
        assert result.returncode == 0
        assert "fuzz" in result.stdout
