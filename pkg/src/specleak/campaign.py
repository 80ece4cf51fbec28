"""Campaign driver: parses configuration files, runs fuzzing rounds through
the test-case pipeline, and emits a reproducible report.

A campaign executes ``num_programs`` rounds.  Each round generates one random
program with ``inputs_per_program`` random inputs from seeds derived from
(campaign seed, round index), runs the pipeline, and appends one record.  The
report is a line-delimited JSON log: a campaign header line, one line per
round, and a closing summary line.  Every field in the report is a
deterministic function of the configuration and seed (wall-clock timing is
printed to stderr but never stored), so identical configurations produce
byte-identical reports.

Work is accounted in deterministic run units (one unit per program
execution).  The summary's metric triple is:

- testing speed: test cases per 1000 run units,
- detection rate: violations per test case,
- detection time: run units until the first violation.

Config files use a small YAML subset: scalar keys, lists, and one nesting
level for the device section.  Unknown keys are hard errors.
"""

from __future__ import annotations

import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import yaml

from .contract import ContractSpec
from .dut import UarchConfig
from .generator import GenConfig, generate_inputs, generate_program
from .isa import FLAG_NAMES, Flags, InputData, PAGE_SIZE, REG_NAMES_64, fnv1a_64
from .pipeline import PipelineSettings, TestCaseResult, run_test_case

SEMANTICS_VERSION = 1

_CATEGORY_ALIASES = {
    "BASE-BINARY": "base",
    "BASE-STRINGOP": "strn",
}

_DUT_KEYS = {f.name for f in dataclasses.fields(UarchConfig)}


class ConfigError(ValueError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, key: str, line: int):
        super().__init__(f"line {line}: unknown key '{key}'")
        self.line = line


class TypeMismatch(ConfigError):
    def __init__(self, key: str, expected: str, line: int):
        super().__init__(f"line {line}: key '{key}' expects {expected}")
        self.line = line


class SeedMismatch(ValueError):
    """The report's seeds or fingerprint disagree with the current build."""


@dataclass
class CampaignConfig:
    instruction_categories: list[str] = field(default_factory=lambda: ["cond", "dxfr"])
    contract_observation_clause: str = "ct"
    contract_execution_clause: str = "seq"
    enable_speculation_filter: bool = True
    enable_observation_filter: bool = True
    inputs_per_class: int = 2
    program_size: int = 32
    mem_accesses: int = 8
    basic_blocks: int | None = None
    input_entropy_bits: int = 16
    num_programs: int = 100
    inputs_per_program: int = 50
    seed: int = 0
    dut: UarchConfig = field(default_factory=lambda: UarchConfig(cond_predictor=True))

    def contract_spec(self) -> ContractSpec:
        return ContractSpec(self.contract_observation_clause, self.contract_execution_clause)

    def gen_config(self, round_seed: int) -> GenConfig:
        return GenConfig(
            categories=frozenset(self.instruction_categories),
            program_size=self.program_size,
            mem_accesses=self.mem_accesses,
            basic_blocks=self.basic_blocks,
            input_entropy_bits=self.input_entropy_bits,
            seed=round_seed,
        )

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return out

    @staticmethod
    def from_dict(data: dict) -> "CampaignConfig":
        data = dict(data)
        dut = data.pop("dut", {})
        cfg = CampaignConfig(**data)
        cfg.dut = UarchConfig(**dut)
        return cfg


def config_fingerprint(cfg: CampaignConfig) -> str:
    canonical = json.dumps(cfg.as_dict(), sort_keys=True, separators=(",", ":"))
    return f"{fnv1a_64(f'v{SEMANTICS_VERSION}:{canonical}'.encode()):016x}"


# ==================================================================================================
# Config file parsing
# ==================================================================================================
def parse_config(path: str) -> CampaignConfig:
    with open(path) as fh:
        return parse_config_text(fh.read())


def parse_config_text(text: str) -> CampaignConfig:
    """Parse the key-value config format; unknown keys and wrong value types
    are hard errors carrying the offending line number."""
    root = yaml.compose(text)
    cfg = CampaignConfig()
    if root is None:
        return cfg
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError("config must be a key-value mapping")

    for key_node, value_node in root.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        if key == "dut":
            if not isinstance(value_node, yaml.MappingNode):
                raise TypeMismatch(key, "a mapping of device settings", line)
            _parse_dut(cfg.dut, value_node)
        elif key == "instruction_categories":
            cfg.instruction_categories = _parse_category_list(value_node, line)
        elif key == "contract_observation_clause":
            cfg.contract_observation_clause = _scalar(value_node, str, key, line)
        elif key == "contract_execution_clause":
            # accepts a scalar or a one-element list
            if isinstance(value_node, yaml.SequenceNode):
                items = [_scalar(n, str, key, line) for n in value_node.value]
                if len(items) != 1:
                    raise TypeMismatch(key, "one execution clause", line)
                cfg.contract_execution_clause = items[0]
            else:
                cfg.contract_execution_clause = _scalar(value_node, str, key, line)
        elif key in ("enable_speculation_filter", "enable_observation_filter"):
            setattr(cfg, key, _scalar(value_node, bool, key, line))
        elif key in ("inputs_per_class", "program_size", "mem_accesses", "basic_blocks",
                     "input_entropy_bits", "num_programs", "inputs_per_program", "seed"):
            setattr(cfg, key, _scalar(value_node, int, key, line))
        else:
            raise UnknownKey(key, line)
    return cfg


def _parse_dut(dut: UarchConfig, node: yaml.MappingNode) -> None:
    for key_node, value_node in node.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        if key not in _DUT_KEYS:
            raise UnknownKey(f"dut.{key}", line)
        current = getattr(dut, key)
        expected = bool if isinstance(current, bool) else (float if key == "noise_rate" else int)
        setattr(dut, key, _scalar(value_node, expected, f"dut.{key}", line))
    UarchConfig.__post_init__(dut)


def _parse_category_list(node, line: int) -> list[str]:
    if not isinstance(node, yaml.SequenceNode):
        raise TypeMismatch("instruction_categories", "a list", line)
    out = []
    for item in node.value:
        name = item.value
        name = _CATEGORY_ALIASES.get(name, name.lower())
        if name != "base":  # the arithmetic base is always present
            out.append(name)
    return out


def _scalar(node, expected_type, key: str, line: int):
    if not isinstance(node, yaml.ScalarNode):
        raise TypeMismatch(key, expected_type.__name__, line)
    raw = node.value
    if expected_type is bool:
        lowered = raw.lower()
        if lowered in ("true", "yes", "on"):
            return True
        if lowered in ("false", "no", "off"):
            return False
        raise TypeMismatch(key, "a boolean", line)
    if expected_type is int:
        try:
            return int(raw, 0)
        except ValueError:
            raise TypeMismatch(key, "an integer", line) from None
    if expected_type is float:
        try:
            return float(raw)
        except ValueError:
            raise TypeMismatch(key, "a number", line) from None
    return raw


# ==================================================================================================
# Serialization of report entities
# ==================================================================================================
def _input_to_json(input_data: InputData) -> dict:
    return {
        "regs": {name: input_data.regs[i] for i, name in enumerate(REG_NAMES_64)},
        "flags": {name: int(getattr(input_data.flags, name.lower())) for name in FLAG_NAMES},
        "memory_hex": input_data.memory.hex(),
    }


def input_from_json(data: dict) -> InputData:
    regs = [data["regs"][name] for name in REG_NAMES_64]
    flags = Flags(*(bool(data["flags"][name]) for name in FLAG_NAMES))
    memory = bytes.fromhex(data["memory_hex"])
    assert len(memory) == PAGE_SIZE
    return InputData(regs, flags, memory)


def _round_seeds(campaign_seed: int, round_index: int) -> dict:
    state = np.random.SeedSequence([campaign_seed, round_index]).generate_state(3, np.uint64)
    return {
        "generator": int(state[0]) >> 1,  # SeedSequence entropy wants non-negative ints
        "boost": int(state[1]) >> 1,
        "noise": int(state[2]) >> 1,
    }


@dataclass
class CampaignReport:
    config: CampaignConfig
    fingerprint: str
    records: list[dict]
    summary: dict

    @property
    def violations(self) -> list[dict]:
        out = []
        for record in self.records:
            out.extend(record["violations"])
        return out

    def find_violation(self, violation_id: str) -> tuple[dict, dict]:
        for record in self.records:
            for violation in record["violations"]:
                if violation["id"] == violation_id:
                    return record, violation
        raise KeyError(f"no violation '{violation_id}' in report")

    def to_lines(self) -> list[str]:
        dump = lambda obj: json.dumps(obj, sort_keys=True, separators=(",", ":"))
        lines = [dump({"type": "campaign", "config": self.config.as_dict(),
                       "fingerprint": self.fingerprint,
                       "semantics_version": SEMANTICS_VERSION})]
        lines += [dump({"type": "round", **record}) for record in self.records]
        lines.append(dump({"type": "summary", **self.summary}))
        return lines

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.to_lines()) + "\n")


def load_report(path: str) -> CampaignReport:
    config = None
    fingerprint = ""
    records = []
    summary: dict = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            kind = obj.pop("type")
            if kind == "campaign":
                config = CampaignConfig.from_dict(obj["config"])
                fingerprint = obj["fingerprint"]
            elif kind == "round":
                records.append(obj)
            elif kind == "summary":
                summary = obj
    if config is None:
        raise ConfigError("report lacks a campaign header line")
    return CampaignReport(config, fingerprint, records, summary)


# ==================================================================================================
# Campaign execution
# ==================================================================================================
def _pipeline_settings(cfg: CampaignConfig, seeds: dict) -> PipelineSettings:
    return PipelineSettings(
        contract=cfg.contract_spec(),
        uarch=cfg.dut,
        inputs_per_class=cfg.inputs_per_class,
        enable_speculation_filter=cfg.enable_speculation_filter,
        enable_observation_filter=cfg.enable_observation_filter,
        input_entropy_bits=cfg.input_entropy_bits,
        boost_seed=seeds["boost"],
        noise_seed=seeds["noise"],
    )


def _run_round(cfg: CampaignConfig, round_index: int) -> tuple[TestCaseResult, dict, object, list]:
    seeds = _round_seeds(cfg.seed, round_index)
    gen_cfg = cfg.gen_config(seeds["generator"])
    program = generate_program(gen_cfg)
    inputs = generate_inputs(cfg.inputs_per_program, gen_cfg)
    result = run_test_case(program, inputs, _pipeline_settings(cfg, seeds))
    return result, seeds, program, inputs


def _round_record(cfg: CampaignConfig, round_index: int, result: TestCaseResult,
                  seeds: dict, program, fingerprint: str) -> dict:
    violations = []
    for ordinal, violation in enumerate(result.violations):
        i, j = violation.input_indices
        violations.append({
            "id": f"r{round_index}v{ordinal}",
            "round": round_index,
            "input_pair": [i, j],
            "ctrace_key": f"{violation.ctrace.key:016x}",
            "ctrace_text": violation.ctrace.text,
            "htraces": [violation.htraces[0].render(), violation.htraces[1].render()],
            "inputs": [_input_to_json(result.boosted_inputs[i]),
                       _input_to_json(result.boosted_inputs[j])],
            "program": program.render(),
            "seeds": dict(seeds),
            "config_fingerprint": fingerprint,
        })
    class_sizes = sorted((len(c.members) for c in result.classes), reverse=True)
    return {
        "round": round_index,
        "seeds": seeds,
        "discarded_by": result.discarded_by,
        "spec_filter_kept": result.spec_filter_kept,
        "spec_filter_evidence": (result.spec_filter_evidence.as_dict()
                                 if result.spec_filter_evidence else None),
        "obs_filter_kept": result.obs_filter_kept,
        "num_classes": len(result.classes),
        "class_sizes": class_sizes[:16],
        "degenerate_classes": result.degenerate_classes,
        "input_effectiveness": result.input_effectiveness,
        "suppressed_noise": result.suppressed_noise,
        "suppressed_context": result.suppressed_context,
        "runs": result.runs,
        "violations": violations,
    }


def run_campaign(cfg: CampaignConfig, out_path: str | None = None,
                 on_round=None, progress: bool = False) -> CampaignReport:
    """Execute the campaign; interruptible, in which case the report covers
    the completed rounds and is flagged as partial."""
    fingerprint = config_fingerprint(cfg)
    records: list[dict] = []
    interrupted = False
    started = time.monotonic()

    try:
        for round_index in range(cfg.num_programs):
            result, seeds, program, _ = _run_round(cfg, round_index)
            record = _round_record(cfg, round_index, result, seeds, program, fingerprint)
            records.append(record)
            if progress and (round_index + 1) % 50 == 0:
                print(f"round {round_index + 1}/{cfg.num_programs}, "
                      f"violations so far: {sum(len(r['violations']) for r in records)}",
                      file=sys.stderr)
            if on_round is not None:
                on_round(record)
    except KeyboardInterrupt:
        interrupted = True

    summary = _summarize(records, interrupted)
    report = CampaignReport(cfg, fingerprint, records, summary)
    if progress:
        elapsed = time.monotonic() - started
        print(f"campaign finished in {elapsed:.1f}s wall time "
              f"({summary['cases_total']} cases, {summary['violations']} violations)",
              file=sys.stderr)
    if out_path is not None:
        report.write(out_path)
    return report


def _summarize(records: list[dict], interrupted: bool) -> dict:
    cases = len(records)
    analyzed = [r for r in records if r["discarded_by"] is None]
    violations = sum(len(r["violations"]) for r in records)
    total_runs = sum(r["runs"] for r in records)

    runs_to_first = None
    acc = 0
    for record in records:
        acc += record["runs"]
        if record["violations"]:
            runs_to_first = acc
            break

    spec_checked = [r for r in records if r["spec_filter_kept"] is not None]
    obs_checked = [r for r in records if r["obs_filter_kept"] is not None]
    effectiveness_values = [r["input_effectiveness"] for r in analyzed
                            if r["input_effectiveness"] is not None]
    return {
        "interrupted": interrupted,
        "cases_total": cases,
        "cases_analyzed": len(analyzed),
        "cases_discarded": cases - len(analyzed),
        "violations": violations,
        "total_runs": total_runs,
        "testing_speed_cases_per_krun": (1000.0 * cases / total_runs) if total_runs else None,
        "detection_rate_per_case": (violations / cases) if cases else None,
        "detection_time_runs": runs_to_first,
        "speculation_filter_pass_rate": (sum(1 for r in spec_checked if r["spec_filter_kept"])
                                         / len(spec_checked)) if spec_checked else None,
        "observation_filter_pass_rate": (sum(1 for r in obs_checked if r["obs_filter_kept"])
                                         / len(obs_checked)) if obs_checked else None,
        "mean_input_effectiveness": (sum(effectiveness_values) / len(effectiveness_values))
        if effectiveness_values else None,
        "suppressed_noise_events": sum(r["suppressed_noise"] for r in records),
        "suppressed_context_events": sum(r["suppressed_context"] for r in records),
    }


# ==================================================================================================
# Reproduction
# ==================================================================================================
@dataclass
class ReproduceVerdict:
    confirmed: bool
    reason: str


def reproduce(report: CampaignReport, violation_id: str,
              clause_overrides: dict | None = None) -> ReproduceVerdict:
    """Regenerate the violating test case from its seeds and re-run the
    pipeline.  ``clause_overrides`` lets callers re-check with device clauses
    toggled, turning a confirmation into a clause-dependence probe."""
    record, violation = report.find_violation(violation_id)
    cfg = report.config

    expected_fingerprint = config_fingerprint(cfg)
    if violation["config_fingerprint"] != expected_fingerprint:
        raise SeedMismatch(
            "report fingerprint does not match this build's semantics for the stored config")
    if violation["seeds"] != _round_seeds(cfg.seed, record["round"]):
        raise SeedMismatch("stored round seeds do not derive from the campaign seed")

    if clause_overrides:
        cfg = CampaignConfig.from_dict(cfg.as_dict())
        for name, value in clause_overrides.items():
            setattr(cfg.dut, name, value)

    result, _, _, _ = _run_round(cfg, record["round"])
    wanted = (tuple(violation["input_pair"]), violation["ctrace_key"],
              tuple(violation["htraces"]))
    for found in result.violations:
        key = (found.input_indices, f"{found.ctrace.key:016x}",
               (found.htraces[0].render(), found.htraces[1].render()))
        if key == wanted:
            return ReproduceVerdict(True, "violation reproduced exactly")
    if result.violations:
        return ReproduceVerdict(False, "violations found but none matches the stored one")
    if result.discarded_by:
        return ReproduceVerdict(False, f"test case now discarded by {result.discarded_by}")
    return ReproduceVerdict(False, "no violation on re-run")


def format_stats(report: CampaignReport) -> str:
    s = report.summary
    lines = [
        f"test cases:            {s['cases_total']} "
        f"({s['cases_analyzed']} analyzed, {s['cases_discarded']} discarded)",
        f"violations:            {s['violations']}",
        f"testing speed:         {_fmt(s['testing_speed_cases_per_krun'])} cases per 1000 runs",
        f"detection rate:        {_fmt(s['detection_rate_per_case'])} violations per case",
        f"detection time:        {_fmt(s['detection_time_runs'])} runs to first violation",
        f"speculation filter:    {_fmt_rate(s['speculation_filter_pass_rate'])} pass rate",
        f"observation filter:    {_fmt_rate(s['observation_filter_pass_rate'])} pass rate",
        f"input effectiveness:   {_fmt_rate(s['mean_input_effectiveness'])}",
        f"suppressed noise:      {s['suppressed_noise_events']}",
    ]
    if s["interrupted"]:
        lines.append("NOTE: campaign was interrupted; figures cover completed rounds only")
    return "\n".join(lines)


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def _fmt_rate(value) -> str:
    return "n/a" if value is None else f"{100.0 * value:.1f}%"
