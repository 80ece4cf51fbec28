"""specleak: a model-based relational fuzzer that hunts speculative
information leaks by comparing expected leakage (contract traces from an
architectural model) against observed leakage (cache fingerprints from a
microarchitectural simulator with injectable leak mechanisms).
"""

from .analyzer import EquivalenceClass, Violation, build_classes, detect_violations
from .boost import BoostResult, ContractDivergence, boost, effectiveness
from .campaign import (
    CampaignConfig, CampaignReport, load_report, parse_config, reproduce, run_campaign,
)
from .contract import ContractSpec, CTrace, Observation, collect_ctrace
from .deps import DependencyTracker, trace_dependencies, tracked_ctrace
from .dut import HTrace, PerfCounters, Simulator, UarchConfig, measure
from .filters import observation_filter, serialize, speculation_filter
from .generator import GenConfig, InfeasibleConfig, generate_inputs, generate_program
from .isa import (
    Flags, InputData, Instruction, Program, Reg, parse_program, validate_sandbox,
)
from .minimizer import PredicateUnstable, minimize
from .pipeline import PipelineSettings, run_test_case
from .reproducers import LEAK_IDS, all_reproducers, reproducer
from .semantics import ArchState, arch_step, read_write_sets, run_program

__version__ = "0.1.0"

__all__ = [
    "ArchState", "BoostResult", "CampaignConfig", "CampaignReport", "ContractDivergence",
    "ContractSpec", "CTrace", "DependencyTracker", "EquivalenceClass", "Flags", "GenConfig",
    "HTrace", "InfeasibleConfig", "InputData", "Instruction", "LEAK_IDS", "Observation",
    "PerfCounters", "PipelineSettings", "PredicateUnstable", "Program", "Reg", "Simulator",
    "UarchConfig", "Violation", "all_reproducers", "arch_step", "boost", "build_classes",
    "collect_ctrace", "detect_violations", "effectiveness", "generate_inputs",
    "generate_program", "load_report", "measure", "minimize", "observation_filter",
    "parse_config", "parse_program", "read_write_sets", "reproduce", "reproducer",
    "run_campaign", "run_program", "run_test_case", "serialize", "speculation_filter",
    "trace_dependencies", "tracked_ctrace", "validate_sandbox",
]
