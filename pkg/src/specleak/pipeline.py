"""Per-test-case pipeline: filters, contract-driven input generation,
measurement, and relational analysis for one program with its input sequence.

Stage order is fixed: speculation filter, observation filter, input boosting,
trace collection, violation detection.  A test case rejected by a filter
never reaches the leakage model.  The speculation filter and the analysis
measurement share one simulator instance, so the predictor context the
filter trains is the context the measurement sees; the observation filter
measures both of its twins on fresh instances with identical lifecycles.

Violations are confirmed before being reported.  The raw detector compares
hardware traces taken at different positions of the input sequence, i.e.
under different predictor contexts, so a difference can be a context
artifact rather than leakage (the violation definition quantifies over a
single shared context).  Confirmation therefore re-measures in two steps on
fresh simulators:

1. replay the full measurement history; a difference that does not
   reproduce was measurement noise;
2. cross-substitute the pair: measure input j at input i's sequence
   position and vice versa.  Under the shared context a data-dependent
   difference persists, while a difference caused only by the surrounding
   context (e.g. one member happened to train the predictor into a
   misprediction and the other did not) vanishes and is suppressed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .analyzer import EquivalenceClass, Violation, build_classes, detect_violations
from .boost import boost, effectiveness
from .contract import ContractSpec, CTrace, collect_ctrace
from .dut import HTrace, Simulator, UarchConfig
from .filters import FilterEvidence, observation_filter, speculation_filter
from .isa import InputData, Program


@dataclass
class PipelineSettings:
    contract: ContractSpec
    uarch: UarchConfig
    inputs_per_class: int = 2
    enable_speculation_filter: bool = True
    enable_observation_filter: bool = True
    input_entropy_bits: int = 16
    boost_seed: int = 0
    noise_seed: int = 0


@dataclass
class TestCaseResult:
    discarded_by: str | None  # "speculation_filter" | "observation_filter" | None
    spec_filter_kept: bool | None
    spec_filter_evidence: FilterEvidence | None
    obs_filter_kept: bool | None
    boosted_inputs: list[InputData] = field(default_factory=list)
    ctraces: list[CTrace] = field(default_factory=list)
    htraces: list[HTrace] = field(default_factory=list)
    classes: list[EquivalenceClass] = field(default_factory=list)
    violations: list[Violation] = field(default_factory=list)
    suppressed_noise: int = 0
    suppressed_context: int = 0
    degenerate_classes: int = 0
    input_effectiveness: float | None = None
    runs: int = 0  # deterministic work units: one per program execution

    @property
    def analyzed(self) -> bool:
        return self.discarded_by is None


def _derived_seed(base: int, index: int) -> int:
    return int(np.random.SeedSequence([base, index]).generate_state(1, np.uint64)[0])


def run_test_case(program: Program, raw_inputs: list[InputData],
                  settings: PipelineSettings) -> TestCaseResult:
    sim = Simulator(settings.uarch, noise_seed=settings.noise_seed)
    history: list[list[InputData]] = []  # original-program measurement sequence
    result = TestCaseResult(None, None, None, None)

    if settings.enable_speculation_filter:
        kept, evidence = speculation_filter(program, raw_inputs, settings.uarch, sim)
        history.append(raw_inputs)
        result.runs += len(raw_inputs)
        result.spec_filter_kept = kept
        result.spec_filter_evidence = evidence
        if not kept:
            result.discarded_by = "speculation_filter"
            return result

    if settings.enable_observation_filter:
        kept = observation_filter(program, raw_inputs, settings.uarch)
        result.runs += 2 * len(raw_inputs)
        result.obs_filter_kept = kept
        if not kept:
            result.discarded_by = "observation_filter"
            return result

    # contract-driven input generation: every input gets class siblings
    boosted: list[InputData] = []
    ctraces: list[CTrace] = []
    for index, input_data in enumerate(raw_inputs):
        if settings.inputs_per_class >= 2:
            batch = boost(settings.contract, program, input_data,
                          settings.inputs_per_class,
                          seed=_derived_seed(settings.boost_seed, index),
                          entropy_bits=settings.input_entropy_bits)
            boosted.append(input_data)
            ctraces.append(batch.ctrace)
            boosted.extend(batch.siblings)
            ctraces.extend(batch.sibling_ctraces)
            result.degenerate_classes += int(batch.degenerate)
            result.runs += 1 + 2 * (settings.inputs_per_class - 1)
        else:
            boosted.append(input_data)
            ctraces.append(collect_ctrace(settings.contract, program, input_data))
            result.runs += 1

    # analysis measurement, capturing the predictor context of every position
    contexts: list[dict] = []
    htraces: list[HTrace] = []
    for input_data in boosted:
        contexts.append(sim.predictor_snapshot())
        htraces.append(sim.run_input(program, input_data).htrace)
    history.append(boosted)
    result.runs += len(boosted)

    classes = build_classes(boosted, ctraces)
    violations = detect_violations(classes, htraces)

    confirmed: list[Violation] = []
    if violations:
        if settings.uarch.noise_rate > 0:
            clean = _replay_measurements(program, history, settings, noise_bump=1)
            result.runs += sum(len(h) for h in history)
        else:
            clean = htraces
        for violation in violations:
            i, j = violation.input_indices
            if clean[i] == clean[j]:
                result.suppressed_noise += 1
                continue
            cross_j = _measure_in_context(program, contexts[i], boosted[j], settings, 2)
            cross_i = _measure_in_context(program, contexts[j], boosted[i], settings, 3)
            result.runs += 2
            if cross_j != clean[i] or cross_i != clean[j]:
                confirmed.append(violation)
            else:
                result.suppressed_context += 1

    result.boosted_inputs = boosted
    result.ctraces = ctraces
    result.htraces = htraces
    result.classes = classes
    result.violations = confirmed
    result.input_effectiveness = effectiveness(ctraces)
    return result


def _replay_measurements(program: Program, history: list[list[InputData]],
                         settings: PipelineSettings, noise_bump: int) -> list[HTrace]:
    """Repeat every original-program measurement of this test case on a fresh
    simulator (fresh noise stream) and return the final sequence's htraces."""
    sim = Simulator(settings.uarch, noise_seed=settings.noise_seed + noise_bump)
    final: list[HTrace] = []
    for inputs in history:
        final = [htrace for htrace, _ in sim.measure(program, inputs)]
    return final


def _measure_in_context(program: Program, context: dict, input_data: InputData,
                        settings: PipelineSettings, noise_bump: int) -> HTrace:
    """Measure ``input_data`` under a captured predictor context; together
    with the per-input reset this reproduces an arbitrary sequence position."""
    sim = Simulator(settings.uarch, noise_seed=settings.noise_seed + noise_bump)
    sim.restore_predictor(context)
    return sim.run_input(program, input_data).htrace
