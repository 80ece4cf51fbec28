"""Early pruning of ineffective test cases.

The speculation filter keeps a test case only if the device shows transient
execution on at least one input (nonzero recovery events or a gap between
issued and retired micro-ops).  The observation filter keeps it only if the
device's cache fingerprint differs between the program and its fully
fence-serialized twin on at least one input.  Both run the device only; the
leakage model is never consulted here.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dut import Simulator, UarchConfig
from .isa import Instruction, InputData, Program
from .semantics import ArchState


@dataclass
class FilterEvidence:
    recovery_events: int
    transient_uops: int
    inputs_with_speculation: int

    def as_dict(self) -> dict:
        return {
            "recovery_events": self.recovery_events,
            "transient_uops": self.transient_uops,
            "inputs_with_speculation": self.inputs_with_speculation,
        }


def speculation_filter(program: Program, inputs: list[InputData], dut_cfg: UarchConfig,
                       sim: Simulator | None = None) -> tuple[bool, FilterEvidence]:
    """keep=True iff some input triggers misspeculation on the device.

    Passing ``sim`` lets a pipeline run the filter on the same device
    instance whose predictor state later measurements will see.
    """
    if sim is None:
        sim = Simulator(dut_cfg)
    results = sim.measure(program, inputs)
    evidence = FilterEvidence(
        recovery_events=sum(c.recovery_events for _, c in results),
        transient_uops=sum(c.transient_uops for _, c in results),
        inputs_with_speculation=sum(1 for _, c in results if c.speculated),
    )
    return evidence.inputs_with_speculation > 0, evidence


def serialize(program: Program) -> Program:
    """Insert a FENCE after every instruction, preserving label structure."""
    instructions = []
    for instr in program.instructions:
        instructions.append(instr)
        instructions.append(Instruction("FENCE"))
    labels = {name: 2 * idx for name, idx in program.labels.items()}
    return Program(instructions, labels)


def observation_filter(program: Program, inputs: list[InputData],
                       dut_cfg: UarchConfig) -> bool:
    """keep=True iff the program's cache fingerprint differs from its
    serialized twin's on at least one input.

    Both measurements run on fresh device instances so the two sequences see
    an identical predictor lifecycle.  This also pins the filter-ordering
    guarantee: a difference implies a transient cache effect in the fresh
    run, which is the same deterministic run the speculation filter
    evaluated, so this filter can only keep what that one kept.
    """
    original = Simulator(dut_cfg).measure(program, inputs)
    serialized = Simulator(dut_cfg).measure(serialize(program), inputs)
    return any(a[0] != b[0] for a, b in zip(original, serialized))
