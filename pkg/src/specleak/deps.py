"""Dependency tracking: which initial input locations can influence the
contract trace of a program+input pair.

The tracker maintains a per-location dependency map.  Initially every
location depends exactly on itself.  When an instruction executes, every
written location receives the union of the program counter's dependencies
and the dependencies of all read locations.  When the model emits an
observation, the dependencies of the program counter and of the locations
that determine the observed value (address registers for loads and stores,
condition flags for branch targets) are added to the result set.  Entering a
speculative excursion copies the map; leaving it restores the copy, while
the accumulated result set keeps any transient contributions.

Locations are 64-bit register names, flag names, byte offsets into the data
page, and the program counter.  The final dependency set is restricted to
input locations, so the program counter never appears in it.
"""

from __future__ import annotations

from .contract import ContractSpec, CTrace, Observation, StepTracker, collect_ctrace
from .isa import (
    PAGE_SIZE, CONDITION_FLAGS, FLAG_NAMES, InputData, Instruction, MemOp, Program,
    REG_NAMES_64,
)
from .semantics import ArchState, Location, PC_LOCATION, read_write_sets

DepSet = frozenset
_REG_AND_FLAG_NAMES = frozenset(REG_NAMES_64) | frozenset(FLAG_NAMES)


def is_input_location(loc: Location) -> bool:
    if isinstance(loc, int):
        return 0 <= loc < PAGE_SIZE
    return loc in _REG_AND_FLAG_NAMES


def observation_sources(instr: Instruction, rw_read: set) -> set:
    """Locations whose values determine what the instruction's observations
    expose (not the observed data itself).

    For an explicit memory operand that is the address registers.  For
    string instructions the exposed addresses also encode how far the loop
    ran, which depends on the count register, the pointers, the compared
    bytes, and (for SCAS) the accumulator; all of those sit in the read set.
    For conditional branches it is the condition flags.
    """
    m = instr.mnemonic
    if instr.is_string:
        return {loc for loc in rw_read if loc != PC_LOCATION}
    if instr.is_control_flow:
        if m == "JMP":
            return set()
        return set(CONDITION_FLAGS[m[1:]])
    sources: set = set()
    for op in instr.operands:
        if isinstance(op, MemOp):
            sources.add(REG_NAMES_64[op.base])
            if op.index is not None:
                sources.add(REG_NAMES_64[op.index])
    return sources


class DependencyTracker(StepTracker):
    """Instrumented-run tracker implementing the dependency-map algorithm."""

    def __init__(self):
        # missing entries mean "depends on itself"
        self.dmap: dict[Location, frozenset] = {}
        self.dep: set = set()
        self._checkpoints: list[dict] = []
        self._pending_write: set | None = None
        self._pending_deps: frozenset | None = None
        self._sources: set | None = None

    def _deps_of(self, loc: Location) -> frozenset:
        got = self.dmap.get(loc)
        if got is None:
            return frozenset((loc,))
        return got

    def before_step(self, instr: Instruction, state: ArchState) -> None:
        rw = read_write_sets(instr, state)
        new_deps = set(self._deps_of(PC_LOCATION))
        for loc in rw.read:
            new_deps |= self._deps_of(loc)
        self._pending_write = rw.write
        self._pending_deps = frozenset(new_deps)
        self._sources = observation_sources(instr, rw.read)

    def after_step(self, instr: Instruction) -> None:
        assert self._pending_write is not None and self._pending_deps is not None
        shared = self._pending_deps
        for loc in self._pending_write:
            self.dmap[loc] = shared
        self._pending_write = None
        self._pending_deps = None
        self._sources = None

    def on_observation(self, instr: Instruction, observation: Observation) -> None:
        self.dep |= self._deps_of(PC_LOCATION)
        if self._sources is not None:
            sources = self._sources
        else:
            # observation emitted outside a tracked step: the wrong-path
            # branch target exposed when a speculative excursion opens
            sources = observation_sources(instr, set())
        for loc in sources:
            self.dep |= self._deps_of(loc)

    def on_checkpoint(self) -> None:
        self._checkpoints.append(dict(self.dmap))

    def on_rollback(self) -> None:
        self.dmap = self._checkpoints.pop()

    def result(self) -> DepSet:
        return frozenset(loc for loc in self.dep if is_input_location(loc))


def tracked_ctrace(spec: ContractSpec, program: Program,
                   input_data: InputData) -> tuple[CTrace, DepSet]:
    """Contract trace plus the dependency set from one instrumented run."""
    tracker = DependencyTracker()
    ctrace = collect_ctrace(spec, program, input_data, tracker)
    return ctrace, tracker.result()


def trace_dependencies(spec: ContractSpec, program: Program,
                       input_data: InputData) -> DepSet:
    """The set of input locations that can influence the contract trace."""
    return tracked_ctrace(spec, program, input_data)[1]
