"""The device under test: a deterministic microarchitectural simulator with
configurable speculative-leak mechanisms, an L1D cache model, and performance
counters.

The simulator executes a program architecturally and, where a leak clause is
enabled and armed, runs a bounded transient episode: it checkpoints the
architectural state, applies the clause's injection, executes ahead up to the
speculation window, then rolls everything back except the cache state and the
issued-micro-op count.  Supported clauses:

- ``cond_predictor``: per-branch 2-bit saturating counters; a mispredicted
  conditional branch transiently executes the predicted (wrong) path.
- ``store_bypass``: a load within ``store_bypass_delay`` instructions of an
  older overlapping store transiently sees the pre-store memory, then
  re-executes with the stored value.
- ``lvi_null``: the first load of each input run finds the page
  assist-pending and transiently reads zeros before re-executing.
- ``zdi``: wide division transiently computes with the upper dividend half
  forced to zero.
- ``sco``: a REPE/REPNE string operation keeps comparing past its
  architectural termination for up to ``sco_overrun_limit`` transient
  iterations, stopping early when the repeat condition flips.

Trigger model: a clause fires whenever it is enabled and the pipeline is not
drained.  FENCE drains the pipeline, so no transient episode can start at an
instruction that directly follows one (and none may cross one); the pipeline
also starts drained at the beginning of every input run.  Episodes that
execute zero transient micro-ops are discarded without counting a recovery.
A transient access that would fault simply ends the episode, mirroring fault
suppression during speculation.

Micro-op accounting: one per simple instruction, two per memory-operand
instruction, one per string iteration.

Determinism: with ``noise_rate`` 0 the simulator is a pure function of
(program, inputs, config), including the predictor evolution across inputs.
Predictor state persists across the inputs of one measurement sequence and is
discarded afterwards; the cache is flushed and the pipeline drained before
every input.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .isa import Instruction, InputData, Program, ProgramInvalid, DivideFault, Reg
from .semantics import (
    ArchState, Sink, evaluate_condition, execute_instruction, mem_access_ranges,
    string_element_step, string_should_stop,
)


def _is_pow2(v: int) -> bool:
    return v > 0 and (v & (v - 1)) == 0


@dataclass
class UarchConfig:
    # leak clause toggles
    cond_predictor: bool = False
    store_bypass: bool = False
    lvi_null: bool = False
    zdi: bool = False
    sco: bool = False
    # windows and limits
    speculation_window: int = 250  # micro-ops per transient episode
    store_bypass_delay: int = 8  # instructions between store and bypassing load
    sco_overrun_limit: int = 8  # transient string iterations past termination
    # cache geometry
    cache_sets: int = 64
    cache_ways: int = 8
    line_size: int = 64
    # observation noise: probability that a measurement flips one bitmap bit
    noise_rate: float = 0.0

    def __post_init__(self):
        if min(self.speculation_window, self.store_bypass_delay, self.sco_overrun_limit) < 0:
            raise ValueError("windows and limits must be non-negative")
        for v in (self.cache_sets, self.cache_ways, self.line_size):
            if not _is_pow2(v):
                raise ValueError("cache geometry must be powers of two")

    def enabled_clauses(self) -> tuple[str, ...]:
        return tuple(name for name in ("cond_predictor", "store_bypass", "lvi_null",
                                       "zdi", "sco") if getattr(self, name))


@dataclass(frozen=True)
class HTrace:
    """Cache-set residency bitmap, the side-channel-visible fingerprint."""

    bits: int

    def render(self) -> str:
        return f"{self.bits:016x}"

    def __str__(self):
        return self.render()


@dataclass
class PerfCounters:
    uops_issued: int = 0
    uops_retired: int = 0
    recovery_events: int = 0

    @property
    def transient_uops(self) -> int:
        return self.uops_issued - self.uops_retired

    @property
    def speculated(self) -> bool:
        return self.recovery_events > 0 or self.transient_uops > 0


class Cache:
    """Set-associative LRU cache over the data page address space."""

    def __init__(self, sets: int, ways: int, line_size: int):
        self.sets = sets
        self.ways = ways
        self.line_size = line_size
        self._lru: list[list[int]] = [[] for _ in range(sets)]

    def flush(self) -> None:
        for entry in self._lru:
            entry.clear()

    def touch(self, offset: int, size: int) -> None:
        first = offset // self.line_size
        last = (offset + size - 1) // self.line_size
        for line in range(first, last + 1):
            set_index = line % self.sets
            tag = line // self.sets
            entry = self._lru[set_index]
            if tag in entry:
                entry.remove(tag)
            elif len(entry) >= self.ways:
                entry.pop()
            entry.insert(0, tag)

    def residency_bitmap(self) -> int:
        bits = 0
        for s, entry in enumerate(self._lru):
            if entry:
                bits |= 1 << s
        return bits


class _CacheSink(Sink):
    def __init__(self, cache: Cache):
        self.cache = cache

    def mem_read(self, offset, size):
        self.cache.touch(offset, size)

    def mem_write(self, offset, size):
        self.cache.touch(offset, size)


@dataclass
class RunResult:
    htrace: HTrace
    counters: PerfCounters
    final_state: ArchState


class Simulator:
    """One device instance; owns predictor state across the inputs it runs."""

    def __init__(self, cfg: UarchConfig, noise_seed: int = 0):
        self.cfg = cfg
        self.cache = Cache(cfg.cache_sets, cfg.cache_ways, cfg.line_size)
        self._sink = _CacheSink(self.cache)
        self.branch_counters: dict[int, int] = {}  # instruction index -> 2-bit counter
        self._noise_rng = random.Random(noise_seed)
        # per-input transient bookkeeping
        self._pipeline_dirty = False
        self._assist_pending = False
        self._recent_stores: list[tuple[int, int, int, bytes]] = []  # (seq, off, size, old)
        self._seq = 0

    # ----------------------------------------------------------------------------
    def measure(self, program: Program, inputs: list[InputData]) -> list[tuple[HTrace, PerfCounters]]:
        """Execute the inputs in order; cache and pipeline are reset before each
        input while predictor state persists across them."""
        if not inputs:
            raise ValueError("inputs must be non-empty")
        results = []
        for input_data in inputs:
            run = self.run_input(program, input_data)
            results.append((run.htrace, run.counters))
        return results

    def predictor_snapshot(self) -> dict[int, int]:
        """Predictor state is the only simulator state that survives across
        inputs; a snapshot plus one run reproduces any sequence position."""
        return dict(self.branch_counters)

    def restore_predictor(self, snapshot: dict[int, int]) -> None:
        self.branch_counters = dict(snapshot)

    def run_input(self, program: Program, input_data: InputData) -> RunResult:
        self.cache.flush()
        self._pipeline_dirty = False
        self._assist_pending = self.cfg.lvi_null
        self._recent_stores = []
        self._seq = 0
        counters = PerfCounters()

        state = ArchState.from_input(input_data)
        n = len(program.instructions)
        while 0 <= state.pc < n:
            pc_before = state.pc
            instr = program.instructions[pc_before]
            if self._pipeline_dirty:
                self._pre_clauses(program, state, instr, counters)

            is_cond_branch = instr.is_control_flow and instr.mnemonic != "JMP"
            taken = is_cond_branch and evaluate_condition(state, instr.mnemonic[1:])
            old_ranges = self._capture_stores(instr, state)
            info = execute_instruction(program, state, self._sink)
            counters.uops_issued += info.uops
            counters.uops_retired += info.uops
            self._seq += 1
            self._recent_stores.extend(old_ranges)

            if is_cond_branch:
                counter = self.branch_counters.get(pc_before, 2)
                self.branch_counters[pc_before] = \
                    min(3, counter + 1) if taken else max(0, counter - 1)
            if self._pipeline_dirty and instr.rep is not None and self.cfg.sco:
                self._sco_episode(state, instr, counters)
            self._pipeline_dirty = instr.mnemonic != "FENCE"

        htrace = HTrace(self._measured_bitmap())
        return RunResult(htrace, counters, state)

    def _measured_bitmap(self) -> int:
        bits = self.cache.residency_bitmap()
        if self.cfg.noise_rate > 0 and self._noise_rng.random() < self.cfg.noise_rate:
            bits ^= 1 << self._noise_rng.randrange(self.cfg.cache_sets)
        return bits

    # ----------------------------------------------------------------------------
    # clause triggers
    def _pre_clauses(self, program: Program, state: ArchState, instr: Instruction,
                     counters: PerfCounters) -> None:
        if self.cfg.cond_predictor and instr.is_control_flow and instr.mnemonic != "JMP":
            actual = evaluate_condition(state, instr.mnemonic[1:])
            predicted = self.branch_counters.get(state.pc, 2) >= 2
            if predicted != actual:
                target = program.labels[instr.operands[0].label]  # type: ignore[union-attr]
                wrong = target if predicted else state.pc + 1
                self._episode(program, state, counters, start_pc=wrong)

        reads, _ = mem_access_ranges(instr, state)
        if self.cfg.store_bypass and reads:
            entry = self._find_bypassable_store(reads)
            if entry is not None:
                _, off, size, old = entry

                def revert():
                    state.write_mem(off, size, int.from_bytes(old, "little"))

                self._episode(program, state, counters, inject=revert)
        if self.cfg.lvi_null and reads and self._assist_pending:
            self._assist_pending = False

            def zero_loads():
                for off, size in reads:
                    state.write_mem(off, size, 0)

            self._episode(program, state, counters, inject=zero_loads)
        if self.cfg.zdi and instr.mnemonic == "DIV":

            def zero_high():
                state.regs[Reg.RD] = 0

            self._episode(program, state, counters, inject=zero_high)

    def _capture_stores(self, instr: Instruction,
                        state: ArchState) -> list[tuple[int, int, int, bytes]]:
        if not self.cfg.store_bypass:
            return []
        _, writes = mem_access_ranges(instr, state)
        return [(self._seq, off, size, bytes(state.mem[off:off + size]))
                for off, size in writes]

    def _find_bypassable_store(self, reads) -> tuple[int, int, int, bytes] | None:
        horizon = self._seq - self.cfg.store_bypass_delay
        for entry in reversed(self._recent_stores):  # most recent first
            seq, off, size, _ = entry
            if seq < horizon:
                break
            for r_off, r_size in reads:
                if r_off < off + size and off < r_off + r_size:
                    return entry
        return None

    # ----------------------------------------------------------------------------
    # transient episodes
    def _episode(self, program: Program, state: ArchState, counters: PerfCounters,
                 start_pc: int | None = None, inject=None) -> None:
        snapshot = state.checkpoint()
        if inject is not None:
            try:
                inject()
            except ProgramInvalid:
                state.rollback(snapshot)
                return
        if start_pc is not None:
            state.pc = start_pc
        uops = self._transient_run(program, state)
        state.rollback(snapshot)
        if uops > 0:
            counters.recovery_events += 1
            counters.uops_issued += uops

    def _transient_run(self, program: Program, state: ArchState) -> int:
        budget = self.cfg.speculation_window
        uops = 0
        n = len(program.instructions)
        while budget > 0 and 0 <= state.pc < n:
            instr = program.instructions[state.pc]
            if instr.mnemonic == "FENCE":
                break
            try:
                info = execute_instruction(program, state, self._sink,
                                           max_string_iterations=budget)
            except (ProgramInvalid, DivideFault):
                break  # faults are suppressed during speculation; the episode ends
            uops += info.uops
            budget -= info.uops
        return uops

    def _sco_episode(self, state: ArchState, instr: Instruction,
                     counters: PerfCounters) -> None:
        limit = min(self.cfg.sco_overrun_limit, self.cfg.speculation_window)
        snapshot = state.checkpoint()
        iterations = 0
        while iterations < limit:
            try:
                string_element_step(state, instr, self._sink)
            except ProgramInvalid:
                break
            iterations += 1
            if string_should_stop(state, instr.rep):  # type: ignore[arg-type]
                break
        state.rollback(snapshot)
        if iterations > 0:
            counters.recovery_events += 1
            counters.uops_issued += iterations


def measure(program: Program, inputs: list[InputData], cfg: UarchConfig,
            noise_seed: int = 0) -> list[tuple[HTrace, PerfCounters]]:
    """Convenience wrapper: one fresh simulator instance per call."""
    return Simulator(cfg, noise_seed).measure(program, inputs)
