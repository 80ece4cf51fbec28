"""Executable leakage model: collects the trace of observations a program is
expected to expose for a given input.

The observation clause records the page offset of every load and store and
the resolved target of every control-flow instruction.  The execution clause
selects how much speculation the model explores:

- ``seq``: no speculation; the trace is the observation stream of a plain
  architectural run.
- ``cond``: at every conditional branch the model first follows the wrong
  target for up to ``speculation_window`` instructions (string iterations
  each count against the window), emitting observations along the way, then
  rolls the architectural state back and continues down the correct target.
  A FENCE ends the speculative excursion.  Nesting beyond ``max_nesting``
  is not explored.

Traces serialize to one observation per line (``load 5``, ``store 16``,
``pc 3``) and are keyed by a 64-bit FNV-1a hash of that text.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .isa import InputData, Instruction, Program, ProgramInvalid, fnv1a_64
from .semantics import (
    ArchState, Sink, evaluate_condition, execute_instruction,
)


class Observation(NamedTuple):
    kind: str  # "load" | "store" | "pc"
    value: int

    def render(self) -> str:
        return f"{self.kind} {self.value}"


class CTrace:
    """An ordered, structurally-compared observation sequence."""

    __slots__ = ("observations", "_text", "_key")

    def __init__(self, observations):
        self.observations = tuple(observations)
        self._text: str | None = None
        self._key: int | None = None

    @property
    def text(self) -> str:
        if self._text is None:
            self._text = "\n".join(o.render() for o in self.observations)
        return self._text

    @property
    def key(self) -> int:
        """64-bit FNV-1a over the canonical text; fixed for report stability."""
        if self._key is None:
            self._key = fnv1a_64(self.text.encode())
        return self._key

    def __eq__(self, other):
        return isinstance(other, CTrace) and self.observations == other.observations

    def __hash__(self):
        return self.key

    def __len__(self):
        return len(self.observations)

    def __repr__(self):
        return f"CTrace({list(self.observations)!r})"


@dataclass
class ContractSpec:
    """Which observations are exposed and which speculation is explored."""

    observation_clause: str = "ct"
    execution_clause: str = "seq"  # "seq" | "cond"
    speculation_window: int = 250
    max_nesting: int = 1

    def __post_init__(self):
        if self.observation_clause != "ct":
            raise ValueError(f"unsupported observation clause {self.observation_clause}")
        if self.execution_clause not in ("seq", "cond"):
            raise ValueError(f"unsupported execution clause {self.execution_clause}")


class StepTracker:
    """Callback interface for instrumented model runs (dependency tracking)."""

    def before_step(self, instr: Instruction, state: ArchState) -> None:
        pass

    def after_step(self, instr: Instruction) -> None:
        pass

    def on_observation(self, instr: Instruction, observation: Observation) -> None:
        pass

    def on_checkpoint(self) -> None:
        pass

    def on_rollback(self) -> None:
        pass


class _ModelRun(Sink):
    """One program+input execution under a contract."""

    def __init__(self, spec: ContractSpec, program: Program, input_data: InputData,
                 tracker: StepTracker | None):
        self.spec = spec
        self.program = program
        self.state = ArchState.from_input(input_data)
        self.tracker = tracker
        self.observations: list[Observation] = []
        self.nesting = 0
        self.steps = 0
        self._current: Instruction | None = None

    # Sink callbacks: translate events into observations
    def mem_read(self, offset, size):
        self._observe(Observation("load", offset))

    def mem_write(self, offset, size):
        self._observe(Observation("store", offset))

    def branch(self, taken, target):
        self._observe(Observation("pc", target))

    def _observe(self, obs: Observation) -> None:
        self.observations.append(obs)
        if self.tracker is not None:
            self.tracker.on_observation(self._current, obs)  # type: ignore[arg-type]

    def run(self) -> CTrace:
        self._run_loop(budget=None)
        return CTrace(self.observations)

    def _run_loop(self, budget: list | None) -> None:
        """Execute until program exit or budget exhaustion.

        ``budget`` is a one-element mutable cell of remaining window slots,
        or None for an architectural (unbounded) run.
        """
        program, state = self.program, self.state
        n = len(program.instructions)
        explore = self.spec.execution_clause == "cond"
        while 0 <= state.pc < n:
            instr = program.instructions[state.pc]
            if budget is not None:
                if budget[0] <= 0:
                    return
                if instr.mnemonic == "FENCE":
                    return  # speculation cannot cross a fence

            if (explore and instr.is_control_flow and instr.mnemonic != "JMP"
                    and self.nesting < self.spec.max_nesting):
                self._explore_wrong_path(instr)

            self._current = instr
            if self.tracker is not None:
                self.tracker.before_step(instr, state)
            max_iters = budget[0] if budget is not None else None
            info = execute_instruction(program, state, self, max_iters)
            if self.tracker is not None:
                self.tracker.after_step(instr)
            self.steps += 1
            if budget is not None:
                budget[0] -= max(info.string_iterations, 1)

    def _explore_wrong_path(self, instr: Instruction) -> None:
        program, state = self.program, self.state
        taken = evaluate_condition(state, instr.mnemonic[1:])
        correct = program.labels[instr.operands[0].label] if taken else state.pc + 1
        wrong = state.pc + 1 if taken else program.labels[instr.operands[0].label]

        snapshot = state.checkpoint()
        if self.tracker is not None:
            self.tracker.on_checkpoint()
        self.nesting += 1
        self._current = instr
        self._observe(Observation("pc", wrong))
        state.pc = wrong
        self._run_loop(budget=[self.spec.speculation_window])
        self.nesting -= 1
        state.rollback(snapshot)
        if self.tracker is not None:
            self.tracker.on_rollback()


def collect_ctrace(spec: ContractSpec, program: Program, input_data: InputData,
                   tracker: StepTracker | None = None) -> CTrace:
    """Run the contract model and return the expected-leakage trace.

    Raises ProgramInvalid if execution escapes the sandbox page.  The input
    is never mutated.
    """
    run = _ModelRun(spec, program, input_data, tracker)
    try:
        return run.run()
    except ProgramInvalid:
        raise
