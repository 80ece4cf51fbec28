"""Test-case shrinking: remove one instruction at a time while a caller-
supplied predicate keeps holding.

The scan runs front to back and restarts from the front after every
successful removal, so the result is deterministic.  Instrumentation
instructions are never removed on their own; the contiguous instrumentation
block directly in front of an instruction belongs to it and is removed with
it.  Candidates that break sandbox validity are rejected outright, which
keeps the final program valid.  The result is 1-minimal: removing any single
further non-instrumentation instruction falsifies the predicate.
"""

from __future__ import annotations

from typing import Callable

from .isa import InputData, Program, validate_sandbox

Predicate = Callable[[Program, list[InputData]], bool]


class PredicateUnstable(ValueError):
    """The initial test case does not satisfy the predicate."""


def _removal_span(program: Program, index: int) -> tuple[int, int]:
    """Half-open instruction range to delete when removing ``index``:
    the instruction plus its leading instrumentation block."""
    start = index
    while start > 0 and program.instructions[start - 1].is_instrumentation:
        if any(idx == start for idx in program.labels.values()):
            break  # a label separates the block; instrumentation above it stays
        start -= 1
    return start, index + 1


def remove_span(program: Program, start: int, end: int) -> Program:
    removed = end - start
    instructions = program.instructions[:start] + program.instructions[end:]
    labels = {}
    for name, idx in program.labels.items():
        if idx <= start:
            labels[name] = idx
        elif idx >= end:
            labels[name] = idx - removed
        else:
            labels[name] = start
    return Program(instructions, labels)


def minimize(program: Program, inputs: list[InputData], predicate: Predicate) -> Program:
    """Shrink ``program`` to a 1-minimal version that still satisfies
    ``predicate`` on the fixed input sequence."""
    if not predicate(program, inputs):
        raise PredicateUnstable("the initial test case does not satisfy the predicate")

    # candidates must stay sandbox-valid, unless the caller's program never was
    enforce_valid = not validate_sandbox(program)
    current = program
    changed = True
    while changed:
        changed = False
        index = 0
        while index < len(current.instructions):
            if current.instructions[index].is_instrumentation:
                index += 1
                continue
            start, end = _removal_span(current, index)
            candidate = remove_span(current, start, end)
            if enforce_valid and validate_sandbox(candidate):
                index += 1
                continue
            if predicate(candidate, inputs):
                current = candidate
                changed = True
                break  # restart the scan from the front
            index += 1
    return current
