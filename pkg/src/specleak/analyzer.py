"""Relational analysis: group inputs into contract-equivalence classes and
report violations, i.e. pairs of inputs with identical contract traces but
different hardware traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .contract import CTrace
from .dut import HTrace
from .isa import InputData


@dataclass
class EquivalenceClass:
    ctrace: CTrace
    members: list[int]  # indices into the input batch

    @property
    def effective(self) -> bool:
        return len(self.members) >= 2


@dataclass
class Violation:
    """Counterexample: two inputs with equal contract traces whose hardware
    traces differ."""

    input_indices: tuple[int, int]
    ctrace: CTrace
    htraces: tuple[HTrace, HTrace]
    inputs: tuple[InputData, InputData] | None = None
    program_text: str | None = None
    config_fingerprint: str | None = None
    seeds: dict = field(default_factory=dict)
    violation_id: str | None = None


def build_classes(inputs: list[InputData], ctraces: list[CTrace],
                  key_fn=None) -> list[EquivalenceClass]:
    """Partition the batch by contract trace.

    Grouping is keyed by ``key_fn`` (default: the trace's 64-bit hash) but
    membership requires full structural trace equality, so a key collision
    still yields distinct classes.  Classes are ordered by first appearance;
    singleton classes are the ineffective inputs.
    """
    if len(inputs) != len(ctraces):
        raise ValueError("inputs and ctraces must align")
    if key_fn is None:
        key_fn = lambda t: t.key
    buckets: dict[object, list[EquivalenceClass]] = {}
    classes: list[EquivalenceClass] = []
    for index, ctrace in enumerate(ctraces):
        bucket = buckets.setdefault(key_fn(ctrace), [])
        for eq_class in bucket:
            if eq_class.ctrace == ctrace:
                eq_class.members.append(index)
                break
        else:
            eq_class = EquivalenceClass(ctrace, [index])
            bucket.append(eq_class)
            classes.append(eq_class)
    return classes


def detect_violations(classes: list[EquivalenceClass],
                      htraces: list[HTrace]) -> list[Violation]:
    """One violation per class whose members' hardware traces are not all
    equal, naming the lexicographically first differing member pair."""
    violations = []
    for eq_class in classes:
        members = eq_class.members
        if len(members) < 2:
            continue
        found = None
        for a in range(len(members) - 1):
            for b in range(a + 1, len(members)):
                i, j = members[a], members[b]
                if htraces[i] != htraces[j]:
                    found = (i, j)
                    break
            if found:
                break
        if found:
            i, j = found
            violations.append(Violation(
                input_indices=(i, j),
                ctrace=eq_class.ctrace,
                htraces=(htraces[i], htraces[j]),
            ))
    return violations


def naive_violation_exists(ctraces: list[CTrace], htraces: list[HTrace]) -> bool:
    """Brute-force all-pairs check of the violation definition; the oracle
    the grouped implementation is tested against."""
    n = len(ctraces)
    for i in range(n):
        for j in range(i + 1, n):
            if ctraces[i] == ctraces[j] and htraces[i] != htraces[j]:
                return True
    return False
