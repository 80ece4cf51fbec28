"""Contract-driven input generation: manufacture contract-equivalent sibling
inputs by mutating only locations outside the trace's dependency set.

Dependency tracking runs once per original input; its result is reused for
every sibling, and each sibling is then re-checked against the original's
contract trace (a real model run, not an assumption).  A sibling that fails
the check would indicate unsound dependency tracking and raises
ContractDivergence.

When the dependency set covers every input location there is nothing to
mutate; the batch degenerates to exact copies and is flagged so reports can
mark the class as low-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contract import ContractSpec, CTrace, collect_ctrace
from .deps import DepSet, tracked_ctrace
from .isa import PAGE_SIZE, FLAG_NAMES, InputData, Program, REG_NAMES_64


class ContractDivergence(AssertionError):
    """A boosted sibling produced a different contract trace than its original."""


@dataclass
class BoostResult:
    siblings: list[InputData]  # k-1 new inputs
    dep: DepSet
    degenerate: bool  # every input location was a dependency
    ctrace: CTrace  # the original input's trace
    sibling_ctraces: list[CTrace]

    @property
    def all_inputs_effective(self) -> bool:
        return all(t == self.ctrace for t in self.sibling_ctraces)


def _entropy_byte_mask(entropy_bits: int, byte_index: int) -> int:
    """Mask of admissible bits for byte ``byte_index`` of an entropy-limited
    64-bit word (values occupy the low bits; upper bytes stay zero)."""
    remaining = entropy_bits - 8 * byte_index
    if remaining >= 8:
        return 0xFF
    if remaining <= 0:
        return 0
    return (1 << remaining) - 1


def boost(spec: ContractSpec, program: Program, input_data: InputData, k: int,
          seed: int, entropy_bits: int = 16) -> BoostResult:
    """Produce k-1 inputs that agree with ``input_data`` on every dependency
    location and differ somewhere outside the dependency set.

    Deterministic in ``seed``.  ``k`` is the equivalence-class size target,
    so it must be at least 2.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    ctrace, dep = tracked_ctrace(spec, program, input_data)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 3])))

    mutable_regs = [i for i, name in enumerate(REG_NAMES_64) if name not in dep]
    mutable_flags = [i for i, name in enumerate(FLAG_NAMES) if name not in dep]
    mutable_bytes = []
    for offset in range(PAGE_SIZE):
        if offset in dep:
            continue
        mask = _entropy_byte_mask(entropy_bits, offset % 8)
        if mask:
            mutable_bytes.append((offset, mask))
    degenerate = not (mutable_regs or mutable_flags or mutable_bytes)

    siblings = []
    sibling_ctraces = []
    for _ in range(k - 1):
        sibling = _mutate(input_data, rng, entropy_bits,
                          mutable_regs, mutable_flags, mutable_bytes)
        check = collect_ctrace(spec, program, sibling)
        if check != ctrace:
            raise ContractDivergence(
                "sibling contract trace diverged; dependency tracking is unsound "
                f"for this case (dep={sorted(dep, key=str)})")
        siblings.append(sibling)
        sibling_ctraces.append(check)

    return BoostResult(siblings, dep, degenerate, ctrace, sibling_ctraces)


def _mutate(original: InputData, rng, entropy_bits: int, mutable_regs, mutable_flags,
            mutable_bytes) -> InputData:
    sibling = original.copy()
    reg_mask = (1 << entropy_bits) - 1
    if mutable_regs:
        draws = np.frombuffer(rng.bytes(8 * len(mutable_regs)), dtype="<u8")
        for reg, draw in zip(mutable_regs, draws):
            sibling.regs[reg] = int(draw) & reg_mask
    if mutable_flags:
        bits = np.frombuffer(rng.bytes(len(mutable_flags)), dtype=np.uint8)
        for idx, bit in zip(mutable_flags, bits):
            setattr(sibling.flags, ("zf", "cf", "sf", "of")[idx], bool(bit & 1))
    if mutable_bytes:
        mem = bytearray(sibling.memory)
        draws = np.frombuffer(rng.bytes(len(mutable_bytes)), dtype=np.uint8)
        for (offset, mask), draw in zip(mutable_bytes, draws):
            mem[offset] = int(draw) & mask
        sibling.memory = bytes(mem)

    if sibling == original and (mutable_regs or mutable_flags or mutable_bytes):
        # force at least one difference outside the dependency set
        if mutable_flags:
            idx = mutable_flags[0]
            name = ("zf", "cf", "sf", "of")[idx]
            setattr(sibling.flags, name, not getattr(sibling.flags, name))
        elif mutable_regs:
            sibling.regs[mutable_regs[0]] ^= 1
        else:
            offset, mask = mutable_bytes[0]
            mem = bytearray(sibling.memory)
            mem[offset] ^= mask & -mask  # lowest admissible bit
            sibling.memory = bytes(mem)
    return sibling


def effectiveness(ctraces: list[CTrace]) -> float:
    """Fraction of inputs that share their contract trace with at least one
    other input in the batch."""
    if not ctraces:
        raise ValueError("ctraces must be non-empty")
    counts: dict[tuple[int, str], int] = {}
    for t in ctraces:
        key = (t.key, t.text)
        counts[key] = counts.get(key, 0) + 1
    effective = sum(1 for t in ctraces if counts[(t.key, t.text)] > 1)
    return effective / len(ctraces)
