"""Seeded random generation of sandboxed programs and of random inputs.

Programs are forward DAGs of basic blocks filled with instructions drawn
uniformly from the configured categories plus the shared arithmetic base.
Every memory access and every division is preceded by instrumentation that
pins the touched addresses inside the data page:

- a plain access through ``r`` gets ``AND r, <page mask aligned to size>``;
- a string operation gets pointer masks that confine the walk to the lower
  half of the page plus ``AND RC, 0x3f`` / ``ADD RC, 28``, which bounds the
  element count to [28, 91] while keeping enough span to cross cache lines;
- DIV gets ``AND RD, 0x3`` plus ``AND r, 0xff`` / ``OR r, 0x5`` on the
  divisor, which makes the divisor nonzero and keeps the quotient below
  2^64, so the fault path is unreachable in generated code.

Instrumentation instructions are flagged and excluded from the program-size
and memory-access accounting, but they execute like any other instruction.

Instruction and operand choices are uniform; there are no frequency weights.
Generation is a pure function of the configuration (including its seed).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .isa import (
    PAGE_SIZE, CATEGORIES, CONDITION_FLAGS, Flags, ImmOp, InputData, Instruction, LabelOp,
    MemOp, Program, Reg, RegOp, validate_sandbox,
)

_BASE_CATEGORY = "base"
_WIDTHS = (64, 32, 16, 8)


class InfeasibleConfig(ValueError):
    """The requested program shape cannot be generated from these categories."""


@dataclass
class GenConfig:
    categories: frozenset[str] = frozenset({"cond", "dxfr"})
    program_size: int = 32
    mem_accesses: int = 8
    basic_blocks: int | None = None  # default: 2 when branches are available, else 1
    input_entropy_bits: int = 16
    seed: int = 0

    def __post_init__(self):
        self.categories = frozenset(self.categories)
        unknown = self.categories - CATEGORIES - {_BASE_CATEGORY}
        if unknown:
            raise InfeasibleConfig(f"unknown categories: {sorted(unknown)}")
        if self.basic_blocks is None:
            self.basic_blocks = 2 if "cond" in self.categories else 1
        if self.basic_blocks < 1:
            raise InfeasibleConfig("basic_blocks must be at least 1")
        if self.basic_blocks > 1 and "cond" not in self.categories:
            raise InfeasibleConfig("multiple basic blocks require the cond category")
        if not 1 <= self.input_entropy_bits <= 64:
            raise InfeasibleConfig("input_entropy_bits must be in [1, 64]")
        if self.program_size < self.mem_accesses:
            raise InfeasibleConfig("program_size must cover mem_accesses")
        body_slots = self.program_size - (self.basic_blocks - 1)
        if body_slots < self.mem_accesses:
            raise InfeasibleConfig("not enough body slots for the requested memory accesses")
        if body_slots < self.basic_blocks:
            raise InfeasibleConfig("program_size too small for the requested basic blocks")


# body instruction builders per category ------------------------------------------------------

_BASE_BINARY = ("ADD", "SUB", "ADC", "SBB", "CMP")
_BASE_UNARY = ("INC", "DEC", "NEG")
_LOGI_BINARY = ("AND", "OR", "XOR")
_CC = tuple(CONDITION_FLAGS)
_CMOV_CC = ("E", "NE", "B", "AE", "L", "GE", "S", "NS")
_LOCK_MNEMONICS = ("ADD", "SUB", "ADC", "SBB", "AND", "OR", "XOR")
_STRING_OPS = ("CMPSB", "CMPSW", "SCASB", "SCASW")

_GPRS = tuple(Reg)
_DIV_SAFE_REGS = (Reg.RB, Reg.RC, Reg.RSI, Reg.RDI)


def _rand_reg(rng: random.Random, width: int) -> RegOp:
    return RegOp(rng.choice(_GPRS), width)


def _rand_imm(rng: random.Random) -> ImmOp:
    return ImmOp(rng.randrange(0, 256))


def _size_mask(size: int) -> int:
    return 0xFFF & ~(size - 1)


def _mask_instr(reg: Reg, mask: int) -> Instruction:
    return Instruction("AND", (RegOp(reg, 64), ImmOp(mask)), is_instrumentation=True)


def _body_candidates(categories: frozenset[str]) -> list[str]:
    """Register-only instruction kinds available for non-memory slots."""
    kinds = ["base_rr", "base_ri", "base_unary"]
    if "nop" in categories:
        kinds.append("nop")
    if "logi" in categories:
        kinds += ["logi_rr", "logi_ri", "not", "test_rr"]
    if "dxfr" in categories:
        kinds += ["mov_rr", "mov_ri", "xchg_rr", "bswap"]
    if "dmul" in categories:
        kinds += ["mul", "imul", "div"]
    if "flag" in categories:
        kinds += ["flagop"]
    if "setc" in categories:
        kinds += ["setcc"]
    if "conv" in categories:
        kinds += ["conv"]
    if "cmov" in categories:
        kinds += ["cmov_rr"]
    if "bit" in categories:
        kinds += ["bit_scan", "bit_test"]
    return kinds


def _mem_candidates(categories: frozenset[str]) -> list[str]:
    kinds = ["base_rm", "base_mr", "base_mi"]
    if "logi" in categories:
        kinds += ["logi_rm", "logi_mr", "test_mr"]
    if "dxfr" in categories:
        kinds += ["mov_rm", "mov_mr", "mov_mi", "xchg_mr"]
    if "cmov" in categories:
        kinds += ["cmov_rm"]
    if "lock" in categories:
        kinds += ["lock_mr"]
    if "atom" in categories:
        kinds += ["cmpxchg", "xadd"]
    if "strn" in categories:
        kinds += ["string"]
    return kinds


def _build_mem_operand(rng: random.Random, size: int) -> tuple[list[Instruction], MemOp]:
    base = rng.choice(_GPRS)
    pre = [_mask_instr(base, _size_mask(size))]
    return pre, MemOp(base, None, 0, size)


def _emit_body(kind: str, rng: random.Random) -> list[Instruction]:
    """One register-only instruction (no instrumentation needed)."""
    w = rng.choice(_WIDTHS)
    if kind == "base_rr":
        m = rng.choice(_BASE_BINARY)
        return [Instruction(m, (_rand_reg(rng, w), _rand_reg(rng, w)))]
    if kind == "base_ri":
        m = rng.choice(_BASE_BINARY)
        return [Instruction(m, (_rand_reg(rng, w), _rand_imm(rng)))]
    if kind == "base_unary":
        return [Instruction(rng.choice(_BASE_UNARY), (_rand_reg(rng, w),))]
    if kind == "nop":
        return [Instruction("NOP")]
    if kind == "logi_rr":
        return [Instruction(rng.choice(_LOGI_BINARY), (_rand_reg(rng, w), _rand_reg(rng, w)))]
    if kind == "logi_ri":
        return [Instruction(rng.choice(_LOGI_BINARY), (_rand_reg(rng, w), _rand_imm(rng)))]
    if kind == "not":
        return [Instruction("NOT", (_rand_reg(rng, w),))]
    if kind == "test_rr":
        return [Instruction("TEST", (_rand_reg(rng, w), _rand_reg(rng, w)))]
    if kind == "mov_rr":
        return [Instruction("MOV", (_rand_reg(rng, w), _rand_reg(rng, w)))]
    if kind == "mov_ri":
        return [Instruction("MOV", (_rand_reg(rng, w), _rand_imm(rng)))]
    if kind == "xchg_rr":
        return [Instruction("XCHG", (_rand_reg(rng, w), _rand_reg(rng, w)))]
    if kind == "bswap":
        return [Instruction("BSWAP", (_rand_reg(rng, rng.choice((64, 32))),))]
    if kind == "mul" or kind == "imul":
        return [Instruction(kind.upper(), (_rand_reg(rng, 64),))]
    if kind == "div":
        divisor = rng.choice(_DIV_SAFE_REGS)
        return [
            Instruction("AND", (RegOp(Reg.RD, 64), ImmOp(0x3)), is_instrumentation=True),
            Instruction("AND", (RegOp(divisor, 64), ImmOp(0xFF)), is_instrumentation=True),
            Instruction("OR", (RegOp(divisor, 64), ImmOp(0x5)), is_instrumentation=True),
            Instruction("DIV", (RegOp(divisor, 64),)),
        ]
    if kind == "flagop":
        return [Instruction(rng.choice(("CLC", "STC", "CMC", "LAHF", "SAHF")))]
    if kind == "setcc":
        return [Instruction(f"SET{rng.choice(_CMOV_CC)}", (_rand_reg(rng, 8),))]
    if kind == "conv":
        return [Instruction(rng.choice(("CBW", "CWDE", "CDQE", "CQO")))]
    if kind == "cmov_rr":
        w = rng.choice((64, 32, 16))
        return [Instruction(f"CMOV{rng.choice(_CMOV_CC)}",
                            (_rand_reg(rng, w), _rand_reg(rng, w)))]
    if kind == "bit_scan":
        w = rng.choice((64, 32, 16))
        return [Instruction(rng.choice(("BSF", "BSR")), (_rand_reg(rng, w), _rand_reg(rng, w)))]
    if kind == "bit_test":
        w = rng.choice((64, 32, 16))
        return [Instruction(rng.choice(("BT", "BTC", "BTR", "BTS")),
                            (_rand_reg(rng, w), _rand_imm(rng)))]
    raise AssertionError(kind)


def _emit_mem(kind: str, rng: random.Random) -> list[Instruction]:
    """One memory-operand instruction with its instrumentation prefix."""
    if kind == "string":
        return _emit_string(rng)
    w = rng.choice(_WIDTHS)
    if kind.startswith("cmov"):
        w = rng.choice((64, 32, 16))
    size = w // 8
    pre, mem = _build_mem_operand(rng, size)
    reg = _rand_reg(rng, w)
    if kind == "base_rm":
        instr = Instruction(rng.choice(_BASE_BINARY), (reg, mem))
    elif kind == "base_mr":
        instr = Instruction(rng.choice(_BASE_BINARY), (mem, reg))
    elif kind == "base_mi":
        instr = Instruction(rng.choice(_BASE_BINARY), (mem, _rand_imm(rng)))
    elif kind == "logi_rm":
        instr = Instruction(rng.choice(_LOGI_BINARY), (reg, mem))
    elif kind == "logi_mr":
        instr = Instruction(rng.choice(_LOGI_BINARY), (mem, reg))
    elif kind == "test_mr":
        instr = Instruction("TEST", (mem, reg))
    elif kind == "mov_rm":
        instr = Instruction("MOV", (reg, mem))
    elif kind == "mov_mr":
        instr = Instruction("MOV", (mem, reg))
    elif kind == "mov_mi":
        instr = Instruction("MOV", (mem, _rand_imm(rng)))
    elif kind == "xchg_mr":
        instr = Instruction("XCHG", (mem, reg))
    elif kind == "cmov_rm":
        instr = Instruction(f"CMOV{rng.choice(_CMOV_CC)}", (reg, mem))
    elif kind == "lock_mr":
        instr = Instruction(rng.choice(_LOCK_MNEMONICS), (mem, reg), lock=True)
    elif kind == "cmpxchg":
        instr = Instruction("CMPXCHG", (mem, reg), lock=rng.random() < 0.5)
    elif kind == "xadd":
        instr = Instruction("XADD", (mem, reg), lock=rng.random() < 0.5)
    else:
        raise AssertionError(kind)
    return pre + [instr]


def _emit_string(rng: random.Random) -> list[Instruction]:
    mnemonic = rng.choice(_STRING_OPS)
    width = 1 if mnemonic.endswith("B") else 2
    ptr_mask = 0x7FF & ~(width - 1)
    out = []
    if mnemonic.startswith("CMPS"):
        out.append(_mask_instr(Reg.RSI, ptr_mask))
    out.append(_mask_instr(Reg.RDI, ptr_mask))
    out.append(_mask_instr(Reg.RC, 0x3F))
    out.append(Instruction("ADD", (RegOp(Reg.RC, 64), ImmOp(28)), is_instrumentation=True))
    out.append(Instruction(mnemonic, rep=rng.choice(("REPE", "REPNE"))))
    return out


def generate_program(cfg: GenConfig) -> Program:
    """Deterministically generate one sandboxed program for the configuration."""
    rng = random.Random(_derive_int(cfg.seed, 1))
    body_kinds = _body_candidates(cfg.categories)
    mem_kinds = _mem_candidates(cfg.categories)
    if cfg.mem_accesses > 0 and not mem_kinds:
        raise InfeasibleConfig("configured categories provide no memory-capable instruction")

    nb = cfg.basic_blocks
    assert nb is not None
    n_branches = nb - 1
    body_slots = cfg.program_size - n_branches

    # spread body instructions over the blocks, each block keeping >= 1 slot
    cuts = sorted(rng.sample(range(1, body_slots), nb - 1)) if nb > 1 else []
    block_sizes = [b - a for a, b in zip([0] + cuts, cuts + [body_slots])]
    mem_slots = set(rng.sample(range(body_slots), cfg.mem_accesses))

    instructions: list[Instruction] = []
    labels: dict[str, int] = {}
    slot = 0
    for block in range(nb):
        labels[f".b{block + 1}"] = len(instructions)
        for _ in range(block_sizes[block]):
            kind_pool = mem_kinds if slot in mem_slots else body_kinds
            emit = _emit_mem if slot in mem_slots else _emit_body
            instructions.extend(emit(rng.choice(kind_pool), rng))
            slot += 1
        if block < nb - 1:
            target = rng.randrange(block + 2, nb + 1)
            label = f".b{target + 1}" if target < nb else ".exit"
            instructions.append(Instruction(f"J{rng.choice(_CC)}", (LabelOp(label),)))
    labels[".exit"] = len(instructions)

    program = Program(instructions, labels)
    diagnostics = validate_sandbox(program)
    assert not diagnostics, f"generated program failed validation: {diagnostics}"
    return program


def generate_inputs(n: int, cfg: GenConfig) -> list[InputData]:
    """n random inputs; every register and memory word fits the entropy range."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 2])))
    mask = np.uint64((1 << cfg.input_entropy_bits) - 1) if cfg.input_entropy_bits < 64 \
        else np.uint64(0xFFFFFFFFFFFFFFFF)
    words_per_page = PAGE_SIZE // 8

    out = []
    for _ in range(n):
        regs = np.frombuffer(rng.bytes(6 * 8), dtype="<u8") & mask
        flag_bits = np.frombuffer(rng.bytes(4), dtype=np.uint8) & 1
        mem_words = np.frombuffer(rng.bytes(words_per_page * 8), dtype="<u8") & mask
        out.append(InputData(
            regs=[int(v) for v in regs],
            flags=Flags(*(bool(b) for b in flag_bits)),
            memory=mem_words.astype("<u8").tobytes(),
        ))
    return out


def _derive_int(seed: int, stream: int) -> int:
    state = np.random.SeedSequence([seed, stream]).generate_state(2, np.uint64)
    return int(state[0]) << 64 | int(state[1])
