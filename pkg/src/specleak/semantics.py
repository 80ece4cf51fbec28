"""Architectural semantics shared by the contract model and the DUT simulator.

One instruction executes via :func:`execute_instruction`, which mutates an
:class:`ArchState` in place and reports side effects to a :class:`Sink`
(memory reads/writes and branch resolutions).  The pure functional wrapper
:func:`arch_step` copies the state and collects events, which is the form
most convenient for tests and small experiments.

REPE/REPNE string instructions execute their full architectural loop in one
step: each iteration compares one element, advances the pointers, decrements
the count register, and stops on the termination condition or a zero count.

Flag behavior follows x86 for the supported subset, with these documented
simplifications where x86 leaves results undefined:

- MUL/IMUL set ZF/SF from the low half of the product (undefined on x86).
- DIV leaves all four flags unchanged.
- BSF/BSR with a zero source set ZF and leave the destination unchanged;
  CF/SF/OF are cleared.
- BT/BTC/BTR/BTS write CF only and preserve the other flags.
- LAHF/SAHF pack the four flags into the low nibble of the 8-bit accumulator
  view: bit0=CF, bit1=ZF, bit2=SF, bit3=OF.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .isa import (
    MEM_SIZE, PAGE_SIZE, CONDITION_FLAGS, Flags, ImmOp, InputData, Instruction, LabelOp,
    MemOp, Program, Reg, RegOp, DivideFault, ProgramInvalid, REG_NAMES_64,
)

M64 = (1 << 64) - 1


# ==================================================================================================
# Architectural state
# ==================================================================================================
class ArchState:
    """Registers, flags, one data page, and the program counter.

    When ``undo`` is set to a list, every memory write appends
    ``(offset, old_bytes)`` so a transient transaction can be rolled back
    without copying the whole page.
    """

    __slots__ = ("regs", "zf", "cf", "sf", "of", "mem", "pc", "undo")

    def __init__(self, regs=None, flags: Flags | None = None, memory: bytes | None = None):
        self.regs: list[int] = list(regs) if regs else [0] * 6
        flags = flags or Flags()
        self.zf, self.cf, self.sf, self.of = flags.zf, flags.cf, flags.sf, flags.of
        self.mem = bytearray(MEM_SIZE)
        if memory is not None:
            self.mem[:len(memory)] = memory
        self.pc = 0
        self.undo: list[tuple[int, bytes]] | None = None

    @staticmethod
    def from_input(input_data: InputData) -> "ArchState":
        return ArchState(input_data.regs, input_data.flags, input_data.memory)

    def copy(self) -> "ArchState":
        st = ArchState.__new__(ArchState)
        st.regs = list(self.regs)
        st.zf, st.cf, st.sf, st.of = self.zf, self.cf, self.sf, self.of
        st.mem = bytearray(self.mem)
        st.pc = self.pc
        st.undo = None
        return st

    def flags(self) -> Flags:
        return Flags(self.zf, self.cf, self.sf, self.of)

    # -- register access -------------------------------------------------
    def get_reg(self, reg: Reg, width: int = 64) -> int:
        v = self.regs[reg]
        if width == 64:
            return v
        return v & ((1 << width) - 1)

    def set_reg(self, reg: Reg, width: int, value: int) -> None:
        if width == 64:
            self.regs[reg] = value & M64
        elif width == 32:
            self.regs[reg] = value & 0xFFFFFFFF  # 32-bit writes zero the upper half
        elif width == 16:
            self.regs[reg] = (self.regs[reg] & ~0xFFFF) | (value & 0xFFFF)
        else:
            self.regs[reg] = (self.regs[reg] & ~0xFF) | (value & 0xFF)

    # -- memory access ---------------------------------------------------
    def read_mem(self, offset: int, size: int) -> int:
        if offset < 0 or offset + size > MEM_SIZE:
            raise ProgramInvalid(f"read of {size} bytes at offset {offset} leaves the sandbox")
        return int.from_bytes(self.mem[offset:offset + size], "little")

    def write_mem(self, offset: int, size: int, value: int) -> None:
        if offset < 0 or offset + size > MEM_SIZE:
            raise ProgramInvalid(f"write of {size} bytes at offset {offset} leaves the sandbox")
        if self.undo is not None:
            self.undo.append((offset, bytes(self.mem[offset:offset + size])))
        self.mem[offset:offset + size] = value.to_bytes(size, "little", signed=False)

    # -- transient checkpointing ------------------------------------------
    def checkpoint(self) -> tuple:
        created_undo = self.undo is None
        if created_undo:
            self.undo = []
        return (list(self.regs), self.zf, self.cf, self.sf, self.of, self.pc,
                len(self.undo), created_undo)

    def rollback(self, snapshot: tuple) -> None:
        regs, zf, cf, sf, of, pc, undo_len, created_undo = snapshot
        self.regs = regs
        self.zf, self.cf, self.sf, self.of = zf, cf, sf, of
        self.pc = pc
        assert self.undo is not None
        while len(self.undo) > undo_len:
            offset, old = self.undo.pop()
            self.mem[offset:offset + len(old)] = old
        if created_undo:
            self.undo = None  # only the outermost checkpoint owns the log


# ==================================================================================================
# Event sinks
# ==================================================================================================
@dataclass(frozen=True)
class MemRead:
    offset: int
    size: int


@dataclass(frozen=True)
class MemWrite:
    offset: int
    size: int


@dataclass(frozen=True)
class Branch:
    taken: bool
    target: int


class Sink:
    """Receives side effects during execution; subclasses pick what to record."""

    def mem_read(self, offset: int, size: int) -> None:
        pass

    def mem_write(self, offset: int, size: int) -> None:
        pass

    def branch(self, taken: bool, target: int) -> None:
        pass


class EventSink(Sink):
    def __init__(self):
        self.events: list = []

    def mem_read(self, offset, size):
        self.events.append(MemRead(offset, size))

    def mem_write(self, offset, size):
        self.events.append(MemWrite(offset, size))

    def branch(self, taken, target):
        self.events.append(Branch(taken, target))


_NULL_SINK = Sink()


# ==================================================================================================
# Helpers
# ==================================================================================================
def effective_offset(state: ArchState, mem: MemOp) -> int:
    off = state.regs[mem.base]
    if mem.index is not None:
        off += state.regs[mem.index]
    return (off + mem.disp) & M64


def evaluate_condition(state: ArchState, cc: str) -> bool:
    if cc == "E":
        return state.zf
    if cc == "NE":
        return not state.zf
    if cc == "B":
        return state.cf
    if cc == "AE":
        return not state.cf
    if cc == "L":
        return state.sf != state.of
    if cc == "GE":
        return state.sf == state.of
    if cc == "S":
        return state.sf
    if cc == "NS":
        return not state.sf
    if cc == "O":
        return state.of
    if cc == "NO":
        return not state.of
    raise ValueError(f"unknown condition {cc}")


def _set_zsf(state: ArchState, res: int, width: int) -> None:
    state.zf = res == 0
    state.sf = bool(res >> (width - 1))


def _read_operand(state: ArchState, op, width: int, sink: Sink) -> int:
    if isinstance(op, RegOp):
        return state.get_reg(op.reg, op.width)
    if isinstance(op, ImmOp):
        return op.value & ((1 << width) - 1)
    off = effective_offset(state, op)
    val = state.read_mem(off, op.size)
    sink.mem_read(off, op.size)
    return val


def _write_operand(state: ArchState, op, value: int, sink: Sink) -> None:
    if isinstance(op, RegOp):
        state.set_reg(op.reg, op.width, value)
    else:
        off = effective_offset(state, op)
        state.write_mem(off, op.size, value & ((1 << (op.size * 8)) - 1))
        sink.mem_write(off, op.size)


def _operand_width(instr: Instruction) -> int:
    for op in instr.operands:
        if isinstance(op, RegOp):
            return op.width
    mem = instr.mem_operand
    if mem is not None:
        return mem.size * 8
    return 64


class StepInfo(NamedTuple):
    uops: int
    string_iterations: int  # 0 for non-string instructions


# ==================================================================================================
# Arithmetic cores
# ==================================================================================================
def _add_core(state: ArchState, a: int, b: int, carry_in: int, width: int) -> int:
    mask = (1 << width) - 1
    sign = 1 << (width - 1)
    full = a + b + carry_in
    res = full & mask
    state.cf = full > mask
    state.of = bool(~(a ^ b) & (a ^ res) & sign)
    _set_zsf(state, res, width)
    return res

def _sub_core(state: ArchState, a: int, b: int, borrow_in: int, width: int) -> int:
    mask = (1 << width) - 1
    sign = 1 << (width - 1)
    res = (a - b - borrow_in) & mask
    state.cf = (b + borrow_in) > a
    state.of = bool((a ^ b) & (a ^ res) & sign)
    _set_zsf(state, res, width)
    return res


def _logic_flags(state: ArchState, res: int, width: int) -> None:
    state.cf = False
    state.of = False
    _set_zsf(state, res, width)


def _signed(value: int, width: int) -> int:
    sign = 1 << (width - 1)
    return value - (1 << width) if value & sign else value


# ==================================================================================================
# String operations
# ==================================================================================================
def string_element_step(state: ArchState, instr: Instruction, sink: Sink) -> None:
    """One comparison element for CMPS/SCAS: read, set flags, advance pointers.

    Does not touch the count register; the caller owns loop control.
    Strings always walk forward (there is no direction flag).
    """
    width = 1 if instr.mnemonic.endswith("B") else 2
    wbits = width * 8
    if instr.mnemonic.startswith("CMPS"):
        src = state.regs[Reg.RSI]
        dst = state.regs[Reg.RDI]
        a = state.read_mem(src, width)
        sink.mem_read(src, width)
        b = state.read_mem(dst, width)
        sink.mem_read(dst, width)
        state.regs[Reg.RSI] = (src + width) & M64
        state.regs[Reg.RDI] = (dst + width) & M64
    else:  # SCAS: accumulator vs [RDI]
        a = state.get_reg(Reg.RA, wbits)
        dst = state.regs[Reg.RDI]
        b = state.read_mem(dst, width)
        sink.mem_read(dst, width)
        state.regs[Reg.RDI] = (dst + width) & M64
    _sub_core(state, a, b, 0, wbits)


def string_should_stop(state: ArchState, rep: str) -> bool:
    """Termination condition after one element: REPE stops on mismatch,
    REPNE stops on match."""
    return (rep == "REPE" and not state.zf) or (rep == "REPNE" and state.zf)


def _exec_string(state: ArchState, instr: Instruction, sink: Sink,
                 max_iterations: int | None) -> int:
    iterations = 0
    while state.regs[Reg.RC] != 0:
        if max_iterations is not None and iterations >= max_iterations:
            break
        string_element_step(state, instr, sink)
        state.regs[Reg.RC] = (state.regs[Reg.RC] - 1) & M64
        iterations += 1
        if string_should_stop(state, instr.rep):  # type: ignore[arg-type]
            break
    return iterations


# ==================================================================================================
# Execution
# ==================================================================================================
def execute_instruction(program: Program, state: ArchState, sink: Sink = _NULL_SINK,
                        max_string_iterations: int | None = None) -> StepInfo:
    """Execute ``program.instructions[state.pc]``, advancing ``state.pc``.

    Returns the micro-op cost: 1 for simple instructions, 2 for instructions
    with a memory operand, one per iteration for string instructions.
    ``max_string_iterations`` caps string loops for windowed transient
    execution; an architectural step leaves it as None.
    """
    instr = program.instructions[state.pc]
    m = instr.mnemonic
    ops = instr.operands
    next_pc = state.pc + 1

    if instr.rep is not None:
        iterations = _exec_string(state, instr, sink, max_string_iterations)
        state.pc = next_pc
        return StepInfo(max(iterations, 1), iterations)

    if m in ("NOP", "FENCE"):
        state.pc = next_pc
        return StepInfo(1, 0)

    if instr.is_control_flow:
        target = program.labels[ops[0].label]  # type: ignore[union-attr]
        if m == "JMP":
            taken = True
        else:
            taken = evaluate_condition(state, m[1:])
        resolved = target if taken else next_pc
        sink.branch(taken, resolved)
        state.pc = resolved
        return StepInfo(1, 0)

    width = _operand_width(instr)
    uops = 2 if instr.mem_operand is not None else 1

    if m in ("ADD", "SUB", "ADC", "SBB", "CMP"):
        a = _read_operand(state, ops[0], width, sink)
        b = _read_operand(state, ops[1], width, sink)
        if m == "ADD":
            res = _add_core(state, a, b, 0, width)
        elif m == "ADC":
            res = _add_core(state, a, b, int(state.cf), width)
        elif m == "SUB":
            res = _sub_core(state, a, b, 0, width)
        elif m == "SBB":
            res = _sub_core(state, a, b, int(state.cf), width)
        else:  # CMP
            _sub_core(state, a, b, 0, width)
            res = None
        if res is not None:
            _write_operand(state, ops[0], res, sink)
    elif m in ("AND", "OR", "XOR", "TEST"):
        a = _read_operand(state, ops[0], width, sink)
        b = _read_operand(state, ops[1], width, sink)
        res = a & b if m in ("AND", "TEST") else (a | b if m == "OR" else a ^ b)
        _logic_flags(state, res, width)
        if m != "TEST":
            _write_operand(state, ops[0], res, sink)
    elif m == "NOT":
        a = _read_operand(state, ops[0], width, sink)
        _write_operand(state, ops[0], ~a, sink)  # no flags
    elif m in ("INC", "DEC"):
        a = _read_operand(state, ops[0], width, sink)
        saved_cf = state.cf
        res = _add_core(state, a, 1, 0, width) if m == "INC" else _sub_core(state, a, 1, 0, width)
        state.cf = saved_cf  # INC/DEC preserve CF
        _write_operand(state, ops[0], res, sink)
    elif m == "NEG":
        a = _read_operand(state, ops[0], width, sink)
        res = _sub_core(state, 0, a, 0, width)
        state.cf = a != 0
        state.of = a == (1 << (width - 1))
        _write_operand(state, ops[0], res, sink)
    elif m == "MOV":
        val = _read_operand(state, ops[1], width, sink)
        _write_operand(state, ops[0], val, sink)
    elif m == "XCHG":
        a = _read_operand(state, ops[0], width, sink)
        b = _read_operand(state, ops[1], width, sink)
        _write_operand(state, ops[0], b, sink)
        _write_operand(state, ops[1], a, sink)
    elif m == "BSWAP":
        a = state.get_reg(ops[0].reg, width)  # type: ignore[union-attr]
        swapped = int.from_bytes(a.to_bytes(width // 8, "little"), "big")
        state.set_reg(ops[0].reg, width, swapped)  # type: ignore[union-attr]
    elif m in ("MUL", "IMUL"):
        a = state.regs[Reg.RA]
        b = state.get_reg(ops[0].reg, 64)  # type: ignore[union-attr]
        if m == "MUL":
            full = a * b
        else:
            full = (_signed(a, 64) * _signed(b, 64)) & ((1 << 128) - 1)
        lo = full & M64
        hi = (full >> 64) & M64
        state.regs[Reg.RA] = lo
        state.regs[Reg.RD] = hi
        if m == "MUL":
            overflow = hi != 0
        else:
            overflow = hi != (M64 if lo >> 63 else 0)
        state.cf = state.of = overflow
        _set_zsf(state, lo, 64)  # x86 leaves ZF/SF undefined; we pin them to the low half
    elif m == "DIV":
        divisor = state.get_reg(ops[0].reg, 64)  # type: ignore[union-attr]
        if divisor == 0:
            raise DivideFault(f"division by zero at index {state.pc}")
        dividend = (state.regs[Reg.RD] << 64) | state.regs[Reg.RA]
        quotient, remainder = divmod(dividend, divisor)
        if quotient > M64:
            raise DivideFault(f"quotient overflow at index {state.pc}")
        state.regs[Reg.RA] = quotient
        state.regs[Reg.RD] = remainder
        # flags unchanged (undefined on x86)
    elif m in ("CBW", "CWDE", "CDQE"):
        src_w = {"CBW": 8, "CWDE": 16, "CDQE": 32}[m]
        val = _signed(state.get_reg(Reg.RA, src_w), src_w)
        state.set_reg(Reg.RA, src_w * 2, val)
    elif m == "CQO":
        state.regs[Reg.RD] = M64 if state.regs[Reg.RA] >> 63 else 0
    elif m == "CLC":
        state.cf = False
    elif m == "STC":
        state.cf = True
    elif m == "CMC":
        state.cf = not state.cf
    elif m == "LAHF":
        packed = (int(state.cf) | (int(state.zf) << 1) | (int(state.sf) << 2)
                  | (int(state.of) << 3))
        state.set_reg(Reg.RA, 8, packed)
    elif m == "SAHF":
        packed = state.get_reg(Reg.RA, 8)
        state.cf = bool(packed & 1)
        state.zf = bool(packed & 2)
        state.sf = bool(packed & 4)
        state.of = bool(packed & 8)
    elif m.startswith("SET"):
        state.set_reg(ops[0].reg, 8, int(evaluate_condition(state, m[3:])))  # type: ignore
    elif m.startswith("CMOV"):
        val = _read_operand(state, ops[1], width, sink)  # source is read unconditionally
        if evaluate_condition(state, m[4:]):
            _write_operand(state, ops[0], val, sink)
        elif isinstance(ops[0], RegOp) and ops[0].width == 32:
            # a false 32-bit CMOV still zeroes the upper half, as on x86-64
            state.set_reg(ops[0].reg, 32, state.get_reg(ops[0].reg, 32))
    elif m in ("BSF", "BSR"):
        src = state.get_reg(ops[1].reg, width)  # type: ignore[union-attr]
        state.cf = state.sf = state.of = False
        if src == 0:
            state.zf = True  # destination unchanged
        else:
            state.zf = False
            bit = (src & -src).bit_length() - 1 if m == "BSF" else src.bit_length() - 1
            state.set_reg(ops[0].reg, width, bit)  # type: ignore[union-attr]
    elif m in ("BT", "BTC", "BTR", "BTS"):
        val = state.get_reg(ops[0].reg, width)  # type: ignore[union-attr]
        idx = _read_operand(state, ops[1], width, sink) % width
        state.cf = bool((val >> idx) & 1)
        if m != "BT":
            if m == "BTC":
                val ^= 1 << idx
            elif m == "BTR":
                val &= ~(1 << idx)
            else:
                val |= 1 << idx
            state.set_reg(ops[0].reg, width, val)  # type: ignore[union-attr]
    elif m == "CMPXCHG":
        dest, src = ops[0], ops[1]
        cur = _read_operand(state, dest, width, sink)
        acc = state.get_reg(Reg.RA, width)
        _sub_core(state, acc, cur, 0, width)
        if state.zf:
            _write_operand(state, dest, state.get_reg(src.reg, width), sink)  # type: ignore
        else:
            # the destination is written back unchanged, as on hardware: a
            # locked read never happens without the paired write
            _write_operand(state, dest, cur, sink)
            state.set_reg(Reg.RA, width, cur)
    elif m == "XADD":
        dest, src = ops[0], ops[1]
        a = _read_operand(state, dest, width, sink)
        b = state.get_reg(src.reg, width)  # type: ignore[union-attr]
        res = _add_core(state, a, b, 0, width)
        # memory first: the source register may double as the address base,
        # and the effective address is computed before any write
        _write_operand(state, dest, res, sink)
        state.set_reg(src.reg, width, a)  # type: ignore[union-attr]
    else:
        raise ValueError(f"no semantics for mnemonic {m}")

    state.pc = next_pc
    return StepInfo(uops, 0)


def arch_step(state: ArchState, instr: Instruction,
              labels: dict[str, int] | None = None) -> tuple[ArchState, list]:
    """Pure single-instruction step: returns (new state, events).

    ``labels`` is required only for control-flow instructions so branch
    targets can resolve.
    """
    prog = Program([instr], dict(labels or {}))
    new_state = state.copy()
    saved_pc = new_state.pc
    new_state.pc = 0
    sink = EventSink()
    execute_instruction(prog, new_state, sink)
    if not instr.is_control_flow:
        new_state.pc = saved_pc + 1
    return new_state, sink.events


def run_program(program: Program, input_data: InputData,
                sink: Sink = _NULL_SINK) -> ArchState:
    """Plain architectural run from entry to exit; returns the final state."""
    state = ArchState.from_input(input_data)
    n = len(program.instructions)
    while state.pc < n:
        execute_instruction(program, state, sink)
    return state


# ==================================================================================================
# Read/write sets
# ==================================================================================================
PC_LOCATION = "PC"
#: a location is "PC", a 64-bit register name, a flag name, or a memory byte offset (int)
Location = str | int


class ReadWriteSets(NamedTuple):
    read: set
    write: set


_FLAG_WRITERS_ALL4 = frozenset({"ADD", "SUB", "ADC", "SBB", "CMP", "NEG", "AND", "OR",
                                "XOR", "TEST", "MUL", "IMUL", "XADD", "CMPXCHG", "SAHF"})


def _mem_bytes(off: int, size: int) -> range:
    return range(off, off + size)


def read_write_sets(instr: Instruction, state: ArchState) -> ReadWriteSets:
    """Dynamic read/write location sets for one instruction.

    Memory locations are byte offsets resolved against the current state;
    registers appear under their 64-bit name regardless of the view used.
    Partial-width register writes (8/16-bit) also read the register, since
    the untouched upper bits flow into the result.

    Conditionally-written locations (a false conditional move, the
    compare-exchange targets, a bit scan of a zero source, string-walk state
    when the count is zero) are always reported as written and additionally
    as read: whether they kept their old value is itself data-dependent, so
    the old value must stay among the dependencies.
    """
    m = instr.mnemonic
    read: set = {PC_LOCATION}
    write: set = set()

    if instr.rep is not None:
        return _string_read_write(instr, state)

    if m in ("NOP", "FENCE"):
        return ReadWriteSets(read, write)

    if instr.is_control_flow:
        write.add(PC_LOCATION)
        if m != "JMP":
            read.update(CONDITION_FLAGS[m[1:]])
        return ReadWriteSets(read, write)

    # operand-driven part
    width = _operand_width(instr)
    for pos, op in enumerate(instr.operands):
        if isinstance(op, MemOp):
            read.add(REG_NAMES_64[op.base])
            if op.index is not None:
                read.add(REG_NAMES_64[op.index])
            off = effective_offset(state, op)
            loaded = _instr_loads_mem(m, pos)
            stored = _instr_stores_mem(m, pos, state, instr)
            if loaded:
                read.update(_mem_bytes(off, op.size))
            if stored:
                write.update(_mem_bytes(off, op.size))
        elif isinstance(op, RegOp):
            name = REG_NAMES_64[op.reg]
            src, dest = _reg_operand_roles(m, pos, state, instr)
            if src:
                read.add(name)
            if dest:
                write.add(name)
                if op.width in (8, 16):
                    read.add(name)  # merge semantics read the upper bits

    # implicit registers and flags
    if m in ("ADC", "SBB"):
        read.add("CF")
    if m in _FLAG_WRITERS_ALL4:
        write.update(("ZF", "CF", "SF", "OF"))
    if m in ("INC", "DEC"):
        write.update(("ZF", "SF", "OF"))
    if m in ("MUL", "IMUL"):
        read.update(("RA",))
        write.update(("RA", "RD"))
    if m == "DIV":
        read.update(("RA", "RD"))
        write.update(("RA", "RD"))
    if m in ("CBW", "CWDE", "CDQE"):
        read.add("RA")
        write.add("RA")
    if m == "CQO":
        read.add("RA")
        write.add("RD")
    if m == "CLC" or m == "STC":
        write.add("CF")
    if m == "CMC":
        read.add("CF")
        write.add("CF")
    if m == "LAHF":
        read.update(("ZF", "CF", "SF", "OF", "RA"))
        write.add("RA")
    if m == "SAHF":
        read.add("RA")
    if m.startswith("SET"):
        read.update(CONDITION_FLAGS[m[3:]])
    if m.startswith("CMOV"):
        read.update(CONDITION_FLAGS[m[4:]])
    if m in ("BSF", "BSR"):
        write.update(("ZF", "CF", "SF", "OF"))
    if m in ("BT", "BTC", "BTR", "BTS"):
        write.add("CF")
    if m == "CMPXCHG":
        read.add("RA")
        write.add("RA")
    return ReadWriteSets(read, write)


def _reg_operand_roles(m: str, pos: int, state: ArchState,
                       instr: Instruction) -> tuple[bool, bool]:
    """(is_source, is_destination) of a register operand at position pos."""
    if m == "MOV":
        return (pos == 1, pos == 0)
    if m.startswith("SET"):
        return (False, True)
    if m.startswith("CMOV"):
        # the destination always conditionally keeps its old value
        return (True, False) if pos == 1 else (True, True)
    if m in ("CMP", "TEST"):
        return (True, False)
    if m == "BT":
        return (True, False)
    if m in ("BTC", "BTR", "BTS"):
        return (True, pos == 0)
    if m in ("BSF", "BSR"):
        # the destination conditionally keeps its value for a zero source
        return (True, pos == 0)
    if m == "XCHG":
        return (True, True)
    if m == "XADD":
        return (True, True)
    if m == "CMPXCHG":
        return (True, False)  # src register only read; store handled via memory roles
    if m in ("MUL", "IMUL", "DIV"):
        return (True, False)
    # two-operand arithmetic/logic and unary read-modify-write
    if pos == 0:
        return (True, True)
    return (True, False)


def _instr_loads_mem(m: str, pos: int) -> bool:
    if m == "MOV":
        return pos == 1
    return True  # every other memory operand is at least read


def _instr_stores_mem(m: str, pos: int, state: ArchState, instr: Instruction) -> bool:
    if m in ("CMP", "TEST"):
        return False
    if m == "MOV":
        return pos == 0
    if m.startswith("CMOV"):
        return False  # memory form is load-only
    return pos == 0  # includes CMPXCHG: the store is conditional but possible


def mem_access_ranges(instr: Instruction,
                      state: ArchState) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """(read ranges, write ranges) as (offset, size) pairs, resolved against
    the current state.

    Used by trigger logic that needs to know what an instruction is about to
    touch before executing it.  String instructions report only their first
    element; the triggering decision does not need the full walk.
    """
    reads: list[tuple[int, int]] = []
    writes: list[tuple[int, int]] = []
    if instr.rep is not None:
        if state.regs[Reg.RC] != 0:
            width = 1 if instr.mnemonic.endswith("B") else 2
            if instr.mnemonic.startswith("CMPS"):
                reads.append((state.regs[Reg.RSI], width))
            reads.append((state.regs[Reg.RDI], width))
        return reads, writes
    for pos, op in enumerate(instr.operands):
        if isinstance(op, MemOp):
            off = effective_offset(state, op)
            if _instr_loads_mem(instr.mnemonic, pos):
                reads.append((off, op.size))
            if _instr_stores_mem(instr.mnemonic, pos, state, instr):
                writes.append((off, op.size))
    return reads, writes


def _string_read_write(instr: Instruction, state: ArchState) -> ReadWriteSets:
    """Unroll the architectural string loop on a scratch copy to collect the
    exact bytes read.

    The walk state (count, pointers, flags) is always reported written, and
    read: how far the walk went, including not at all, is data-dependent.
    """
    read: set = {PC_LOCATION, "RC", "RDI", "ZF", "CF", "SF", "OF"}
    write: set = {"RC", "RDI", "ZF", "CF", "SF", "OF"}
    if instr.mnemonic.startswith("CMPS"):
        read.add("RSI")
        write.add("RSI")
    else:
        read.add("RA")

    scratch = state.copy()
    scratch.pc = 0
    prog = Program([instr])
    sink = EventSink()
    execute_instruction(prog, scratch, sink)
    for ev in sink.events:
        read.update(_mem_bytes(ev.offset, ev.size))
    return ReadWriteSets(read, write)
