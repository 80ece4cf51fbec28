"""Reduced x86-like ISA: registers, flags, instructions, programs, and the
assembly-like text format.

The machine has six 64-bit general-purpose registers (RA, RB, RC, RD, RSI,
RDI) with 32/16/8-bit views, four arithmetic flags (ZF, CF, SF, OF), and a
single 4 KiB data page addressed by page offsets.  Control flow is forward
only: branches may target labels at the same or a later instruction index,
never earlier.

Register view names follow the x86 pattern:

    64-bit   RA   RB   RC   RD   RSI  RDI
    32-bit   EA   EB   EC   ED   ESI  EDI
    16-bit   A    B    C    D    SI   DI
     8-bit   AL   BL   CL   DL   SIL  DIL

Writes to a 32-bit view zero the upper half of the register; writes to a
16-bit or 8-bit view merge with the untouched upper bits.

Memory operands are written ``qword [RB]``, ``word [RSI + 8]``, or
``byte [RB + RC + 4]``.  The size keyword is optional when another operand
fixes the access width.  RC doubles as the count register for string
operations; RD:RA is the wide dividend/product pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum


PAGE_SIZE = 4096
# Tail pad so that an access starting anywhere inside the page stays inside
# the backing array (a base masked with 0xFFF may start an 8-byte access at
# offset 4095).
PAGE_PAD = 8
MEM_SIZE = PAGE_SIZE + PAGE_PAD


class Reg(IntEnum):
    RA = 0
    RB = 1
    RC = 2
    RD = 3
    RSI = 4
    RDI = 5


REG_NAMES_64 = ("RA", "RB", "RC", "RD", "RSI", "RDI")
_REG_NAMES_32 = ("EA", "EB", "EC", "ED", "ESI", "EDI")
_REG_NAMES_16 = ("A", "B", "C", "D", "SI", "DI")
_REG_NAMES_8 = ("AL", "BL", "CL", "DL", "SIL", "DIL")

#: view name -> (register, width in bits)
REG_VIEWS: dict[str, tuple[Reg, int]] = {}
for _i, _r in enumerate(Reg):
    REG_VIEWS[REG_NAMES_64[_i]] = (_r, 64)
    REG_VIEWS[_REG_NAMES_32[_i]] = (_r, 32)
    REG_VIEWS[_REG_NAMES_16[_i]] = (_r, 16)
    REG_VIEWS[_REG_NAMES_8[_i]] = (_r, 8)

_VIEW_NAME = {(reg, width): name for name, (reg, width) in REG_VIEWS.items()}

FLAG_NAMES = ("ZF", "CF", "SF", "OF")


@dataclass
class Flags:
    zf: bool = False
    cf: bool = False
    sf: bool = False
    of: bool = False

    def copy(self) -> "Flags":
        return Flags(self.zf, self.cf, self.sf, self.of)

    def as_dict(self) -> dict[str, bool]:
        return {"ZF": self.zf, "CF": self.cf, "SF": self.sf, "OF": self.of}


@dataclass
class InputData:
    """Initial architectural state: six registers, four flags, one data page."""

    regs: list[int]
    flags: Flags
    memory: bytes

    def __post_init__(self):
        assert len(self.regs) == 6
        assert len(self.memory) == PAGE_SIZE

    def copy(self) -> "InputData":
        return InputData(list(self.regs), self.flags.copy(), bytes(self.memory))

    def __eq__(self, other) -> bool:
        return (isinstance(other, InputData) and self.regs == other.regs
                and self.flags == other.flags and self.memory == other.memory)

    @staticmethod
    def zero() -> "InputData":
        return InputData([0] * 6, Flags(), bytes(PAGE_SIZE))


# ==================================================================================================
# Operands and instructions
# ==================================================================================================
@dataclass(frozen=True)
class RegOp:
    reg: Reg
    width: int  # bits: 64/32/16/8

    @property
    def name(self) -> str:
        return _VIEW_NAME[(self.reg, self.width)]

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class ImmOp:
    value: int

    def __str__(self):
        if self.value > 255:
            return hex(self.value)
        return str(self.value)


_SIZE_KEYWORDS = {"byte": 1, "word": 2, "dword": 4, "qword": 8}
_SIZE_NAMES = {v: k for k, v in _SIZE_KEYWORDS.items()}


@dataclass(frozen=True)
class MemOp:
    base: Reg
    index: Reg | None
    disp: int
    size: int  # access size in bytes

    def __str__(self):
        inner = REG_NAMES_64[self.base]
        if self.index is not None:
            inner += f" + {REG_NAMES_64[self.index]}"
        if self.disp > 0:
            inner += f" + {self.disp}"
        elif self.disp < 0:
            inner += f" - {-self.disp}"
        return f"{_SIZE_NAMES[self.size]} [{inner}]"


@dataclass(frozen=True)
class LabelOp:
    label: str

    def __str__(self):
        return self.label


Operand = RegOp | ImmOp | MemOp | LabelOp


@dataclass(frozen=True)
class Instruction:
    mnemonic: str
    operands: tuple[Operand, ...] = ()
    rep: str | None = None  # "REPE" | "REPNE" for string instructions
    lock: bool = False
    is_instrumentation: bool = False

    @property
    def category(self) -> str:
        if self.lock and self.mnemonic in _LOCKABLE_ARITH:
            return "lock"
        return MNEMONIC_SPECS[self.mnemonic].category

    @property
    def is_control_flow(self) -> bool:
        return MNEMONIC_SPECS[self.mnemonic].control_flow

    @property
    def is_string(self) -> bool:
        return self.rep is not None

    @property
    def mem_operand(self) -> MemOp | None:
        for op in self.operands:
            if isinstance(op, MemOp):
                return op
        return None

    def __str__(self):
        parts = []
        if self.lock:
            parts.append("LOCK")
        if self.rep:
            parts.append(self.rep)
        parts.append(self.mnemonic)
        text = " ".join(parts)
        if self.operands:
            text += " " + ", ".join(str(op) for op in self.operands)
        if self.is_instrumentation:
            text += "  # instrumentation"
        return text


@dataclass
class Program:
    """An ordered instruction list plus label -> index map.

    Labels may point one past the last instruction (the exit point).
    """

    instructions: list[Instruction] = field(default_factory=list)
    labels: dict[str, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.instructions)

    def copy(self) -> "Program":
        return Program(list(self.instructions), dict(self.labels))

    def render(self) -> str:
        by_index: dict[int, list[str]] = {}
        for name, idx in self.labels.items():
            by_index.setdefault(idx, []).append(name)
        lines = []
        for i, instr in enumerate(self.instructions):
            for name in sorted(by_index.get(i, [])):
                lines.append(f"{name}:")
            lines.append(str(instr))
        for name in sorted(by_index.get(len(self.instructions), [])):
            lines.append(f"{name}:")
        return "\n".join(lines) + ("\n" if lines else "")


# ==================================================================================================
# Instruction set table
# ==================================================================================================
@dataclass(frozen=True)
class MnemonicSpec:
    category: str
    forms: tuple[str, ...]  # operand patterns: r=register, i=immediate, m=memory, l=label
    control_flow: bool = False
    widths: tuple[int, ...] = (64, 32, 16, 8)  # allowed register widths


#: condition-code suffix -> flags read
CONDITION_FLAGS: dict[str, tuple[str, ...]] = {
    "E": ("ZF",),
    "NE": ("ZF",),
    "B": ("CF",),
    "AE": ("CF",),
    "L": ("SF", "OF"),
    "GE": ("SF", "OF"),
    "S": ("SF",),
    "NS": ("SF",),
    "O": ("OF",),
    "NO": ("OF",),
}

_BASE_ARITH = ("ADD", "SUB", "ADC", "SBB", "CMP")
_LOCKABLE_ARITH = frozenset({"ADD", "SUB", "ADC", "SBB", "AND", "OR", "XOR"})
STRING_MNEMONICS = frozenset({"CMPSB", "CMPSW", "SCASB", "SCASW"})

MNEMONIC_SPECS: dict[str, MnemonicSpec] = {}


def _add(name: str, category: str, forms: list[str], **kw):
    MNEMONIC_SPECS[name] = MnemonicSpec(category, tuple(forms), **kw)


for _m in _BASE_ARITH:
    _add(_m, "base", ["rr", "ri", "rm", "mr", "mi"])
for _m in ("INC", "DEC", "NEG"):
    _add(_m, "base", ["r"])
for _m in ("AND", "OR", "XOR"):
    _add(_m, "logi", ["rr", "ri", "rm", "mr", "mi"])
_add("NOT", "logi", ["r"])
_add("TEST", "logi", ["rr", "ri", "mr"])
_add("MOV", "dxfr", ["rr", "ri", "rm", "mr", "mi"])
_add("XCHG", "dxfr", ["rr", "mr"])
_add("BSWAP", "dxfr", ["r"], widths=(64, 32))
_add("NOP", "nop", [""])
_add("FENCE", "fence", [""])
for _m in ("MUL", "IMUL", "DIV"):
    _add(_m, "dmul", ["r"], widths=(64,))
for _m in ("CBW", "CWDE", "CDQE", "CQO"):
    _add(_m, "conv", [""])
for _m in ("CLC", "STC", "CMC", "LAHF", "SAHF"):
    _add(_m, "flag", [""])
_add("JMP", "cond", ["l"], control_flow=True)
for _cc in CONDITION_FLAGS:
    _add(f"J{_cc}", "cond", ["l"], control_flow=True)
    _add(f"SET{_cc}", "setc", ["r"], widths=(8,))
    _add(f"CMOV{_cc}", "cmov", ["rr", "rm"], widths=(64, 32, 16))
for _m in ("BSF", "BSR"):
    _add(_m, "bit", ["rr"], widths=(64, 32, 16))
for _m in ("BT", "BTC", "BTR", "BTS"):
    _add(_m, "bit", ["rr", "ri"], widths=(64, 32, 16))
for _m in STRING_MNEMONICS:
    _add(_m, "strn", [""])
_add("CMPXCHG", "atom", ["mr"])
_add("XADD", "atom", ["mr"])

CATEGORIES = frozenset(spec.category for spec in MNEMONIC_SPECS.values()) | {"lock"}


def mnemonics_in_category(category: str) -> list[str]:
    if category == "lock":
        return sorted(_LOCKABLE_ARITH)
    return sorted(m for m, s in MNEMONIC_SPECS.items() if s.category == category)


# ==================================================================================================
# Parsing
# ==================================================================================================
class AsmError(ValueError):
    """Base error for program text problems; carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnknownMnemonic(AsmError):
    pass


class UnresolvedLabel(AsmError):
    pass


class OperandArity(AsmError):
    pass


_INSTRUMENTATION_MARK = "instrumentation"


def _parse_int(tok: str) -> int | None:
    try:
        return int(tok, 0)
    except ValueError:
        return None


def _parse_mem_operand(text: str, size_hint: int | None, lineno: int) -> MemOp:
    inner = text.strip()[1:-1].strip()
    # split on +/- keeping sign with the displacement
    terms: list[str] = []
    signs: list[int] = []
    cur, sign = "", 1
    for ch in inner:
        if ch in "+-":
            if cur.strip():
                terms.append(cur.strip())
                signs.append(sign)
            cur, sign = "", (1 if ch == "+" else -1)
        else:
            cur += ch
    if cur.strip():
        terms.append(cur.strip())
        signs.append(sign)
    if not terms:
        raise OperandArity("empty memory operand", lineno)

    base: Reg | None = None
    index: Reg | None = None
    disp = 0
    for term, sgn in zip(terms, signs):
        upper = term.upper()
        if upper in REG_VIEWS:
            reg, width = REG_VIEWS[upper]
            if width != 64:
                raise OperandArity(f"memory operand register {term} must be 64-bit", lineno)
            if sgn < 0:
                raise OperandArity("registers cannot be subtracted in addresses", lineno)
            if base is None:
                base = reg
            elif index is None:
                index = reg
            else:
                raise OperandArity("too many registers in memory operand", lineno)
        else:
            val = _parse_int(term)
            if val is None:
                raise OperandArity(f"bad address term '{term}'", lineno)
            disp += sgn * val
    if base is None:
        raise OperandArity("memory operand needs a base register", lineno)
    # size 0 means "not yet resolved"; _check_instruction fills it in
    return MemOp(base, index, disp, size_hint or 0)


def _parse_operand(text: str, lineno: int) -> Operand:
    text = text.strip()
    lower = text.lower()
    for kw, size in _SIZE_KEYWORDS.items():
        if lower.startswith(kw) and lower[len(kw):].lstrip().startswith("["):
            rest = text[len(kw):].lstrip()
            return _parse_mem_operand(rest, size, lineno)
    if text.startswith("["):
        return _parse_mem_operand(text, None, lineno)
    upper = text.upper()
    if upper in REG_VIEWS:
        reg, width = REG_VIEWS[upper]
        return RegOp(reg, width)
    if text.startswith("."):
        return LabelOp(text)
    val = _parse_int(text)
    if val is not None:
        return ImmOp(val)
    raise OperandArity(f"cannot parse operand '{text}'", lineno)


def _form_of(operands: tuple[Operand, ...]) -> str:
    kinds = {RegOp: "r", ImmOp: "i", MemOp: "m", LabelOp: "l"}
    return "".join(kinds[type(op)] for op in operands)


def _check_instruction(instr: Instruction, lineno: int) -> Instruction:
    spec = MNEMONIC_SPECS[instr.mnemonic]
    form = _form_of(instr.operands)
    if form not in spec.forms:
        raise OperandArity(
            f"{instr.mnemonic} does not take operand form '{form or 'none'}'", lineno)

    reg_ops = [op for op in instr.operands if isinstance(op, RegOp)]
    for op in reg_ops:
        if op.width not in spec.widths:
            raise OperandArity(
                f"{instr.mnemonic} does not support a {op.width}-bit register operand", lineno)
    if len(reg_ops) == 2 and reg_ops[0].width != reg_ops[1].width:
        raise OperandArity(f"{instr.mnemonic} register widths must match", lineno)

    # resolve/verify memory access size against the register operand
    mem = instr.mem_operand
    if mem is not None:
        if mem.size == 0:
            if not reg_ops:
                raise OperandArity("memory operand needs a size keyword", lineno)
            resolved = reg_ops[0].width // 8
        elif reg_ops and mem.size != reg_ops[0].width // 8:
            raise OperandArity("memory operand size disagrees with register width", lineno)
        else:
            resolved = mem.size
        if resolved != mem.size:
            new_ops = tuple(
                MemOp(mem.base, mem.index, mem.disp, resolved) if op is mem else op
                for op in instr.operands)
            instr = Instruction(instr.mnemonic, new_ops, instr.rep, instr.lock,
                                instr.is_instrumentation)

    if instr.lock:
        if instr.mnemonic not in _LOCKABLE_ARITH and instr.mnemonic not in ("CMPXCHG", "XADD"):
            raise OperandArity(f"LOCK prefix not allowed on {instr.mnemonic}", lineno)
        if not isinstance(instr.operands[0], MemOp):
            raise OperandArity("LOCK requires a memory destination", lineno)
    if instr.rep and instr.mnemonic not in STRING_MNEMONICS:
        raise OperandArity(f"{instr.rep} prefix not allowed on {instr.mnemonic}", lineno)
    if instr.mnemonic in STRING_MNEMONICS and not instr.rep:
        raise OperandArity(f"{instr.mnemonic} requires a REPE or REPNE prefix", lineno)
    return instr


def parse_program(text: str) -> Program:
    """Parse assembly-like source into a Program.

    One instruction or label per line; ``#`` starts a comment.  The comment
    ``# instrumentation`` is structural: it marks the instruction as
    generator-inserted sandboxing code and survives a render round-trip.
    """
    instructions: list[Instruction] = []
    labels: dict[str, int] = {}
    pending_targets: list[tuple[str, int]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw
        comment = ""
        if "#" in line:
            line, comment = line.split("#", 1)
        line = line.strip()
        if not line:
            continue
        if line.endswith(":"):
            name = line[:-1].strip()
            if not name.startswith("."):
                raise UnresolvedLabel(f"label '{name}' must start with '.'", lineno)
            if name in labels:
                raise UnresolvedLabel(f"duplicate label '{name}'", lineno)
            labels[name] = len(instructions)
            continue

        tokens = line.split(None, 1)
        head = tokens[0].upper()
        rep = None
        lock = False
        if head in ("REPE", "REPNE", "LOCK"):
            if len(tokens) < 2:
                raise OperandArity(f"{head} prefix needs an instruction", lineno)
            if head == "LOCK":
                lock = True
            else:
                rep = head
            tokens = tokens[1].split(None, 1)
            head = tokens[0].upper()
        if head not in MNEMONIC_SPECS:
            raise UnknownMnemonic(f"unknown mnemonic '{tokens[0]}'", lineno)

        operand_text = tokens[1] if len(tokens) > 1 else ""
        operands: list[Operand] = []
        if operand_text.strip():
            for part in _split_operands(operand_text, lineno):
                operands.append(_parse_operand(part, lineno))

        instr = Instruction(
            mnemonic=head,
            operands=tuple(operands),
            rep=rep,
            lock=lock,
            is_instrumentation=comment.strip().lower() == _INSTRUMENTATION_MARK,
        )
        instr = _check_instruction(instr, lineno)
        for op in operands:
            if isinstance(op, LabelOp):
                pending_targets.append((op.label, lineno))
        instructions.append(instr)

    for label, lineno in pending_targets:
        if label not in labels:
            raise UnresolvedLabel(f"branch target '{label}' is not defined", lineno)

    return Program(instructions, labels)


def _split_operands(text: str, lineno: int) -> list[str]:
    parts = [p.strip() for p in text.split(",")]
    if any(not p for p in parts):
        raise OperandArity("empty operand", lineno)
    return parts


# ==================================================================================================
# Static sandbox validation
# ==================================================================================================
_UNKNOWN = (0, (1 << 64) - 1)


def _bounds_after(instr: Instruction, bounds: dict[Reg, tuple[int, int]]) -> None:
    """Update per-register value bounds in place for one instruction.

    Only the instrumentation patterns matter (AND with a page mask, OR/ADD
    with small constants); every other register write degrades the bound to
    unknown.
    """
    m = instr.mnemonic
    ops = instr.operands
    if m == "AND" and len(ops) == 2 and isinstance(ops[0], RegOp) and isinstance(ops[1], ImmOp):
        reg = ops[0].reg
        if ops[0].width == 64 and 0 <= ops[1].value:
            lo, hi = bounds.get(reg, _UNKNOWN)
            bounds[reg] = (0, min(hi, ops[1].value))
            return
    if m == "OR" and len(ops) == 2 and isinstance(ops[0], RegOp) and isinstance(ops[1], ImmOp):
        reg = ops[0].reg
        if ops[0].width == 64 and 0 <= ops[1].value:
            lo, hi = bounds.get(reg, _UNKNOWN)
            new_hi = hi | ops[1].value
            if new_hi < _UNKNOWN[1]:
                bounds[reg] = (max(lo, ops[1].value), new_hi)
                return
    if m == "ADD" and len(ops) == 2 and isinstance(ops[0], RegOp) and isinstance(ops[1], ImmOp):
        reg = ops[0].reg
        if ops[0].width == 64 and 0 <= ops[1].value and reg in bounds:
            lo, hi = bounds[reg]
            if hi + ops[1].value < _UNKNOWN[1]:
                bounds[reg] = (lo + ops[1].value, hi + ops[1].value)
                return

    # any other write to a register invalidates its bound
    written = _written_regs(instr)
    for reg in written:
        bounds.pop(reg, None)


def _written_regs(instr: Instruction) -> set[Reg]:
    m = instr.mnemonic
    out: set[Reg] = set()
    spec = MNEMONIC_SPECS[m]
    if m in ("CMP", "TEST") or spec.control_flow or m == "NOP" or m == "FENCE":
        return out
    if instr.is_string:
        out.update({Reg.RC, Reg.RDI})
        if m.startswith("CMPS"):
            out.add(Reg.RSI)
        return out
    if m in ("MUL", "IMUL", "DIV"):
        out.update({Reg.RA, Reg.RD})
        return out
    if m in ("CBW", "CWDE", "CDQE"):
        out.add(Reg.RA)
        return out
    if m == "CQO":
        out.add(Reg.RD)
        return out
    if m == "LAHF":
        out.add(Reg.RA)
        return out
    if m == "XCHG":
        out.update(op.reg for op in instr.operands if isinstance(op, RegOp))
        return out
    if m == "CMPXCHG":
        out.add(Reg.RA)
        return out
    if m == "XADD":
        out.update(op.reg for op in instr.operands if isinstance(op, RegOp))
        return out
    if instr.operands and isinstance(instr.operands[0], RegOp):
        out.add(instr.operands[0].reg)
    return out


_STRING_COUNT_HEADROOM = 16  # transient overrun allowance, in elements


def validate_sandbox(program: Program) -> list[str]:
    """Check that every memory access is provably inside the data page.

    Returns a list of diagnostics; an empty list means the program is valid.
    The check is a forward dataflow over the instruction DAG that tracks
    conservative value bounds established by instrumentation (AND masks,
    OR/ADD with constants).  A register used as an address must have a bound
    that keeps the whole access inside the page (plus tail pad) on every path
    that reaches the access.  DIV requires a divisor provably nonzero and
    small, and a high-dividend bound below the divisor's minimum so the
    quotient cannot overflow.
    """
    n = len(program.instructions)
    diagnostics: list[str] = []
    # bounds[i] = register bounds holding immediately before instruction i
    states: list[dict[Reg, tuple[int, int]] | None] = [None] * (n + 1)
    states[0] = {}

    def merge(idx: int, incoming: dict[Reg, tuple[int, int]]):
        cur = states[idx]
        if cur is None:
            states[idx] = dict(incoming)
            return
        merged = {}
        for reg in cur.keys() & incoming.keys():
            lo1, hi1 = cur[reg]
            lo2, hi2 = incoming[reg]
            merged[reg] = (min(lo1, lo2), max(hi1, hi2))
        states[idx] = merged

    for i in range(n):
        before = states[i]
        if before is None:
            continue  # unreachable
        instr = program.instructions[i]
        _check_access(instr, before, i, diagnostics)
        after = dict(before)
        _bounds_after(instr, after)

        if instr.is_control_flow:
            target_label = instr.operands[0].label  # type: ignore[union-attr]
            target = program.labels[target_label]
            if target < i:
                diagnostics.append(f"backward branch to {target_label} at index {i}")
            else:
                merge(target, after)
            if instr.mnemonic != "JMP":
                merge(i + 1, after)
        else:
            merge(i + 1, after)

    return diagnostics


def _check_access(instr: Instruction, bounds: dict[Reg, tuple[int, int]],
                  index: int, diagnostics: list[str]) -> None:
    mem = instr.mem_operand
    if mem is not None:
        hi_total = mem.disp if mem.disp > 0 else 0
        lo_total = mem.disp if mem.disp < 0 else 0
        ok = True
        for reg in (mem.base, mem.index):
            if reg is None:
                continue
            if reg not in bounds:
                diagnostics.append(f"unmasked base {REG_NAMES_64[reg]} at index {index}")
                ok = False
            else:
                lo_total += bounds[reg][0]
                hi_total += bounds[reg][1]
        if ok and (lo_total < 0 or hi_total + mem.size > MEM_SIZE):
            diagnostics.append(
                f"access through {REG_NAMES_64[mem.base]} may leave the page at index {index}")

    if instr.is_string:
        width = 1 if instr.mnemonic.endswith("B") else 2
        ptr_regs = (Reg.RDI,) if instr.mnemonic.startswith("SCAS") else (Reg.RSI, Reg.RDI)
        count = bounds.get(Reg.RC)
        if count is None:
            diagnostics.append(f"unbounded count register RC at index {index}")
            return
        span = width * (count[1] + _STRING_COUNT_HEADROOM)
        for reg in ptr_regs:
            if reg not in bounds:
                diagnostics.append(f"unmasked base {REG_NAMES_64[reg]} at index {index}")
            elif bounds[reg][1] + span > MEM_SIZE:
                diagnostics.append(
                    f"string walk from {REG_NAMES_64[reg]} may leave the page at index {index}")

    if instr.mnemonic == "DIV":
        divisor = instr.operands[0]
        assert isinstance(divisor, RegOp)
        dbounds = bounds.get(divisor.reg)
        if dbounds is None or dbounds[0] < 1 or dbounds[1] > (1 << 16):
            diagnostics.append(
                f"divisor {divisor.name} not forced nonzero-and-small at index {index}")
        else:
            high = bounds.get(Reg.RD)
            if high is None or high[1] >= dbounds[0]:
                diagnostics.append(
                    f"wide dividend RD not bounded below divisor at index {index}")


# ==================================================================================================
# Shared errors
# ==================================================================================================
class ProgramInvalid(Exception):
    """A program escaped the sandbox or failed a validity precondition."""


class DivideFault(Exception):
    """Division by zero or quotient overflow."""


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a; fixed algorithm so report keys stay stable."""
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h
