"""Curated fixture library: one hand-written program+inputs pair per leak
class, stored as annotated files in the canonical text format.

Annotation lines (in comments at the top of each fixture):

    # clause: <UarchConfig toggle that makes the fixture leak>
    # input: RA=10 RB=0x40 ZF=1 mem16[0x128]=5 ...
    # expect-pair: <i> <j>      indices of the violating input pair

Unmentioned registers, flags, and memory bytes are zero.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .dut import UarchConfig
from .isa import FLAG_NAMES, Flags, InputData, PAGE_SIZE, Program, REG_NAMES_64, parse_program

LEAK_IDS = ("v1", "v4", "lvi_null", "zdi", "sco_repne", "sco_scas")

_MEM_TOKEN = re.compile(r"mem(8|16|32|64)\[([^]]+)\]=(.+)")


@dataclass
class ReproducerCase:
    leak_id: str
    clause: str
    program: Program
    inputs: list[InputData]
    uarch: UarchConfig  # all clauses off except the fixture's own
    expect_pair: tuple[int, int]

    def config_with_clauses(self, **toggles) -> UarchConfig:
        cfg = UarchConfig(**{name: False for name in
                             ("cond_predictor", "store_bypass", "lvi_null", "zdi", "sco")})
        for name, value in toggles.items():
            setattr(cfg, name, value)
        return cfg


def _parse_input_line(text: str) -> InputData:
    regs = [0] * 6
    flags = Flags()
    memory = bytearray(PAGE_SIZE)
    for token in text.split():
        mem_match = _MEM_TOKEN.match(token)
        if mem_match:
            width = int(mem_match.group(1)) // 8
            offset = int(mem_match.group(2), 0)
            value = int(mem_match.group(3), 0)
            memory[offset:offset + width] = value.to_bytes(width, "little")
            continue
        name, _, value_text = token.partition("=")
        value = int(value_text, 0)
        name = name.upper()
        if name in REG_NAMES_64:
            regs[REG_NAMES_64.index(name)] = value
        elif name in FLAG_NAMES:
            setattr(flags, name.lower(), bool(value))
        else:
            raise ValueError(f"unknown input token '{token}'")
    return InputData(regs, flags, bytes(memory))


def reproducer(leak_id: str) -> ReproducerCase:
    """Load one fixture; raises KeyError for an unknown leak id."""
    if leak_id not in LEAK_IDS:
        raise KeyError(f"unknown leak id '{leak_id}'; known: {LEAK_IDS}")
    text = (resources.files(__package__) / "fixtures" / f"{leak_id}.s").read_text()

    clause = None
    inputs: list[InputData] = []
    expect_pair = (0, 1)
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped.startswith("#"):
            continue
        body = stripped.lstrip("#").strip()
        if body.startswith("clause:"):
            clause = body.split(":", 1)[1].strip()
        elif body.startswith("input:"):
            inputs.append(_parse_input_line(body.split(":", 1)[1]))
        elif body.startswith("expect-pair:"):
            i, j = body.split(":", 1)[1].split()
            expect_pair = (int(i), int(j))
    if clause is None:
        raise ValueError(f"fixture {leak_id} lacks a clause annotation")

    program = parse_program(text)
    uarch = UarchConfig()
    setattr(uarch, clause, True)
    return ReproducerCase(leak_id, clause, program, inputs, uarch, expect_pair)


def all_reproducers() -> list[ReproducerCase]:
    return [reproducer(leak_id) for leak_id in LEAK_IDS]
