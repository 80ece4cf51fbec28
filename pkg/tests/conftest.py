import pytest

from specleak.isa import PAGE_SIZE, Flags, InputData


def make_input(ra=0, rb=0, rc=0, rd=0, rsi=0, rdi=0, flags=None, mem=None):
    """Input with named registers and an optional {offset: byte} memory patch."""
    memory = bytearray(PAGE_SIZE)
    for offset, value in (mem or {}).items():
        memory[offset] = value
    return InputData([ra, rb, rc, rd, rsi, rdi], flags or Flags(), bytes(memory))


def make_input_words(mem_words=None, **regs):
    """Like make_input but patches little-endian 64-bit words."""
    memory = bytearray(PAGE_SIZE)
    for offset, value in (mem_words or {}).items():
        memory[offset:offset + 8] = value.to_bytes(8, "little")
    return InputData(
        [regs.get(r, 0) for r in ("ra", "rb", "rc", "rd", "rsi", "rdi")],
        regs.get("flags") or Flags(),
        bytes(memory),
    )


@pytest.fixture
def zero_input():
    return make_input()
