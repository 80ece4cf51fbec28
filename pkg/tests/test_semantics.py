"""Architectural semantics: single-step execution, flags, sub-register
behavior, string loops, and read/write sets against a hand-written oracle."""

import pytest

from conftest import make_input, make_input_words
from specleak.isa import DivideFault, Flags, ProgramInvalid, Reg, parse_program
from specleak.semantics import (
    ArchState, Branch, EventSink, MemRead, MemWrite, arch_step, execute_instruction,
    read_write_sets, run_program,
)


def single(text):
    return parse_program(text).instructions[0]


def step(text, state):
    """Execute the one-instruction program on a copy; returns (state, events)."""
    program = parse_program(text)
    assert len(program.instructions) == 1
    return arch_step(state, program.instructions[0], program.labels)


class TestArithmetic:
    def test_add_basic(self):
        st = ArchState([1, 0, 0, 0, 0, 0])
        new, _ = step("ADD RA, 1", st)
        assert new.regs[Reg.RA] == 2
        assert not new.zf and not new.cf

    def test_cmp_equal_sets_zf(self):
        st = ArchState([10, 0, 0, 0, 0, 0])
        new, _ = step("CMP RA, 10", st)
        assert new.zf and new.regs[Reg.RA] == 10

    def test_sub_borrow_sets_cf(self):
        st = ArchState([1, 2, 0, 0, 0, 0])
        new, _ = step("SUB RA, RB", st)
        assert new.cf and new.sf
        assert new.regs[Reg.RA] == (1 - 2) % 2**64

    def test_signed_overflow(self):
        st = ArchState([2**63 - 1, 0, 0, 0, 0, 0])
        new, _ = step("ADD RA, 1", st)
        assert new.of and new.sf and not new.cf

    def test_adc_consumes_carry(self):
        st = ArchState([5, 0, 0, 0, 0, 0], Flags(cf=True))
        new, _ = step("ADC RA, 0", st)
        assert new.regs[Reg.RA] == 6

    def test_sbb_borrows(self):
        st = ArchState([5, 0, 0, 0, 0, 0], Flags(cf=True))
        new, _ = step("SBB RA, 0", st)
        assert new.regs[Reg.RA] == 4

    def test_inc_preserves_cf(self):
        st = ArchState([0, 0, 0, 0, 0, 0], Flags(cf=True))
        new, _ = step("INC RA", st)
        assert new.cf and new.regs[Reg.RA] == 1

    def test_neg(self):
        st = ArchState([5, 0, 0, 0, 0, 0])
        new, _ = step("NEG RA", st)
        assert new.regs[Reg.RA] == 2**64 - 5
        assert new.cf
        new, _ = step("NEG RA", ArchState())
        assert not new.cf and new.zf

    def test_logic_clears_cf_of(self):
        st = ArchState([0b1100, 0b1010, 0, 0, 0, 0], Flags(cf=True, of=True))
        new, _ = step("AND RA, RB", st)
        assert new.regs[Reg.RA] == 0b1000
        assert not new.cf and not new.of

    def test_mul_wide(self):
        st = ArchState([2**63, 4, 0, 0, 0, 0])
        new, _ = step("MUL RB", st)
        assert new.regs[Reg.RA] == 0
        assert new.regs[Reg.RD] == 2  # 2^65 / 2^64
        assert new.cf and new.of

    def test_imul_wide_negative(self):
        minus_two = 2**64 - 2
        st = ArchState([minus_two, 3, 0, 0, 0, 0])
        new, _ = step("IMUL RB", st)
        assert new.regs[Reg.RA] == 2**64 - 6
        assert new.regs[Reg.RD] == 2**64 - 1  # sign extension of -6
        assert not new.cf and not new.of

    def test_div_wide(self):
        # RD:RA = 2^64 + 7, divisor 5 -> quotient (2^64+7)//5, remainder 2
        st = ArchState([7, 0, 5, 1, 0, 0])
        new, _ = step("DIV RC", st)
        assert new.regs[Reg.RA] == (2**64 + 7) // 5
        assert new.regs[Reg.RD] == (2**64 + 7) % 5

    def test_div_by_zero_faults(self):
        with pytest.raises(DivideFault):
            step("DIV RC", ArchState([1, 0, 0, 0, 0, 0]))

    def test_div_quotient_overflow_faults(self):
        # RD >= divisor makes the quotient exceed 64 bits
        with pytest.raises(DivideFault):
            step("DIV RC", ArchState([0, 0, 2, 2, 0, 0]))


class TestSubRegisters:
    def test_32bit_write_zeroes_upper(self):
        st = ArchState([0xFFFF_FFFF_FFFF_FFFF, 0, 0, 0, 0, 0])
        new, _ = step("MOV EA, 5", st)
        assert new.regs[Reg.RA] == 5

    def test_16bit_write_merges(self):
        st = ArchState([0xFFFF_FFFF_FFFF_FFFF, 0, 0, 0, 0, 0])
        new, _ = step("MOV A, 5", st)
        assert new.regs[Reg.RA] == 0xFFFF_FFFF_FFFF_0005

    def test_8bit_write_merges(self):
        st = ArchState([0xAABB, 0, 0, 0, 0, 0])
        new, _ = step("MOV AL, 1", st)
        assert new.regs[Reg.RA] == 0xAA01

    def test_32bit_view_zeroing_holds_for_arith(self):
        for value in (0, 1, 0xFFFFFFFF, 0x1234_5678_9ABC_DEF0):
            st = ArchState([value, 0, 0, 0, 0, 0])
            new, _ = step("ADD EA, 1", st)
            assert new.regs[Reg.RA] >> 32 == 0


class TestDataMovement:
    def test_mov_load_store(self):
        inp = make_input(rb=8, mem={8: 0x11, 9: 0x22})
        state = ArchState.from_input(inp)
        new, events = step("MOV RA, [RB]", state)
        assert new.regs[Reg.RA] == 0x2211
        assert events == [MemRead(8, 8)]
        new2, events2 = step("MOV [RB], RA", new)
        assert events2 == [MemWrite(8, 8)]

    def test_xchg_mem(self):
        inp = make_input(ra=5, rb=16, mem={16: 9})
        state = ArchState.from_input(inp)
        new, events = step("XCHG [RB], RA", state)
        assert new.regs[Reg.RA] == 9
        assert new.read_mem(16, 8) == 5

    def test_bswap(self):
        st = ArchState([0x0102030405060708, 0, 0, 0, 0, 0])
        new, _ = step("BSWAP RA", st)
        assert new.regs[Reg.RA] == 0x0807060504030201

    def test_cmov_taken_and_not(self):
        st = ArchState([1, 2, 0, 0, 0, 0], Flags(zf=True))
        new, _ = step("CMOVE RA, RB", st)
        assert new.regs[Reg.RA] == 2
        st2 = ArchState([1, 2, 0, 0, 0, 0], Flags(zf=False))
        new2, _ = step("CMOVE RA, RB", st2)
        assert new2.regs[Reg.RA] == 1

    def test_cmov_memory_source_reads_even_when_false(self):
        inp = make_input(ra=1, rb=32)
        state = ArchState.from_input(inp)
        _, events = step("CMOVE RA, [RB]", state)
        assert events == [MemRead(32, 8)]

    def test_setcc(self):
        st = ArchState([0xFF00, 0, 0, 0, 0, 0], Flags(zf=True))
        new, _ = step("SETE AL", st)
        assert new.regs[Reg.RA] == 0xFF01


class TestFlagsAndConversions:
    def test_lahf_sahf_round_trip(self):
        st = ArchState(flags=Flags(zf=True, cf=False, sf=True, of=False))
        mid, _ = step("LAHF", st)
        cleared, _ = step("SAHF", ArchState([mid.regs[Reg.RA]] + [0] * 5))
        assert (cleared.zf, cleared.cf, cleared.sf, cleared.of) == (True, False, True, False)

    def test_cmc(self):
        new, _ = step("CMC", ArchState(flags=Flags(cf=True)))
        assert not new.cf

    def test_sign_extensions(self):
        st = ArchState([0x80, 0, 0, 0, 0, 0])
        new, _ = step("CBW", st)
        assert new.regs[Reg.RA] & 0xFFFF == 0xFF80
        st2 = ArchState([0x8000_0000, 0, 0, 0, 0, 0])
        new2, _ = step("CDQE", st2)
        assert new2.regs[Reg.RA] == 0xFFFF_FFFF_8000_0000
        new3, _ = step("CQO", ArchState([2**63, 0, 0, 0, 0, 0]))
        assert new3.regs[Reg.RD] == 2**64 - 1


class TestBitOps:
    def test_bsf_bsr(self):
        st = ArchState([0, 0b011000, 0, 0, 0, 0])
        new, _ = step("BSF RA, RB", st)
        assert new.regs[Reg.RA] == 3 and not new.zf
        new2, _ = step("BSR RA, RB", st)
        assert new2.regs[Reg.RA] == 4

    def test_bsf_zero_source_keeps_dest(self):
        st = ArchState([77, 0, 0, 0, 0, 0])
        new, _ = step("BSF RA, RB", st)
        assert new.zf and new.regs[Reg.RA] == 77

    def test_bt_family(self):
        st = ArchState([0b100, 0, 0, 0, 0, 0])
        new, _ = step("BT RA, 2", st)
        assert new.cf and new.regs[Reg.RA] == 0b100
        new2, _ = step("BTR RA, 2", st)
        assert new2.cf and new2.regs[Reg.RA] == 0
        new3, _ = step("BTS RA, 0", st)
        assert not new3.cf and new3.regs[Reg.RA] == 0b101


class TestAtomics:
    def test_cmpxchg_equal_stores(self):
        inp = make_input(ra=7, rc=42, rb=24, mem={24: 7})
        new, events = step("CMPXCHG [RB], RC", ArchState.from_input(inp))
        assert new.zf
        assert new.read_mem(24, 8) == 42
        assert MemWrite(24, 8) in events

    def test_cmpxchg_unequal_loads_into_accumulator(self):
        inp = make_input(ra=9, rc=42, rb=24, mem={24: 7})
        new, events = step("CMPXCHG [RB], RC", ArchState.from_input(inp))
        assert not new.zf
        assert new.regs[Reg.RA] == 7
        assert new.read_mem(24, 8) == 7  # written back unchanged
        assert MemWrite(24, 8) in events  # the paired write always happens

    def test_xadd(self):
        inp = make_input(ra=0, rc=5, rb=32, mem={32: 10})
        new, _ = step("XADD [RB], RC", ArchState.from_input(inp))
        assert new.regs[Reg.RC] == 10
        assert new.read_mem(32, 8) == 15


class TestControlFlow:
    def test_branches(self):
        program = parse_program("CMP RA, 10\nJNE .END\nMOV RA, 1\n.END:\n")
        sink = EventSink()
        final = run_program(program, make_input(ra=10), sink)
        assert Branch(False, 2) in sink.events
        assert final.regs[Reg.RA] == 1

        sink2 = EventSink()
        run_program(program, make_input(ra=11), sink2)
        assert Branch(True, 3) in sink2.events

    def test_jmp_unconditional(self):
        program = parse_program("JMP .X\nMOV RA, 1\n.X:\n")
        final = run_program(program, make_input())
        assert final.regs[Reg.RA] == 0


class TestStringOps:
    def _unrolled_repne_cmpsw(self, state):
        """Hand reference: compare words until match or count exhausted."""
        reads = []
        rc, rsi, rdi = state.regs[Reg.RC], state.regs[Reg.RSI], state.regs[Reg.RDI]
        while rc:
            a = state.read_mem(rsi, 2)
            b = state.read_mem(rdi, 2)
            reads += [MemRead(rsi, 2), MemRead(rdi, 2)]
            rsi += 2
            rdi += 2
            rc -= 1
            if a == b:  # REPNE stops on equality
                break
        return reads, rc, rsi, rdi

    def test_repne_cmpsw_all_different(self):
        # three 16-bit word pairs, all unequal
        inp = make_input(rc=3, rsi=0x100, rdi=0x200,
                         mem={0x100: 1, 0x102: 2, 0x104: 3, 0x200: 9, 0x202: 8, 0x204: 7})
        state = ArchState.from_input(inp)
        expected_reads, exp_rc, exp_rsi, exp_rdi = self._unrolled_repne_cmpsw(state.copy())
        new, events = step("REPNE CMPSW", state)
        assert events == expected_reads
        assert len([e for e in events if isinstance(e, MemRead)]) == 6  # 3 per string
        assert new.regs[Reg.RC] == exp_rc == 0
        assert (new.regs[Reg.RSI], new.regs[Reg.RDI]) == (exp_rsi, exp_rdi)

    def test_repne_stops_on_match(self):
        inp = make_input_words(rc=4, rsi=0x100, rdi=0x100)  # same string: match first
        new, events = step("REPNE CMPSW", ArchState.from_input(inp))
        assert new.regs[Reg.RC] == 3
        assert len(events) == 2
        assert new.zf

    def test_repe_runs_while_equal(self):
        inp = make_input(rc=4, rsi=0x100, rdi=0x200, mem={0x204: 1})
        new, events = step("REPE CMPSB", ArchState.from_input(inp))
        # bytes 0..3 of both strings: equal, equal, equal, equal vs byte 4 of dst=1
        assert new.regs[Reg.RC] == 0  # all four equal pairs consumed
        assert not events or len(events) == 8

    def test_repe_stops_on_mismatch(self):
        inp = make_input(rc=4, rsi=0x100, rdi=0x200, mem={0x201: 5})
        new, _ = step("REPE CMPSB", ArchState.from_input(inp))
        assert new.regs[Reg.RC] == 2  # stopped at the second byte
        assert not new.zf

    def test_scas_compares_accumulator(self):
        inp = make_input(ra=0x33, rc=3, rdi=0x40, mem={0x41: 0x33})
        new, events = step("REPNE SCASB", ArchState.from_input(inp))
        assert new.regs[Reg.RC] == 1  # match at the second byte
        assert new.zf
        assert events == [MemRead(0x40, 1), MemRead(0x41, 1)]

    def test_zero_count_does_nothing(self):
        inp = make_input(rc=0, rsi=0x10, rdi=0x20, flags=Flags(zf=True))
        new, events = step("REPNE CMPSB", ArchState.from_input(inp))
        assert events == []
        assert new.zf  # flags untouched


class TestSafety:
    def test_out_of_page_access_raises(self):
        with pytest.raises(ProgramInvalid):
            step("MOV RA, [RB]", ArchState([0, 5000, 0, 0, 0, 0]))

    def test_tail_pad_allows_full_mask(self):
        # highest maskable base still fits an 8-byte access
        new, _ = step("MOV RA, [RB]", ArchState([0, 0xFFF, 0, 0, 0, 0]))
        assert new.regs[Reg.RA] == 0


class TestPurityAndDeterminism:
    def test_arch_step_does_not_mutate_input_state(self):
        inp = make_input(ra=1, rb=8)
        state = ArchState.from_input(inp)
        before = (list(state.regs), bytes(state.mem), state.pc)
        arch_step(state, single("ADD RA, 1"))
        arch_step(state, single("MOV [RB], RA"))
        assert (list(state.regs), bytes(state.mem), state.pc) == before

    def test_identical_inputs_identical_outputs(self):
        inp = make_input_words(ra=3, rb=64, rc=2, rsi=0x80, rdi=0x90,
                               mem_words={0x80: 5, 0x90: 6})
        for text in ("ADD RA, RB", "MOV RA, [RB]", "REPNE CMPSW", "MUL RB"):
            a_state, a_events = step(text, ArchState.from_input(inp))
            b_state, b_events = step(text, ArchState.from_input(inp))
            assert a_events == b_events
            assert a_state.regs == b_state.regs
            assert bytes(a_state.mem) == bytes(b_state.mem)
            assert a_state.flags() == b_state.flags()


# hand-written oracle: mnemonic text -> (state patch, expected read, expected write)
_RW_ORACLE = [
    ("CMP RA, 10", {}, {"PC", "RA"}, {"ZF", "CF", "SF", "OF"}),
    ("NOP", {}, {"PC"}, set()),
    ("MOV RA, [RB]", {"rb": 8}, {"PC", "RB"} | set(range(8, 16)), {"RA"}),
    ("MOV [RB], RA", {"rb": 8}, {"PC", "RB", "RA"}, set(range(8, 16))),
    ("ADD RA, RB", {}, {"PC", "RA", "RB"}, {"RA", "ZF", "CF", "SF", "OF"}),
    ("ADC RA, RB", {}, {"PC", "RA", "RB", "CF"}, {"RA", "ZF", "CF", "SF", "OF"}),
    ("ADD [RB], RA", {"rb": 16},
     {"PC", "RA", "RB"} | set(range(16, 24)),
     set(range(16, 24)) | {"ZF", "CF", "SF", "OF"}),
    ("JNE .x", {}, {"PC", "ZF"}, {"PC"}),
    ("JMP .x", {}, {"PC"}, {"PC"}),
    ("JL .x", {}, {"PC", "SF", "OF"}, {"PC"}),
    ("SETB AL", {}, {"PC", "CF", "RA"}, {"RA"}),  # 8-bit write merges, so RA is read
    ("MOV EA, EB", {}, {"PC", "RB"}, {"RA"}),  # 32-bit write replaces
    ("MOV A, B", {}, {"PC", "RB", "RA"}, {"RA"}),
    ("DIV RC", {"ra": 1, "rc": 3}, {"PC", "RA", "RD", "RC"}, {"RA", "RD"}),
    ("MUL RC", {}, {"PC", "RA", "RC"}, {"RA", "RD", "ZF", "CF", "SF", "OF"}),
    ("CQO", {}, {"PC", "RA"}, {"RD"}),
    ("LAHF", {}, {"PC", "ZF", "CF", "SF", "OF", "RA"}, {"RA"}),
    ("SAHF", {}, {"PC", "RA"}, {"ZF", "CF", "SF", "OF"}),
    ("TEST RA, RB", {}, {"PC", "RA", "RB"}, {"ZF", "CF", "SF", "OF"}),
    ("NOT RA", {}, {"PC", "RA"}, {"RA"}),
    ("FENCE", {}, {"PC"}, set()),
]


class TestReadWriteSets:
    @pytest.mark.parametrize("text,patch,want_read,want_write",
                             _RW_ORACLE, ids=[e[0] for e in _RW_ORACLE])
    def test_against_oracle_table(self, text, patch, want_read, want_write):
        if ".x" in text:
            instr = parse_program(f"{text}\n.x:\n").instructions[0]
        else:
            instr = single(text)
        state = ArchState.from_input(make_input(**patch))
        rw = read_write_sets(instr, state)
        assert rw.read == want_read
        assert rw.write == want_write

    def test_string_rw_reflects_dynamic_walk(self):
        inp = make_input_words(rc=2, rsi=0x100, rdi=0x200,
                               mem_words={0x100: 1, 0x108: 2, 0x200: 3, 0x208: 4})
        instr = single("REPNE CMPSW")
        rw = read_write_sets(instr, ArchState.from_input(inp))
        assert {"PC", "RC", "RSI", "RDI"} <= rw.read
        assert set(range(0x100, 0x104)) <= rw.read  # two words from string one
        assert set(range(0x200, 0x204)) <= rw.read
        assert {"RC", "RSI", "RDI", "ZF"} <= rw.write

    def test_scas_reads_accumulator(self):
        inp = make_input(ra=1, rc=1, rdi=0x40)
        rw = read_write_sets(single("REPNE SCASB"), ArchState.from_input(inp))
        assert "RA" in rw.read
        assert "RSI" not in rw.write

    def test_zero_count_string_still_reports_conditional_writes(self):
        # whether the walk state changed is itself data-dependent, so the
        # walk registers stay in both sets even when the count is zero
        rw = read_write_sets(single("REPNE SCASB"), ArchState.from_input(make_input()))
        assert {"RC", "RDI"} <= rw.write
        assert {"RC", "RDI"} <= rw.read
        assert not any(isinstance(loc, int) for loc in rw.read)  # no bytes touched

    def test_bsf_conditional_keep_reads_dest(self):
        # the destination survives a zero source, so its old value is a read
        for rb in (0, 4):
            rw = read_write_sets(single("BSF RA, RB"),
                                 ArchState.from_input(make_input(rb=rb)))
            assert "RA" in rw.write
            assert "RA" in rw.read

    def test_cmov_reads_old_destination(self):
        rw = read_write_sets(single("CMOVE RA, RB"), ArchState.from_input(make_input()))
        assert {"RA", "RB", "ZF"} <= rw.read
        assert "RA" in rw.write
