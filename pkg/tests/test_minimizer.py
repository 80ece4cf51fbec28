"""Instruction-removal shrinking: predicate preservation, 1-minimality,
instrumentation coupling, and determinism."""

import pytest

from conftest import make_input
from specleak.dut import UarchConfig
from specleak.filters import speculation_filter
from specleak.isa import parse_program, validate_sandbox
from specleak.minimizer import PredicateUnstable, minimize, remove_span


def has_mnemonic(mnemonic):
    def predicate(program, inputs):
        return any(i.mnemonic == mnemonic for i in program.instructions)
    return predicate


class TestMinimize:
    def test_shrinks_to_predicate_core(self):
        program = parse_program("NOP\nADD RA, 1\nMUL RB\nSUB RC, 2\nNOP\n")
        result = minimize(program, [make_input()], has_mnemonic("MUL"))
        assert [i.mnemonic for i in result.instructions] == ["MUL"]

    def test_already_minimal_unchanged(self):
        program = parse_program("MUL RB\n")
        result = minimize(program, [make_input()], has_mnemonic("MUL"))
        assert result.instructions == program.instructions

    def test_unstable_predicate_rejected(self):
        program = parse_program("NOP\n")
        with pytest.raises(PredicateUnstable):
            minimize(program, [make_input()], has_mnemonic("MUL"))

    def test_instrumentation_removed_with_its_instruction(self):
        program = parse_program(
            "MUL RB\n"
            "AND RB, 0xff8  # instrumentation\n"
            "MOV RA, [RB]\n")
        result = minimize(program, [make_input()], has_mnemonic("MUL"))
        assert [i.mnemonic for i in result.instructions] == ["MUL"]

    def test_instrumentation_never_removed_alone(self):
        program = parse_program(
            "AND RB, 0xff8  # instrumentation\n"
            "MOV RA, [RB]\n"
            "NOP\n")
        result = minimize(program, [make_input()], has_mnemonic("MOV"))
        assert [i.mnemonic for i in result.instructions] == ["AND", "MOV"]
        assert result.instructions[0].is_instrumentation

    def test_validity_preserved(self):
        program = parse_program(
            "NOP\n"
            "AND RB, 0xff8  # instrumentation\n"
            "MOV RA, [RB]\n"
            "AND RB, 0xff8  # instrumentation\n"
            "ADD RC, [RB]\n")
        assert validate_sandbox(program) == []

        def still_loads(candidate, inputs):
            return any(i.mem_operand is not None for i in candidate.instructions)

        result = minimize(program, [make_input()], still_loads)
        assert validate_sandbox(result) == []
        assert any(i.mem_operand is not None for i in result.instructions)

    def test_one_minimality_exhaustive(self):
        program = parse_program(
            "ADD RA, 1\nNOP\nMUL RB\nNOP\nSUB RC, RD\nIMUL RSI\n")
        predicate = lambda p, _: (sum(1 for i in p.instructions
                                      if i.mnemonic in ("MUL", "IMUL")) >= 2)
        result = minimize(program, [make_input()], predicate)
        assert predicate(result, None)
        for index, instr in enumerate(result.instructions):
            if instr.is_instrumentation:
                continue
            candidate = remove_span(result, index, index + 1)
            assert not predicate(candidate, None), f"removable at {index}"

    def test_deterministic(self):
        program = parse_program("NOP\nMUL RB\nNOP\nMUL RC\nNOP\n")
        predicate = has_mnemonic("MUL")
        a = minimize(program, [make_input()], predicate)
        b = minimize(program, [make_input()], predicate)
        assert a.instructions == b.instructions

    def test_labels_survive_removal(self):
        program = parse_program(
            "CMP RA, 1\nJE .x\nNOP\nMUL RB\n.x:\nNOP\n")
        result = minimize(program, [make_input()], has_mnemonic("JE"))
        assert ".x" in result.labels
        assert result.labels[".x"] <= len(result.instructions)

    def test_speculation_predicate_example(self):
        # a string-overrun case shrinks to the string instruction plus its
        # own instrumentation when the predicate is "still speculates"
        program = parse_program(
            "SUB CL, DL\n"
            "ADD RA, 55\n"
            "NEG AL\n"
            "CMP ED, 122\n"
            "AND RB, 0xfff  # instrumentation\n"
            "SBB byte [RB], 111\n"
            "CMP SI, 117\n"
            "AND RDI, 0x7fe  # instrumentation\n"
            "AND RC, 0x7  # instrumentation\n"
            "ADD RC, 1  # instrumentation\n"
            "REPNE SCASW\n")
        cfg = UarchConfig(sco=True)
        inputs = [make_input(ra=1, rc=3, rdi=0x100), make_input(ra=2, rc=5, rdi=0x200)]

        def speculates(candidate, case_inputs):
            keep, _ = speculation_filter(candidate, case_inputs, cfg)
            return keep

        result = minimize(program, inputs, speculates)
        mnemonics = [i.mnemonic for i in result.instructions]
        assert mnemonics == ["AND", "AND", "ADD", "SCASW"]
        assert result.instructions[-1].rep == "REPNE"
        assert all(i.is_instrumentation for i in result.instructions[:-1])
