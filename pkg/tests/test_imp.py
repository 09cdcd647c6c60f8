import random

import pytest
from helpers import GCD_IMP, INCREASE_IMP

from clpverify.imp import (
    ImpSyntaxError,
    ImpValidationError,
    SAssign,
    SGoto,
    SHalt,
    SIf,
    SIte,
    SWhile,
    at,
    lower_structured,
    nextlab,
    parse_program,
    program_text,
)
from clpverify.interp import Env, run, run_structured


class TestParse:
    def test_increase_shape(self):
        p = parse_program(INCREASE_IMP)
        assert not p.is_flat()
        whiles = [s for s in p.stmts if isinstance(s, SWhile)]
        assert len(whiles) == 1
        ifs = [s for s in whiles[0].body if isinstance(s, SIf)]
        assert len(ifs) == 1 and ifs[0].els is not None

    def test_minimal_program(self):
        p = parse_program("h: halt;")
        assert p.is_flat() and len(p.stmts) == 1

    def test_duplicate_label(self):
        with pytest.raises(ImpValidationError, match="duplicate label"):
            parse_program("int x;\n1: x = 0;\n1: x = 1;\nh: halt;")

    def test_undeclared_identifier(self):
        with pytest.raises(ImpValidationError, match="undeclared"):
            parse_program("int x;\n0: x = y + 1;\nh: halt;")

    def test_missing_halt(self):
        with pytest.raises(ImpValidationError, match="halt"):
            parse_program("int x;\n0: x = 1;")

    def test_unknown_jump_target(self):
        with pytest.raises(ImpValidationError, match="unknown label"):
            parse_program("int x;\n0: goto 7;\nh: halt;")

    def test_syntax_error_position(self):
        with pytest.raises(ImpSyntaxError) as ei:
            parse_program("int x;\n0: x = ;\nh: halt;")
        assert ei.value.line == 2

    def test_goto_rejected_in_structured(self):
        src = "int x;\nwhile (x < 3) { x = x + 1; }\ngoto 0;\nh: halt;"
        with pytest.raises(ImpValidationError):
            parse_program(src)


class TestLowering:
    def test_increase_flat_listing(self):
        flat = lower_structured(parse_program(INCREASE_IMP))
        kinds = [
            (s.label, type(s).__name__)
            for s in flat.stmts
        ]
        assert kinds == [
            (0, "SIte"),
            (1, "SIte"),
            (2, "SAssign"),
            (3, "SGoto"),
            (4, "SAssign"),
            (5, "SAssign"),
            (6, "SGoto"),
            ("h", "SHalt"),
        ]
        l0 = flat.stmts[0]
        assert (l0.then_label, l0.else_label) == (1, "h")
        l1 = flat.stmts[1]
        assert (l1.then_label, l1.else_label) == (2, 4)
        assert flat.stmts[3].target == 5
        assert flat.stmts[6].target == 0

    def test_idempotent_on_flat(self):
        flat = lower_structured(parse_program(INCREASE_IMP))
        assert lower_structured(flat) is flat

    def test_round_trip_through_text(self):
        flat = lower_structured(parse_program(GCD_IMP))
        again = parse_program(program_text(flat))
        assert [s.label for s in again.stmts] == [s.label for s in flat.stmts]

    def test_gcd_behaviour_preserved(self):
        structured = parse_program(GCD_IMP)
        flat = lower_structured(structured)
        rng = random.Random(42)
        for _ in range(100):
            env = Env(ints={n: rng.randint(-4, 8) for n in "mnxyz"})
            r1 = run_structured(structured, env.copy(), 500)
            r2 = run(flat, env.copy(), 2000)
            assert r1.halted == r2.halted
            if r1.halted:
                assert r1.env.ints == r2.env.ints


class TestLookups:
    def test_at(self):
        flat = lower_structured(parse_program(INCREASE_IMP))
        cmd = at(flat, 4)
        assert isinstance(cmd, SAssign) and cmd.var == "j"

    def test_nextlab(self):
        flat = lower_structured(parse_program(INCREASE_IMP))
        assert nextlab(flat, 4) == 5
        assert nextlab(flat, 6) == "h"

    def test_unknown_label(self):
        flat = lower_structured(parse_program(INCREASE_IMP))
        with pytest.raises(ImpValidationError):
            at(flat, 99)
        with pytest.raises(ImpValidationError):
            nextlab(flat, "h")
