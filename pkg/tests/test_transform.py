import pytest
from helpers import (
    ARRAYMAX_IMP,
    ARRAYMAX_SPEC,
    GCD_IMP,
    GCD_SPEC,
    GOLDEN,
    INCREASE_IMP,
    INCREASE_SPEC,
    assert_programs_equal,
    parse_clauses,
    programs_equal,
)

from clpverify.clp import Atom, bounded_eval, parse_clause, render_clause
from clpverify.encoder import Triple, encode_triple, parse_spec
from clpverify.imp import lower_structured, parse_program
from clpverify.transform import (
    StrategyConfig,
    _Engine,
    compute_loop_headers,
    hoist_invariant_args,
    transform,
)


def _setup(imp, spec):
    flat = lower_structured(parse_program(imp))
    program, info = encode_triple(Triple(flat, parse_spec(spec)))
    cfg = StrategyConfig(
        mode="specialize",
        loop_headers=compute_loop_headers(flat),
        encoding=info,
        flat_prog=flat,
    )
    return flat, program, info, cfg


class TestLoopHeaders:
    def test_increase(self):
        flat, *_ = _setup(INCREASE_IMP, INCREASE_SPEC)
        assert compute_loop_headers(flat) == frozenset({0})

    def test_straight_line(self):
        flat = parse_program("int x;\n0: x = 1;\nh: halt;")
        assert compute_loop_headers(flat) == frozenset()

    def test_nested_jump_cycle(self):
        flat = parse_program(
            "int x;\n0: if (x < 3) 1 else h;\n1: x = x + 1;\n2: goto 0;\nh: halt;"
        )
        assert compute_loop_headers(flat) == frozenset({0})


class TestUnf:
    def test_entry_unfold_binds_configuration(self):
        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        eng = _Engine(program, cfg)
        [entry] = program.clauses_for("incorrect")
        out = eng.unf(entry, 0)  # the initial-configuration atom
        assert len(out) == 1
        assert out[0].body[0].pred == "phiInit"

    def test_unfold_no_matching_heads(self):
        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        eng = _Engine(program, cfg)
        c = parse_clause("p :- nosuch(X).")
        assert eng.unf(c, 0) == []

    def test_unsat_resolvents_dropped(self):
        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        eng = _Engine(program, cfg)
        # phiInit forces I = 0, J = 0; a body contradicting that dies
        c = parse_clause("p :- I < J, I = 0, J = 0, phiInit(I,J).")
        assert eng.unf(c, 0) == []


class TestInterpreterRemoval:
    def test_increase_matches_worked_derivation(self):
        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        res = transform(program, cfg)
        assert res.status == "ok"
        assert_programs_equal((GOLDEN / "increase_ta.clp").read_text(), res.derived, "ta")

    def test_arraymax_matches_worked_derivation(self):
        _, program, _, cfg = _setup(ARRAYMAX_IMP, ARRAYMAX_SPEC)
        res = transform(program, cfg)
        assert res.status == "ok"
        assert_programs_equal((GOLDEN / "arraymax_ta.clp").read_text(), res.derived, "ta")

    def test_no_interpreter_predicates_left(self):
        _, program, _, cfg = _setup(GCD_IMP, GCD_SPEC)
        res = transform(program, cfg)
        preds = {a.pred for c in res.derived for a in c.body}
        assert not preds & {"tr", "eval", "at", "nextlab", "update", "lookup", "reach"}

    def test_agreement_with_source_program(self):
        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        res = transform(program, cfg)
        for depth in (5, 12, 25):
            a = bounded_eval(program, Atom("incorrect"), depth, node_budget=40_000)
            b = bounded_eval(res.program, Atom("incorrect"), depth, node_budget=40_000)
            assert a.derivable == b.derivable


class TestPropagation:
    def test_increase_fold_stage(self):
        from clpverify.reversal import reverse, to_linear_view

        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        ta = transform(program, cfg)
        rev = reverse(to_linear_view(ta.program), ta.program)
        tb = transform(rev, StrategyConfig(mode="propagate", gen_operator="widen"))
        assert tb.status == "ok"
        assert tb.derived == []
        assert_programs_equal(
            (GOLDEN / "increase_tb_pre.clp").read_text(), tb.pre_removal, "tb pre-removal"
        )

    def test_gcd_fold_stage(self):
        _, program, _, cfg = _setup(GCD_IMP, GCD_SPEC)
        ta = transform(program, cfg)
        hoisted, applied = hoist_invariant_args(ta.program)
        assert applied
        tb = transform(hoisted, StrategyConfig(mode="propagate", gen_operator="widen"))
        assert tb.status == "ok" and tb.derived == []
        assert_programs_equal((GOLDEN / "gcd_fold.clp").read_text(), tb.pre_removal, "gcd fold")

    def test_clause_with_no_high_atom_untouched(self):
        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        eng = _Engine(program, cfg)
        from clpverify.generalize import DefinitionDb

        db = DefinitionDb()
        c = parse_clause("incorrect :- X >= 0.")
        out = eng.definition_folding_phase([c], c, db)
        assert out == [c]


class TestHoisting:
    def test_gcd_rewrites_entry_and_exit(self):
        _, program, _, cfg = _setup(GCD_IMP, GCD_SPEC)
        ta = transform(program, cfg)
        hoisted, applied = hoist_invariant_args(ta.program)
        assert applied
        derived = [c for c in hoisted.clauses if c.head.pred in ("incorrect", "new1")]
        assert_programs_equal((GOLDEN / "gcd_hoisted.clp").read_text(), derived, "hoisted")

    def test_no_invariant_positions_unchanged(self):
        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        ta = transform(program, cfg)
        hoisted, applied = hoist_invariant_args(ta.program)
        assert not applied
        assert hoisted is ta.program

    def test_meaning_preserved(self):
        _, program, _, cfg = _setup(GCD_IMP, GCD_SPEC)
        ta = transform(program, cfg)
        hoisted, _ = hoist_invariant_args(ta.program)
        for depth in (8, 16, 30):
            a = bounded_eval(ta.program, Atom("incorrect"), depth, node_budget=40_000)
            b = bounded_eval(hoisted, Atom("incorrect"), depth, node_budget=40_000)
            assert a.derivable == b.derivable


class TestBudgets:
    def test_definition_cap_reports_budget(self):
        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        ta = transform(program, cfg)
        from clpverify.reversal import reverse, to_linear_view

        rev = reverse(to_linear_view(ta.program), ta.program)
        small = StrategyConfig(mode="propagate", gen_operator="widen", max_defs=1)
        res = transform(rev, small)
        assert res.status == "budget"

    def test_node_budget(self):
        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        tight = StrategyConfig(
            mode="specialize",
            loop_headers=cfg.loop_headers,
            encoding=cfg.encoding,
            flat_prog=cfg.flat_prog,
            node_budget=5,
        )
        res = transform(program, tight)
        assert res.status == "budget"


class TestTraceDeterminism:
    def test_two_runs_identical(self):
        _, program, _, cfg = _setup(INCREASE_IMP, INCREASE_SPEC)
        r1 = transform(program, cfg)
        _, program2, _, cfg2 = _setup(INCREASE_IMP, INCREASE_SPEC)
        r2 = transform(program2, cfg2)
        assert r1.trace.to_text() == r2.trace.to_text()
        assert [render_clause(c, canonical=True) for c in r1.derived] == [
            render_clause(c, canonical=True) for c in r2.derived
        ]
