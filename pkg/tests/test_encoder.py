import pytest
from helpers import (
    ARRAYMAX_IMP,
    ARRAYMAX_SPEC,
    GCD_IMP,
    GCD_SPEC,
    GOLDEN,
    INCREASE_IMP,
    INCREASE_SPEC,
    C,
    assert_programs_equal,
)

from clpverify.clp import Atom, parse_clause, render_clause
from clpverify.encoder import (
    EncodingError,
    SpecParseError,
    Triple,
    encode_at_facts,
    encode_triple,
    interpreter_clauses,
    parse_spec,
)
from clpverify.imp import lower_structured, parse_program


def _flat(src):
    return lower_structured(parse_program(src))


class TestInterpreterClauses:
    def test_int_assignment_transition(self):
        cs = interpreter_clauses()
        asgn = [
            c
            for c in cs
            if c.head.pred == "tr" and "asgn(int(" in render_clause(c)
        ]
        assert len(asgn) == 1
        preds = [a.pred for a in asgn[0].body]
        assert preds == ["eval", "update", "nextlab", "at"]

    def test_branch_carries_nonzero_guard(self):
        from clpverify.terms import App

        cs = interpreter_clauses()

        def is_ite_clause(c):
            cf = c.head.args[0]
            cmd = cf.args[0]
            return isinstance(cmd.args[1], App) and cmd.args[1].functor == "ite"

        ite = [c for c in cs if c.head.pred == "tr" and is_ite_clause(c)]
        assert len(ite) == 2
        assert any(c.cstr.diseqs for c in ite)  # taken branch: value nonzero
        assert any(c.cstr.eqs for c in ite)  # else branch: value zero

    def test_no_transition_for_halt(self):
        cs = interpreter_clauses()
        assert not any("halt" in render_clause(c) for c in cs if c.head.pred == "tr")


class TestAtFacts:
    def test_increase_listing(self, ):
        facts = encode_at_facts(_flat(INCREASE_IMP))
        assert_programs_equal(
            (GOLDEN / "increase_at.clp").read_text(), facts, "at facts"
        )

    def test_specific_fact_shape(self):
        facts = encode_at_facts(_flat(INCREASE_IMP))
        assert render_clause(facts[4]) == "at(4,asgn(int(j),plus(int(i),int(1))))."
        assert render_clause(facts[7]) == "at(h,halt)."

    def test_single_halt_program(self):
        facts = encode_at_facts(_flat("h: halt;"))
        assert len(facts) == 1

    def test_round_trip(self):
        for fact in encode_at_facts(_flat(INCREASE_IMP)):
            again = parse_clause(render_clause(fact))
            assert again.head == fact.head


class TestSpecParsing:
    def test_sections_required(self):
        with pytest.raises(SpecParseError):
            parse_spec("init: x = 0;")

    def test_exists_and_atoms(self):
        spec = parse_spec(GCD_SPEC)
        assert spec.error.exists == ["d"]
        assert [a[0] for a in spec.error.atoms] == ["gcd"]
        assert len(spec.user_clauses) == 3

    def test_array_read_in_formula(self):
        spec = parse_spec(ARRAYMAX_SPEC)
        assert spec.init.comparisons and spec.error.exists == ["k"]

    def test_user_laws_section(self):
        text = INCREASE_SPEC + "\nlaws:\n  p(X), p(Y) <=> X = Y, p(X) | X =\\= Y, p(X), p(Y).\n"
        spec = parse_spec(text)
        assert len(spec.user_laws) == 1
        assert len(spec.user_laws[0].rhs) == 2


class TestEncodeTriple:
    def test_increase_property_clauses(self):
        prog, info = encode_triple(Triple(_flat(INCREASE_IMP), parse_spec(INCREASE_SPEC)))
        phi_i = prog.clauses_for("phiInit")
        phi_e = prog.clauses_for("phiError")
        assert len(phi_i) == 1 and len(phi_e) == 1
        assert phi_i[0].cstr.equivalent(C("I = 0, J = 0"))
        assert phi_e[0].cstr.equivalent(C("I < J"))
        assert info.init_args == ["I", "J"] and info.error_args == ["I", "J"]

    def test_arraymax_error_clause(self):
        prog, info = encode_triple(Triple(_flat(ARRAYMAX_IMP), parse_spec(ARRAYMAX_SPEC)))
        [phi_e] = prog.clauses_for("phiError")
        assert info.error_args == ["N", "A", "Max"]
        reads = [a for a in phi_e.body if a.pred == "read"]
        assert len(reads) == 1
        k, z = reads[0].args[1].name, reads[0].args[2].name
        want = C(f"{k} >= 0, N > {k}, {z} > Max")
        assert phi_e[1] if False else phi_e.cstr.equivalent(want)

    def test_gcd_error_uses_user_predicate(self):
        prog, info = encode_triple(Triple(_flat(GCD_IMP), parse_spec(GCD_SPEC)))
        [phi_e] = prog.clauses_for("phiError")
        gcds = [a for a in phi_e.body if a.pred == "gcd"]
        assert len(gcds) == 1
        assert prog.aux_recursive == frozenset({"gcd"})

    def test_partition_invariant(self):
        prog, _ = encode_triple(Triple(_flat(INCREASE_IMP), parse_spec(INCREASE_SPEC)))
        prog.validate()
        assert prog.high == frozenset({"incorrect", "initConf", "reach", "errorConf"})

    def test_env_list_order_follows_declarations(self):
        _, info = encode_triple(Triple(_flat(ARRAYMAX_IMP), parse_spec(ARRAYMAX_SPEC)))
        assert str(info.env_term()) == "[[int(i),I],[int(n),N],[array(a),(A,N)],[int(max),Max]]"

    def test_undeclared_variable_in_property(self):
        with pytest.raises(EncodingError):
            encode_triple(Triple(_flat(INCREASE_IMP), parse_spec("init: q = 0;\nerror: i < j;")))
