import random

import pytest
from helpers import C, parse_clauses

from clpverify.clp import (
    Atom,
    Clause,
    bounded_eval,
    depends_on,
    parse_clause,
    parse_program,
    remove_useless,
    render_clause,
    useless_predicates,
)
from clpverify.solver import LinConstraint
from clpverify.terms import App, IntConst, Var, apply_subst, match, sym, unify


def T(text):
    """Parse a single term via the clause parser."""
    return parse_clause(f"holder({text}).").head.args[0]


class TestUnify:
    def test_textbook(self):
        s = unify(T("f(X,a)"), T("f(b,Y)"))
        assert s == {"X": sym("b"), "Y": sym("a")}

    def test_occurs_check(self):
        assert unify(Var("X"), T("f(X)")) is None

    def test_shared_variable(self):
        s = unify(T("g(X,X)"), T("g(a,Y)"))
        assert s is not None
        assert apply_subst(T("g(X,X)"), s) == apply_subst(T("g(a,Y)"), s)

    def test_functor_clash(self):
        assert unify(T("f(a)"), T("g(a)")) is None
        assert unify(IntConst(1), IntConst(2)) is None

    def test_lists_and_pairs(self):
        s = unify(T("[A|B]"), T("[1,2,3]"))
        assert s is not None and s["A"] == IntConst(1)
        s2 = unify(T("(A,N)"), T("(xs,3)"))
        assert s2 == {"A": sym("xs"), "N": IntConst(3)}

    def test_mgu_most_general(self):
        # every instance of a unifiable pair factors through the mgu
        rng = random.Random(5)
        for _ in range(200):
            t = _random_term(rng, 3)
            ground = apply_subst(t, {v: IntConst(rng.randint(0, 9)) for v in _vars(t)})
            s = unify(t, ground)
            assert s is not None
            assert apply_subst(t, s) == ground
            rho = match(apply_subst(t, s), ground)
            assert rho is not None


def _random_term(rng, depth):
    if depth == 0 or rng.random() < 0.4:
        return rng.choice([Var(rng.choice("XYZ")), IntConst(rng.randint(0, 3)), sym("a")])
    return App(rng.choice("fg"), tuple(_random_term(rng, depth - 1) for _ in range(rng.randint(1, 2))))


def _vars(t):
    from clpverify.terms import term_vars

    return term_vars(t)


class TestDependencies:
    def test_transitive(self):
        p = parse_program("p :- q.\nq :- r.\n")
        deps = depends_on(p)
        assert deps["p"] == {"q", "r"}

    def test_empty(self):
        assert depends_on(parse_program("")) == {}

    def test_partition_validation(self):
        p = parse_program("p :- q.\nq.\n", high=["q"], low=["p"])
        with pytest.raises(ValueError):
            p.validate()


class TestUseless:
    def test_self_loop(self):
        assert useless_predicates(parse_program("p :- p.\n")) == {"p"}

    def test_grounded(self):
        assert useless_predicates(parse_program("p :- q.\nq.\n")) == set()

    def test_final_stage_all_useless(self):
        text = """
incorrect :- I >= 2*N, I < J, new2(I,J,N).
new2(I1,J,N) :- I1 = I+2, I < 2*N, I < N, I+2 >= 2*N, I+2 < J, new3(I,J,N).
new3(I1,J,N) :- I1 = I+2, I < 2*N, I < N, I+2 < J, new3(I,J,N).
"""
        p = parse_program(text)
        assert useless_predicates(p) == {"incorrect", "new2", "new3"}
        assert remove_useless(p).clauses == []

    def test_removal_preserves_grounded(self):
        p = parse_program("p :- q.\nq.\nr :- r.\n")
        out = remove_useless(p)
        assert [c.head.pred for c in out.clauses] == ["p", "q"]


class TestBoundedEval:
    def test_plain_fact(self):
        p = parse_program("p.\n")
        r = bounded_eval(p, Atom("p"), 5)
        assert r.derivable and r.exhausted

    def test_depth_cut_on_loop(self):
        p = parse_program("p :- p.\n")
        r = bounded_eval(p, Atom("p"), 30)
        assert not r.derivable and not r.exhausted

    def test_constraint_witness(self):
        p = parse_program("q(X) :- X >= 3, X =< 9.\n")
        r = bounded_eval(p, Atom("q", (Var("W"),)), 4)
        assert r.derivable and 3 <= r.witness["W"] <= 9

    def test_integer_filter(self):
        p = parse_program("q(X) :- 2*X = 1.\n")
        r = bounded_eval(p, Atom("q", (Var("W"),)), 4)
        assert not r.derivable

    def test_remove_useless_preserves_answers(self):
        text = "p :- q.\nq.\nr :- r, p.\n"
        p = parse_program(text)
        cleaned = remove_useless(p)
        for depth in (1, 3, 8, 20):
            a = bounded_eval(p, Atom("p"), depth).derivable
            b = bounded_eval(cleaned, Atom("p"), depth).derivable
            assert a == b

    def test_gcd_recursion(self):
        text = """
gcd(X,Y,D) :- X > Y, X1 = X-Y, gcd(X1,Y,D).
gcd(X,Y,D) :- X < Y, Y1 = Y-X, gcd(X,Y1,D).
gcd(X,Y,D) :- X = Y, Y = D.
"""
        p = parse_program(text)
        r = bounded_eval(p, Atom("gcd", (IntConst(12), IntConst(8), Var("D"))), 20)
        assert r.derivable and r.witness["D"] == 4


class TestDumpFormat:
    ROUND_TRIP = [
        "incorrect :- I = 0, J = 0, new1(I,J,N).",
        "new1(I,J,N) :- I < 2*N, I < N, I1 = I+2, new1(I1,J,N).",
        "at(4,asgn(int(j),plus(int(i),int(1)))).",
        "at(0,ite(less(int(i),mult(int(2),int(n))),1,h)).",
        "b([new1,I,N,A,Max]) :- I >= N, K >= 0, K < N, Z > Max, read((A,N),K,Z).",
        "update([[Id,B0]|T],Id,B,[[Id,B]|T]).",
        "p :- X =\\= Y+2, q(f(X,[1,2|T]),(A,N)).",
    ]

    @pytest.mark.parametrize("line", ROUND_TRIP)
    def test_round_trip(self, line):
        c1 = parse_clause(line)
        c2 = parse_clause(render_clause(c1))
        assert c1.head == c2.head
        assert list(c1.body) == list(c2.body)
        assert c1.cstr.equivalent(c2.cstr)

    def test_canonical_rendering_is_stable(self):
        c = parse_clause("p(Foo,Bar) :- Foo < Bar, q(Bar,Baz).")
        r1 = render_clause(c, canonical=True)
        r2 = render_clause(parse_clause(r1), canonical=True)
        assert r1 == r2

    def test_fact_rendering(self):
        assert render_clause(parse_clause("p.")) == "p."
