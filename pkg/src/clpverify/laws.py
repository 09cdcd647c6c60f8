"""Goal-replacement laws and the policy that applies them.

A law is an equivalence between a constrained conjunction of low-predicate
atoms and a disjunction of constrained conjunctions; applying it to a
clause body replaces the matched atoms by each disjunct in turn, splitting
the clause.  Shipped laws:

* array functionality: two reads of the same array either hit the same
  cell (values equal) or different cells;
* read-over-write at the same / at a distinct index (standard array
  axioms);
* access bounds: a read or write atom over an (array, dim) pair implies
  0 <= index < dim.

The application policy keeps things terminating: the functionality split
fires only while the relation between the two indices is undecided, and
bound atoms are added only when not already entailed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .clp import Atom, Clause, ClauseParseError, parse_clause, term_to_linexpr
from .solver import LinConstraint, LinExpr
from .terms import App, IntConst, Subst, Term, Var, apply_subst, fresh_var, match, term_to_str


@dataclass(frozen=True)
class Law:
    name: str
    lhs_cstr: LinConstraint
    lhs_atoms: tuple[Atom, ...]
    rhs: tuple[tuple[LinConstraint, tuple[Atom, ...]], ...]
    note: str = ""


def _parse_side(text: str) -> tuple[LinConstraint, tuple[Atom, ...]]:
    c = parse_clause("law_side :- " + text + ".")
    return c.cstr, c.body


def parse_law(text: str, name: str = "") -> Law:
    if "<=>" not in text:
        raise ClauseParseError(f"law needs '<=>': {text!r}")
    lhs_text, rhs_text = text.split("<=>", 1)
    lhs_cstr, lhs_atoms = _parse_side(lhs_text.strip())
    if not lhs_atoms:
        raise ClauseParseError("law left-hand side needs at least one atom")
    disjuncts = []
    for part in _split_bars(rhs_text):
        disjuncts.append(_parse_side(part.strip()))
    return _rename_law_vars(
        Law(name or "user-law", lhs_cstr, lhs_atoms, tuple(disjuncts), note="trusted-by-user")
    )


def _rename_law_vars(law: Law) -> Law:
    """Move pattern variables into a reserved namespace.

    Law patterns match against arbitrary clauses; sharing a variable name
    with the clause would confuse one-way matching.
    """
    names: set[str] = set(law.lhs_cstr.vars())
    for a in law.lhs_atoms:
        names.update(a.vars())
    for c, atoms in law.rhs:
        names.update(c.vars())
        for a in atoms:
            names.update(a.vars())
    ren = {v: f"LV{v}" for v in names}
    sub: Subst = {v: Var(w) for v, w in ren.items()}
    return Law(
        law.name,
        law.lhs_cstr.rename(ren),
        tuple(a.apply(sub) for a in law.lhs_atoms),
        tuple(
            (c.rename(ren), tuple(a.apply(sub) for a in atoms)) for c, atoms in law.rhs
        ),
        law.note,
    )


def _split_bars(text: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "|" and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return out


def _law(name: str, lhs: str, rhs: str, note: str) -> Law:
    law = parse_law(lhs + " <=> " + rhs, name)
    return Law(law.name, law.lhs_cstr, law.lhs_atoms, law.rhs, note)


ARRAY_FUNCTIONALITY = _law(
    "array-functionality",
    "read(FA,K,Z), read(FA,I,M)",
    "K = I, Z = M, read(FA,K,Z) | K =\\= I, read(FA,K,Z), read(FA,I,M)",
    note="an array is a finite function",
)

READ_OVER_WRITE_SAME = _law(
    "read-over-write-same",
    "write(FA,I,V,FA1), read(FA1,I,Z)",
    "Z = V, write(FA,I,V,FA1)",
    note="standard array axiom",
)

READ_OVER_WRITE_DIFF = _law(
    "read-over-write-diff",
    "K =\\= I, write(FA,I,V,FA1), read(FA1,K,Z)",
    "K =\\= I, write(FA,I,V,FA1), read(FA,K,Z)",
    note="standard array axiom",
)

READ_OVER_WRITE_SPLIT = _law(
    "read-over-write-split",
    "write(FA,I,V,FA1), read(FA1,K,Z)",
    "K = I, Z = V, write(FA,I,V,FA1) | K =\\= I, write(FA,I,V,FA1), read(FA,K,Z)",
    note="combined read-over-write case split",
)

READ_BOUNDS = _law(
    "read-bounds",
    "read((A,N),I,Z)",
    "I >= 0, N >= I+1, read((A,N),I,Z)",
    note="array access is within bounds",
)

WRITE_BOUNDS = _law(
    "write-bounds",
    "write((A,N),I,V,FA1)",
    "I >= 0, N >= I+1, write((A,N),I,V,FA1)",
    note="array access is within bounds",
)

BUILTIN_LAWS = (
    ARRAY_FUNCTIONALITY,
    READ_OVER_WRITE_SAME,
    READ_OVER_WRITE_DIFF,
    READ_BOUNDS,
    WRITE_BOUNDS,
)


# ---------------------------------------------------------------------------
# Matching and application


def match_law(clause: Clause, law: Law) -> list[tuple[tuple[int, ...], Subst]]:
    """All occurrences of the law's lhs in the clause body.

    An occurrence assigns lhs atoms to distinct body atoms (any positions)
    such that one-way matching succeeds and the lhs constraint is entailed.
    Occurrences over the same atom set are reported once.
    """
    out: list[tuple[tuple[int, ...], Subst]] = []
    seen: set[frozenset[int]] = set()
    candidates: list[list[int]] = []
    for pat in law.lhs_atoms:
        idxs = [
            i
            for i, a in enumerate(clause.body)
            if a.pred == pat.pred and len(a.args) == len(pat.args)
        ]
        candidates.append(idxs)

    def extend(k: int, used: list[int], s: Subst) -> None:
        if k == len(law.lhs_atoms):
            key = frozenset(used)
            if key in seen:
                return
            if not _lhs_condition(clause, law, s):
                return
            seen.add(key)
            out.append((tuple(used), dict(s)))
            return
        pat = law.lhs_atoms[k]
        for i in candidates[k]:
            if i in used:
                continue
            s2 = match(App("$a", pat.args), App("$a", clause.body[i].args), s)
            if s2 is not None:
                extend(k + 1, used + [i], s2)

    extend(0, [], {})
    return out


def _lhs_condition(clause: Clause, law: Law, s: Subst) -> bool:
    if law.lhs_cstr.is_true():
        return True
    inst = _instantiate_cstr(law.lhs_cstr, s)
    if inst is None:
        return False
    return clause.cstr.entails(inst)


def _instantiate_cstr(cstr: LinConstraint, s: Subst) -> Optional[LinConstraint]:
    binding = {}
    for v in cstr.vars():
        if v in s:
            e = term_to_linexpr(apply_subst(Var(v), s))
            if e is None:
                return None
            binding[v] = e
    out = cstr.instantiate(binding)
    return out


def apply_law(
    clause: Clause, law: Law, occ: tuple[tuple[int, ...], Subst], next_id: Callable[[], int]
) -> list[Clause]:
    """One clause per satisfiable rhs disjunct."""
    idxs, s = occ
    first = min(idxs)
    out = []
    rhs_vars: set[str] = set()
    for cstr_d, atoms_d in law.rhs:
        rhs_vars.update(cstr_d.vars())
        for a in atoms_d:
            rhs_vars.update(a.vars())
    s = dict(s)
    for v in sorted(rhs_vars):
        s.setdefault(v, fresh_var("W"))
    for cstr_d, atoms_d in law.rhs:
        inst_cstr = _instantiate_cstr(cstr_d, s)
        if inst_cstr is None:
            continue
        new_cstr = clause.cstr.conj(inst_cstr)
        if not new_cstr.is_sat_rational():
            continue
        new_atoms = tuple(a.apply(s) for a in atoms_d)
        body = []
        for i, a in enumerate(clause.body):
            if i == first:
                body.extend(new_atoms)
            if i not in idxs:
                body.append(a)
        out.append(
            Clause(
                clause.head,
                new_cstr,
                tuple(body),
                next_id(),
                provenance=f"goal-repl {law.name} on {clause.id}",
            )
        )
    return out


# ---------------------------------------------------------------------------
# Application policy


def _index_term_expr(t: Term) -> Optional[LinExpr]:
    return term_to_linexpr(t)


def _decide(cstr: LinConstraint, t1: Term, t2: Term) -> str:
    """Relation between two index terms: 'eq' | 'neq' | 'open' | 'unrelated'."""
    if t1 == t2:
        return "eq"
    e1, e2 = _index_term_expr(t1), _index_term_expr(t2)
    if e1 is None or e2 is None:
        return "unrelated"
    d = LinConstraint()
    d.add_eq(e1.sub(e2))
    if cstr.entails(d):
        return "eq"
    d = LinConstraint()
    d.add_diseq(e1.sub(e2))
    if cstr.entails(d):
        return "neq"
    joint1, joint2 = set(e1.vars()), set(e2.vars())
    if not joint1 or not joint2:
        return "unrelated"
    try:
        proj = cstr.project(joint1 | joint2)
    except Exception:
        return "unrelated"
    for a in proj.atoms():
        vs = set(a.expr.vars())
        if vs & joint1 and vs & joint2:
            return "open"
    return "unrelated"


def goal_replace_clause(
    clause: Clause,
    laws: Iterable[Law],
    next_id: Callable[[], int],
    budget: int = 100,
) -> tuple[list[Clause], list[str]]:
    """Apply the law policy to one clause until a fixpoint.

    Returns the resulting clauses (the input unchanged if nothing applied)
    and the names of the laws used.
    """
    laws = list(laws)
    applied: list[str] = []
    done: list[Clause] = []
    work: list[tuple[Clause, set]] = [(clause, set())]
    steps = 0
    while work:
        cur, memo = work.pop(0)
        steps += 1
        if steps > budget:
            raise RuntimeError("goal replacement budget exceeded")
        step = _one_step(cur, laws, memo, next_id)
        if step is None:
            done.append(cur)
            continue
        name, results, key = step
        applied.append(name)
        for r in results:
            work.append((r, memo | {key}))
    return done, applied


def _one_step(clause: Clause, laws, memo: set, next_id) -> Optional[tuple[str, list[Clause], tuple]]:
    by_name = {l.name: l for l in laws}

    # bound atoms for array accesses
    for name in ("read-bounds", "write-bounds"):
        law = by_name.get(name)
        if law is None:
            continue
        for occ in match_law(clause, law):
            key = (name, _occ_key(clause, occ))
            if key in memo:
                continue
            inst = _instantiate_cstr(law.rhs[0][0], occ[1])
            if inst is None or clause.cstr.entails(inst):
                continue  # nothing to add
            return name, apply_law(clause, law, occ, next_id), key

    # functionality of reads over the same array
    law = by_name.get("array-functionality")
    if law is not None:
        for occ in match_law(clause, law):
            idxs, s = occ
            key = ("array-functionality", _occ_key(clause, occ))
            if key in memo:
                continue
            t1 = apply_subst(Var("LVK"), s)
            t2 = apply_subst(Var("LVI"), s)
            rel = _decide(clause.cstr, t1, t2)
            if rel in ("eq", "open"):
                return law.name, apply_law(clause, law, occ, next_id), key
    # read-over-write chains
    if "read-over-write-same" in by_name:
        for occ in match_law(clause, READ_OVER_WRITE_SPLIT):
            idxs, s = occ
            key = ("read-over-write", _occ_key(clause, occ))
            if key in memo:
                continue
            t_r = apply_subst(Var("LVK"), s)
            t_w = apply_subst(Var("LVI"), s)
            rel = _decide(clause.cstr, t_r, t_w)
            if rel == "eq" and t_r == t_w:
                same_occ = match_law(clause, by_name["read-over-write-same"])
                for so in same_occ:
                    if set(so[0]) == set(idxs):
                        return (
                            "read-over-write-same",
                            apply_law(clause, by_name["read-over-write-same"], so, next_id),
                            key,
                        )
            if rel == "neq":
                law2 = by_name.get("read-over-write-diff", READ_OVER_WRITE_DIFF)
                for so in match_law(clause, law2):
                    if set(so[0]) == set(idxs):
                        return ("read-over-write-diff", apply_law(clause, law2, so, next_id), key)
            if rel in ("eq", "open"):
                return (
                    "read-over-write-split",
                    apply_law(clause, READ_OVER_WRITE_SPLIT, occ, next_id),
                    key,
                )

    # user laws: each content-distinct occurrence once
    for law in laws:
        if law.name in (
            "array-functionality",
            "read-over-write-same",
            "read-over-write-diff",
            "read-bounds",
            "write-bounds",
        ):
            continue
        for occ in match_law(clause, law):
            key = (law.name, _occ_key(clause, occ))
            if key in memo:
                continue
            return law.name, apply_law(clause, law, occ, next_id), key
    return None


def _occ_key(clause: Clause, occ: tuple[tuple[int, ...], Subst]) -> tuple:
    idxs, _ = occ
    return tuple(sorted(str(clause.body[i]) for i in idxs))
