"""Reversal of linear-recursive reachability programs.

A program whose recursive component is linear (entry calls one family
atom, every family clause calls at most one) is rewritten into start /
step / stop components over tagged tuples ``[pred, args...]``; reversing
the step direction then lets the stop-side property drive the next
propagation round.  Derivability of ``incorrect`` is preserved in both
directions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .clp import Atom, Clause, ClpProgram
from .solver import LinConstraint
from .terms import App, Term, Var, fresh_var, mk_list, sym


@dataclass
class LinearProgramView:
    entry: Clause  # incorrect :- c, lows, q(args)
    steps: list[Clause]  # q(x) :- c, lows, q'(x')
    exits: list[Clause]  # q(x) :- c, lows
    family: list[str]
    arity: int

    def tuple_term(self, pred: str, args: tuple[Term, ...]) -> Term:
        items: list[Term] = [sym(pred)]
        items.extend(args)
        for _ in range(self.arity - len(args)):
            items.append(fresh_var("Pad"))
        return mk_list(items)


def to_linear_view(p: ClpProgram) -> Optional[LinearProgramView]:
    entries = p.clauses_for("incorrect")
    if len(entries) != 1:
        return None
    entry = entries[0]
    entry_high = [a for a in entry.body if a.pred in p.high and a.pred != "incorrect"]
    if len(entry_high) != 1:
        return None
    family: list[str] = []
    todo = [entry_high[0].pred]
    steps: list[Clause] = []
    exits: list[Clause] = []
    while todo:
        q = todo.pop(0)
        if q in family:
            continue
        family.append(q)
        for c in p.clauses_for(q):
            high_atoms = [a for a in c.body if a.pred in p.high]
            if len(high_atoms) > 1:
                return None
            if high_atoms:
                if high_atoms[0].pred not in family:
                    todo.append(high_atoms[0].pred)
                steps.append(c)
            else:
                exits.append(c)
    if not family:
        return None
    arity = 0
    for c in steps + exits:
        arity = max(arity, len(c.head.args))
        for a in c.body:
            if a.pred in family:
                arity = max(arity, len(a.args))
    arity = max(arity, len(entry_high[0].args))
    return LinearProgramView(entry, steps, exits, family, arity)


def _pick_names(p: ClpProgram) -> dict[str, str]:
    taken = p.preds()
    out = {}
    for base in ("a", "b", "trans", "r2"):
        name = base
        while name in taken:
            name += "_r"
        out[base] = name
    return out


def reverse(view: LinearProgramView, p: ClpProgram) -> ClpProgram:
    """The reversed program: the stop condition becomes the start."""
    names = _pick_names(p)
    a_p, b_p, trans_p, r2_p = names["a"], names["b"], names["trans"], names["r2"]
    clauses: list[Clause] = []
    nid = [max((c.id for c in p.clauses), default=0)]

    def new_id() -> int:
        nid[0] += 1
        return nid[0]

    u, v = Var("U"), Var("V")
    clauses.append(
        Clause(
            Atom("incorrect"),
            LinConstraint(),
            (Atom(b_p, (u,)), Atom(r2_p, (u,))),
            new_id(),
            "reversal",
        )
    )
    clauses.append(
        Clause(
            Atom(r2_p, (v,)),
            LinConstraint(),
            (Atom(trans_p, (u, v)), Atom(r2_p, (u,))),
            new_id(),
            "reversal",
        )
    )
    clauses.append(
        Clause(Atom(r2_p, (u,)), LinConstraint(), (Atom(a_p, (u,)),), new_id(), "reversal")
    )

    entry = view.entry
    fam_atom = next(a for a in entry.body if a.pred in view.family)
    lows = tuple(a for a in entry.body if a is not fam_atom)
    clauses.append(
        Clause(
            Atom(a_p, (view.tuple_term(fam_atom.pred, fam_atom.args),)),
            entry.cstr.copy(),
            lows,
            new_id(),
            f"reversal of {entry.id}",
        )
    )
    for c in view.steps:
        call = next(a for a in c.body if a.pred in view.family)
        lows = tuple(a for a in c.body if a is not call)
        clauses.append(
            Clause(
                Atom(
                    trans_p,
                    (
                        view.tuple_term(c.head.pred, c.head.args),
                        view.tuple_term(call.pred, call.args),
                    ),
                ),
                c.cstr.copy(),
                lows,
                new_id(),
                f"reversal of {c.id}",
            )
        )
    for c in view.exits:
        clauses.append(
            Clause(
                Atom(b_p, (view.tuple_term(c.head.pred, c.head.args),)),
                c.cstr.copy(),
                tuple(c.body),
                new_id(),
                f"reversal of {c.id}",
            )
        )

    # carry the defining clauses of low predicates that still occur
    heads = {c.head.pred for c in clauses}
    needed: set[str] = set()
    frontier = {a.pred for c in clauses for a in c.body if a.pred not in heads}
    while frontier:
        q = frontier.pop()
        if q in needed:
            continue
        needed.add(q)
        for c in p.clauses_for(q):
            frontier.update(
                a.pred for a in c.body if a.pred not in heads and a.pred not in needed
            )
    clauses.extend(c for c in p.clauses if c.head.pred in needed)

    preds = set()
    for c in clauses:
        preds.add(c.head.pred)
        preds.update(a.pred for a in c.body)
    high = frozenset({"incorrect", a_p, b_p, trans_p, r2_p})
    out = ClpProgram(
        clauses,
        high=high,
        low=frozenset(preds - high),
        resolvers={q: r for q, r in p.resolvers.items() if q in preds},
        aux_recursive=p.aux_recursive,
    )
    out.validate()
    return out
