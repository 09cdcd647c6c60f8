"""Generalization operators used when introducing new predicate definitions.

Folding needs a definition whose body covers the clause at hand; when no
existing definition fits, a new one is built by anti-unifying the goal
atoms and generalizing the constraints.  Three constraint operators are
available:

* ``widen``      -- keep the ancestor's atomic constraints that every new
  body implies (equalities pre-split into their two halves);
* ``widensum``   -- additionally keep new atomic constraints whose
  coefficient weight does not exceed the heaviest ancestor atom;
* ``msg``        -- keep ancestor atoms that appear syntactically in every
  new body.

Every operator's output is filtered to be entailed by each body it will
fold, so the folding side condition holds by construction (and is still
re-checked at the fold site).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .clp import Atom, Clause, term_to_linexpr
from .solver import LAtom, LinConstraint, LinExpr
from .terms import App, IntConst, Subst, Term, Var, fresh_var


class GeneralizationCapError(Exception):
    pass


@dataclass
class DefinitionDb:
    """Definitions introduced so far plus the worklist bookkeeping."""

    defs: list[Clause] = field(default_factory=list)
    pending: deque = field(default_factory=deque)
    lineage: dict[str, Optional[str]] = field(default_factory=dict)
    skeleton_counts: dict[tuple, int] = field(default_factory=dict)
    cap: int = 50

    def seed(self, entries: Iterable[Clause]) -> None:
        for c in entries:
            self.defs.append(c)
            self.pending.append(c)
            self.lineage.setdefault(c.head.pred, None)

    def add(self, definition: Clause, parent_pred: str) -> None:
        key = _skeleton(definition.body)
        self.skeleton_counts[key] = self.skeleton_counts.get(key, 0) + 1
        if self.skeleton_counts[key] > self.cap:
            raise GeneralizationCapError(
                f"more than {self.cap} definitions share the goal skeleton {key}"
            )
        self.defs.append(definition)
        self.pending.append(definition)
        self.lineage[definition.head.pred] = parent_pred

    def def_clause(self, pred: Optional[str]) -> Optional[Clause]:
        for c in self.defs:
            if c.head.pred == pred:
                return c
        return None

    def ancestor_chain(self, start: Clause):
        cur: Optional[Clause] = start
        seen = set()
        while cur is not None and cur.head.pred not in seen:
            seen.add(cur.head.pred)
            yield cur
            cur = self.def_clause(self.lineage.get(cur.head.pred))


def _skeleton(atoms: Sequence[Atom]) -> tuple:
    return tuple(sorted((a.pred, len(a.args)) for a in atoms))


# ---------------------------------------------------------------------------
# Widening operators


def sumcoeff(a: LAtom) -> int:
    """Sum of absolute variable coefficients (the constant is not counted)."""
    return a.sumcoeff()


def widen(c1: LinConstraint, c2: LinConstraint) -> LinConstraint:
    """Atoms of c1 implied by c2, equalities split into their two halves."""
    return LinConstraint.from_atoms(a for a in c1.atoms() if c2.entails_atom(a))


def _eq_variants(c: LinConstraint) -> list[LAtom]:
    """Inequalities of c rewritten through its own equalities.

    The solved form fixes one way of writing each atom; a widening
    partner may imply a rewritten form instead (``K <= N-2`` under
    ``I = N-1`` is also ``K < I``), so both spellings are offered.
    """
    out: list[LAtom] = []
    for a in c.atoms(split_eqs=False):
        if a.kind == "eq":
            continue
        for v, rhs in c.eqs.items():
            for u, cu in rhs.coeffs:
                if abs(cu) != 1 or a.expr.coeff(u) == 0:
                    continue
                # v = cu*u + rest  =>  u = cu*(v - rest)
                rest = rhs.subst(u, LinExpr.num(0))
                u_expr = LinExpr.var(v).sub(rest).scale(cu)
                out.append(LAtom(a.kind, a.expr.subst(u, u_expr)))
    return out


def widen_sum(c: LinConstraint, d: LinConstraint) -> LinConstraint:
    """Atoms of c implied by d, plus weight-bounded atoms of d implied by c.

    Equalities stay whole here: keeping just one implied half would
    smuggle in a binding the other constraint never promised.
    """
    base = c.atoms(split_eqs=False)
    seen = {(a.kind, a.expr) for a in base}
    cands = base + [a for a in _eq_variants(c) if (a.kind, a.expr) not in seen]
    kept = [a for a in cands if d.entails_atom(a)]
    cap = max((sumcoeff(a) for a in base), default=0)
    for b in d.atoms(split_eqs=False):
        if sumcoeff(b) <= cap and c.entails_atom(b):
            kept.append(b)
    return LinConstraint.from_atoms(kept)


def _msg_atoms(c1: LinConstraint, c2: LinConstraint) -> LinConstraint:
    """Whole atoms of c1 that are conjuncts of c2 modulo c2's equalities."""
    return LinConstraint.from_atoms(
        a for a in c1.atoms(split_eqs=False) if c2.entails_atom(a)
    )


def generalize_constraint(
    operator: str,
    ancestor: Optional[LinConstraint],
    bodies: list[LinConstraint],
) -> LinConstraint:
    """Constraint for a new definition folding every one of `bodies`.

    `ancestor` is the constraint of the definition whose processing
    produced the bodies (None when there is no comparable ancestor).  The
    result is always entailed by every body, so each can be folded.
    """
    if not bodies:
        raise ValueError("no bodies to generalize")
    if ancestor is None:
        out = bodies[0]
    elif operator == "widen":
        out = widen(ancestor, bodies[0])
    elif operator == "widensum":
        out = widen_sum(bodies[0], ancestor)
    elif operator == "msg":
        out = _msg_atoms(ancestor, bodies[0])
    else:
        raise ValueError(f"unknown generalization operator {operator!r}")
    keep = [a for a in out.atoms() if all(b.entails_atom(a) for b in bodies)]
    return LinConstraint.from_atoms(keep).minimized()


# ---------------------------------------------------------------------------
# Anti-unification of goal tuples


def anti_unify_blocks(
    blocks: list[tuple[Atom, ...]]
) -> Optional[tuple[tuple[Atom, ...], list[Subst]]]:
    """Most specific common shape of the aligned atom tuples.

    All blocks must list the same predicates in the same order.  Returns
    the generalized atoms over fresh variables plus, per input block, the
    substitution sending those variables back to the block's terms.
    """
    if not blocks:
        return None
    width = len(blocks[0])
    for b in blocks:
        if len(b) != width:
            return None
        for a, ref in zip(b, blocks[0]):
            if a.pred != ref.pred or len(a.args) != len(ref.args):
                return None
    memo: dict[tuple[Term, ...], Var] = {}

    def au(ts: tuple[Term, ...]) -> Term:
        first = ts[0]
        if all(t == first for t in ts) and not isinstance(first, Var):
            if isinstance(first, App) and first.args:
                return App(first.functor, tuple(au(args) for args in zip(*(t.args for t in ts))))
            return first
        if all(isinstance(t, App) and t.functor == first.functor and len(t.args) == len(first.args) for t in ts) and isinstance(first, App) and first.args:
            return App(first.functor, tuple(au(args) for args in zip(*(t.args for t in ts))))
        if ts not in memo:
            memo[ts] = fresh_var("G")
        return memo[ts]

    gen_atoms = []
    for i in range(width):
        args = tuple(au(pos) for pos in zip(*(b[i].args for b in blocks)))
        gen_atoms.append(Atom(blocks[0][i].pred, args))
    bindings: list[Subst] = []
    for k in range(len(blocks)):
        bindings.append({v.name: ts[k] for ts, v in memo.items()})
    return tuple(gen_atoms), bindings


def body_in_def_space(
    cstr: LinConstraint,
    binding: Subst,
    def_vars: Iterable[str],
    as_reference: bool = False,
) -> LinConstraint:
    """Project a clause constraint into the definition's variable space.

    `binding` maps definition variables to the clause's terms; numeric
    bindings become equations, structural ones are ignored (no linear
    atom can mention them).

    With ``as_reference`` the translation is a pure renaming: repeated or
    non-variable argument positions contribute nothing.  That view is used
    for the ancestor side of a widening, where only its written atomic
    constraints matter; argument-sharing equations would otherwise smuggle
    in atoms the new bodies can never imply.
    """
    work = cstr.copy()
    dv = set(def_vars)
    if as_reference:
        used: set[str] = set()
        for v, t in binding.items():
            if isinstance(t, Var) and t.name not in used:
                used.add(t.name)
                work.define_as(t.name, LinExpr.var(v))
    else:
        for v, t in binding.items():
            e = term_to_linexpr(t)
            if e is None:
                continue
            if (
                len(e.coeffs) == 1
                and e.coeffs[0][1] == 1
                and e.const == 0
                and e.coeffs[0][0] not in dv
                and e.coeffs[0][0] not in work.eqs
            ):
                # a fresh clause variable: translate its atoms to def space
                work.define_as(e.coeffs[0][0], LinExpr.var(v))
            else:
                # the value is already expressible: define the new def var,
                # keeping existing atoms over their current owner
                work.define_as(v, e)
    return work.project(dv)


def generalize_goal(
    bodies: list[tuple[LinConstraint, tuple[Atom, ...]]],
    operator: str = "msg",
) -> tuple[LinConstraint, tuple[Atom, ...]]:
    """Common generalization of whole bodies (first body acts as reference)."""
    if len(bodies) < 2:
        raise ValueError("generalize_goal needs at least two bodies")
    blocks = [atoms for _, atoms in bodies]
    res = anti_unify_blocks(blocks)
    if res is None:
        raise ValueError("bodies do not share an atom skeleton")
    gen_atoms, bindings = res
    def_vars = set()
    for a in gen_atoms:
        def_vars.update(a.vars())
    spaces = [
        body_in_def_space(cstr, bind, def_vars, as_reference=(k == 0))
        for k, ((cstr, _), bind) in enumerate(zip(bodies, bindings))
    ]
    gen_cstr = generalize_constraint(operator, spaces[0], spaces[1:])
    return gen_cstr, gen_atoms
