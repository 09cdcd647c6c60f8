"""First-order terms, substitutions, and syntactic unification.

Terms are immutable: a variable, an integer constant, or a functor applied
to a tuple of terms.  Plain symbols (program identifiers, predicate tags)
are zero-argument applications.  Lists use the usual cons cells and pairs
get a dedicated functor so they print as ``(A,N)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Union

NIL = "[]"
CONS = "."
PAIR = ","


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class IntConst:
    value: int

    def __repr__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class App:
    functor: str
    args: tuple["Term", ...] = ()

    def __repr__(self) -> str:
        return term_to_str(self)


Term = Union[Var, IntConst, App]

Subst = dict  # str (var name) -> Term

_fresh_counter = itertools.count(1)


def fresh_var(prefix: str = "V") -> Var:
    return Var(f"{prefix}_{next(_fresh_counter)}")


def sym(name: str) -> App:
    """A plain symbol (zero-argument functor)."""
    return App(name, ())


def mk_list(items: Iterable[Term]) -> Term:
    out: Term = App(NIL, ())
    for item in reversed(list(items)):
        out = App(CONS, (item, out))
    return out


def list_items(t: Term) -> Optional[list[Term]]:
    """Return the elements of a proper list term, or None."""
    items = []
    while isinstance(t, App) and t.functor == CONS and len(t.args) == 2:
        items.append(t.args[0])
        t = t.args[1]
    if isinstance(t, App) and t.functor == NIL:
        return items
    return None


def mk_pair(a: Term, b: Term) -> App:
    return App(PAIR, (a, b))


def term_vars(t: Term) -> list[str]:
    """Variable names in first-occurrence order."""
    out: list[str] = []
    seen: set[str] = set()
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            if cur.name not in seen:
                seen.add(cur.name)
                out.append(cur.name)
        elif isinstance(cur, App):
            stack.extend(reversed(cur.args))
    return out


def terms_vars(ts: Iterable[Term]) -> list[str]:
    out: list[str] = []
    seen: set[str] = set()
    for t in ts:
        for v in term_vars(t):
            if v not in seen:
                seen.add(v)
                out.append(v)
    return out


def apply_subst(t: Term, s: Subst) -> Term:
    """One-pass application; substitutions are kept resolved by unify."""
    if not s:
        return t
    if isinstance(t, Var):
        bound = s.get(t.name)
        return t if bound is None else bound
    if isinstance(t, App) and t.args:
        return App(t.functor, tuple(apply_subst(a, s) for a in t.args))
    return t


def compose(s1: Subst, s2: Subst) -> Subst:
    """Substitution applying s1 then s2."""
    out = {v: apply_subst(t, s2) for v, t in s1.items()}
    for v, t in s2.items():
        out.setdefault(v, t)
    return out


def _occurs(name: str, t: Term, s: Subst) -> bool:
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, Var):
            if cur.name == name:
                return True
            if cur.name in s:
                stack.append(s[cur.name])
        elif isinstance(cur, App):
            stack.extend(cur.args)
    return False


def _walk(t: Term, s: Subst) -> Term:
    while isinstance(t, Var) and t.name in s:
        t = s[t.name]
    return t


def unify(t1: Term, t2: Term, s: Optional[Subst] = None) -> Optional[Subst]:
    """Most general unifier with occurs-check, or None."""
    s = dict(s) if s else {}
    stack = [(t1, t2)]
    while stack:
        a, b = stack.pop()
        a = _walk(a, s)
        b = _walk(b, s)
        if a is b:
            continue
        if isinstance(a, Var):
            if isinstance(b, Var) and a.name == b.name:
                continue
            if _occurs(a.name, b, s):
                return None
            s[a.name] = b
        elif isinstance(b, Var):
            if _occurs(b.name, a, s):
                return None
            s[b.name] = a
        elif isinstance(a, IntConst) and isinstance(b, IntConst):
            if a.value != b.value:
                return None
        elif isinstance(a, App) and isinstance(b, App):
            if a.functor != b.functor or len(a.args) != len(b.args):
                return None
            stack.extend(zip(a.args, b.args))
        else:
            return None
    return _flatten(s)


def _flatten(s: Subst) -> Subst:
    def resolve(t: Term) -> Term:
        t = _walk(t, s)
        if isinstance(t, App) and t.args:
            return App(t.functor, tuple(resolve(a) for a in t.args))
        return t

    return {v: resolve(t) for v, t in s.items() if not (isinstance(t, Var) and t.name == v)}


def match(pattern: Term, t: Term, s: Optional[Subst] = None) -> Optional[Subst]:
    """One-way matching: bind pattern variables only."""
    s = dict(s) if s else {}
    stack = [(pattern, t)]
    while stack:
        p, u = stack.pop()
        if isinstance(p, Var):
            bound = s.get(p.name)
            if bound is None:
                s[p.name] = u
            elif bound != u:
                return None
        elif isinstance(p, IntConst):
            if not (isinstance(u, IntConst) and u.value == p.value):
                return None
        else:
            if not (isinstance(u, App) and u.functor == p.functor and len(u.args) == len(p.args)):
                return None
            stack.extend(zip(p.args, u.args))
    return s


def rename_term(t: Term, mapping: Subst) -> Term:
    """Rename variables via `mapping`, inventing fresh ones for unseen vars."""
    if isinstance(t, Var):
        if t.name not in mapping:
            mapping[t.name] = fresh_var()
        return mapping[t.name]
    if isinstance(t, App) and t.args:
        return App(t.functor, tuple(rename_term(a, mapping) for a in t.args))
    return t


def term_to_str(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, IntConst):
        return str(t.value)
    if t.functor == NIL and not t.args:
        return "[]"
    if t.functor == CONS and len(t.args) == 2:
        items = list_items(t)
        if items is not None:
            return "[" + ",".join(term_to_str(x) for x in items) + "]"
        return f"[{term_to_str(t.args[0])}|{term_to_str(t.args[1])}]"
    if t.functor == PAIR and len(t.args) == 2:
        return f"({term_to_str(t.args[0])},{term_to_str(t.args[1])})"
    if not t.args:
        return t.functor
    return t.functor + "(" + ",".join(term_to_str(a) for a in t.args) + ")"


def iter_subterms(t: Term) -> Iterator[Term]:
    stack = [t]
    while stack:
        cur = stack.pop()
        yield cur
        if isinstance(cur, App):
            stack.extend(cur.args)
