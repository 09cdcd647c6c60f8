"""Constrained Horn clauses.

A clause is ``head :- constraint, body-atoms``.  Programs carry the
high/low predicate partition (no low predicate may depend on a high one)
plus optional builtin resolvers for predicates whose meaning is computed
rather than listed as clauses (constant evaluation, products).

The module also provides the textual dump format (one clause per line,
parseable back), predicate dependency analysis, useless-clause removal,
and a depth-bounded top-down evaluator used as a semantic oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Sequence

from .solver import LAtom, LinConstraint, LinExpr, render_expr
from .terms import (
    App,
    IntConst,
    Subst,
    Term,
    Var,
    apply_subst,
    fresh_var,
    term_to_str,
    term_vars,
    terms_vars,
    unify,
)


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Term, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.pred
        return self.pred + "(" + ",".join(term_to_str(a) for a in self.args) + ")"

    def apply(self, s: Subst) -> "Atom":
        if not s:
            return self
        return Atom(self.pred, tuple(apply_subst(a, s) for a in self.args))

    def vars(self) -> list[str]:
        return terms_vars(self.args)


@dataclass
class Clause:
    head: Atom
    cstr: LinConstraint
    body: tuple[Atom, ...]
    id: int = 0
    provenance: str = ""

    def vars(self) -> list[str]:
        out = self.head.vars()
        seen = set(out)
        for v in sorted(self.cstr.vars()):
            if v not in seen:
                seen.add(v)
                out.append(v)
        for a in self.body:
            for v in a.vars():
                if v not in seen:
                    seen.add(v)
                    out.append(v)
        return out

    def atom_vars(self) -> set[str]:
        out = set(self.head.vars())
        for a in self.body:
            out.update(a.vars())
        return out

    def is_constrained_fact(self) -> bool:
        return not self.body

    def is_fact(self) -> bool:
        return not self.body and self.cstr.is_true()

    def apply(self, s: Subst) -> "Clause":
        binding = {}
        for v in self.cstr.vars():
            if v in s:
                binding[v] = term_to_linexpr(apply_subst(Var(v), s))
        return Clause(
            self.head.apply(s),
            self.cstr.instantiate(binding) if binding else self.cstr.copy(),
            tuple(a.apply(s) for a in self.body),
            self.id,
            self.provenance,
        )

    def rename_apart(self) -> "Clause":
        mapping: Subst = {v: fresh_var() for v in self.vars()}
        return self.apply(mapping)

    def __str__(self) -> str:
        return render_clause(self)


def term_to_linexpr(t: Term) -> Optional[LinExpr]:
    if isinstance(t, Var):
        return LinExpr.var(t.name)
    if isinstance(t, IntConst):
        return LinExpr.num(t.value)
    return None


# Builtin resolver: given a query atom, return clause-like resolvents
# (constraint, body atoms) with fresh variables, or None if inapplicable.
Resolver = Callable[[Atom], Optional[list[tuple[LinConstraint, list[Atom]]]]]


@dataclass
class ClpProgram:
    clauses: list[Clause]
    high: frozenset[str]
    low: frozenset[str]
    resolvers: dict[str, Resolver] = field(default_factory=dict)
    aux_recursive: frozenset[str] = frozenset()  # user predicates unfolded on a budget

    def __post_init__(self) -> None:
        self._index: dict[str, list[Clause]] = {}
        for c in self.clauses:
            self._index.setdefault(c.head.pred, []).append(c)

    def clauses_for(self, pred: str) -> list[Clause]:
        return self._index.get(pred, [])

    def preds(self) -> set[str]:
        out = set()
        for c in self.clauses:
            out.add(c.head.pred)
            out.update(a.pred for a in c.body)
        out.update(self.resolvers)
        return out

    def is_high(self, pred: str) -> bool:
        return pred in self.high

    def validate(self) -> None:
        preds = self.preds()
        uncovered = preds - self.high - self.low
        if uncovered:
            raise ValueError(f"predicates outside the high/low partition: {sorted(uncovered)}")
        overlap = self.high & self.low
        if overlap:
            raise ValueError(f"predicates both high and low: {sorted(overlap)}")
        deps = depends_on(self)
        for p in sorted(self.low & preds):
            bad = deps.get(p, set()) & self.high
            if bad:
                raise ValueError(f"low predicate {p} depends on high {sorted(bad)}")

    def replaced(self, clauses: list[Clause]) -> "ClpProgram":
        return ClpProgram(clauses, self.high, self.low, self.resolvers, self.aux_recursive)

    def with_high(self, extra: Iterable[str]) -> "ClpProgram":
        return ClpProgram(
            self.clauses, self.high | frozenset(extra), self.low, self.resolvers, self.aux_recursive
        )


def immediate_deps(p: ClpProgram) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    for c in p.clauses:
        out.setdefault(c.head.pred, set()).update(a.pred for a in c.body)
    return out


def depends_on(p: ClpProgram) -> dict[str, set[str]]:
    """Transitive closure of the immediate-dependency relation."""
    imm = immediate_deps(p)
    out: dict[str, set[str]] = {q: set(ds) for q, ds in imm.items()}
    changed = True
    while changed:
        changed = False
        for q, ds in out.items():
            extra = set()
            for d in ds:
                extra.update(out.get(d, ()))
            if not extra <= ds:
                ds.update(extra)
                changed = True
    return out


def useless_predicates(p: ClpProgram) -> set[str]:
    """Greatest set U with: q in U iff every q-clause has a body atom in U."""
    u = set(p.preds())
    changed = True
    while changed:
        changed = False
        for c in p.clauses:
            if c.head.pred in u and not any(a.pred in u for a in c.body):
                u.discard(c.head.pred)
                changed = True
    return u


def remove_useless(p: ClpProgram) -> ClpProgram:
    u = useless_predicates(p)
    kept = [c for c in p.clauses if c.head.pred not in u]
    return p.replaced(kept)


def recursive_preds(p: ClpProgram) -> set[str]:
    """Predicates inside a dependency cycle (including self-loops)."""
    deps = depends_on(p)
    return {q for q, ds in deps.items() if q in ds}


# ---------------------------------------------------------------------------
# Rendering


def render_clause(c: Clause, canonical: bool = False) -> str:
    mapping: Subst = {}
    if canonical:
        names = _canonical_names()
        for v in c.vars():
            mapping[v] = Var(next(names))
        c = c.apply(mapping)
    parts = [] if c.cstr.is_true() else c.cstr.render_parts()
    parts.extend(str(a) for a in c.body)
    head = str(c.head)
    if not parts:
        return head + "."
    return head + " :- " + ", ".join(parts) + "."


def _canonical_names():
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    for ch in letters:
        yield ch
    i = 1
    while True:
        for ch in letters:
            yield f"{ch}{i}"
        i += 1


def render_program(p: ClpProgram, canonical: bool = True) -> str:
    lines = [render_clause(c, canonical=canonical) for c in p.clauses]
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Parsing the dump format


class ClauseParseError(ValueError):
    pass


_PUNCT = (":-", "=\\=", "!=", "=<", "<=", ">=", "(", ")", "[", "]", "|", ",", "=", "<", ">", "+", "-", "*", ".")


def _tokenize(text: str) -> list[str]:
    toks: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "%":
            break
        matched = False
        for p in _PUNCT:
            if text.startswith(p, i):
                # '.' inside a number or name is impossible here; final '.' ok
                toks.append(p)
                i += len(p)
                matched = True
                break
        if matched:
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(text[i:j])
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(text[i:j])
            i = j
            continue
        raise ClauseParseError(f"unexpected character {ch!r}")
    return toks


class _ClauseParser:
    def __init__(self, toks: list[str]):
        self.toks = toks
        self.pos = 0

    def peek(self) -> Optional[str]:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def next(self) -> str:
        t = self.peek()
        if t is None:
            raise ClauseParseError("unexpected end of clause")
        self.pos += 1
        return t

    def expect(self, tok: str) -> None:
        t = self.next()
        if t != tok:
            raise ClauseParseError(f"expected {tok!r}, found {t!r}")

    # terms -------------------------------------------------------------

    def term(self) -> Term:
        t = self.next()
        if t == "-":
            inner = self.term()
            if isinstance(inner, IntConst):
                return IntConst(-inner.value)
            raise ClauseParseError("'-' applies to integer literals in term position")
        if t.isdigit():
            return IntConst(int(t))
        if t == "[":
            return self._list_tail()
        if t == "(":
            first = self.term()
            self.expect(",")
            second = self.term()
            self.expect(")")
            return App(",", (first, second))
        if t[0].isupper() or t[0] == "_":
            return Var(t)
        if t[0].isalpha():
            if self.peek() == "(":
                self.next()
                args = [self.term()]
                while self.peek() == ",":
                    self.next()
                    args.append(self.term())
                self.expect(")")
                return App(t, tuple(args))
            return App(t, ())
        raise ClauseParseError(f"bad term token {t!r}")

    def _list_tail(self) -> Term:
        if self.peek() == "]":
            self.next()
            return App("[]", ())
        items = [self.term()]
        while self.peek() == ",":
            self.next()
            items.append(self.term())
        tail: Term = App("[]", ())
        if self.peek() == "|":
            self.next()
            tail = self.term()
        self.expect("]")
        for item in reversed(items):
            tail = App(".", (item, tail))
        return tail

    # linear expressions --------------------------------------------------

    def arith(self) -> LinExpr:
        e = self._arith_prod()
        while self.peek() in ("+", "-"):
            op = self.next()
            rhs = self._arith_prod()
            e = e.add(rhs) if op == "+" else e.sub(rhs)
        return e

    def _arith_prod(self) -> LinExpr:
        e = self._arith_atom()
        while self.peek() == "*":
            self.next()
            rhs = self._arith_atom()
            if e.is_const():
                e = rhs.scale(e.const)
            elif rhs.is_const():
                e = e.scale(rhs.const)
            else:
                raise ClauseParseError("nonlinear product in constraint")
        return e

    def _arith_atom(self) -> LinExpr:
        t = self.next()
        if t == "-":
            return self._arith_atom().scale(-1)
        if t.isdigit():
            return LinExpr.num(int(t))
        if t == "(":
            e = self.arith()
            self.expect(")")
            return e
        if t[0].isupper() or t[0] == "_":
            return LinExpr.var(t)
        raise ClauseParseError(f"bad token {t!r} in linear expression")


_RELOPS = {"=", "!=", "=\\=", "<", "=<", "<=", ">", ">="}


def _split_top(toks: list[str], sep: str) -> list[list[str]]:
    out: list[list[str]] = [[]]
    depth = 0
    for t in toks:
        if t in ("(", "["):
            depth += 1
        elif t in (")", "]"):
            depth -= 1
        if t == sep and depth == 0:
            out.append([])
        else:
            out[-1].append(t)
    return out


def parse_clause(line: str, clause_id: int = 0) -> Clause:
    toks = _tokenize(line)
    if toks and toks[-1] == ".":
        toks = toks[:-1]
    if not toks:
        raise ClauseParseError("empty clause")
    if ":-" in toks:
        at = toks.index(":-")
        head_toks, body_toks = toks[:at], toks[at + 1 :]
    else:
        head_toks, body_toks = toks, []
    hp = _ClauseParser(head_toks)
    head_term = hp.term()
    if hp.peek() is not None:
        raise ClauseParseError("trailing tokens after clause head")
    head = _term_to_atom(head_term)
    cstr = LinConstraint()
    body: list[Atom] = []
    for piece in _split_top(body_toks, ","):
        if not piece:
            continue
        if piece == ["true"]:
            continue
        if piece == ["false"]:
            cstr.false = True
            continue
        if any(t in _RELOPS for t in piece):
            p = _ClauseParser(piece)
            lhs = p.arith()
            op = p.next()
            rhs = p.arith()
            if p.peek() is not None:
                raise ClauseParseError("trailing tokens in constraint")
            op = {"=\\=": "!=", "=<": "<="}.get(op, op)
            cstr.add_rel(op, lhs, rhs)
        else:
            p = _ClauseParser(piece)
            term = p.term()
            if p.peek() is not None:
                raise ClauseParseError("trailing tokens in body atom")
            body.append(_term_to_atom(term))
    return Clause(head, cstr, tuple(body), clause_id)


def _term_to_atom(t: Term) -> Atom:
    if isinstance(t, App):
        return Atom(t.functor, t.args)
    raise ClauseParseError(f"clause head/atom must be a compound or symbol, got {t!r}")


def parse_program(text: str, high: Iterable[str] = (), low: Optional[Iterable[str]] = None) -> ClpProgram:
    clauses = []
    for i, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        clauses.append(parse_clause(line, clause_id=i + 1))
    highs = frozenset(high)
    preds = set()
    for c in clauses:
        preds.add(c.head.pred)
        preds.update(a.pred for a in c.body)
    lows = frozenset(low) if low is not None else frozenset(preds - highs)
    return ClpProgram(clauses, highs, lows)


# ---------------------------------------------------------------------------
# Bounded top-down evaluation


@dataclass
class EvalResult:
    derivable: bool
    constraint: Optional[LinConstraint] = None
    witness: Optional[dict[str, int]] = None
    exhausted: bool = True  # False if cut by depth or node budget

    def __bool__(self) -> bool:
        return self.derivable


def bounded_eval(
    program: ClpProgram,
    query: Atom | Sequence[Atom],
    depth: int,
    node_budget: int = 300_000,
    int_check: bool = True,
    int_budget: int = 400,
) -> EvalResult:
    """Depth-bounded SLD resolution with constraint accumulation.

    Depth counts derivation-tree depth: resolving an atom at depth d puts
    its body atoms at depth d+1.  Derivable is reported only with an
    integer-satisfiable accumulated constraint.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    goals = [query] if isinstance(query, Atom) else list(query)
    stack: list[tuple[list[tuple[Atom, int]], LinConstraint]] = [
        ([(g, 1) for g in goals], LinConstraint())
    ]
    nodes = 0
    exhausted = True
    while stack:
        pending, cstr = stack.pop()
        if not pending:
            if not int_check:
                return EvalResult(True, cstr, None, exhausted)
            status, model = cstr.is_sat_integer(int_budget)
            if status == "sat":
                return EvalResult(True, cstr, model, exhausted)
            if status == "unknown":
                exhausted = False
            continue
        nodes += 1
        if nodes > node_budget:
            return EvalResult(False, None, None, False)
        (atom, d), rest = pending[0], pending[1:]
        if d > depth:
            exhausted = False
            continue
        for new_cstr, body, s in _resolutions(program, atom, cstr):
            new_rest = [(a.apply(s), dd) for a, dd in rest] if s else list(rest)
            stack.append(([(b, d + 1) for b in body] + new_rest, new_cstr))
    return EvalResult(False, None, None, exhausted)


def _resolutions(
    program: ClpProgram, atom: Atom, cstr: LinConstraint
) -> list[tuple[LinConstraint, list[Atom], Subst]]:
    """One-step resolvents of `atom` with satisfiable combined constraint."""
    out = []
    resolver = program.resolvers.get(atom.pred)
    if resolver is not None:
        hits = resolver(atom) or []
        for extra, body in hits:
            combined = cstr.conj(extra)
            if combined.is_sat_rational():
                out.append((combined, list(body), {}))
    for clause in program.clauses_for(atom.pred):
        rc = clause.rename_apart()
        # clause-side variables bind to query terms first, keeping query
        # variables stable across resolution steps
        s = unify(App("$h", rc.head.args), App("$h", atom.args))
        if s is None:
            continue
        inst = rc.apply(s)
        binding = {}
        for v in cstr.vars():
            if v in s:
                binding[v] = term_to_linexpr(apply_subst(Var(v), s))
        base = cstr.instantiate(binding) if binding else cstr
        combined = base.conj(inst.cstr)
        if combined.is_sat_rational():
            out.append((combined, list(inst.body), s))
    return out
