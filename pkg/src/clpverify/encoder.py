"""Encoding a program / property pair as a constrained-clause program.

A reachability query ``unsafe-state reachable from some initial state``
becomes the predicate ``incorrect`` defined over a small interpreter:

* ``at`` / ``nextlab`` facts give the program text,
* ``tr`` / ``eval`` / ``update`` / ``lookup`` / ``read`` / ``write`` give
  the operational semantics (arrays are (list, dim) pairs),
* ``initConf`` / ``errorConf`` / ``phiInit`` / ``phiError`` give the
  property side, built from the ``.spec`` file.

``incorrect``, ``initConf``, ``reach`` and ``errorConf`` form the high
partition; everything else is low.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .clp import Atom, Clause, ClpProgram, parse_clause, term_to_linexpr
from .imp import (
    Decl,
    EArr,
    EBin,
    ENum,
    EUn,
    EVar,
    Expr,
    ImpProgram,
    Label,
    SArrAssign,
    SAssign,
    SGoto,
    SHalt,
    SIte,
    Stmt,
    _tokenize,
    _Parser,
    ImpSyntaxError,
)
from .laws import Law, parse_law
from .solver import LinConstraint, LinExpr
from .terms import App, IntConst, Term, Var, fresh_var, mk_list, mk_pair, sym


class EncodingError(ValueError):
    pass


_OP_FUNCTOR = {
    "+": "plus",
    "-": "minus",
    "*": "mult",
    "==": "eq",
    "!=": "neq",
    "<": "less",
    "<=": "leq",
    ">": "greater",
    ">=": "geq",
}

HIGH_PREDS = frozenset({"incorrect", "initConf", "reach", "errorConf"})


def label_term(l: Label) -> Term:
    return IntConst(l) if isinstance(l, int) else sym("h")


def expr_to_term(e: Expr) -> Term:
    if isinstance(e, ENum):
        return App("int", (IntConst(e.value),))
    if isinstance(e, EVar):
        return App("int", (sym(e.name),))
    if isinstance(e, EArr):
        return App("arrayelem", (sym(e.array), expr_to_term(e.index)))
    if isinstance(e, EUn):
        return App(e.op, (expr_to_term(e.arg),))
    return App(_OP_FUNCTOR[e.op], (expr_to_term(e.left), expr_to_term(e.right)))


def encode_cmd(s: Stmt) -> Term:
    if isinstance(s, SHalt):
        return sym("halt")
    if isinstance(s, SAssign):
        return App("asgn", (App("int", (sym(s.var),)), expr_to_term(s.expr)))
    if isinstance(s, SArrAssign):
        return App(
            "asgn",
            (App("arrayelem", (sym(s.array), expr_to_term(s.index))), expr_to_term(s.expr)),
        )
    if isinstance(s, SIte):
        return App("ite", (expr_to_term(s.cond), label_term(s.then_label), label_term(s.else_label)))
    if isinstance(s, SGoto):
        return App("goto", (label_term(s.target),))
    raise EncodingError(f"cannot encode structured statement {s!r}; flatten first")


def encode_at_facts(p: ImpProgram) -> list[Clause]:
    if not p.is_flat():
        raise EncodingError("at facts require a flat program")
    out = []
    for s in p.stmts:
        out.append(Clause(Atom("at", (label_term(s.label), encode_cmd(s))), LinConstraint(), ()))
    return out


def encode_nextlab_facts(p: ImpProgram) -> list[Clause]:
    out = []
    labels = [s.label for s in p.stmts]
    for a, b in zip(labels, labels[1:]):
        out.append(Clause(Atom("nextlab", (label_term(a), label_term(b))), LinConstraint(), ()))
    return out


# ---------------------------------------------------------------------------
# The fixed interpreter clauses

_INTERP_TEXT = """
tr(cf(cmd(L,asgn(int(X),E)),D),cf(cmd(L1,C),D1)) :- eval(E,D,V), update(D,int(X),V,D1), nextlab(L,L1), at(L1,C).
tr(cf(cmd(L,asgn(arrayelem(A,IE),E)),D),cf(cmd(L1,C),D1)) :- eval(IE,D,I), eval(E,D,V), lookup(D,array(A),FA), write(FA,I,V,FA1), update(D,array(A),FA1,D1), nextlab(L,L1), at(L1,C).
tr(cf(cmd(L,ite(E,L1,L2)),D),cf(cmd(L1,C),D)) :- V =\\= 0, eval(E,D,V), at(L1,C).
tr(cf(cmd(L,ite(E,L1,L2)),D),cf(cmd(L2,C),D)) :- V = 0, eval(E,D,V), at(L2,C).
tr(cf(cmd(L,goto(L1)),D),cf(cmd(L1,C),D)) :- at(L1,C).
eval(int(X),D,V) :- lookup(D,int(X),V).
eval(neg(E),D,V) :- V = -V1, eval(E,D,V1).
eval(not(E),D,V) :- V = 1, V1 = 0, eval(E,D,V1).
eval(not(E),D,V) :- V = 0, V1 =\\= 0, eval(E,D,V1).
eval(plus(E1,E2),D,V) :- V = V1+V2, eval(E1,D,V1), eval(E2,D,V2).
eval(minus(E1,E2),D,V) :- V = V1-V2, eval(E1,D,V1), eval(E2,D,V2).
eval(eq(E1,E2),D,V) :- V = 1, V1 = V2, eval(E1,D,V1), eval(E2,D,V2).
eval(eq(E1,E2),D,V) :- V = 0, V1 =\\= V2, eval(E1,D,V1), eval(E2,D,V2).
eval(neq(E1,E2),D,V) :- V = 1, V1 =\\= V2, eval(E1,D,V1), eval(E2,D,V2).
eval(neq(E1,E2),D,V) :- V = 0, V1 = V2, eval(E1,D,V1), eval(E2,D,V2).
eval(less(E1,E2),D,V) :- V = 1, V1 < V2, eval(E1,D,V1), eval(E2,D,V2).
eval(less(E1,E2),D,V) :- V = 0, V1 >= V2, eval(E1,D,V1), eval(E2,D,V2).
eval(leq(E1,E2),D,V) :- V = 1, V1 =< V2, eval(E1,D,V1), eval(E2,D,V2).
eval(leq(E1,E2),D,V) :- V = 0, V1 > V2, eval(E1,D,V1), eval(E2,D,V2).
eval(greater(E1,E2),D,V) :- V = 1, V1 > V2, eval(E1,D,V1), eval(E2,D,V2).
eval(greater(E1,E2),D,V) :- V = 0, V1 =< V2, eval(E1,D,V1), eval(E2,D,V2).
eval(geq(E1,E2),D,V) :- V = 1, V1 >= V2, eval(E1,D,V1), eval(E2,D,V2).
eval(geq(E1,E2),D,V) :- V = 0, V1 < V2, eval(E1,D,V1), eval(E2,D,V2).
eval(arrayelem(A,IE),D,V) :- eval(IE,D,I), lookup(D,array(A),FA), read(FA,I,V).
update([[Id,B0]|T],Id,B,[[Id,B]|T]).
update([[I2,B2]|T],Id,B,[[I2,B2]|T1]) :- update(T,Id,B,T1).
lookup([[Id,B]|T],Id,B).
lookup([[I2,B2]|T],Id,B) :- lookup(T,Id,B).
read(([X|T],N),I,X) :- I = 0, N >= 1.
read(([X|T],N),I,Z) :- I >= 1, N >= 1, I1 = I-1, N1 = N-1, read((T,N1),I1,Z).
write(([X|T],N),I,V,([V|T],N)) :- I = 0, N >= 1.
write(([X|T],N),I,V,([X|T1],N)) :- I >= 1, N >= 1, I1 = I-1, N1 = N-1, write((T,N1),I1,V,(T1,N1)).
"""


def interpreter_clauses() -> list[Clause]:
    out = []
    for line in _INTERP_TEXT.strip().splitlines():
        line = line.strip()
        if not line:
            continue
        c = parse_clause(line)
        if line.startswith("eval(mult"):  # never reached; the product clause is built below
            continue
        c.provenance = "interp"
        out.append(c)
    out.append(_mult_clause())
    return out


def _mult_clause() -> Clause:
    """eval(mult(E1,E2),D,V) with V = V1*V2 kept as a pending product."""
    cstr = LinConstraint()
    cstr.add_product("V", LinExpr.var("V1"), LinExpr.var("V2"))
    return Clause(
        Atom("eval", (App("mult", (Var("E1"), Var("E2"))), Var("D"), Var("V"))),
        cstr,
        (
            Atom("eval", (Var("E1"), Var("D"), Var("V1"))),
            Atom("eval", (Var("E2"), Var("D"), Var("V2"))),
        ),
        provenance="interp",
    )


def eval_const_resolver(atom: Atom):
    """Builtin meaning of integer literals: eval(int(k), D, V) gives V = k."""
    if atom.pred != "eval" or len(atom.args) != 3:
        return None
    e, _d, v = atom.args
    if (
        isinstance(e, App)
        and e.functor == "int"
        and len(e.args) == 1
        and isinstance(e.args[0], IntConst)
    ):
        tv = term_to_linexpr(v)
        if tv is None:
            return []
        c = LinConstraint()
        c.add_eq(tv.sub(LinExpr.num(e.args[0].value)))
        return [(c, [])]
    return None


# ---------------------------------------------------------------------------
# Property formulas


@dataclass
class SpecFormula:
    """A conjunction of comparisons and predicate atoms over program variables.

    `exists` names locals; array reads ``a[e]`` are allowed inside
    comparisons and desugar to read atoms over the array pair.
    """

    exists: list[str] = field(default_factory=list)
    comparisons: list[tuple[str, Expr, Expr]] = field(default_factory=list)
    atoms: list[tuple[str, list[Expr]]] = field(default_factory=list)

    def mentioned(self) -> set[str]:
        out: set[str] = set()
        for _, a, b in self.comparisons:
            out |= _expr_idents(a) | _expr_idents(b)
        for _, args in self.atoms:
            for a in args:
                out |= _expr_idents(a)
        return out - set(self.exists)


def _expr_idents(e: Expr) -> set[str]:
    if isinstance(e, ENum):
        return set()
    if isinstance(e, EVar):
        return {e.name}
    if isinstance(e, EArr):
        return {e.array} | _expr_idents(e.index)
    if isinstance(e, EUn):
        return _expr_idents(e.arg)
    return _expr_idents(e.left) | _expr_idents(e.right)


@dataclass
class PropertySpec:
    init: SpecFormula
    error: SpecFormula
    user_clauses: list[Clause] = field(default_factory=list)
    user_laws: list[Law] = field(default_factory=list)


class SpecParseError(ValueError):
    pass


def parse_spec(text: str) -> PropertySpec:
    sections: dict[str, list[str]] = {}
    current: Optional[str] = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("//") or line.startswith("%"):
            continue
        head = line.split(":", 1)[0].strip()
        if head in ("init", "error", "clauses", "laws") and ":" in line:
            current = head
            rest = line.split(":", 1)[1].strip()
            sections.setdefault(current, [])
            if rest:
                sections[current].append(rest)
            continue
        if current is None:
            raise SpecParseError(f"text before any section: {line!r}")
        sections[current].append(line)
    if "init" not in sections or "error" not in sections:
        raise SpecParseError("spec needs init: and error: sections")
    init = _parse_formula(" ".join(sections["init"]))
    error = _parse_formula(" ".join(sections["error"]))
    user_clauses = []
    for i, stmt in enumerate(_split_dots(" ".join(sections.get("clauses", [])))):
        c = parse_clause(stmt + ".")
        c.provenance = "user"
        user_clauses.append(c)
    user_laws = [parse_law(s) for s in _split_dots(" ".join(sections.get("laws", [])))]
    return PropertySpec(init, error, user_clauses, user_laws)


def _split_dots(text: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "." and depth == 0:
            stmt = "".join(cur).strip()
            if stmt:
                out.append(stmt)
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail:
        out.append(tail)
    return out


def _parse_formula(text: str) -> SpecFormula:
    text = text.strip()
    if text.endswith(";"):
        text = text[:-1]
    f = SpecFormula()
    if text.startswith("exists"):
        head, _, rest = text.partition(":")
        names = head[len("exists") :].replace(",", " ").split()
        if not names:
            raise SpecParseError("empty exists prefix")
        f.exists = names
        text = rest.strip()
    for piece in _split_commas(text):
        piece = piece.strip()
        if not piece:
            continue
        toks = _tokenize(piece)
        p = _Parser(toks)
        t = p.peek()
        if (
            t.kind == "name"
            and p.peek(1).kind == "sym"
            and p.peek(1).text == "("
            and not _looks_arith(piece)
        ):
            name = p.next().text
            p.eat_sym("(")
            args = [p.parse_expr()]
            while p.at_sym(","):
                p.next()
                args.append(p.parse_expr())
            p.eat_sym(")")
            if p.peek().kind != "eof":
                raise SpecParseError(f"trailing input in atom: {piece!r}")
            f.atoms.append((name, args))
            continue
        try:
            e = p.parse_expr()
        except ImpSyntaxError as exc:
            raise SpecParseError(f"bad conjunct {piece!r}: {exc}") from exc
        if p.peek().kind == "sym" and p.peek().text == "=":
            # single '=' is equality in property formulas
            p.next()
            rhs = p.parse_expr()
            e = EBin("==", e, rhs)
        if p.peek().kind != "eof":
            raise SpecParseError(f"trailing input in conjunct: {piece!r}")
        if not isinstance(e, EBin) or e.op not in ("==", "!=", "<", "<=", ">", ">="):
            raise SpecParseError(f"conjunct is not a comparison: {piece!r}")
        f.comparisons.append((e.op, e.left, e.right))
    return f


def _looks_arith(piece: str) -> bool:
    for op in ("==", "!=", "<=", ">=", "<", ">", "="):
        if op in piece:
            return True
    return False


def _split_commas(text: str) -> list[str]:
    out, depth, cur = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            out.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    out.append("".join(cur))
    return out


# ---------------------------------------------------------------------------
# The triple


@dataclass
class Triple:
    prog: ImpProgram  # flat
    spec: PropertySpec


@dataclass
class EncodingInfo:
    decls: list[Decl]
    val_vars: dict[str, str]  # declared name -> value variable name
    arr_vars: dict[str, str]  # array name -> list variable name
    entry_label: Label
    init_args: list[str]
    error_args: list[str]

    def env_value_vars(self) -> list[str]:
        """One variable per declaration, in order (arrays give their list var)."""
        out = []
        for d in self.decls:
            out.append(self.arr_vars[d.name] if d.kind == "array" else self.val_vars[d.name])
        return out

    def env_term(self, suffix: str = "") -> Term:
        entries = []
        for d in self.decls:
            if d.kind == "int":
                entries.append(
                    mk_list([App("int", (sym(d.name),)), Var(self.val_vars[d.name] + suffix)])
                )
            else:
                dim: Term = (
                    IntConst(d.dim)
                    if isinstance(d.dim, int)
                    else Var(self.val_vars[d.dim] + suffix)
                )
                pair = mk_pair(Var(self.arr_vars[d.name] + suffix), dim)
                entries.append(mk_list([App("array", (sym(d.name),)), pair]))
        return mk_list(entries)


def _value_var(name: str) -> str:
    return name[0].upper() + name[1:]


def make_encoding_info(prog: ImpProgram, spec: PropertySpec) -> EncodingInfo:
    val_vars: dict[str, str] = {}
    arr_vars: dict[str, str] = {}
    for d in prog.decls:
        v = _value_var(d.name)
        if d.kind == "array":
            arr_vars[d.name] = v
        else:
            val_vars[d.name] = v
    info = EncodingInfo(prog.decls, val_vars, arr_vars, prog.stmts[0].label, [], [])
    info.init_args = _formula_args(prog, spec.init, info)
    info.error_args = _formula_args(prog, spec.error, info)
    return info


def _formula_args(prog: ImpProgram, f: SpecFormula, info: EncodingInfo) -> list[str]:
    decls = prog.decl_map()
    mentioned = f.mentioned()
    for name in sorted(mentioned):
        if name not in decls:
            raise EncodingError(f"property mentions undeclared variable {name!r}")
    for name in list(mentioned):
        d = decls[name]
        if d.kind == "array" and isinstance(d.dim, str):
            mentioned.add(d.dim)
    out = []
    for d in prog.decls:
        if d.name in mentioned:
            out.append(info.arr_vars[d.name] if d.kind == "array" else info.val_vars[d.name])
    return out


def _formula_body(
    f: SpecFormula, prog: ImpProgram, info: EncodingInfo
) -> tuple[LinConstraint, list[Atom]]:
    decls = prog.decl_map()
    local: dict[str, Var] = {x: fresh_var(_value_var(x)) for x in f.exists}
    cstr = LinConstraint()
    atoms: list[Atom] = []

    def arr_pair(name: str) -> Term:
        d = decls[name]
        dim: Term = IntConst(d.dim) if isinstance(d.dim, int) else Var(info.val_vars[d.dim])
        return mk_pair(Var(info.arr_vars[name]), dim)

    def var_expr(name: str) -> LinExpr:
        if name in local:
            return LinExpr.var(local[name].name)
        d = decls.get(name)
        if d is None:
            raise EncodingError(f"property mentions undeclared variable {name!r}")
        if d.kind != "int":
            raise EncodingError(f"array {name!r} used as an integer in property")
        return LinExpr.var(info.val_vars[name])

    def to_linexpr(e: Expr) -> LinExpr:
        if isinstance(e, ENum):
            return LinExpr.num(e.value)
        if isinstance(e, EVar):
            return var_expr(e.name)
        if isinstance(e, EArr):
            if e.array not in decls or decls[e.array].kind != "array":
                raise EncodingError(f"{e.array!r} is not a declared array")
            v = fresh_var("Z")
            atoms.append(Atom("read", (arr_pair(e.array), _index_term(e.index), v)))
            return LinExpr.var(v.name)
        if isinstance(e, EUn):
            if e.op == "neg":
                return to_linexpr(e.arg).scale(-1)
            raise EncodingError("boolean operators are not allowed inside property arithmetic")
        if e.op == "*":
            l, r = to_linexpr(e.left), to_linexpr(e.right)
            if l.is_const():
                return r.scale(l.const)
            if r.is_const():
                return l.scale(r.const)
            raise EncodingError("nonlinear product in property")
        if e.op in ("+", "-"):
            l, r = to_linexpr(e.left), to_linexpr(e.right)
            return l.add(r) if e.op == "+" else l.sub(r)
        raise EncodingError(f"nested comparison in property arithmetic: {e!r}")

    def _index_term(e: Expr) -> Term:
        if isinstance(e, ENum):
            return IntConst(e.value)
        if isinstance(e, EVar):
            name = e.name
            return local[name] if name in local else Var(info.val_vars[name])
        v = fresh_var("K")
        cstr.add_eq(LinExpr.var(v.name).sub(to_linexpr(e)))
        return v

    for op, a, b in f.comparisons:
        rel = {"==": "="}.get(op, op)
        cstr.add_rel(rel, to_linexpr(a), to_linexpr(b))
    for pred, args in f.atoms:
        targs: list[Term] = []
        for a in args:
            if isinstance(a, ENum):
                targs.append(IntConst(a.value))
            elif isinstance(a, EVar) and a.name in local:
                targs.append(local[a.name])
            elif isinstance(a, EVar) and a.name in decls and decls[a.name].kind == "array":
                targs.append(arr_pair(a.name))
            elif isinstance(a, EVar):
                targs.append(Var(info.val_vars[a.name]))
            else:
                v = fresh_var("T")
                cstr.add_eq(LinExpr.var(v.name).sub(to_linexpr(a)))
                targs.append(v)
        atoms.append(Atom(pred, tuple(targs)))
    return cstr, atoms


def encode_triple(triple: Triple) -> tuple[ClpProgram, EncodingInfo]:
    prog = triple.prog
    if not prog.is_flat():
        raise EncodingError("encode_triple expects a flat program")
    info = make_encoding_info(prog, triple.spec)

    clauses: list[Clause] = []
    clauses += encode_at_facts(prog)
    clauses += encode_nextlab_facts(prog)

    x = Var("X")
    x1 = Var("X1")
    clauses.append(
        Clause(Atom("incorrect"), LinConstraint(), (Atom("initConf", (x,)), Atom("reach", (x,))))
    )
    clauses.append(
        Clause(
            Atom("reach", (x,)),
            LinConstraint(),
            (Atom("tr", (x, x1)), Atom("reach", (x1,))),
        )
    )
    clauses.append(Clause(Atom("reach", (x,)), LinConstraint(), (Atom("errorConf", (x,)),)))

    env = info.env_term()
    entry_cmd = App("cmd", (label_term(info.entry_label), encode_cmd(prog.stmts[0])))
    halt_cmd = App("cmd", (sym("h"), sym("halt")))
    clauses.append(
        Clause(
            Atom("initConf", (App("cf", (entry_cmd, env)),)),
            LinConstraint(),
            (Atom("phiInit", tuple(Var(v) for v in info.init_args)),),
        )
    )
    clauses.append(
        Clause(
            Atom("errorConf", (App("cf", (halt_cmd, env)),)),
            LinConstraint(),
            (Atom("phiError", tuple(Var(v) for v in info.error_args)),),
        )
    )
    icstr, iatoms = _formula_body(triple.spec.init, prog, info)
    clauses.append(
        Clause(Atom("phiInit", tuple(Var(v) for v in info.init_args)), icstr, tuple(iatoms))
    )
    ecstr, eatoms = _formula_body(triple.spec.error, prog, info)
    clauses.append(
        Clause(Atom("phiError", tuple(Var(v) for v in info.error_args)), ecstr, tuple(eatoms))
    )
    clauses += [c for c in triple.spec.user_clauses]
    clauses += interpreter_clauses()

    for i, c in enumerate(clauses):
        c.id = i + 1

    preds = set()
    for c in clauses:
        preds.add(c.head.pred)
        preds.update(a.pred for a in c.body)
    program = ClpProgram(
        clauses,
        high=HIGH_PREDS,
        low=frozenset(preds - HIGH_PREDS),
        resolvers={"eval": eval_const_resolver},
        aux_recursive=frozenset(c.head.pred for c in triple.spec.user_clauses),
    )
    program.validate()
    return program, info
