"""The input imperative language: syntax, parsing, and flattening.

Programs act on declared integer and integer-array variables.  Two
surface forms are accepted:

* flat: every statement carries a label and is one of the five command
  forms ``halt``, ``x = e``, ``a[e] = e``, ``if (e) l1 else l2``,
  ``goto l``; labels are nonnegative integers plus the distinguished
  ``h`` on the final ``halt``;
* structured: ``while`` / ``if``-``else`` blocks (no ``goto``), which
  ``lower_structured`` translates into the flat form, numbering commands
  in emission order.

Boolean context is numeric: 0 is false, anything else is true.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

Label = Union[int, str]  # nonnegative int or "h"


class ImpSyntaxError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {msg}")
        self.line = line
        self.col = col


class ImpValidationError(ValueError):
    pass


# -- expressions ------------------------------------------------------------

UNARY_OPS = ("neg", "not")
BINARY_OPS = ("+", "-", "*", "==", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class ENum:
    value: int


@dataclass(frozen=True)
class EVar:
    name: str


@dataclass(frozen=True)
class EArr:
    array: str
    index: "Expr"


@dataclass(frozen=True)
class EUn:
    op: str
    arg: "Expr"


@dataclass(frozen=True)
class EBin:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[ENum, EVar, EArr, EUn, EBin]


# -- declarations and statements ---------------------------------------------


@dataclass(frozen=True)
class Decl:
    name: str
    kind: str  # "int" | "array"
    dim: Optional[Union[int, str]] = None  # arrays only; int literal or int-var name


@dataclass
class SAssign:
    var: str
    expr: Expr
    label: Optional[Label] = None


@dataclass
class SArrAssign:
    array: str
    index: Expr
    expr: Expr
    label: Optional[Label] = None


@dataclass
class SIf:
    cond: Expr
    then: list
    els: Optional[list]
    label: Optional[Label] = None


@dataclass
class SWhile:
    cond: Expr
    body: list
    label: Optional[Label] = None


@dataclass
class SIte:
    cond: Expr
    then_label: Label
    else_label: Label
    label: Optional[Label] = None


@dataclass
class SGoto:
    target: Label
    label: Optional[Label] = None


@dataclass
class SHalt:
    label: Optional[Label] = None


Stmt = Union[SAssign, SArrAssign, SIf, SWhile, SIte, SGoto, SHalt]


@dataclass
class ImpProgram:
    decls: list[Decl]
    stmts: list[Stmt]

    def decl_map(self) -> dict[str, Decl]:
        return {d.name: d for d in self.decls}

    def is_flat(self) -> bool:
        return not any(isinstance(s, (SIf, SWhile)) for s in self.stmts)

    def command_table(self) -> dict[Label, Stmt]:
        if not self.is_flat():
            raise ImpValidationError("command table requires a flat program")
        return {s.label: s for s in self.stmts}


def at(p: ImpProgram, label: Label) -> Stmt:
    table = p.command_table()
    if label not in table:
        raise ImpValidationError(f"unknown label {label!r}")
    return table[label]


def nextlab(p: ImpProgram, label: Label) -> Label:
    labels = [s.label for s in p.stmts]
    if label not in labels:
        raise ImpValidationError(f"unknown label {label!r}")
    i = labels.index(label)
    if i + 1 >= len(labels):
        raise ImpValidationError(f"label {label!r} has no successor")
    return labels[i + 1]


# ---------------------------------------------------------------------------
# Tokenizer

_KEYWORDS = {"int", "array", "if", "else", "while", "goto", "halt"}
_SYMBOLS = ["==", "!=", "<=", ">=", "<", ">", "=", "+", "-", "*", "!", "(", ")", "[", "]", "{", "}", ";", ":", ","]


@dataclass
class _Tok:
    kind: str  # "num" | "name" | "sym" | "eof"
    text: str
    line: int
    col: int


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            toks.append(_Tok("num", src[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("name", src[i:j], line, col))
            col += j - i
            i = j
            continue
        for s in _SYMBOLS:
            if src.startswith(s, i):
                toks.append(_Tok("sym", s, line, col))
                i += len(s)
                col += len(s)
                break
        else:
            raise ImpSyntaxError(f"unexpected character {ch!r}", line, col)
    toks.append(_Tok("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.pos = 0

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.peek()
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, msg: str) -> ImpSyntaxError:
        t = self.peek()
        return ImpSyntaxError(msg + f" (found {t.text!r})", t.line, t.col)

    def eat_sym(self, s: str) -> None:
        t = self.next()
        if t.kind != "sym" or t.text != s:
            raise ImpSyntaxError(f"expected {s!r}, found {t.text!r}", t.line, t.col)

    def at_sym(self, s: str) -> bool:
        t = self.peek()
        return t.kind == "sym" and t.text == s

    def at_name(self, s: str) -> bool:
        t = self.peek()
        return t.kind == "name" and t.text == s

    # declarations -------------------------------------------------------

    def parse_program(self) -> ImpProgram:
        decls: list[Decl] = []
        while self.at_name("int") or self.at_name("array"):
            decls.extend(self.parse_decl())
        stmts: list[Stmt] = []
        while self.peek().kind != "eof":
            stmts.append(self.parse_stmt())
        if not stmts:
            raise self.error("program has no statements")
        return ImpProgram(decls, stmts)

    def parse_decl(self) -> list[Decl]:
        kind = self.next().text
        out = []
        while True:
            name = self._ident()
            if kind == "array":
                self.eat_sym("[")
                t = self.next()
                if t.kind == "num":
                    dim: Union[int, str] = int(t.text)
                    if dim <= 0:
                        raise ImpSyntaxError("array dimension must be positive", t.line, t.col)
                elif t.kind == "name":
                    dim = t.text
                else:
                    raise ImpSyntaxError("expected array dimension", t.line, t.col)
                self.eat_sym("]")
                out.append(Decl(name, "array", dim))
            else:
                out.append(Decl(name, "int"))
            if self.at_sym(","):
                self.next()
                continue
            self.eat_sym(";")
            return out

    def _ident(self) -> str:
        t = self.next()
        if t.kind != "name" or t.text in _KEYWORDS:
            raise ImpSyntaxError("expected identifier", t.line, t.col)
        return t.text

    # statements -----------------------------------------------------------

    def parse_stmt(self) -> Stmt:
        label = self._opt_label()
        s = self._bare_stmt()
        s.label = label
        return s

    def _opt_label(self) -> Optional[Label]:
        t = self.peek()
        if t.kind == "num" and self.peek(1).kind == "sym" and self.peek(1).text == ":":
            self.next()
            self.next()
            return int(t.text)
        if t.kind == "name" and t.text == "h" and self.peek(1).kind == "sym" and self.peek(1).text == ":":
            self.next()
            self.next()
            return "h"
        return None

    def _labelref(self) -> Label:
        t = self.next()
        if t.kind == "num":
            return int(t.text)
        if t.kind == "name" and t.text == "h":
            return "h"
        raise ImpSyntaxError("expected a label (number or h)", t.line, t.col)

    def _bare_stmt(self) -> Stmt:
        t = self.peek()
        if t.kind == "name" and t.text == "halt":
            self.next()
            self.eat_sym(";")
            return SHalt()
        if t.kind == "name" and t.text == "goto":
            self.next()
            target = self._labelref()
            self.eat_sym(";")
            return SGoto(target)
        if t.kind == "name" and t.text == "while":
            self.next()
            self.eat_sym("(")
            cond = self.parse_expr()
            self.eat_sym(")")
            body = self._block()
            return SWhile(cond, body)
        if t.kind == "name" and t.text == "if":
            self.next()
            self.eat_sym("(")
            cond = self.parse_expr()
            self.eat_sym(")")
            nxt = self.peek()
            if nxt.kind == "num" or (nxt.kind == "name" and nxt.text == "h"):
                l1 = self._labelref()
                if not self.at_name("else"):
                    raise self.error("expected 'else' in conditional jump")
                self.next()
                l2 = self._labelref()
                self.eat_sym(";")
                return SIte(cond, l1, l2)
            then = self._block()
            els = None
            if self.at_name("else"):
                self.next()
                els = self._block()
            return SIf(cond, then, els)
        if t.kind == "name":
            name = self._ident()
            if self.at_sym("["):
                self.next()
                idx = self.parse_expr()
                self.eat_sym("]")
                self.eat_sym("=")
                rhs = self.parse_expr()
                self.eat_sym(";")
                return SArrAssign(name, idx, rhs)
            self.eat_sym("=")
            rhs = self.parse_expr()
            self.eat_sym(";")
            return SAssign(name, rhs)
        raise self.error("expected a statement")

    def _block(self) -> list[Stmt]:
        if self.at_sym("{"):
            self.next()
            out = []
            while not self.at_sym("}"):
                out.append(self.parse_stmt())
            self.next()
            return out
        return [self.parse_stmt()]

    # expressions -----------------------------------------------------------

    def parse_expr(self) -> Expr:
        lhs = self._additive()
        t = self.peek()
        if t.kind == "sym" and t.text in ("==", "!=", "<", "<=", ">", ">="):
            self.next()
            rhs = self._additive()
            return EBin(t.text, lhs, rhs)
        return lhs

    def _additive(self) -> Expr:
        e = self._mult()
        while self.peek().kind == "sym" and self.peek().text in ("+", "-"):
            op = self.next().text
            e = EBin(op, e, self._mult())
        return e

    def _mult(self) -> Expr:
        e = self._unary()
        while self.at_sym("*"):
            self.next()
            e = EBin("*", e, self._unary())
        return e

    def _unary(self) -> Expr:
        if self.at_sym("-"):
            self.next()
            return EUn("neg", self._unary())
        if self.at_sym("!"):
            self.next()
            return EUn("not", self._unary())
        return self._primary()

    def _primary(self) -> Expr:
        t = self.next()
        if t.kind == "num":
            return ENum(int(t.text))
        if t.kind == "sym" and t.text == "(":
            e = self.parse_expr()
            self.eat_sym(")")
            return e
        if t.kind == "name" and t.text not in _KEYWORDS:
            if self.at_sym("["):
                self.next()
                idx = self.parse_expr()
                self.eat_sym("]")
                return EArr(t.text, idx)
            return EVar(t.text)
        raise ImpSyntaxError(f"expected expression, found {t.text!r}", t.line, t.col)


def parse_program(text: str) -> ImpProgram:
    prog = _Parser(_tokenize(text)).parse_program()
    validate(prog)
    return prog


# ---------------------------------------------------------------------------
# Validation


def expr_idents(e: Expr) -> set[str]:
    if isinstance(e, ENum):
        return set()
    if isinstance(e, EVar):
        return {e.name}
    if isinstance(e, EArr):
        return {e.array} | expr_idents(e.index)
    if isinstance(e, EUn):
        return expr_idents(e.arg)
    return expr_idents(e.left) | expr_idents(e.right)


def validate(p: ImpProgram) -> None:
    decls = p.decl_map()
    if len(decls) != len(p.decls):
        raise ImpValidationError("duplicate declaration")
    for d in p.decls:
        if d.kind == "array" and isinstance(d.dim, str):
            dim_decl = decls.get(d.dim)
            if dim_decl is None or dim_decl.kind != "int":
                raise ImpValidationError(
                    f"array {d.name} has dimension {d.dim!r} which is not a declared int variable"
                )

    def check_expr(e: Expr) -> None:
        for name in expr_idents(e):
            if name not in decls:
                raise ImpValidationError(f"undeclared identifier {name!r}")
        for sub in _walk_exprs(e):
            if isinstance(sub, EVar) and decls[sub.name].kind != "int":
                raise ImpValidationError(f"array {sub.name!r} used as an integer")
            if isinstance(sub, EArr) and decls[sub.array].kind != "array":
                raise ImpValidationError(f"{sub.array!r} indexed but not an array")

    halts = 0

    def walk(stmts: list[Stmt]) -> None:
        nonlocal halts
        for s in stmts:
            if isinstance(s, SAssign):
                if s.var not in decls or decls[s.var].kind != "int":
                    raise ImpValidationError(f"assignment to undeclared int {s.var!r}")
                check_expr(s.expr)
            elif isinstance(s, SArrAssign):
                if s.array not in decls or decls[s.array].kind != "array":
                    raise ImpValidationError(f"assignment to undeclared array {s.array!r}")
                check_expr(s.index)
                check_expr(s.expr)
            elif isinstance(s, (SIf, SWhile)):
                check_expr(s.cond)
                walk(s.then if isinstance(s, SIf) else s.body)
                if isinstance(s, SIf) and s.els is not None:
                    walk(s.els)
            elif isinstance(s, SIte):
                check_expr(s.cond)
            elif isinstance(s, SHalt):
                halts += 1

    walk(p.stmts)
    if halts != 1:
        raise ImpValidationError(f"program must contain exactly one halt, found {halts}")
    if not isinstance(p.stmts[-1], SHalt):
        raise ImpValidationError("halt must be the last top-level statement")

    if p.is_flat():
        labels = [s.label for s in p.stmts]
        if any(l is None for l in labels):
            raise ImpValidationError("flat programs require a label on every command")
        seen: set[Label] = set()
        for l in labels:
            if l in seen:
                raise ImpValidationError(f"duplicate label {l!r}")
            seen.add(l)
        if p.stmts[-1].label != "h":
            raise ImpValidationError("the halt command must carry label h")
        for s in p.stmts:
            targets = []
            if isinstance(s, SIte):
                targets = [s.then_label, s.else_label]
            elif isinstance(s, SGoto):
                targets = [s.target]
            for t in targets:
                if t not in seen:
                    raise ImpValidationError(f"jump to unknown label {t!r}")
    else:
        for s in _flatwalk(p.stmts):
            if isinstance(s, (SGoto, SIte)):
                raise ImpValidationError("goto / conditional jumps are not allowed in structured programs")


def _flatwalk(stmts: list[Stmt]):
    for s in stmts:
        yield s
        if isinstance(s, SWhile):
            yield from _flatwalk(s.body)
        elif isinstance(s, SIf):
            yield from _flatwalk(s.then)
            if s.els is not None:
                yield from _flatwalk(s.els)


def _walk_exprs(e: Expr):
    yield e
    if isinstance(e, EArr):
        yield from _walk_exprs(e.index)
    elif isinstance(e, EUn):
        yield from _walk_exprs(e.arg)
    elif isinstance(e, EBin):
        yield from _walk_exprs(e.left)
        yield from _walk_exprs(e.right)


# ---------------------------------------------------------------------------
# Flattening


def expr_text(e: Expr) -> str:
    if isinstance(e, ENum):
        return str(e.value)
    if isinstance(e, EVar):
        return e.name
    if isinstance(e, EArr):
        return f"{e.array}[{expr_text(e.index)}]"
    if isinstance(e, EUn):
        return ("-" if e.op == "neg" else "!") + f"({expr_text(e.arg)})"
    return f"({expr_text(e.left)} {e.op} {expr_text(e.right)})"


def program_text(p: ImpProgram) -> str:
    """Concrete syntax for a flat program (parses back to the same thing)."""
    lines = []
    for d in p.decls:
        if d.kind == "int":
            lines.append(f"int {d.name};")
        else:
            lines.append(f"array {d.name}[{d.dim}];")
    for s in p.stmts:
        lab = f"{s.label}: "
        if isinstance(s, SHalt):
            lines.append(f"{lab}halt;")
        elif isinstance(s, SAssign):
            lines.append(f"{lab}{s.var} = {expr_text(s.expr)};")
        elif isinstance(s, SArrAssign):
            lines.append(f"{lab}{s.array}[{expr_text(s.index)}] = {expr_text(s.expr)};")
        elif isinstance(s, SGoto):
            lines.append(f"{lab}goto {s.target};")
        elif isinstance(s, SIte):
            lines.append(f"{lab}if ({expr_text(s.cond)}) {s.then_label} else {s.else_label};")
        else:
            raise ImpValidationError("program_text supports flat programs only")
    return "\n".join(lines) + "\n"


def lower_structured(p: ImpProgram) -> ImpProgram:
    """Translate while / if-else blocks into labeled conditional jumps.

    Commands are numbered in emission order; the final halt keeps the
    distinguished label h.  Flat programs are returned unchanged.
    """
    if p.is_flat():
        return p

    cmds: list[Stmt] = []
    patches: list[tuple[int, str, int]] = []  # (cmd index, field, target index)

    def emit(s: Stmt) -> int:
        cmds.append(s)
        return len(cmds) - 1

    def lower_block(stmts: list[Stmt]) -> None:
        for s in stmts:
            lower_one(s)

    def lower_one(s: Stmt) -> None:
        if isinstance(s, SAssign):
            emit(SAssign(s.var, s.expr))
        elif isinstance(s, SArrAssign):
            emit(SArrAssign(s.array, s.index, s.expr))
        elif isinstance(s, SHalt):
            emit(SHalt())
        elif isinstance(s, SWhile):
            test = emit(SIte(s.cond, 0, 0))
            patches.append((test, "then_label", test + 1))
            lower_block(s.body)
            back = emit(SGoto(0))
            patches.append((back, "target", test))
            patches.append((test, "else_label", len(cmds)))
        elif isinstance(s, SIf):
            test = emit(SIte(s.cond, 0, 0))
            patches.append((test, "then_label", test + 1))
            lower_block(s.then)
            if s.els is not None:
                skip = emit(SGoto(0))
                patches.append((test, "else_label", len(cmds)))
                lower_block(s.els)
                patches.append((skip, "target", len(cmds)))
            else:
                patches.append((test, "else_label", len(cmds)))
        else:
            raise ImpValidationError("goto in structured program")

    lower_block(p.stmts)

    def index_label(i: int) -> Label:
        if i == len(cmds) - 1 and isinstance(cmds[-1], SHalt):
            return "h"
        return i

    for idx, fieldname, target in patches:
        setattr(cmds[idx], fieldname, index_label(target))
    for i, c in enumerate(cmds):
        c.label = index_label(i)

    out = ImpProgram(p.decls, cmds)
    validate(out)
    return out
