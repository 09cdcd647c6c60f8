"""Shared test fixtures: the worked examples, structural clause-set
comparison, and random program generation."""

from __future__ import annotations

import random
from pathlib import Path

from clpverify.clp import Atom, Clause, parse_clause, term_to_linexpr
from clpverify.imp import (
    EBin,
    ENum,
    EVar,
    ImpProgram,
    SAssign,
    Decl,
    SHalt,
    SIte,
    SGoto,
    lower_structured,
)
from clpverify.imp import parse_program as parse_imp
from clpverify.interp import Env, run
from clpverify.solver import LinConstraint, LinExpr
from clpverify.terms import App, IntConst, Subst, Var, apply_subst, match

GOLDEN = Path(__file__).parent / "golden"

INCREASE_IMP = """
int i; int j; int n;
0: while (i < 2*n) {
  if (i < n) { i = i + 1; } else { j = i + 1; }
  i = i + 1;
}
h: halt;
"""

INCREASE_SPEC = """
init: i = 0, j = 0;
error: i < j;
"""

INCREASE_MUTANT_SPEC = """
init: i = 0, j = 0, n >= 1;
error: i >= j;
"""

GCD_IMP = """
int m; int n; int x; int y; int z;
x = m;
y = n;
while (x != y) { if (x > y) { x = x - y; } else { y = y - x; } }
z = x;
h: halt;
"""

GCD_SPEC = """
init: m >= 1, n >= 1;
error: exists d: gcd(m, n, d), d != z;
clauses:
  gcd(X,Y,D) :- X > Y, X1 = X - Y, gcd(X1,Y,D).
  gcd(X,Y,D) :- X < Y, Y1 = Y - X, gcd(X,Y1,D).
  gcd(X,Y,D) :- X = Y, Y = D.
"""

ARRAYMAX_IMP = """
int i; int n; array a[n]; int max;
0: while (i < n) {
  if (a[i] > max) { max = a[i]; }
  i = i + 1;
}
h: halt;
"""

ARRAYMAX_SPEC = """
init: i = 0, n >= 1, max = a[i];
error: exists k: k >= 0, k < n, a[k] > max;
"""


def C(text: str) -> LinConstraint:
    """Constraint from the dump syntax, e.g. C("I < J, I = 0")."""
    return parse_clause("c :- " + text + ".").cstr


def parse_clauses(text: str) -> list[Clause]:
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("%"):
            out.append(parse_clause(line))
    return out


# ---------------------------------------------------------------------------
# Structural clause-set comparison (up to variable renaming, atom order,
# constraint equivalence, and a bijection on introduced predicate names)


def _atom_key(a: Atom) -> tuple[str, int]:
    return (a.pred, len(a.args))


def _try_clause(a: Clause, b: Clause, pred_map: dict[str, str]) -> bool:
    """Does clause a (as pattern) subsume-match clause b with equal meaning?"""
    if len(a.body) != len(b.body):
        return False
    pm = dict(pred_map)
    if not _pred_ok(a.head.pred, b.head.pred, pm) or len(a.head.args) != len(b.head.args):
        return False
    s = match(App("$h", a.head.args), App("$h", b.head.args))
    if s is None:
        return False

    def assign(k: int, used: set[int], s: Subst, pm: dict[str, str]) -> bool:
        if k == len(a.body):
            return _cstr_match(a, b, s)
        pa = a.body[k]
        for j, pb in enumerate(b.body):
            if j in used or len(pa.args) != len(pb.args):
                continue
            pm2 = dict(pm)
            if not _pred_ok(pa.pred, pb.pred, pm2):
                continue
            s2 = match(App("$a", pa.args), App("$a", pb.args), s)
            if s2 is None:
                continue
            if assign(k + 1, used | {j}, s2, pm2):
                pm.clear()
                pm.update(pm2)
                return True
        return False

    ok = assign(0, set(), s, pm)
    if ok:
        pred_map.clear()
        pred_map.update(pm)
    return ok


def _pred_ok(pa: str, pb: str, pm: dict[str, str]) -> bool:
    if pa in pm:
        return pm[pa] == pb
    if pb in pm.values():
        return False
    if (pa == pb) or (pa.startswith("new") and pb.startswith("new")):
        pm[pa] = pb
        return True
    return False


def _cstr_match(a: Clause, b: Clause, s: Subst) -> bool:
    binding = {}
    for v in a.cstr.vars():
        t = apply_subst(Var(v), s)
        e = term_to_linexpr(t)
        if e is None:
            return False
        binding[v] = e
    mapped = a.cstr.instantiate(binding)
    live = set(b.atom_vars())
    mapped = mapped.project(live | set(mapped.vars()))
    return mapped.equivalent(b.cstr)


def clauses_equal(a: Clause, b: Clause) -> bool:
    return _try_clause(a, b, {}) or _try_clause(b, a, {})


def programs_equal(golden: list[Clause], got: list[Clause]) -> bool:
    """Bijective matching of two clause sets, direction-tolerant per clause."""
    if len(golden) != len(got):
        return False

    def search(remaining: list[Clause], pool: list[Clause], pred_map: dict[str, str]) -> bool:
        if not remaining:
            return True
        a = remaining[0]
        for j, b in enumerate(pool):
            for first, second in ((a, b), (b, a)):
                pm = dict(pred_map)
                if first is b:
                    pm = {v: k for k, v in pm.items()}
                if _try_clause(first, second, pm):
                    pm2 = pm if first is a else {v: k for k, v in pm.items()}
                    if search(remaining[1:], pool[:j] + pool[j + 1 :], pm2):
                        pred_map.clear()
                        pred_map.update(pm2)
                        return True
        return False

    return search(list(golden), list(got), {})


def assert_programs_equal(golden_text: str, got: list[Clause], label: str = "") -> None:
    golden = parse_clauses(golden_text)
    if not programs_equal(golden, got):
        from clpverify.clp import render_clause

        got_text = "\n".join(render_clause(c, canonical=True) for c in got)
        raise AssertionError(
            f"clause sets differ{' (' + label + ')' if label else ''}:\n"
            f"--- expected ---\n{golden_text.strip()}\n--- got ---\n{got_text}"
        )


# ---------------------------------------------------------------------------
# Random flat programs over a few integer variables


VARS = ["x", "y", "z"]


def random_expr(rng: random.Random, names: list[str], depth: int = 2):
    pick = rng.random()
    if depth == 0 or pick < 0.35:
        if rng.random() < 0.5:
            return ENum(rng.randint(-3, 3))
        return EVar(rng.choice(names))
    op = rng.choice(["+", "-", "*"])
    if op == "*":
        return EBin("*", ENum(rng.randint(-3, 3)), random_expr(rng, names, 0))
    return EBin(op, random_expr(rng, names, depth - 1), random_expr(rng, names, depth - 1))


def random_cond(rng: random.Random, names: list[str]):
    op = rng.choice(["<", "<=", ">", ">=", "==", "!="])
    return EBin(op, random_expr(rng, names, 1), random_expr(rng, names, 1))


def random_flat_program(rng: random.Random, max_cmds: int = 8, n_vars: int = 3) -> ImpProgram:
    names = VARS[:n_vars]
    k = rng.randint(2, max_cmds - 1)
    labels = list(range(k)) + ["h"]
    stmts = []
    for i in range(k):
        later = [l for l in labels[i + 1 :]]
        anywhere = labels[:i] + later
        pick = rng.random()
        if pick < 0.55:
            stmts.append(SAssign(rng.choice(names), random_expr(rng, names), label=i))
        elif pick < 0.85:
            t1 = rng.choice(later if rng.random() < 0.8 else anywhere)
            t2 = rng.choice(later if rng.random() < 0.8 else anywhere)
            stmts.append(SIte(random_cond(rng, names), t1, t2, label=i))
        else:
            t = rng.choice(later if rng.random() < 0.85 else anywhere)
            stmts.append(SGoto(t, label=i))
    stmts.append(SHalt(label="h"))
    return ImpProgram([Decl(n, "int") for n in names], stmts)


def random_concrete_triple(rng: random.Random, trace_bound: int = 50):
    """A halting flat program with a concrete initial store and a random
    error condition; resamples until the run halts within the bound."""
    while True:
        prog = random_flat_program(rng)
        names = [d.name for d in prog.decls]
        env = Env(ints={n: rng.randint(-3, 3) for n in names})
        try:
            r = run(prog, env.copy(), trace_bound)
        except Exception:
            continue
        if not r.halted:
            continue
        init = ", ".join(f"{n} = {env.ints[n]}" for n in names)
        cond = random_cond(rng, names)
        opmap = {"==": "=", "!=": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}
        err = _expr_text(cond)
        spec = f"init: {init};\nerror: {err};"
        return prog, env, spec, r


def _expr_text(e) -> str:
    if isinstance(e, ENum):
        return str(e.value)
    if isinstance(e, EVar):
        return e.name
    if isinstance(e, EBin):
        op = {"==": "=="}.get(e.op, e.op)
        return f"({_expr_text(e.left)} {op} {_expr_text(e.right)})"
    from clpverify.imp import EUn

    if isinstance(e, EUn):
        return ("-" if e.op == "neg" else "!") + f"({_expr_text(e.arg)})"
    raise ValueError(e)
