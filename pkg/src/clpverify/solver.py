"""Exact linear arithmetic over integer-valued variables.

The kernel keeps every constraint in a solved normal form:

* ``eqs``   -- a triangular substitution ``v = affine expression`` (pivots
  have unit coefficient, so right-hand sides stay integral),
* ``ineqs`` -- ``sum(c_i * x_i) <= b`` atoms over the remaining free
  variables, gcd-tightened (coefficients divided by their gcd, bound
  floored, which is exact over the integers),
* ``diseqs`` -- affine expressions asserted nonzero, kept as a side set,
* ``products`` -- pending ``v = l * r`` equations that are linearised as
  soon as one side becomes constant; a product that never resolves is a
  nonlinearity error at the caller's decision point.

Satisfiability uses Fourier-Motzkin elimination with exact integer
arithmetic; disequalities are handled by case splitting each one into the
two strict sides.  Rational unsatisfiability of the tightened system is
sound for refuting integer solutions.  Integer satisfiability adds a
branch-and-bound search on top of the rational relaxation and returns a
substitution-checked witness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence


class SolverBudgetError(Exception):
    """Raised when elimination exceeds the configured atom budget."""


class NonlinearError(Exception):
    """Raised when a pending product cannot be linearised."""


# ---------------------------------------------------------------------------
# Affine expressions


@dataclass(frozen=True)
class LinExpr:
    """sum(coeff * var) + const with integer coefficients."""

    coeffs: tuple[tuple[str, int], ...]
    const: int = 0

    @staticmethod
    def of(mapping: dict[str, int], const: int = 0) -> "LinExpr":
        items = tuple(sorted((v, c) for v, c in mapping.items() if c != 0))
        return LinExpr(items, const)

    @staticmethod
    def var(name: str) -> "LinExpr":
        return LinExpr(((name, 1),), 0)

    @staticmethod
    def num(k: int) -> "LinExpr":
        return LinExpr((), k)

    def as_dict(self) -> dict[str, int]:
        return dict(self.coeffs)

    def is_const(self) -> bool:
        return not self.coeffs

    def vars(self) -> list[str]:
        return [v for v, _ in self.coeffs]

    def coeff(self, v: str) -> int:
        for name, c in self.coeffs:
            if name == v:
                return c
        return 0

    def add(self, other: "LinExpr") -> "LinExpr":
        d = self.as_dict()
        for v, c in other.coeffs:
            d[v] = d.get(v, 0) + c
        return LinExpr.of(d, self.const + other.const)

    def sub(self, other: "LinExpr") -> "LinExpr":
        return self.add(other.scale(-1))

    def scale(self, k: int) -> "LinExpr":
        if k == 0:
            return LinExpr((), 0)
        return LinExpr(tuple((v, c * k) for v, c in self.coeffs), self.const * k)

    def subst(self, v: str, rhs: "LinExpr") -> "LinExpr":
        c = self.coeff(v)
        if c == 0:
            return self
        d = self.as_dict()
        del d[v]
        base = LinExpr.of(d, self.const)
        return base.add(rhs.scale(c))

    def eval(self, env: dict[str, int]) -> int:
        return self.const + sum(c * env[v] for v, c in self.coeffs)

    def eval_frac(self, env: dict[str, Fraction]) -> Fraction:
        return Fraction(self.const) + sum(Fraction(c) * env[v] for v, c in self.coeffs)

    def __str__(self) -> str:
        return render_expr(self)


def render_expr(e: LinExpr, drop_const: bool = False) -> str:
    parts: list[str] = []
    for v, c in e.coeffs:
        if c == 1:
            term = v
        elif c == -1:
            term = f"-{v}"
        else:
            term = f"{c}*{v}"
        if parts and not term.startswith("-"):
            parts.append("+" + term)
        else:
            parts.append(term)
    if e.const != 0 or not parts:
        if not drop_const or not parts:
            k = str(e.const)
            if parts and e.const > 0:
                k = "+" + k
            parts.append(k)
    return "".join(parts)


def _split_sides(e: LinExpr) -> tuple[LinExpr, LinExpr]:
    """Split e into (pos, neg) with e = pos - neg, both with >= 0 coefficients."""
    pos: dict[str, int] = {}
    neg: dict[str, int] = {}
    for v, c in e.coeffs:
        if c > 0:
            pos[v] = c
        else:
            neg[v] = -c
    return LinExpr.of(pos, 0), LinExpr.of(neg, 0)


# ---------------------------------------------------------------------------
# Atomic pieces used by widening operators and pretty-printing


@dataclass(frozen=True)
class LAtom:
    """One atomic constraint: kind 'le' means expr <= 0, 'diseq' means expr != 0."""

    kind: str
    expr: LinExpr

    def sumcoeff(self) -> int:
        return sum(abs(c) for _, c in self.expr.coeffs)

    def __str__(self) -> str:
        if self.kind == "diseq":
            pos, neg = _split_sides(self.expr)
            lhs = render_expr(LinExpr(pos.coeffs, self.expr.const))
            return f"{lhs} =\\= {render_expr(neg)}"
        return render_le(self.expr)


def render_le(e: LinExpr) -> str:
    """Render expr <= 0 in a readable relational form."""
    pos, neg = _split_sides(e)
    b = -e.const
    if not pos.coeffs:
        # 0 <= neg + b  ->  neg >= -b
        return f"{render_expr(neg)} >= {-b}"
    if b == -1 and neg.coeffs:
        return f"{render_expr(pos)} < {render_expr(neg)}"
    if neg.coeffs:
        rhs = LinExpr(neg.coeffs, b)
        return f"{render_expr(pos)} =< {render_expr(rhs)}"
    return f"{render_expr(pos)} =< {b}"


# ---------------------------------------------------------------------------
# The constraint proper

_SAT_CACHE: dict[tuple, bool] = {}
_SAT_CACHE_LIMIT = 200_000


@dataclass
class LinConstraint:
    false: bool = False
    eqs: dict[str, LinExpr] = field(default_factory=dict)
    ineqs: list[LinExpr] = field(default_factory=list)  # each expr <= 0
    diseqs: list[LinExpr] = field(default_factory=list)  # each expr != 0
    products: list[tuple[str, LinExpr, LinExpr]] = field(default_factory=list)

    # -- construction ------------------------------------------------------

    @staticmethod
    def true() -> "LinConstraint":
        return LinConstraint()

    @staticmethod
    def falsum() -> "LinConstraint":
        return LinConstraint(false=True)

    def copy(self) -> "LinConstraint":
        return LinConstraint(
            self.false,
            dict(self.eqs),
            list(self.ineqs),
            list(self.diseqs),
            list(self.products),
        )

    def is_true(self) -> bool:
        return not (self.false or self.eqs or self.ineqs or self.diseqs or self.products)

    def _reduce(self, e: LinExpr) -> LinExpr:
        for v, c in e.coeffs:
            if v in self.eqs:
                e = e.subst(v, self.eqs[v])
        return e

    def add_eq(self, e: LinExpr) -> None:
        """Assert e = 0."""
        if self.false:
            return
        e = self._reduce(e)
        if e.is_const():
            if e.const != 0:
                self.false = True
            return
        g = math.gcd(*[abs(c) for _, c in e.coeffs])
        if e.const % g != 0:
            self.false = True  # no integer solution to g | const
            return
        e = LinExpr(tuple((v, c // g) for v, c in e.coeffs), e.const // g)
        pivot = None
        for v, c in e.coeffs:
            if abs(c) == 1:
                pivot = (v, c)
        if pivot is None:
            # Keep as a pair of inequalities; exact pivoting would need rationals.
            self.add_le(e)
            self.add_le(e.scale(-1))
            return
        v, c = pivot
        rhs = e.subst(v, LinExpr.num(0)).scale(-c)  # v = -c*(e - c*v), since c*v + rest = 0
        self._install_eq(v, rhs)

    def _install_eq(self, v: str, rhs: LinExpr) -> None:
        for w in list(self.eqs):
            self.eqs[w] = self.eqs[w].subst(v, rhs)
        self.eqs[v] = rhs
        ineqs, self.ineqs = self.ineqs, []
        diseqs, self.diseqs = self.diseqs, []
        for e in ineqs:
            self.add_le(e.subst(v, rhs))
        for e in diseqs:
            self.add_diseq(e.subst(v, rhs))
        self.products = [
            (p, l.subst(v, rhs), r.subst(v, rhs)) for p, l, r in self.products
        ]
        self._resolve_products()

    def define_as(self, var: str, rhs: LinExpr) -> None:
        """Install ``var = rhs`` solving for `var` when possible.

        Unlike add_eq, the pivot is not heuristic: callers use this to
        steer which variable gets eliminated from the atom view.
        """
        if self.false:
            return
        rhs = self._reduce(rhs)
        if var in self.eqs or rhs.coeff(var) != 0:
            self.add_eq(LinExpr.var(var).sub(rhs))
            return
        self._install_eq(var, rhs)

    def add_le(self, e: LinExpr) -> None:
        """Assert e <= 0."""
        if self.false:
            return
        e = self._reduce(e)
        if e.is_const():
            if e.const > 0:
                self.false = True
            return
        g = math.gcd(*[abs(c) for _, c in e.coeffs])
        coeffs = tuple((v, c // g) for v, c in e.coeffs)
        bound = math.floor(Fraction(-e.const, g))
        e = LinExpr(coeffs, -bound)
        for i, old in enumerate(self.ineqs):
            if old.coeffs == e.coeffs:
                if e.const > old.const:
                    self.ineqs[i] = e
                self._check_pair(e)
                return
        self.ineqs.append(e)
        self._check_pair(e)

    def _check_pair(self, e: LinExpr) -> None:
        """Upgrade an opposite pair of inequalities to a solvable equality."""
        neg = e.scale(-1)
        for other in self.ineqs:
            if other.coeffs == neg.coeffs:
                if other.const + e.const > 0:
                    self.false = True
                elif other.const == -e.const and any(abs(c) == 1 for _, c in e.coeffs):
                    self.ineqs = [x for x in self.ineqs if x.coeffs not in (e.coeffs, neg.coeffs)]
                    self.add_eq(e)
                return

    def add_diseq(self, e: LinExpr) -> None:
        """Assert e != 0."""
        if self.false:
            return
        e = self._reduce(e)
        if e.is_const():
            if e.const == 0:
                self.false = True
            return
        g = math.gcd(*[abs(c) for _, c in e.coeffs])
        if e.const % g != 0:
            return  # always true over the integers
        e = LinExpr(tuple((v, c // g) for v, c in e.coeffs), e.const // g)
        if e.coeffs[0][1] < 0:
            e = e.scale(-1)
        if e not in self.diseqs:
            self.diseqs.append(e)

    def add_product(self, v: str, l: LinExpr, r: LinExpr) -> None:
        if self.false:
            return
        self.products.append((v, self._reduce(l), self._reduce(r)))
        self._resolve_products()

    def _resolve_products(self) -> None:
        changed = True
        while changed and not self.false:
            changed = False
            pending = []
            for v, l, r in self.products:
                l, r = self._reduce(l), self._reduce(r)
                if l.is_const():
                    self.add_eq(LinExpr.var(v).sub(r.scale(l.const)))
                    changed = True
                elif r.is_const():
                    self.add_eq(LinExpr.var(v).sub(l.scale(r.const)))
                    changed = True
                else:
                    pending.append((v, l, r))
            self.products = pending

    def require_linear(self) -> None:
        if self.products:
            v, l, r = self.products[0]
            raise NonlinearError(f"unresolved product {v} = ({l}) * ({r})")

    def conj(self, other: "LinConstraint") -> "LinConstraint":
        out = self.copy()
        out.merge(other)
        return out

    def merge(self, other: "LinConstraint") -> None:
        if other.false:
            self.false = True
            return
        for v, rhs in other.eqs.items():
            self.add_eq(LinExpr.var(v).sub(rhs))
        for e in other.ineqs:
            self.add_le(e)
        for e in other.diseqs:
            self.add_diseq(e)
        for v, l, r in other.products:
            self.add_product(v, l, r)

    # -- variable bookkeeping ---------------------------------------------

    def vars(self) -> set[str]:
        out: set[str] = set()
        for v, rhs in self.eqs.items():
            out.add(v)
            out.update(rhs.vars())
        for e in self.ineqs:
            out.update(e.vars())
        for e in self.diseqs:
            out.update(e.vars())
        for v, l, r in self.products:
            out.add(v)
            out.update(l.vars())
            out.update(r.vars())
        return out

    def rename(self, mapping: dict[str, str]) -> "LinConstraint":
        def rx(e: LinExpr) -> LinExpr:
            return LinExpr.of({mapping.get(v, v): c for v, c in e.coeffs}, e.const)

        out = LinConstraint(self.false)
        for v, rhs in self.eqs.items():
            out.add_eq(LinExpr.var(mapping.get(v, v)).sub(rx(rhs)))
        for e in self.ineqs:
            out.add_le(rx(e))
        for e in self.diseqs:
            out.add_diseq(rx(e))
        for v, l, r in self.products:
            out.add_product(mapping.get(v, v), rx(l), rx(r))
        return out

    def instantiate(self, binding: dict[str, Optional[LinExpr]]) -> "LinConstraint":
        """Substitute variables by affine expressions.

        A None value marks a variable bound to a non-numeric term: any
        equation or inequality over it is unsatisfiable, a disequality is
        vacuously true.
        """
        bad = {v for v, e in binding.items() if e is None}
        good = {v: e for v, e in binding.items() if e is not None}

        def rx(e: LinExpr) -> Optional[LinExpr]:
            if any(v in bad for v in e.vars()):
                return None
            for v in list(e.vars()):
                if v in good:
                    e = e.subst(v, good[v])
            return e

        out = LinConstraint(self.false)
        for v, rhs in self.eqs.items():
            lhs = rx(LinExpr.var(v).sub(rhs))
            if lhs is None:
                out.false = True
            else:
                out.add_eq(lhs)
        for e in self.ineqs:
            x = rx(e)
            if x is None:
                out.false = True
            else:
                out.add_le(x)
        for e in self.diseqs:
            x = rx(e)
            if x is not None:
                out.add_diseq(x)
        for v, l, r in self.products:
            lv = rx(LinExpr.var(v))
            lx, rxp = rx(l), rx(r)
            if lv is None or lx is None or rxp is None:
                out.false = True
            else:
                out.add_product_expr(lv, lx, rxp)
        return out

    def add_product_expr(self, target: LinExpr, l: LinExpr, r: LinExpr) -> None:
        """target = l * r where target may itself be affine."""
        if l.is_const() or r.is_const():
            k, other = (l.const, r) if l.is_const() else (r.const, l)
            self.add_eq(target.sub(other.scale(k)))
            return
        tv = target.vars()
        if len(tv) == 1 and target.coeff(tv[0]) == 1 and target.const == 0:
            self.add_product(tv[0], l, r)
        else:
            raise NonlinearError(f"product target {target} not a plain variable")

    # -- atoms view ---------------------------------------------------------

    def atoms(self, split_eqs: bool = True) -> list[LAtom]:
        """Atomic view; equalities split into their two halves by default."""
        if self.false:
            return [LAtom("le", LinExpr((), 1))]  # 1 <= 0
        out: list[LAtom] = []
        for v, rhs in self.eqs.items():
            e = LinExpr.var(v).sub(rhs)
            if split_eqs:
                out.append(LAtom("le", e))
                out.append(LAtom("le", e.scale(-1)))
            else:
                out.append(LAtom("eq", e))
        for e in self.ineqs:
            out.append(LAtom("le", e))
        for e in self.diseqs:
            out.append(LAtom("diseq", e))
        return out

    def add_rel(self, op: str, lhs: LinExpr, rhs: LinExpr) -> None:
        d = lhs.sub(rhs)
        if op == "=":
            self.add_eq(d)
        elif op == "!=":
            self.add_diseq(d)
        elif op == "<":
            self.add_le(LinExpr(d.coeffs, d.const + 1))
        elif op == "<=":
            self.add_le(d)
        elif op == ">":
            n = d.scale(-1)
            self.add_le(LinExpr(n.coeffs, n.const + 1))
        elif op == ">=":
            self.add_le(d.scale(-1))
        else:
            raise ValueError(f"unknown relation {op!r}")

    @staticmethod
    def from_atoms(atoms: Iterable[LAtom]) -> "LinConstraint":
        out = LinConstraint()
        for a in atoms:
            if a.kind == "le":
                out.add_le(a.expr)
            elif a.kind == "eq":
                out.add_eq(a.expr)
            else:
                out.add_diseq(a.expr)
        return out

    def with_atom(self, a: LAtom) -> "LinConstraint":
        out = self.copy()
        if a.kind == "le":
            out.add_le(a.expr)
        else:
            out.add_diseq(a.expr)
        return out

    # -- satisfiability ------------------------------------------------------

    def _key(self) -> tuple:
        return (
            tuple(sorted((e.coeffs, e.const) for e in self.ineqs)),
            tuple(sorted((e.coeffs, e.const) for e in self.diseqs)),
        )

    def is_sat_rational(self, budget: int = 20000) -> bool:
        """Satisfiability of the gcd-tightened system (sound for integers)."""
        if self.false:
            return False
        if not self.ineqs and not self.diseqs:
            return True
        key = self._key()
        hit = _SAT_CACHE.get(key)
        if hit is not None:
            return hit
        result = _sat_with_diseqs(list(self.ineqs), list(self.diseqs), budget)
        if len(_SAT_CACHE) < _SAT_CACHE_LIMIT:
            _SAT_CACHE[key] = result
        return result

    def is_sat_integer(self, budget: int = 200) -> tuple[str, Optional[dict[str, int]]]:
        """Return ('sat', witness) | ('unsat', None) | ('unknown', None)."""
        if self.false:
            return "unsat", None
        if not self.is_sat_rational():
            return "unsat", None
        if self.products:
            return "unknown", None
        atoms = list(self.ineqs)
        status, model = _int_search(atoms, list(self.diseqs), [budget])
        if status == "sat":
            assert model is not None
            env = dict(model)
            for v in self.free_vars():
                env.setdefault(v, 0)
            # solved variables evaluate from their defining expressions
            changed = True
            pending = dict(self.eqs)
            while changed and pending:
                changed = False
                for v, rhs in list(pending.items()):
                    if all(w in env for w in rhs.vars()):
                        env[v] = rhs.eval(env)
                        del pending[v]
                        changed = True
            if pending:
                return "unknown", None
            if self._check_model(env):
                return "sat", env
            return "unknown", None
        return status, None

    def free_vars(self) -> set[str]:
        out: set[str] = set()
        for e in self.ineqs:
            out.update(e.vars())
        for e in self.diseqs:
            out.update(e.vars())
        for v, rhs in self.eqs.items():
            out.update(w for w in rhs.vars() if w not in self.eqs)
        return out

    def _check_model(self, env: dict[str, int]) -> bool:
        try:
            for v, rhs in self.eqs.items():
                if env[v] != rhs.eval(env):
                    return False
            for e in self.ineqs:
                if e.eval(env) > 0:
                    return False
            for e in self.diseqs:
                if e.eval(env) == 0:
                    return False
        except KeyError:
            return False
        return True

    # -- entailment and projection -------------------------------------------

    def entails(self, other: "LinConstraint", budget: int = 20000) -> bool:
        """True iff every integer model of self satisfies other."""
        if self.false:
            return True
        if other.false:
            return not self.is_sat_rational(budget)
        for a in other.atoms():
            if not self.entails_atom(a, budget):
                return False
        if other.products:
            return False
        return True

    def entails_atom(self, a: LAtom, budget: int = 20000) -> bool:
        if self.false:
            return True
        if a.kind == "le":
            probe = self.copy()
            neg = a.expr.scale(-1)
            probe.add_le(LinExpr(neg.coeffs, neg.const + 1))  # expr >= 1
            return not probe.is_sat_rational(budget)
        if a.kind == "eq":
            return self.entails_atom(LAtom("le", a.expr), budget) and self.entails_atom(
                LAtom("le", a.expr.scale(-1)), budget
            )
        probe = self.copy()
        probe.add_eq(a.expr)
        return not probe.is_sat_rational(budget)

    def equivalent(self, other: "LinConstraint") -> bool:
        return self.entails(other) and other.entails(self)

    def project(self, keep: set[str], budget: int = 20000) -> "LinConstraint":
        """Strongest rational consequence over `keep` (integer over-approximation)."""
        out = self.copy()
        out.require_linear()
        if out.false:
            return out
        # Re-pivot equations so kept variables stay expressible.
        for v in list(out.eqs):
            if v in keep:
                rhs = out.eqs[v]
                drop = [u for u in rhs.vars() if u not in keep]
                for u in drop:
                    if out._repivot(v, u):
                        break
        for v in [v for v in out.eqs if v not in keep]:
            del out.eqs[v]
        for v in sorted({u for e in out.ineqs for u in e.vars()} - keep):
            out._eliminate(v, budget)
        # disequalities over eliminated variables
        kept_diseqs = []
        for e in out.diseqs:
            if all(u in keep or u in out.eqs for u in e.vars()):
                kept_diseqs.append(e)
                continue
            lo = out.copy()
            lo.diseqs = []
            lo.add_le(LinExpr(e.coeffs, e.const + 1))
            hi = out.copy()
            hi.diseqs = []
            hi.add_le(LinExpr(e.scale(-1).coeffs, -e.const + 1))
            if not lo.is_sat_rational(budget) and not hi.is_sat_rational(budget):
                out.false = True
        out.diseqs = kept_diseqs
        # equations may still mention eliminated frees through their rhs
        for v in list(out.eqs):
            if any(u not in keep and u not in out.eqs for u in out.eqs[v].vars()):
                pair = LinExpr.var(v).sub(out.eqs[v])
                del out.eqs[v]
                if v in keep:
                    out.add_le(pair)
                    out.add_le(pair.scale(-1))
                    for u in [u for u in pair.vars() if u not in keep and u != v]:
                        out._eliminate(u, budget)
        return out

    def _repivot(self, v: str, u: str) -> bool:
        """Rewrite the eq for v so that u becomes the solved variable."""
        rhs = self.eqs[v]
        c = rhs.coeff(u)
        if abs(c) != 1:
            return False
        # v = rhs  ->  u = (v - (rhs - c*u)) / c
        rest = rhs.subst(u, LinExpr.num(0))
        new_rhs = LinExpr.var(v).sub(rest).scale(c)
        del self.eqs[v]
        for w in list(self.eqs):
            self.eqs[w] = self.eqs[w].subst(u, new_rhs)
        self.eqs[u] = new_rhs
        self.ineqs = [e.subst(u, new_rhs) for e in self.ineqs]
        self.diseqs = [e.subst(u, new_rhs) for e in self.diseqs]
        return True

    def _eliminate(self, v: str, budget: int) -> None:
        lower, upper, rest = [], [], []
        for e in self.ineqs:
            c = e.coeff(v)
            if c > 0:
                upper.append(e)
            elif c < 0:
                lower.append(e)
            else:
                rest.append(e)
        if len(lower) * len(upper) + len(rest) > budget:
            raise SolverBudgetError(f"elimination budget exceeded on {v}")
        out = LinConstraint()
        out.ineqs = rest
        self.ineqs = rest
        for lo in lower:
            for up in upper:
                cl, cu = -lo.coeff(v), up.coeff(v)
                comb = lo.scale(cu).add(up.scale(cl))
                self.add_le(comb)
                if self.false:
                    return

    def minimized(self) -> "LinConstraint":
        """Drop inequalities/disequalities entailed by the rest."""
        out = self.copy()
        if out.false or out.products:
            return out
        i = 0
        while i < len(out.ineqs):
            probe = out.copy()
            atom = probe.ineqs.pop(i)
            if probe.entails_atom(LAtom("le", atom)):
                out.ineqs.pop(i)
            else:
                i += 1
        i = 0
        while i < len(out.diseqs):
            probe = out.copy()
            atom = probe.diseqs.pop(i)
            if probe.entails_atom(LAtom("diseq", atom)):
                out.diseqs.pop(i)
            else:
                i += 1
        return out

    def simplify_diseqs(self) -> Optional["LinConstraint"]:
        """Case-split each disequality; absorb it when one side is impossible.

        Returns None when the constraint is unsatisfiable (both sides of
        some disequality fail), otherwise an equivalent constraint where
        every remaining disequality genuinely has two open sides.
        """
        out = self.copy()
        if out.false:
            return None
        changed = True
        while changed:
            changed = False
            for i, d in enumerate(out.diseqs):
                rest = out.copy()
                rest.diseqs = out.diseqs[:i] + out.diseqs[i + 1 :]
                lt = rest.copy()
                lt.add_le(LinExpr(d.coeffs, d.const + 1))  # d <= -1
                neg = d.scale(-1)
                gt = rest.copy()
                gt.add_le(LinExpr(neg.coeffs, neg.const + 1))  # d >= 1
                lt_sat = lt.is_sat_rational()
                gt_sat = gt.is_sat_rational()
                if not lt_sat and not gt_sat:
                    return None
                if lt_sat and gt_sat:
                    continue
                out = lt if lt_sat else gt
                changed = True
                break
        return out

    def identified_vars(self) -> list[tuple[str, str]]:
        """Pairs (v, w) where the equations force v = w exactly."""
        out = []
        by_rhs: dict[tuple, str] = {}
        for v, rhs in self.eqs.items():
            if rhs.const == 0 and len(rhs.coeffs) == 1 and rhs.coeffs[0][1] == 1:
                out.append((v, rhs.coeffs[0][0]))
            if rhs.coeffs:
                key = (rhs.coeffs, rhs.const)
                if key in by_rhs:
                    out.append((v, by_rhs[key]))
                else:
                    by_rhs[key] = v
        return out

    # -- rendering -----------------------------------------------------------

    def render_parts(self) -> list[str]:
        if self.false:
            return ["false"]
        parts = []
        for v, rhs in self.eqs.items():
            parts.append(f"{v} = {render_expr(rhs)}")
        for e in self.ineqs:
            parts.append(render_le(e))
        for e in self.diseqs:
            pos, neg = _split_sides(e)
            lhs = LinExpr(pos.coeffs, e.const)
            parts.append(f"{render_expr(lhs)} =\\= {render_expr(neg)}")
        for v, l, r in self.products:
            parts.append(f"{v} = ({render_expr(l)})*({render_expr(r)})")
        return parts

    def __str__(self) -> str:
        if self.is_true():
            return "true"
        return ", ".join(self.render_parts())


# ---------------------------------------------------------------------------
# Fourier-Motzkin machinery on raw atom lists


def _fm_unsat(atoms: list[LinExpr], budget: int) -> bool:
    atoms = list(atoms)
    while True:
        consts = [e for e in atoms if e.is_const()]
        if any(e.const > 0 for e in consts):
            return True
        atoms = [e for e in atoms if not e.is_const()]
        if not atoms:
            return False
        occurring: dict[str, tuple[int, int]] = {}
        for e in atoms:
            for v, c in e.coeffs:
                lo, hi = occurring.get(v, (0, 0))
                occurring[v] = (lo + (c < 0), hi + (c > 0))
        v = min(sorted(occurring), key=lambda x: occurring[x][0] * occurring[x][1])
        lower = [e for e in atoms if e.coeff(v) < 0]
        upper = [e for e in atoms if e.coeff(v) > 0]
        rest = [e for e in atoms if e.coeff(v) == 0]
        if len(lower) * len(upper) + len(rest) > budget:
            raise SolverBudgetError(f"sat budget exceeded on {v}")
        for lo in lower:
            for up in upper:
                cl, cu = -lo.coeff(v), up.coeff(v)
                comb = lo.scale(cu).add(up.scale(cl))
                g = math.gcd(*[abs(c) for _, c in comb.coeffs]) if comb.coeffs else 1
                if comb.coeffs:
                    comb = LinExpr(
                        tuple((w, c // g) for w, c in comb.coeffs),
                        -math.floor(Fraction(-comb.const, g)) if g > 1 else comb.const,
                    )
                rest.append(comb)
        atoms = rest


def _sat_with_diseqs(ineqs: list[LinExpr], diseqs: list[LinExpr], budget: int) -> bool:
    if _fm_unsat(ineqs, budget):
        return False
    if not diseqs:
        return True
    d, rest = diseqs[0], diseqs[1:]
    lt = ineqs + [LinExpr(d.coeffs, d.const + 1)]  # d <= -1
    if _sat_with_diseqs(lt, rest, budget):
        return True
    neg = d.scale(-1)
    gt = ineqs + [LinExpr(neg.coeffs, neg.const + 1)]  # d >= 1
    return _sat_with_diseqs(gt, rest, budget)


def _rational_sample(atoms: list[LinExpr]) -> Optional[dict[str, Fraction]]:
    """A rational model of the conjunction of `atoms` (each <= 0), or None."""
    order: list[tuple[str, list[LinExpr]]] = []
    work = list(atoms)
    while True:
        if any(e.is_const() and e.const > 0 for e in work):
            return None
        work = [e for e in work if not e.is_const()]
        vars_here = sorted({v for e in work for v in e.vars()})
        if not vars_here:
            break
        v = vars_here[0]
        involved = [e for e in work if e.coeff(v) != 0]
        rest = [e for e in work if e.coeff(v) == 0]
        order.append((v, involved))
        lower = [e for e in involved if e.coeff(v) < 0]
        upper = [e for e in involved if e.coeff(v) > 0]
        for lo in lower:
            for up in upper:
                rest.append(lo.scale(up.coeff(v)).add(up.scale(-lo.coeff(v))))
        work = rest
    env: dict[str, Fraction] = {}
    for v, involved in reversed(order):
        lo: Optional[Fraction] = None
        hi: Optional[Fraction] = None
        for e in involved:
            c = e.coeff(v)
            val = e.subst(v, LinExpr.num(0)).eval_frac(env)
            bound = Fraction(-val, c)
            if c > 0:
                hi = bound if hi is None or bound < hi else hi
            else:
                lo = bound if lo is None or bound > lo else lo
        if lo is not None and hi is not None and lo > hi:
            return None
        env[v] = _pick_value(lo, hi)
    return env


def _pick_value(lo: Optional[Fraction], hi: Optional[Fraction]) -> Fraction:
    if lo is None and hi is None:
        return Fraction(0)
    if lo is None:
        return Fraction(min(0, math.floor(hi)))
    if hi is None:
        return Fraction(max(0, math.ceil(lo)))
    ilo, ihi = math.ceil(lo), math.floor(hi)
    if ilo <= ihi:
        return Fraction(max(ilo, min(ihi, 0)))
    return (lo + hi) / 2


def _int_search(
    ineqs: list[LinExpr], diseqs: list[LinExpr], budget: list[int]
) -> tuple[str, Optional[dict[str, int]]]:
    if diseqs:
        d, rest = diseqs[0], diseqs[1:]
        for branch in (LinExpr(d.coeffs, d.const + 1), LinExpr(d.scale(-1).coeffs, -d.const + 1)):
            status, model = _int_search(ineqs + [branch], rest, budget)
            if status == "sat":
                return status, model
            if status == "unknown":
                return "unknown", None
        return "unsat", None
    stack = [list(ineqs)]
    while stack:
        if budget[0] <= 0:
            return "unknown", None
        budget[0] -= 1
        atoms = stack.pop()
        try:
            sample = _rational_sample(atoms)
        except SolverBudgetError:
            return "unknown", None
        if sample is None:
            continue
        frac = [(v, x) for v, x in sorted(sample.items()) if x.denominator != 1]
        if not frac:
            model = {v: int(x) for v, x in sample.items()}
            ok = all(
                e.const + sum(c * model.get(w, 0) for w, c in e.coeffs) <= 0
                for e in atoms
            )
            if ok:
                return "sat", model
            continue
        v, x = frac[0]
        below = atoms + [LinExpr.var(v).sub(LinExpr.num(math.floor(x)))]
        above = atoms + [LinExpr.num(math.ceil(x)).sub(LinExpr.var(v))]
        stack.append(below)
        stack.append(above)
    return "unsat", None


def clear_caches() -> None:
    _SAT_CACHE.clear()
