"""The unfold/fold engine.

One strategy run processes a worklist of definition clauses through four
phases: unfolding, goal replacement, satisfiability-based clause removal,
and definition & folding; useless clauses are removed at the end.  Two
instantiations are used:

* ``specialize`` removes the interpreter: reachability atoms are unfolded
  through the program text, stopping at loop-header labels, where a fresh
  predicate over the environment values is introduced;
* ``propagate`` pushes property information around the recursion:
  recursive predicates are unfolded only as the phase-initial step,
  wrapper and auxiliary predicates on a small budget, and new definitions
  are generalized against their ancestor (widening or its coefficient-sum
  variant) so the chain of definitions stabilizes.

Every fold re-checks the entailment side condition against the definition
actually used, so a generalization operator can never produce an unsound
fold, only a failed one.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

from .clp import (
    Atom,
    Clause,
    ClpProgram,
    recursive_preds,
    remove_useless,
    render_clause,
    term_to_linexpr,
)
from .encoder import EncodingInfo, encode_cmd, label_term
from .generalize import (
    DefinitionDb,
    GeneralizationCapError,
    anti_unify_blocks,
    body_in_def_space,
    generalize_constraint,
)
from .imp import ImpProgram, Label, SGoto, SIte
from .laws import BUILTIN_LAWS, Law, goal_replace_clause
from .solver import LAtom, LinConstraint, LinExpr, NonlinearError, SolverBudgetError
from .terms import App, IntConst, Subst, Term, Var, apply_subst, fresh_var, match, unify


def _rename_expr(e: LinExpr, old: str, new: str) -> LinExpr:
    return LinExpr.of({(new if v == old else v): c for v, c in e.coeffs}, e.const)


class BudgetExceeded(Exception):
    pass


class StuckError(Exception):
    pass


@dataclass
class StrategyConfig:
    mode: str  # "specialize" | "propagate"
    gen_operator: str = "widen"  # widen | widensum | msg
    gen_cap: int = 50
    max_defs: int = 400
    aux_budget: int = 1
    law_budget: int = 100
    node_budget: int = 60_000
    laws: tuple[Law, ...] = BUILTIN_LAWS
    loop_headers: frozenset = frozenset()
    encoding: Optional[EncodingInfo] = None
    flat_prog: Optional[ImpProgram] = None

    def __post_init__(self) -> None:
        if self.mode not in ("specialize", "propagate"):
            raise ValueError(f"unknown mode {self.mode!r}")
        for b in (self.gen_cap, self.max_defs, self.aux_budget, self.law_budget, self.node_budget):
            if b <= 0:
                raise ValueError("budgets must be positive")


@dataclass
class TraceEvent:
    phase: str
    rule: str
    parents: tuple[int, ...]
    outputs: tuple[int, ...]
    note: str = ""

    def to_text(self) -> str:
        ps = ",".join(map(str, self.parents))
        os_ = ",".join(map(str, self.outputs))
        note = f" {self.note}" if self.note else ""
        return f"{self.phase} {self.rule} [{ps}] -> [{os_}]{note}"


@dataclass
class TransformTrace:
    events: list[TraceEvent] = field(default_factory=list)
    clause_text: dict[int, str] = field(default_factory=dict)

    def log(
        self,
        phase: str,
        rule: str,
        parents: Iterable[Clause],
        outputs: Iterable[Clause],
        note: str = "",
    ) -> None:
        outs = list(outputs)
        for c in outs:
            self.clause_text.setdefault(c.id, render_clause(c, canonical=True))
        self.events.append(
            TraceEvent(phase, rule, tuple(c.id for c in parents), tuple(c.id for c in outs), note)
        )

    def to_text(self) -> str:
        lines = []
        for e in self.events:
            lines.append(e.to_text())
            for cid in e.outputs:
                lines.append(f"  {cid}: {self.clause_text.get(cid, '?')}")
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class TransformResult:
    program: ClpProgram
    derived: list[Clause]
    pre_removal: list[Clause]
    trace: TransformTrace
    db: DefinitionDb
    status: str = "ok"
    reason: str = ""


# ---------------------------------------------------------------------------
# Small helpers


def _finalize(c: Clause) -> Clause:
    """Project onto live variables, merge forced-equal ones, minimize.

    Two variables forced equal collapse into one (the earlier in clause
    order) unless both occur in the head: head argument positions are kept
    distinct so a definition's profile survives unfolding.
    """
    c.cstr.require_linear()
    while True:
        live = c.atom_vars()
        head_vars = set(c.head.vars())
        cstr = c.cstr.project(set(live))
        merged = None
        for v, w in cstr.identified_vars():
            if v in live and w in live and v != w and not (v in head_vars and w in head_vars):
                merged = (v, w)
                break
        if merged is None:
            return Clause(c.head, cstr.minimized(), c.body, c.id, c.provenance)
        v, w = merged
        order = list(c.vars())
        keep, drop = (w, v) if order.index(w) < order.index(v) else (v, w)
        if drop in head_vars:  # never rename a head occurrence away
            keep, drop = drop, keep
        s: Subst = {drop: Var(keep)}
        c = Clause(c.head.apply(s), cstr, tuple(a.apply(s) for a in c.body), c.id, c.provenance)


def _config_label(atom: Atom) -> Optional[Label]:
    """Label inside a reachability atom's configuration, when syntactic."""
    if not atom.args:
        return None
    t = atom.args[0]
    if isinstance(t, App) and t.functor == "cf" and t.args:
        cmd = t.args[0]
        if isinstance(cmd, App) and cmd.functor == "cmd" and cmd.args:
            lab = cmd.args[0]
            if isinstance(lab, IntConst):
                return lab.value
            if isinstance(lab, App) and lab.functor == "h" and not lab.args:
                return "h"
    return None


def _ground_list_spine(t: Term) -> bool:
    while isinstance(t, App) and t.functor == "." and len(t.args) == 2:
        t = t.args[1]
    return isinstance(t, App) and t.functor == "[]"


def _apps(t: Term):
    stack = [t]
    while stack:
        cur = stack.pop()
        if isinstance(cur, App):
            yield cur
            stack.extend(cur.args)


def compute_loop_headers(flat: ImpProgram) -> frozenset:
    """Targets of back edges in a depth-first walk of the control flow."""
    labels = [s.label for s in flat.stmts]
    succ: dict[Label, list[Label]] = {}
    for i, s in enumerate(flat.stmts):
        if isinstance(s, SIte):
            succ[s.label] = [s.then_label, s.else_label]
        elif isinstance(s, SGoto):
            succ[s.label] = [s.target]
        elif i + 1 < len(labels):
            succ[s.label] = [labels[i + 1]]
        else:
            succ[s.label] = []
    headers: set[Label] = set()
    color: dict[Label, int] = {}  # 0 new, 1 active, 2 done
    stack: list[tuple[Label, int]] = [(labels[0], 0)]
    color[labels[0]] = 1
    while stack:
        l, k = stack.pop()
        nxt = succ.get(l, ())
        if k < len(nxt):
            stack.append((l, k + 1))
            m = nxt[k]
            c = color.get(m, 0)
            if c == 0:
                color[m] = 1
                stack.append((m, 0))
            elif c == 1:
                headers.add(m)
        else:
            color[l] = 2
    return frozenset(headers)


# ---------------------------------------------------------------------------
# The engine


class _Engine:
    def __init__(self, program: ClpProgram, cfg: StrategyConfig):
        self.program = program
        self.cfg = cfg
        self.trace = TransformTrace()
        self.high: set[str] = set(program.high)
        self.introduced: set[str] = set()
        self.recursive = recursive_preds(program)
        self._next_id = max((c.id for c in program.clauses), default=0) + 1
        names = set(program.preds())
        for c in program.clauses:
            for a in list(c.body) + [c.head]:
                for t in a.args:
                    names.update(x.functor for x in _apps(t))
        taken = [int(m.group(1)) for p in names if (m := re.match(r"^new(\d+)$", p))]
        self._next_new = max(taken, default=0) + 1
        self.nodes = 0

    def new_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    def new_pred(self) -> str:
        name = f"new{self._next_new}"
        self._next_new += 1
        return name

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.cfg.node_budget:
            raise BudgetExceeded(f"unfolding budget of {self.cfg.node_budget} nodes exceeded")

    def _high_idx(self, e: Clause) -> list[int]:
        return [i for i, a in enumerate(e.body) if a.pred in self.high]

    def _reorder(self, c: Clause) -> Clause:
        lows = [a for a in c.body if a.pred not in self.high]
        highs = [a for a in c.body if a.pred in self.high]
        return Clause(c.head, c.cstr, tuple(lows + highs), c.id, c.provenance)

    # -- unfolding ---------------------------------------------------------

    def unf(self, clause: Clause, atom_idx: int, log: bool = True) -> list[Clause]:
        """Resolvents of `clause` on the body atom at `atom_idx`."""
        atom = clause.body[atom_idx]
        out: list[Clause] = []
        resolver = self.program.resolvers.get(atom.pred)
        if resolver is not None:
            for extra, rbody in resolver(atom) or []:
                combined = clause.cstr.conj(extra)
                if combined.is_sat_rational():
                    body = clause.body[:atom_idx] + tuple(rbody) + clause.body[atom_idx + 1 :]
                    out.append(
                        Clause(
                            clause.head,
                            combined,
                            body,
                            self.new_id(),
                            f"unf {clause.id} builtin",
                        )
                    )
        for d in self.program.clauses_for(atom.pred):
            rd = d.rename_apart()
            s = unify(App("$h", rd.head.args), App("$h", atom.args))
            if s is None:
                continue
            inst = rd.apply(s)
            base = clause.apply(s)
            combined = base.cstr.conj(inst.cstr)
            if not combined.is_sat_rational():
                continue
            body = base.body[:atom_idx] + inst.body + base.body[atom_idx + 1 :]
            out.append(
                Clause(base.head, combined, body, self.new_id(), f"unf {clause.id} with {d.id}")
            )
        if log:
            self.trace.log("unfolding", f"unf:{atom.pred}", [clause], out)
        return out

    def _unfoldable(self, atom: Atom, budgets: dict[str, int]) -> bool:
        p = atom.pred
        if p in ("read", "write"):
            t = atom.args[0] if atom.args else None
            if isinstance(t, App) and t.functor == "," and len(t.args) == 2:
                return _ground_list_spine(t.args[0])
            return False
        if p in ("eval", "update", "lookup"):
            return bool(atom.args) and not isinstance(atom.args[0], Var)
        if p == "reach" and self.cfg.mode == "specialize":
            lab = _config_label(atom)
            return lab is not None and lab not in self.cfg.loop_headers
        if p in self.recursive:
            if p in self.program.aux_recursive:
                return budgets.get(p, 0) > 0
            return False
        return p in self.program.preds() or p in self.program.resolvers

    def unfolding_phase(self, c: Clause) -> list[Clause]:
        hidx = next((i for i, a in enumerate(c.body) if a.pred in self.high), None)
        start = [c] if hidx is None else self.unf(c, hidx)
        # auxiliary user predicates stay residual while the interpreter is
        # being removed; their budget belongs to the propagation stage
        budgets0 = (
            {}
            if self.cfg.mode == "specialize"
            else {p: self.cfg.aux_budget for p in self.program.aux_recursive}
        )
        work: deque[tuple[Clause, dict[str, int]]] = deque((cl, dict(budgets0)) for cl in start)
        done: list[Clause] = []
        while work:
            cur, budgets = work.popleft()
            self.tick()
            idx = next((i for i, a in enumerate(cur.body) if self._unfoldable(a, budgets)), None)
            if idx is None:
                done.append(cur)
                continue
            pred = cur.body[idx].pred
            nb = dict(budgets)
            if pred in nb:
                nb[pred] -= 1
            for child in self.unf(cur, idx):
                work.append((child, nb))
        return [self._reorder(_finalize(cl)) for cl in done]

    # -- goal replacement ----------------------------------------------------

    def goal_replacement_phase(self, clauses: list[Clause]) -> list[Clause]:
        if not self.cfg.laws:
            return clauses
        out: list[Clause] = []
        for c in clauses:
            results, applied = goal_replace_clause(
                c, self.cfg.laws, self.new_id, self.cfg.law_budget
            )
            if applied:
                self.trace.log("goal-replacement", "+".join(applied), [c], results)
                out.extend(self._reorder(_finalize(r)) for r in results)
            else:
                out.append(c)
        return out

    # -- clause removal --------------------------------------------------------

    def clause_removal_phase(self, clauses: list[Clause]) -> list[Clause]:
        out = []
        for c in clauses:
            simplified = c.cstr.simplify_diseqs()
            if simplified is None or not simplified.is_sat_rational():
                self.trace.log("clause-removal", "unsat", [c], [])
                continue
            out.append(_finalize(Clause(c.head, simplified, c.body, c.id, c.provenance)))
        return out

    # -- definition & folding ----------------------------------------------------

    def definition_folding_phase(
        self, clauses: list[Clause], c_from: Clause, db: DefinitionDb
    ) -> list[Clause]:
        remaining = list(clauses)
        out: list[Clause] = []
        for i, e in enumerate(remaining):
            if not self._high_idx(e):
                out.append(e)
                continue
            folded = self.try_fold(e, db)
            if folded is not None:
                out.append(folded)
                continue
            if len(db.defs) >= self.cfg.max_defs:
                raise BudgetExceeded(f"more than {self.cfg.max_defs} definitions introduced")
            if self.cfg.mode == "specialize":
                d = self._make_spec_def(e)
            else:
                d = self._make_gen_def(e, i, remaining, c_from, db)
            db.add(d, c_from.head.pred)
            self.introduced.add(d.head.pred)
            self.high.add(d.head.pred)
            self.trace.log("definition", "introduce", [e], [d])
            folded = self.try_fold(e, db)
            if folded is None:
                raise StuckError(f"cannot fold clause {e.id} with its own definition")
            out.append(folded)
        return out

    def try_fold(self, e: Clause, db: DefinitionDb, quiet: bool = False) -> Optional[Clause]:
        """Fold e's high block with the most recent usable definition."""
        high_idx = self._high_idx(e)
        if not high_idx:
            return None
        for d in reversed(db.defs):
            if not d.body or d.head.pred == "incorrect":
                continue
            for idxs, theta, rd in self._match_def(d, e):
                if not set(high_idx) <= set(idxs):
                    continue
                dcstr = self._subst_cstr(rd, theta)
                if dcstr is None or not e.cstr.entails(dcstr):
                    continue
                head_atom = Atom(rd.head.pred, tuple(apply_subst(a, theta) for a in rd.head.args))
                first = min(idxs)
                body = []
                for i, a in enumerate(e.body):
                    if i == first:
                        body.append(head_atom)
                    if i not in idxs:
                        body.append(a)
                folded = Clause(
                    e.head, e.cstr, tuple(body), self.new_id(), f"fold {e.id} with {d.head.pred}"
                )
                if not quiet:
                    self.trace.log("folding", f"fold:{d.head.pred}", [e, d], [folded])
                return folded
        return None

    def _match_def(self, d: Clause, e: Clause) -> Iterator[tuple[tuple[int, ...], Subst, Clause]]:
        """Injective matchings of d's body into e's body (d renamed apart)."""
        rd = d.rename_apart()
        pats = list(rd.body)
        cand = [
            [i for i, a in enumerate(e.body) if a.pred == p.pred and len(a.args) == len(p.args)]
            for p in pats
        ]
        hits: list[tuple[tuple[int, ...], Subst]] = []

        def extend(k: int, used: list[int], s: Subst) -> None:
            if k == len(pats):
                hits.append((tuple(used), dict(s)))
                return
            for i in cand[k]:
                if i in used:
                    continue
                s2 = match(App("$a", pats[k].args), App("$a", e.body[i].args), s)
                if s2 is not None:
                    extend(k + 1, used + [i], s2)

        extend(0, [], {})
        for idxs, s in hits:
            yield idxs, s, rd

    def _subst_cstr(self, d: Clause, theta: Subst) -> Optional[LinConstraint]:
        binding = {}
        for v in d.cstr.vars():
            if v in theta:
                ex = term_to_linexpr(apply_subst(Var(v), theta))
                if ex is None:
                    return None
                binding[v] = ex
        return d.cstr.instantiate(binding)

    def _make_spec_def(self, e: Clause) -> Clause:
        """A fresh reachability definition over the generic environment."""
        his = self._high_idx(e)
        atom = e.body[his[0]]
        info = self.cfg.encoding
        flat = self.cfg.flat_prog
        lab = _config_label(atom)
        if len(his) == 1 and atom.pred == "reach" and lab is not None and info and flat:
            cmd = flat.command_table().get(lab)
            if cmd is not None:
                generic = Atom(
                    "reach",
                    (App("cf", (App("cmd", (label_term(lab), encode_cmd(cmd))), info.env_term())),),
                )
                if match(App("$a", generic.args), App("$a", atom.args)) is not None:
                    head = Atom(self.new_pred(), tuple(Var(v) for v in info.env_value_vars()))
                    return Clause(head, LinConstraint(), (generic,), self.new_id(), "definition")
        block = tuple(e.body[i] for i in his)
        res = anti_unify_blocks([block])
        assert res is not None
        return self._def_from_atoms(res[0], LinConstraint())

    def _def_from_atoms(self, gen_atoms: tuple[Atom, ...], cstr: LinConstraint) -> Clause:
        head_vars: list[str] = []
        seen: set[str] = set()
        ordered = [a for a in gen_atoms if a.pred in self.high] + [
            a for a in gen_atoms if a.pred not in self.high
        ]
        for a in ordered:
            for v in a.vars():
                if v not in seen:
                    seen.add(v)
                    head_vars.append(v)
        head = Atom(self.new_pred(), tuple(Var(v) for v in head_vars))
        return Clause(head, cstr, tuple(gen_atoms), self.new_id(), "definition")

    def _make_gen_def(
        self,
        e: Clause,
        i: int,
        remaining: list[Clause],
        c_from: Clause,
        db: DefinitionDb,
    ) -> Clause:
        """Generalized definition able to fold e and its same-shaped siblings."""
        ancestors: list[Optional[Clause]] = [
            a for a in db.ancestor_chain(c_from) if a.body
        ]
        ancestors.append(None)
        for anc in ancestors:
            for e_block in self._blocks(e, anc):
                members: list[tuple[int, tuple[int, ...]]] = [(i, e_block)]
                for j in range(i + 1, len(remaining)):
                    f = remaining[j]
                    if not self._high_idx(f) or self.try_fold(f, db, quiet=True) is not None:
                        continue
                    fb = next(iter(self._blocks(f, anc, like=e, like_block=e_block)), None)
                    if fb is not None:
                        members.append((j, fb))
                blocks = []
                if anc is not None:
                    blocks.append(tuple(anc.body))
                blocks.extend(tuple(remaining[j].body[k] for k in blk) for j, blk in members)
                res = anti_unify_blocks(blocks)
                if res is None:
                    continue
                gen_atoms, bindings = res
                def_vars = set()
                for a in gen_atoms:
                    def_vars.update(a.vars())
                k0 = 0
                anc_space = None
                if anc is not None:
                    anc_space = body_in_def_space(
                        anc.cstr, bindings[0], def_vars, as_reference=True
                    )
                    k0 = 1
                spaces = [
                    body_in_def_space(remaining[j].cstr, bind, def_vars)
                    for (j, _), bind in zip(members, bindings[k0:])
                ]
                cstr = generalize_constraint(self.cfg.gen_operator, anc_space, spaces)
                d = self._def_from_atoms(gen_atoms, cstr)
                ok = True
                for (j, _), bind in zip(members, bindings[k0:]):
                    inst = self._subst_cstr(d, dict(bind))
                    if inst is None or not remaining[j].cstr.entails(inst):
                        ok = False
                        break
                if ok:
                    return d
                self._next_new -= 1  # name not used after all
        raise StuckError(f"no generalization found for clause {e.id}")

    def _blocks(
        self,
        e: Clause,
        anc: Optional[Clause],
        like: Optional[Clause] = None,
        like_block: Optional[tuple[int, ...]] = None,
    ) -> Iterator[tuple[int, ...]]:
        """Candidate body index tuples for generalization, leftmost first.

        With a reference (the ancestor's body, or the block chosen for the
        clause that started the group) blocks mirror its atom sequence and
        must cover every high atom of e.  Without one, the single
        candidate is all high atoms plus the low atoms sharing variables
        with them.
        """
        his = self._high_idx(e)
        if anc is None and like is None:
            hvars: set[str] = set()
            for k in his:
                hvars.update(e.body[k].vars())
            idxs = list(his)
            for k, a in enumerate(e.body):
                if k not in his and set(a.vars()) & hvars:
                    idxs.append(k)
            yield tuple(sorted(idxs))
            return
        if anc is not None:
            ref_atoms = list(anc.body)
        else:
            assert like is not None and like_block is not None
            ref_atoms = [like.body[k] for k in like_block]
        slots = [
            [k for k, a in enumerate(e.body) if a.pred == p.pred and len(a.args) == len(p.args)]
            for p in ref_atoms
        ]

        def assign(k: int, used: list[int]) -> Iterator[tuple[int, ...]]:
            if k == len(ref_atoms):
                if set(his) <= set(used):
                    yield tuple(used)
                return
            for idx in slots[k]:
                if idx not in used:
                    yield from assign(k + 1, used + [idx])

        yield from assign(0, [])


def transform(program: ClpProgram, cfg: StrategyConfig) -> TransformResult:
    """Run the strategy; the output preserves derivability of `incorrect`."""
    program.validate()
    eng = _Engine(program, cfg)
    entries = list(program.clauses_for("incorrect"))
    db = DefinitionDb(cap=cfg.gen_cap)
    db.seed(entries)
    transf_p: list[Clause] = []
    status, reason = "ok", ""
    try:
        while db.pending:
            c = db.pending.popleft()
            transf_c = eng.unfolding_phase(c)
            transf_c = eng.goal_replacement_phase(transf_c)
            transf_c = eng.clause_removal_phase(transf_c)
            transf_c = eng.definition_folding_phase(transf_c, c, db)
            transf_p.extend(transf_c)
    except (BudgetExceeded, GeneralizationCapError, SolverBudgetError) as exc:
        status, reason = "budget", str(exc)
    except StuckError as exc:
        status, reason = "stuck", str(exc)
    except NonlinearError as exc:
        status, reason = "nonlinear", str(exc)

    pre_removal = list(transf_p)
    if status == "ok":
        leftover = {a.pred for c in transf_p for a in c.body if a.pred in program.high}
        if leftover:
            status, reason = "stuck", f"residual atoms of {sorted(leftover)} after folding"

    introduced = set(eng.introduced)
    support = _support_clauses(program, transf_p, introduced)
    all_clauses = transf_p + support
    high_names = {"incorrect"} | introduced | set(program.high)
    preds = set()
    for c in all_clauses:
        preds.add(c.head.pred)
        preds.update(a.pred for a in c.body)
    out_prog = ClpProgram(
        all_clauses,
        high=frozenset(p for p in preds if p in high_names) | {"incorrect"},
        low=frozenset(p for p in preds if p not in high_names),
        resolvers={p: r for p, r in program.resolvers.items() if p in preds},
        aux_recursive=program.aux_recursive,
    )
    cleaned = remove_useless(out_prog)
    eng.trace.log("useless-removal", "remove", [], cleaned.clauses, note=f"kept {len(cleaned.clauses)}")
    derived = [
        c for c in cleaned.clauses if c.head.pred == "incorrect" or c.head.pred in introduced
    ]
    cleaned.validate()
    return TransformResult(cleaned, derived, pre_removal, eng.trace, db, status, reason)


def _support_clauses(
    program: ClpProgram, derived: list[Clause], introduced: set[str]
) -> list[Clause]:
    heads = {c.head.pred for c in derived} | introduced | {"incorrect"}
    needed: set[str] = set()
    frontier = {a.pred for c in derived for a in c.body if a.pred not in heads}
    while frontier:
        p = frontier.pop()
        if p in needed:
            continue
        needed.add(p)
        for c in program.clauses_for(p):
            for a in c.body:
                if a.pred not in heads and a.pred not in needed:
                    frontier.add(a.pred)
    return [c for c in program.clauses if c.head.pred in needed]


# ---------------------------------------------------------------------------
# Invariant-argument hoisting


def _var_occurrences(c: Clause) -> dict[str, int]:
    out: dict[str, int] = {}

    def walk(t: Term) -> None:
        if isinstance(t, Var):
            out[t.name] = out.get(t.name, 0) + 1
        elif isinstance(t, App):
            for a in t.args:
                walk(a)

    for a in (c.head, *c.body):
        for t in a.args:
            walk(t)
    for v in c.cstr.vars():
        out[v] = out.get(v, 0) + 1
    return out


def hoist_invariant_args(program: ClpProgram) -> tuple[ClpProgram, bool]:
    """Lift exit-clause conditions over invariant arguments into the callers.

    For a self-recursive predicate whose recursive clauses pass some
    argument positions through unchanged and whose single exit clause has a
    part constraining only those positions (plus local variables), that
    part moves into every outside caller.  Derivability of `incorrect` is
    preserved: the recursion never changes the lifted values.

    An invariant position that is otherwise unused and receives a fresh
    variable from every caller is an output slot: the exit clause may pin
    it to the value it reports (adding ``out = value``), which frees the
    reported condition to mention only invariant positions and lift.
    """
    changed = False
    clauses = list(program.clauses)
    for pred in sorted({c.head.pred for c in clauses}):
        own = [c for c in clauses if c.head.pred == pred]
        rec = [c for c in own if any(a.pred == pred for a in c.body)]
        exits = [c for c in own if not any(a.pred == pred for a in c.body)]
        if not rec or len(exits) != 1:
            continue
        if any(sum(1 for a in c.body if a.pred == pred) != 1 for c in rec):
            continue
        arity = len(own[0].head.args)
        inv: list[int] = []
        for i in range(arity):
            if all(
                isinstance(c.head.args[i], Var)
                and c.head.args[i] == next(a for a in c.body if a.pred == pred).args[i]
                for c in rec
            ):
                inv.append(i)
        if not inv:
            continue
        exit_c = exits[0]
        callers = [
            c for c in clauses if c.head.pred != pred and any(a.pred == pred for a in c.body)
        ]
        if not callers:
            continue
        head_vars = set(exit_c.head.vars())
        inv_vars = {
            exit_c.head.args[i].name for i in inv if isinstance(exit_c.head.args[i], Var)
        }

        # output slots: invariant, unused in the exit clause, fresh at every call
        exit_occ = _var_occurrences(exit_c)
        free_out: list[str] = []
        for i in inv:
            t = exit_c.head.args[i]
            if not isinstance(t, Var) or exit_occ.get(t.name, 0) != 1:
                continue
            ok = True
            for c in callers:
                occ = _var_occurrences(c)
                for a in c.body:
                    if a.pred == pred:
                        arg = a.args[i]
                        if not (isinstance(arg, Var) and occ.get(arg.name, 0) == 1):
                            ok = False
            if ok:
                free_out.append(t.name)

        def liftable(vs: set[str]) -> bool:
            return all(v in inv_vars or v not in head_vars for v in vs)

        exit_atoms = list(exit_c.body)
        exit_latoms = exit_c.cstr.atoms()
        alias_latoms: list = []
        while free_out:
            blockers = set()
            for a in exit_atoms:
                bad = {v for v in a.vars() if v in head_vars and v not in inv_vars}
                if len(bad) == 1:
                    blockers |= bad
            for la in exit_latoms:
                bad = {v for v in la.expr.vars() if v in head_vars and v not in inv_vars}
                if len(bad) == 1:
                    blockers |= bad
            fixed = False
            for w in sorted(blockers):
                e = free_out.pop(0)
                ren: Subst = {w: Var(e)}
                exit_atoms = [
                    a.apply(ren) if liftable(set(a.vars()) - {w}) else a for a in exit_atoms
                ]
                exit_latoms = [
                    LAtom(la.kind, _rename_expr(la.expr, w, e))
                    if liftable(set(la.expr.vars()) - {w})
                    else la
                    for la in exit_latoms
                ]
                diff = LinExpr.var(e).sub(LinExpr.var(w))
                alias_latoms.append(LAtom("le", diff))
                alias_latoms.append(LAtom("le", diff.scale(-1)))
                fixed = True
                break
            if not fixed:
                break

        lift_atoms = [a for a in exit_atoms if liftable(set(a.vars()))]
        rest_atoms = [a for a in exit_atoms if not liftable(set(a.vars()))]
        lift_latoms = [la for la in exit_latoms if liftable(set(la.expr.vars()))]
        rest_latoms = [la for la in exit_latoms if not liftable(set(la.expr.vars()))] + alias_latoms
        if not lift_atoms and not lift_latoms:
            continue
        lift_locals: set[str] = set()
        for a in lift_atoms:
            lift_locals.update(v for v in a.vars() if v not in head_vars)
        for la in lift_latoms:
            lift_locals.update(v for v in la.expr.vars() if v not in head_vars)
        rest_vars: set[str] = set()
        for a in rest_atoms:
            rest_vars.update(a.vars())
        for la in rest_latoms:
            rest_vars.update(la.expr.vars())
        if lift_locals & rest_vars:
            continue

        new_exit = Clause(
            exit_c.head,
            LinConstraint.from_atoms(rest_latoms).minimized(),
            tuple(rest_atoms),
            exit_c.id,
            (exit_c.provenance + " hoist-residual").strip(),
        )
        replaced: dict[int, Clause] = {exit_c.id: new_exit}
        ok_all = True
        for c in callers:
            cur = c
            for a in [x for x in c.body if x.pred == pred]:
                mapping: Subst = {}
                ok = True
                for i in inv:
                    hv = exit_c.head.args[i]
                    if not isinstance(hv, Var):
                        ok = False
                        break
                    mapping[hv.name] = a.args[i]
                if not ok:
                    ok_all = False
                    break
                for v in sorted(lift_locals):
                    mapping[v] = fresh_var("D")
                extra = LinConstraint.from_atoms(lift_latoms)
                bind = {}
                for v in extra.vars():
                    if v in mapping:
                        ex = term_to_linexpr(mapping[v])
                        if ex is None:
                            ok = False
                            break
                        bind[v] = ex
                if not ok:
                    ok_all = False
                    break
                cur = Clause(
                    cur.head,
                    cur.cstr.conj(extra.instantiate(bind)),
                    cur.body + tuple(x.apply(mapping) for x in lift_atoms),
                    cur.id,
                    (cur.provenance + " hoist-lift").strip(),
                )
            if not ok_all:
                break
            replaced[c.id] = cur
        if not ok_all:
            continue
        clauses = [replaced.get(c.id, c) for c in clauses]
        changed = True
    if not changed:
        return program, False
    out = ClpProgram(clauses, program.high, program.low, program.resolvers, program.aux_recursive)
    return out, True
