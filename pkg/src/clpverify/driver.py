"""Verification pipeline: parse, encode, specialize, propagate, conclude.

``verify`` runs the whole method: the program / property pair is encoded
as a clause program, the interpreter is removed by specialization, exit
conditions over invariant arguments are hoisted to the callers, and the
property is propagated by unfold/fold rounds (reversing the program when
the error side should drive) until the ``incorrect`` predicate is defined
by a satisfiable fact (program incorrect), by no clauses (program
correct), or the round limit is hit (unknown).

A claimed incorrectness is confirmed against the reference interpreter:
the verdict carries an initial environment only when replaying it
actually reaches the error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .clp import Atom, Clause, ClpProgram, bounded_eval, render_program
from .encoder import (
    EncodingInfo,
    PropertySpec,
    SpecFormula,
    Triple,
    _formula_body,
    encode_cmd,
    encode_triple,
    eval_const_resolver,
    label_term,
    parse_spec,
)
from .imp import ImpProgram, lower_structured
from .imp import parse_program as parse_imp
from .interp import Env, run
from .laws import BUILTIN_LAWS
from .reversal import reverse, to_linear_view
from .solver import LinConstraint, LinExpr
from .terms import App, IntConst, Term, mk_list
from .transform import (
    StrategyConfig,
    TransformResult,
    compute_loop_headers,
    hoist_invariant_args,
    transform,
)


@dataclass
class VerifyConfig:
    propagate: str = "error"  # error | init
    gen: Optional[str] = None  # widen | widensum | msg; None selects automatically
    max_iters: int = 4
    depth_oracle: int = 60
    gen_cap: int = 50
    max_defs: int = 400
    node_budget: int = 60_000
    law_budget: int = 100
    emit: tuple[str, ...] = ()
    out_dir: Optional[Path] = None


@dataclass
class Verdict:
    kind: str  # correct | incorrect | unknown
    witness: Optional[Env] = None
    reason: str = ""
    iterations: int = 0

    def exit_code(self) -> int:
        return {"correct": 0, "incorrect": 1, "unknown": 2}[self.kind]


@dataclass
class VerifyResult:
    verdict: Verdict
    stages: dict[str, str] = field(default_factory=dict)
    trace_text: str = ""
    programs: dict[str, ClpProgram] = field(default_factory=dict)
    fold_stages: dict[str, list[Clause]] = field(default_factory=dict)
    defs: dict[str, list[Clause]] = field(default_factory=dict)
    gen_used: str = ""


def _check(program: ClpProgram) -> Optional[tuple[str, Optional[Clause]]]:
    clauses = program.clauses_for("incorrect")
    if not clauses:
        return "correct", None
    for c in clauses:
        if not c.body:
            status, _model = c.cstr.is_sat_integer()
            if status == "sat":
                return "incorrect", c
    return None


def _probe_incorrect(program: ClpProgram, depth: int, budget: int = 30_000) -> bool:
    """Bounded search for `incorrect` in a transformed (compressed) program.

    Folding alone rarely leaves a bare fact even when the program is
    incorrect; the transformed recursion is short enough for a direct
    bounded check, and any hit is re-confirmed on the original program.
    """
    res = bounded_eval(program, Atom("incorrect"), depth, node_budget=budget)
    return bool(res.derivable)


def _uses_arrays(p: ClpProgram) -> bool:
    return any(a.pred in ("read", "write") for c in p.clauses for a in c.body)


def verify(
    imp_text: str, spec_text: str, cfg: Optional[VerifyConfig] = None
) -> VerifyResult:
    cfg = cfg or VerifyConfig()
    ast = parse_imp(imp_text)
    flat = lower_structured(ast)
    spec = parse_spec(spec_text)
    program, info = encode_triple(Triple(flat, spec))

    result = VerifyResult(Verdict("unknown"))
    traces: list[str] = []
    result.stages["t"] = render_program(program)
    result.programs["t"] = program

    laws = tuple(BUILTIN_LAWS) + tuple(spec.user_laws)
    cfg_a = StrategyConfig(
        mode="specialize",
        loop_headers=compute_loop_headers(flat),
        encoding=info,
        flat_prog=flat,
        laws=laws,
        gen_cap=cfg.gen_cap,
        max_defs=cfg.max_defs,
        node_budget=cfg.node_budget,
        law_budget=cfg.law_budget,
    )
    ta = transform(program, cfg_a)
    result.stages["ta"] = render_program(ta.program)
    result.programs["ta"] = ta.program
    result.fold_stages["ta"] = ta.pre_removal
    traces.append("== stage ta ==\n" + ta.trace.to_text())
    if ta.status != "ok":
        result.verdict = Verdict("unknown", reason=f"budget: {ta.reason}")
        result.trace_text = "\n".join(traces)
        _emit_files(result, cfg)
        return result

    decided = _check(ta.program)
    if decided is None:
        hoisted, hoist_applied = hoist_invariant_args(ta.program)
        gen_op = cfg.gen or ("widensum" if _uses_arrays(hoisted) else "widen")
        result.gen_used = gen_op
        current = hoisted
        direction = cfg.propagate
        for i in range(1, cfg.max_iters + 1):
            must_reverse = (direction == "error" and not (i == 1 and hoist_applied)) if i == 1 else True
            work = current
            if must_reverse:
                view = to_linear_view(current)
                if view is None:
                    result.verdict = Verdict(
                        "unknown", reason="reversal inapplicable", iterations=i - 1
                    )
                    result.trace_text = "\n".join(traces)
                    _emit_files(result, cfg)
                    return result
                work = reverse(view, current)
                if i == 1:
                    result.stages["tarev"] = render_program(work)
                    result.programs["tarev"] = work
            cfg_b = StrategyConfig(
                mode="propagate",
                gen_operator=gen_op,
                laws=laws,
                gen_cap=cfg.gen_cap,
                max_defs=cfg.max_defs,
                node_budget=cfg.node_budget,
                law_budget=cfg.law_budget,
            )
            tb = transform(work, cfg_b)
            key = f"tb{i}"
            result.stages[key] = render_program(tb.program)
            result.programs[key] = tb.program
            result.fold_stages[key] = tb.pre_removal
            result.defs[key] = [d for d in tb.db.defs if d.head.pred != "incorrect"]
            traces.append(f"== stage {key} ==\n" + tb.trace.to_text())
            if tb.status != "ok":
                result.verdict = Verdict(
                    "unknown", reason=f"{tb.status}: {tb.reason}", iterations=i
                )
                result.trace_text = "\n".join(traces)
                _emit_files(result, cfg)
                return result
            decided = _check(tb.program)
            if decided is None and _probe_incorrect(tb.program, 15, budget=6000):
                decided = ("incorrect", None)
            if decided is not None:
                result.verdict = _final_verdict(decided, program, info, flat, spec, cfg, i)
                result.trace_text = "\n".join(traces)
                _emit_files(result, cfg)
                return result
            current = tb.program
            direction = "init" if direction == "error" else "error"
        if _probe_incorrect(current, min(25, cfg.depth_oracle), budget=30_000):
            result.verdict = _final_verdict(
                ("incorrect", None), program, info, flat, spec, cfg, cfg.max_iters
            )
        else:
            result.verdict = Verdict(
                "unknown", reason="no conclusion within the round limit", iterations=cfg.max_iters
            )
    else:
        result.verdict = _final_verdict(decided, program, info, flat, spec, cfg, 0)
    result.trace_text = "\n".join(traces)
    _emit_files(result, cfg)
    return result


def _final_verdict(
    decided: tuple[str, Optional[Clause]],
    program: ClpProgram,
    info: EncodingInfo,
    flat: ImpProgram,
    spec: PropertySpec,
    cfg: VerifyConfig,
    iterations: int,
) -> Verdict:
    kind, _ = decided
    if kind == "correct":
        return Verdict("correct", iterations=iterations)
    witness = find_witness(program, info, flat, spec, cfg.depth_oracle)
    return Verdict("incorrect", witness=witness, iterations=iterations)


# ---------------------------------------------------------------------------
# Witness search and confirmation


def find_witness(
    program: ClpProgram,
    info: EncodingInfo,
    flat: ImpProgram,
    spec: PropertySpec,
    depth: int,
) -> Optional[Env]:
    """An initial environment reaching the error, confirmed by execution."""
    if any(d.kind == "array" for d in info.decls):
        return None  # witness extraction covers integer programs
    env_term = info.env_term()
    entry_cmd = App("cmd", (label_term(info.entry_label), encode_cmd(flat.stmts[0])))
    x = App("cf", (entry_cmd, env_term))
    goal = [Atom("initConf", (x,)), Atom("reach", (x,))]
    for d in _deepening(depth):
        res = bounded_eval(program, goal, d, int_check=True)
        if res.derivable and res.witness is not None:
            env = Env()
            for decl in info.decls:
                name = info.val_vars[decl.name]
                env.ints[decl.name] = res.witness.get(name, 0)
            if confirm_witness(flat, spec, env):
                return env
        if res.exhausted:
            break
    return None


def _deepening(depth: int) -> list[int]:
    steps = [12, 25, 40]
    return [s for s in steps if s < depth] + [depth]


def confirm_witness(flat: ImpProgram, spec: PropertySpec, env: Env, max_steps: int = 20_000) -> bool:
    try:
        r = run(flat, env.copy(), max_steps)
    except Exception:
        return False
    if not r.halted:
        return False
    return formula_holds(spec.init, spec, flat, env) and formula_holds(
        spec.error, spec, flat, r.env
    )


def formula_holds(
    formula: SpecFormula, spec: PropertySpec, flat: ImpProgram, env: Env, depth: int = 40
) -> bool:
    """Evaluate a property formula on a concrete environment."""
    from .encoder import make_encoding_info

    info = make_encoding_info(flat, spec)
    cstr, atoms = _formula_body(formula, flat, info)
    bind_cstr = cstr.copy()
    for d in info.decls:
        if d.kind == "int":
            v = info.val_vars[d.name]
            bind_cstr.add_eq(LinExpr.var(v).sub(LinExpr.num(env.ints[d.name])))
    subst = {
        info.arr_vars[n]: mk_list([IntConst(x) for x in env.arrays[n]])
        for n in env.arrays
        if n in info.arr_vars
    }
    goal = [a.apply(subst) for a in atoms]
    probe = Clause(Atom("$probe"), bind_cstr, tuple(goal), 0)
    prog = ClpProgram(
        [probe] + list(spec.user_clauses) + _rw_clauses(),
        high=frozenset({"$probe"}),
        low=frozenset(
            {a.pred for c in [probe] + list(spec.user_clauses) for a in c.body}
            | {c.head.pred for c in spec.user_clauses}
            | {"read", "write"}
        ),
        resolvers={"eval": eval_const_resolver},
    )
    res = bounded_eval(prog, Atom("$probe"), depth, int_check=True)
    return bool(res.derivable)


def _rw_clauses() -> list[Clause]:
    from .encoder import interpreter_clauses

    return [c for c in interpreter_clauses() if c.head.pred in ("read", "write")]


# ---------------------------------------------------------------------------
# Artifact emission


def _emit_files(result: VerifyResult, cfg: VerifyConfig) -> None:
    if not cfg.emit or cfg.out_dir is None:
        return
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    wanted = set(cfg.emit)
    for stage, text in result.stages.items():
        base = stage.rstrip("0123456789")
        if stage in wanted or base in wanted:
            (out / f"{stage}.clp").write_text(text)
    if "trace" in wanted:
        (out / "trace.txt").write_text(result.trace_text)
