"""Reference interpreter for the imperative language.

Used as the ground-truth oracle in differential tests and for confirming
counterexample witnesses.  Out-of-bounds array access is a runtime error
here; the clause encoding guards accesses with explicit bound
constraints, so an out-of-bounds trace is never an error-reaching trace
on either side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .imp import (
    EArr,
    EBin,
    ENum,
    EUn,
    EVar,
    Expr,
    ImpProgram,
    ImpValidationError,
    Label,
    SArrAssign,
    SAssign,
    SGoto,
    SHalt,
    SIf,
    SIte,
    SWhile,
    Stmt,
)


class InterpError(RuntimeError):
    pass


@dataclass
class Env:
    ints: dict[str, int] = field(default_factory=dict)
    arrays: dict[str, list[int]] = field(default_factory=dict)

    def copy(self) -> "Env":
        return Env(dict(self.ints), {k: list(v) for k, v in self.arrays.items()})

    def check_decls(self, p: ImpProgram) -> None:
        for d in p.decls:
            if d.kind == "int":
                if d.name not in self.ints:
                    raise InterpError(f"missing value for int {d.name!r}")
            else:
                if d.name not in self.arrays:
                    raise InterpError(f"missing value for array {d.name!r}")
                dim = d.dim if isinstance(d.dim, int) else self.ints.get(d.dim)
                if dim is None:
                    raise InterpError(f"array {d.name!r} has unset dimension {d.dim!r}")
                if len(self.arrays[d.name]) != dim:
                    raise InterpError(
                        f"array {d.name!r} has {len(self.arrays[d.name])} elements, declared {dim}"
                    )


@dataclass
class Configuration:
    label: Label
    env: Env


def eval_expr(e: Expr, env: Env) -> int:
    if isinstance(e, ENum):
        return e.value
    if isinstance(e, EVar):
        if e.name not in env.ints:
            raise InterpError(f"unbound variable {e.name!r}")
        return env.ints[e.name]
    if isinstance(e, EArr):
        i = eval_expr(e.index, env)
        arr = env.arrays.get(e.array)
        if arr is None:
            raise InterpError(f"unbound array {e.array!r}")
        if not 0 <= i < len(arr):
            raise InterpError(f"read {e.array}[{i}] out of bounds 0..{len(arr) - 1}")
        return arr[i]
    if isinstance(e, EUn):
        v = eval_expr(e.arg, env)
        if e.op == "neg":
            return -v
        return 1 if v == 0 else 0  # not: any nonzero result would do; we fix 1
    assert isinstance(e, EBin)
    a, b = eval_expr(e.left, env), eval_expr(e.right, env)
    op = e.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "==":
        return 1 if a == b else 0
    if op == "!=":
        return 1 if a != b else 0
    if op == "<":
        return 1 if a < b else 0
    if op == "<=":
        return 1 if a <= b else 0
    if op == ">":
        return 1 if a > b else 0
    if op == ">=":
        return 1 if a >= b else 0
    raise InterpError(f"unknown operator {op!r}")


def step(p: ImpProgram, cfg: Configuration) -> Optional[Configuration]:
    """One transition; None on halt."""
    table = p.command_table()
    labels = [s.label for s in p.stmts]
    cmd = table.get(cfg.label)
    if cmd is None:
        raise InterpError(f"no command at label {cfg.label!r}")
    if isinstance(cmd, SHalt):
        return None
    env = cfg.env.copy()
    if isinstance(cmd, SAssign):
        env.ints[cmd.var] = eval_expr(cmd.expr, cfg.env)
        return Configuration(_next(labels, cfg.label), env)
    if isinstance(cmd, SArrAssign):
        i = eval_expr(cmd.index, cfg.env)
        v = eval_expr(cmd.expr, cfg.env)
        arr = env.arrays[cmd.array]
        if not 0 <= i < len(arr):
            raise InterpError(f"write {cmd.array}[{i}] out of bounds 0..{len(arr) - 1}")
        arr[i] = v
        return Configuration(_next(labels, cfg.label), env)
    if isinstance(cmd, SGoto):
        return Configuration(cmd.target, cfg.env)
    if isinstance(cmd, SIte):
        v = eval_expr(cmd.cond, cfg.env)
        return Configuration(cmd.then_label if v != 0 else cmd.else_label, cfg.env)
    raise InterpError(f"structured command at {cfg.label!r}; flatten first")


def _next(labels: list[Label], label: Label) -> Label:
    i = labels.index(label)
    if i + 1 >= len(labels):
        raise InterpError(f"fell off the end after label {label!r}")
    return labels[i + 1]


@dataclass
class RunResult:
    halted: bool
    env: Env
    steps: int


def run(p: ImpProgram, env0: Env, max_steps: int = 10_000) -> RunResult:
    env0.check_decls(p)
    cfg = Configuration(p.stmts[0].label, env0.copy())
    for k in range(max_steps):
        nxt = step(p, cfg)
        if nxt is None:
            return RunResult(True, cfg.env, k)
        cfg = nxt
    return RunResult(False, cfg.env, max_steps)


def run_structured(p: ImpProgram, env0: Env, max_steps: int = 10_000) -> RunResult:
    """Direct execution of while / if blocks, for differential testing."""
    env = env0.copy()
    fuel = [max_steps]

    class _Halt(Exception):
        pass

    class _OutOfFuel(Exception):
        pass

    def tick() -> None:
        if fuel[0] <= 0:
            raise _OutOfFuel
        fuel[0] -= 1

    def exec_block(stmts: list[Stmt]) -> None:
        for s in stmts:
            exec_one(s)

    def exec_one(s: Stmt) -> None:
        tick()
        if isinstance(s, SAssign):
            env.ints[s.var] = eval_expr(s.expr, env)
        elif isinstance(s, SArrAssign):
            i = eval_expr(s.index, env)
            arr = env.arrays[s.array]
            if not 0 <= i < len(arr):
                raise InterpError(f"write {s.array}[{i}] out of bounds")
            arr[i] = eval_expr(s.expr, env)
        elif isinstance(s, SIf):
            if eval_expr(s.cond, env) != 0:
                exec_block(s.then)
            elif s.els is not None:
                exec_block(s.els)
        elif isinstance(s, SWhile):
            while eval_expr(s.cond, env) != 0:
                tick()
                exec_block(s.body)
        elif isinstance(s, SHalt):
            raise _Halt
        else:
            raise ImpValidationError("goto is not executable in structured mode")

    try:
        exec_block(p.stmts)
    except _Halt:
        return RunResult(True, env, max_steps - fuel[0])
    except _OutOfFuel:
        return RunResult(False, env, max_steps)
    return RunResult(True, env, max_steps - fuel[0])
