"""Command line entry point.

    clpverify verify prog.imp prop.spec [options]

Exit codes: 0 correct, 1 incorrect, 2 unknown, 3 usage or input error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .driver import VerifyConfig, verify


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clpverify")
    sub = p.add_subparsers(dest="command", required=True)
    v = sub.add_parser("verify", help="prove or refute a program / property pair")
    v.add_argument("imp", type=Path, help="program file (.imp)")
    v.add_argument("spec", type=Path, help="property file (.spec)")
    v.add_argument("--propagate", choices=["error", "init"], default="error")
    v.add_argument("--gen", choices=["widen", "widensum", "msg"], default=None)
    v.add_argument("--max-iters", type=int, default=4)
    v.add_argument("--depth-oracle", type=int, default=60)
    v.add_argument("--emit", default="", help="comma list from: t,ta,tarev,tb,trace")
    v.add_argument("--out-dir", type=Path, default=None)
    v.add_argument("--config", type=Path, default=None, help="key=value file overriding flags")
    return p


_CONFIG_KEYS = {
    "propagate": str,
    "gen": str,
    "max-iters": int,
    "depth-oracle": int,
    "emit": str,
    "out-dir": str,
    "gen-cap": int,
    "max-defs": int,
    "node-budget": int,
    "law-budget": int,
}


def _apply_config(path: Path, values: dict) -> dict:
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _CONFIG_KEYS[key](val.strip())
    return values


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 3 if e.code not in (0, None) else 0
    values = {
        "propagate": args.propagate,
        "gen": args.gen,
        "max-iters": args.max_iters,
        "depth-oracle": args.depth_oracle,
        "emit": args.emit,
        "out-dir": str(args.out_dir) if args.out_dir else None,
        "gen-cap": 50,
        "max-defs": 400,
        "node-budget": 60_000,
        "law-budget": 100,
    }
    try:
        if args.config is not None:
            _apply_config(args.config, values)
        imp_text = args.imp.read_text()
        spec_text = args.spec.read_text()
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3

    emit = tuple(x for x in (values["emit"] or "").split(",") if x)
    out_dir = Path(values["out-dir"]) if values["out-dir"] else (args.imp.parent if emit else None)
    cfg = VerifyConfig(
        propagate=values["propagate"],
        gen=values["gen"] or None,
        max_iters=values["max-iters"],
        depth_oracle=values["depth-oracle"],
        gen_cap=values["gen-cap"],
        max_defs=values["max-defs"],
        node_budget=values["node-budget"],
        law_budget=values["law-budget"],
        emit=emit,
        out_dir=out_dir,
    )
    try:
        result = verify(imp_text, spec_text, cfg)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    v = result.verdict
    if v.kind == "correct":
        print("CORRECT")
    elif v.kind == "incorrect":
        if v.witness is not None:
            parts = ", ".join(f"{k}={x}" for k, x in sorted(v.witness.ints.items()))
            print(f"INCORRECT witness: {parts}")
        else:
            print("INCORRECT")
    else:
        print(f"UNKNOWN ({v.reason}; {v.iterations} propagation rounds)")
    return v.exit_code()


if __name__ == "__main__":
    sys.exit(main())
