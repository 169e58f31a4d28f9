"""Command-line entry point: ``qrepsim run|validate|oracle|presets``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, QrepsimError, RunError
from .experiments import (
    format_checks,
    load_scenario,
    oracle_checks,
    preset_doc,
    preset_names,
    read_scenario_doc,
    write_outputs,
)

OUT_ENV = "QREPSIM_OUT"


def _error(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)
    return code


def _load(args) -> "Scenario":  # noqa: F821
    overrides = list(args.override or [])
    if getattr(args, "seeds", None):
        overrides.append(f"seeds={list(range(1, args.seeds + 1))}")
    return load_scenario(read_scenario_doc(args.scenario), overrides)


def cmd_run(args) -> int:
    scenario = _load(args)
    out = args.out
    if out is None:
        root = os.environ.get(OUT_ENV)
        if not root:
            return _error("UsageError", f"--out not given and {OUT_ENV} is unset", 2)
        out = str(Path(root) / scenario.name)
    if Path(out).exists():
        return _error("OutputExists", f"refusing to overwrite existing output directory {out}", 3, path=out)
    write_outputs(scenario, out, workers=args.workers)
    print(Path(out, "summary.txt").read_text(), end="")
    print(f"wrote {out}")
    return 0


def cmd_validate(args) -> int:
    scenario = _load(args)
    print(f"ok {scenario.name} ({scenario.kind})")
    return 0


def cmd_oracle(args) -> int:
    checks = oracle_checks(args.grid_step, args.random_cases)
    print(format_checks(checks), end="")
    ok = all(c.passed for c in checks)
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


def cmd_presets(args) -> int:
    for name in preset_names():
        doc = preset_doc(name)
        desc = " ".join(doc.get("description", "").split())
        print(f"{name:<18}{doc['kind']:<16}{desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qrepsim", description="Quantum repeater network simulator.")
    p.add_argument("--version", action="version", version=f"qrepsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("scenario", help="scenario file or shipped preset name")
        sp.add_argument("--override", action="append", metavar="KEY=VALUE", help="dotted-path override; repeatable")
        sp.add_argument("--seeds", type=int, metavar="N", help="replace the seed list with 1..N")

    run = sub.add_parser("run", help="run a scenario and write CSV outputs")
    scenario_args(run)
    run.add_argument("--out", help=f"output directory (must not exist); default ${OUT_ENV}/<name>")
    run.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a scenario document")
    scenario_args(val)
    val.set_defaults(func=cmd_validate)

    orc = sub.add_parser("oracle", help="compare analytic formulas with exact circuit simulation")
    orc.add_argument("--grid-step", type=float, default=0.05)
    orc.add_argument("--random-cases", type=int, default=50)
    orc.set_defaults(func=cmd_oracle)

    pre = sub.add_parser("presets", help="list shipped scenarios")
    pre.set_defaults(func=cmd_presets)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _error("ConfigError", exc.reason, 2, path=exc.path)
    except RunError as exc:
        return _error("RunError", str(exc.original), 1, strategy=exc.strategy, seed=exc.seed)
    except QrepsimError as exc:
        return _error(type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
