"""Command line entry point: ``delone-ids run|verify|schema``."""

from __future__ import annotations

import argparse
import json
import sys

from .config import SCHEMA, ConfigError, ExperimentConfig
from .delone_core import DeloneError, WindowError


def _cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.load(args.config)
    except ConfigError as exc:
        print(f"error: {args.config} does not match the config schema", file=sys.stderr)
        for e in exc.errors:
            print(f"  at {e}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    from .reports import run

    try:
        res = run(cfg, args.out)
    except WindowError as exc:
        hint = f" (needs padding >= {exc.required_padding})" if exc.required_padding is not None else ""
        print(f"error: {exc}{hint}", file=sys.stderr)
        return 2
    except DeloneError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(res.summary)
    print(f"artifacts in {res.out_dir}")
    return res.exit_code


def _cmd_verify(args) -> int:
    from .verify import SOFT_LIMIT_SECONDS, verify_suite

    results = verify_suite(mutations=tuple(args.mutate or ()), only=set(args.only) if args.only else None)
    total = 0.0
    for r in results:
        print(r.line())
        total += r.seconds
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed in {total:.1f}s")
    if total > SOFT_LIMIT_SECONDS:
        print(f"warning: suite took longer than {SOFT_LIMIT_SECONDS:.0f}s", file=sys.stderr)
    return 1 if failed else 0


def _cmd_schema(args) -> int:
    print(json.dumps(SCHEMA, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="delone-ids", description="Density of states experiments on Delone sets.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--out", default=None, help="output directory (default: the config's output_dir)")
    r.set_defaults(fn=_cmd_run)
    v = sub.add_parser("verify", help="run the desk-scale self-verification suite")
    v.add_argument("--mutate", action="append", choices=["halve_bound"], help="inject a known defect")
    v.add_argument("--only", action="append", help="run only the named property")
    v.set_defaults(fn=_cmd_verify)
    s = sub.add_parser("schema", help="print the config JSON schema")
    s.set_defaults(fn=_cmd_schema)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
