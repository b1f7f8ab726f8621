"""Command-line entry point: ``psilab verify|sweep|catalog|export``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import load_config
from .errors import ConfigError, PsilabError
from .report import _clean


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="psilab", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the configured suites and write a JSON report")
    v.add_argument("--config", required=True, help="path to a JSON run configuration")
    v.add_argument("--output", help="report path (overrides the config)")

    s = sub.add_parser("sweep", help="re-run the energy computations along an axis")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", choices=("lambda", "T", "grid"), default="lambda")
    s.add_argument("--output", help="write the sweep result as JSON")

    c = sub.add_parser("catalog", help="symbol families")
    c.add_argument("--list", action="store_true", required=True, help="list the families")

    e = sub.add_parser("export", help="dump field slices as CSV")
    e.add_argument("--fields", required=True, help="comma-separated field names")
    e.add_argument("--config", help="run configuration (default: gradient_model at Lambda=4)")
    e.add_argument("--dir", default=".", help="output directory")
    return p


def _dump(obj, path: Optional[str]) -> None:
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    from . import runner  # heavy imports after argument parsing

    try:
        if args.command == "catalog":
            for name, desc, params in runner.catalog_listing():
                extra = ", ".join(f"{k}={v:g}" for k, v in params.items())
                print(f"{name:18s} {desc}" + (f"  [{extra}]" if extra else ""))
            return 0
        if args.command == "export":
            cfg = load_config(args.config) if args.config else load_config(
                {"symbol": {"family": "gradient_model"}})
            names = [n.strip() for n in args.fields.split(",") if n.strip()]
            for path in runner.export_fields(cfg, names, args.dir):
                print(path)
            return 0
        cfg = load_config(args.config)
        if args.command == "verify":
            if args.output:
                cfg.output = args.output
            rep = runner.run(cfg)
            if not cfg.output:
                sys.stdout.write(rep.to_json())
            for e in rep.failures():
                print(f"FAIL {e.name}: margin {e.margin}", file=sys.stderr)
            return 0 if rep.passed else 1
        result = runner.sweep(cfg, args.axis)
        _dump(result, args.output)
        return 0 if result["pass"] else 1
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except PsilabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
