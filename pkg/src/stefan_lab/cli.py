"""``stefan-lab <config-path> [--kind K] [--out DIR] [--seed N]``.

Exit status: 0 success, 1 usage or configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, StefanLabError
from .runner import KINDS, dispatch, load_config, override


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stefan-lab", description=__doc__.splitlines()[0])
    ap.add_argument("config", help="path to the INI configuration")
    ap.add_argument("--kind", choices=KINDS, help="override [run] kind")
    ap.add_argument("--out", help="override [run] out (output directory)")
    ap.add_argument("--seed", type=int, help="override [run] seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _error_record(kind, exc, out=None):
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    key = getattr(exc, "key", None)
    if key is not None:
        record["key"] = key
    diag = getattr(exc, "diagnostics", None)
    if diag:
        record["diagnostics"] = {k: repr(v) for k, v in diag.items()}
    print(json.dumps(record), file=sys.stderr)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "error.json").write_text(json.dumps(record, indent=2) + "\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = override(load_config(args.config), kind=args.kind, out=args.out, seed=args.seed)
    except (ConfigError, OSError) as exc:
        _error_record("usage", exc)
        return 1
    try:
        summary = dispatch(cfg)
    except StefanLabError as exc:
        _error_record("numerical", exc, cfg.run.out)
        return 2
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
