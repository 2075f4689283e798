"""Command-line entry point for the extraction adapter."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from .adapter import AdapterConfig, AdapterError, extract_to_lines


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcqcal-adapter",
        description="Score choice letters with a causal LM and write prediction records.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="run the model over prompt plans")
    p.add_argument("--plans", required=True, help="prompt-plan jsonl from the toolkit")
    p.add_argument("--items", required=True, help="MCQ item jsonl (labels, candidates)")
    p.add_argument("--model", required=True, help="local path or hub identifier")
    p.add_argument("--device", default="cpu")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--choice-format", choices=["plain", "paren"], default="paren")
    p.add_argument("--max-context", type=int, default=2048)
    p.add_argument("--model-id", help="model_id to stamp on records (default: ref basename)")
    p.add_argument("--task-description", help="needed to rebuild over-long prompts")
    p.add_argument("--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = AdapterConfig(
        model_ref=args.model,
        device=args.device,
        batch_size=args.batch_size,
        choice_format=args.choice_format,
        max_context=args.max_context,
        model_id=args.model_id,
        task_description=args.task_description,
    )
    try:
        plan_lines = Path(args.plans).read_text(encoding="utf-8").splitlines()
        item_lines = Path(args.items).read_text(encoding="utf-8").splitlines()
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=out_path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                for line in extract_to_lines(
                    plan_lines, cfg, item_lines, items_path=Path(args.items)
                ):
                    fh.write(line + "\n")
            os.replace(tmp, out_path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except AdapterError as exc:
        sys.stderr.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
