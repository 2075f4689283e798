"""Command-line front end.

Every subcommand is a thin composition of module operations; the numeric
logic lives in the library. Exit codes: 0 success, 1 validation/data errors
(machine-readable error object on stderr), 2 usage errors. Output files are
written atomically, and re-running a subcommand on identical inputs yields
byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import calibrators, decomposition, metrics, prompts, records, reporting
from .errors import McqcalError
from .metrics import BinningMode
from .records import ChoiceFormat, ConfidencePolicy

_POLICIES = {p.value: p for p in ConfidencePolicy}
_BINNINGS = {m.value: m for m in BinningMode}
_FORMATS = {f.value: f for f in ChoiceFormat}


def _input_stanza(*paths: str) -> dict:
    return {
        "inputs": [
            {"path": str(p), "sha256": reporting.file_sha256(p)} for p in paths
        ]
    }


def _read_dataset(path: str, lenient: bool = False) -> records.CalibrationDataset:
    with open(path, "r", encoding="utf-8") as fh:
        return records.load_dataset(fh, lenient=lenient)


def _read_items(path: str) -> list[records.MCQItem]:
    with open(path, "r", encoding="utf-8") as fh:
        return records.load_items(fh)


def _emit_lines(lines, out: str | None) -> None:
    """Stream lines (without newlines) to a file or stdout."""
    chunks = (line + "\n" for line in lines)
    if out is None:
        for chunk in chunks:
            sys.stdout.write(chunk)
    else:
        reporting.atomic_write_lines(out, chunks)


def _cmd_validate(args: argparse.Namespace) -> int:
    ds = _read_dataset(args.input, lenient=args.lenient)
    payload = {
        **_input_stanza(args.input),
        "records": len(ds),
        "rejects": [
            {"line": r.line_number, "error": r.error, "message": r.message}
            for r in ds.rejects
        ],
    }
    sys.stdout.write(reporting.report_json(payload))
    return 0


def _refined_report(args: argparse.Namespace, ds, m, mode, policy):
    """ECE report, optionally through a stored calibrator."""
    if getattr(args, "calibrator", None):
        with open(args.calibrator, "r", encoding="utf-8") as fh:
            cal = calibrators.calibrator_from_json_dict(json.load(fh))
        if isinstance(cal, calibrators.KdeConfidenceCalibrator):
            confs, correct = [], []
            for r in ds.records:
                conf, pred = metrics.confidence_and_prediction(r, policy)
                confs.append(cal.refine(conf))
                correct.append(pred == r.label_index)
            return metrics.ece_report_from_confidences(confs, correct, m, mode, policy)
        ds = cal.transform(ds)
    return metrics.ece(ds, m, mode, policy)


def _cmd_ece(args: argparse.Namespace) -> int:
    ds = _read_dataset(args.input)
    report = _refined_report(
        args, ds, args.bins, _BINNINGS[args.binning], _POLICIES[args.policy]
    )
    payload = {
        **_input_stanza(args.input),
        "policy": args.policy,
        "accuracy": metrics.accuracy(ds, _POLICIES[args.policy]),
        **report.to_json_dict(),
    }
    sys.stdout.write(reporting.report_json(payload))
    return 0


def _cmd_reliability(args: argparse.Namespace) -> int:
    ds = _read_dataset(args.input)
    mode = _BINNINGS[args.binning]
    policy = _POLICIES[args.policy]
    report = metrics.ece(ds, args.bins, mode, policy)
    out = Path(args.out)
    if out.suffix == ".csv":
        reporting.atomic_write_text(out, reporting.bins_to_csv(report.bins))
    elif out.suffix == ".svg":
        hist = metrics.confidence_histogram(ds, args.bins, policy)
        svg = reporting.reliability_svg(
            report.bins, hist, title=f"Reliability (ECE {report.ece:.4f}, n {report.n})"
        )
        reporting.atomic_write_text(out, svg)
    elif out.suffix == ".json":
        payload = {**_input_stanza(args.input), "policy": args.policy, **report.to_json_dict()}
        reporting.atomic_write_text(out, reporting.report_json(payload))
    else:
        raise McqcalError(f"unsupported output extension {out.suffix!r}")
    sys.stdout.write(
        reporting.report_json({**_input_stanza(args.input), "out": str(out)})
    )
    return 0


def _cmd_fit(args: argparse.Namespace) -> int:
    ds = _read_dataset(args.calib)
    policy = _POLICIES[args.policy]
    if args.method == "ts-nll":
        cal = calibrators.fit_temperature_nll(ds)
    elif args.method == "ts-const":
        cal = calibrators.constant_temperature(args.temperature)
    elif args.method == "ts-kl":
        ref_ds = _read_dataset(args.pretrained)
        refs = calibrators.reference_distributions_for(ds, ref_ds)
        cal = calibrators.fit_temperature_kl(ds, refs)
    else:
        cal = calibrators.fit_kde(ds, bandwidth=args.bandwidth, policy=policy)
    # The emitted file is the bare calibrator object; provenance travels on
    # the stdout summary so other tools can consume the file as-is.
    reporting.atomic_write_text(
        args.out, reporting.report_json(calibrators.calibrator_to_json_dict(cal))
    )
    sys.stdout.write(
        reporting.report_json(
            {
                **_input_stanza(*filter(None, [args.calib, args.pretrained])),
                "out": args.out,
                "method": args.method,
            }
        )
    )
    return 0


def _cmd_apply(args: argparse.Namespace) -> int:
    with open(args.calibrator, "r", encoding="utf-8") as fh:
        cal = calibrators.calibrator_from_json_dict(json.load(fh))
    if not isinstance(cal, calibrators.TemperatureScaler):
        raise McqcalError(
            "apply rewrites logits and needs a temperature calibrator; "
            "evaluate a KDE calibrator with `ece --calibrator`"
        )
    ds = _read_dataset(args.input)
    reporting.atomic_write_lines(
        args.out, (records.dump_record(r) + "\n" for r in cal.transform(ds).records)
    )
    sys.stdout.write(
        reporting.report_json(
            {
                **_input_stanza(args.input, args.calibrator),
                "out": args.out,
                "temperature": cal.fitted_temperature,
            }
        )
    )
    return 0


def _cmd_decompose(args: argparse.Namespace) -> int:
    ds = _read_dataset(args.input)
    rows = [decomposition.decomposition_row(r) for r in ds.records]
    reporting.atomic_write_text(args.out, reporting.decomposition_rows_to_csv(rows))
    payload = {**_input_stanza(args.input), "out": args.out, "rows": len(rows)}
    if rows and all(r.label_index is not None for r in ds.records):
        payload["answer_ece"] = decomposition.answer_uncertainty_ece(ds.records).ece
    sys.stdout.write(reporting.report_json(payload))
    return 0


def _cmd_prompt(args: argparse.Namespace) -> int:
    items = _read_items(args.items)
    fmt = _FORMATS[args.choice_format]
    shots: tuple[records.MCQItem, ...] = ()
    if args.shots_file:
        shots = tuple(_read_items(args.shots_file)[: args.k])
    def rows():
        for item in items:
            spec = prompts.PromptSpec(
                item=item,
                choice_format=fmt,
                shots=shots,
                task_description=args.task_description,
            )
            text = prompts.build_prompt(spec)
            yield prompts.dump_plan_row(
                {
                    "permutation_id": 0,
                    "position": len(shots),
                    "item_id": item.item_id,
                    "shot_item_ids": [s.item_id for s in shots],
                    "prompt_sha256": prompts.prompt_sha256(text),
                    "prompt": text,
                }
            )

    _emit_lines(rows(), args.out)
    sys.stdout.write(
        reporting.report_json(
            {**_input_stanza(args.items), "out": args.out, "prompts": len(items)}
        )
    )
    return 0


def _read_pairs(path: str) -> list[prompts.PredictionPair]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(prompts.pair_from_json_dict(json.loads(line)))
    return out


def _cmd_permute(args: argparse.Namespace) -> int:
    items = _read_items(args.items)
    if args.emit == "plans":
        plans = prompts.enumerate_permutations(items)
        rows = prompts.plan_rows(
            plans, _FORMATS[args.choice_format], args.task_description
        )
        _emit_lines((prompts.dump_plan_row(r) for r in rows), args.out)
        return 0
    pairs = _read_pairs(args.pairs)
    if args.emit == "select-all-unique":
        selected = prompts.select_pairs_all_unique(
            pairs, item_ids=[i.item_id for i in items]
        )
    else:
        selected = prompts.select_pairs_last(pairs, len(items))
    _emit_lines((json.dumps(p.to_json_dict()) for p in selected), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcqcal",
        description="Calibration analysis for LMs on multiple-choice questions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a record file")
    p.add_argument("input")
    p.add_argument("--lenient", action="store_true")
    p.set_defaults(func=_cmd_validate)

    def add_metric_flags(p, with_binning=True):
        p.add_argument("--input", required=True)
        p.add_argument("--bins", type=int, default=10)
        if with_binning:
            p.add_argument("--binning", choices=sorted(_BINNINGS), default="equal-mass")
        p.add_argument("--policy", choices=sorted(_POLICIES), default="restricted")

    p = sub.add_parser("ece", help="expected calibration error report")
    add_metric_flags(p)
    p.add_argument("--calibrator", help="optional stored calibrator to apply first")
    p.set_defaults(func=_cmd_ece)

    p = sub.add_parser("reliability", help="reliability bins as json/csv/svg")
    add_metric_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_reliability)

    p = sub.add_parser("fit", help="fit a post-hoc calibrator")
    p.add_argument("--method", choices=["ts-nll", "ts-const", "kde", "ts-kl"], required=True)
    p.add_argument("--temperature", type=float, default=calibrators.DEFAULT_CONSTANT_TEMPERATURE)
    p.add_argument("--bandwidth", type=float, default=calibrators.DEFAULT_KDE_BANDWIDTH)
    p.add_argument("--calib", required=True)
    p.add_argument("--pretrained", help="reference record file (ts-kl only)")
    p.add_argument("--policy", choices=sorted(_POLICIES), default="restricted")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("apply", help="apply a temperature calibrator to records")
    p.add_argument("--calibrator", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_apply)

    p = sub.add_parser("decompose", help="answer/format decomposition rows")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("prompt", help="build prompts for items")
    p.add_argument("--items", required=True)
    p.add_argument("--choice-format", choices=sorted(_FORMATS), required=True)
    p.add_argument("--task-description")
    p.add_argument("--shots-file")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_prompt)

    p = sub.add_parser("permute", help="permutation plans and pair selection")
    p.add_argument("--items", required=True)
    p.add_argument("--emit", choices=["plans", "select-all-unique", "select-last"], required=True)
    p.add_argument("--pairs", help="prediction-pair file (selection modes)")
    p.add_argument("--choice-format", choices=sorted(_FORMATS), default="paren")
    p.add_argument("--task-description")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_permute)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "fit" and args.method == "ts-kl" and not args.pretrained:
        parser.error("--pretrained is required with --method ts-kl")
    if args.command == "permute" and args.emit != "plans" and not args.pairs:
        parser.error(f"--pairs is required with --emit {args.emit}")

    try:
        return args.func(args)
    except McqcalError as exc:
        sys.stderr.write(json.dumps(exc.to_json_dict()) + "\n")
        return 1
    except OSError as exc:
        sys.stderr.write(json.dumps({"error": "IoError", "message": str(exc)}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
