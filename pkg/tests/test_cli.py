from __future__ import annotations

import json

import numpy as np
import pytest

from mcqcal.calibrators import fit_temperature_nll
from mcqcal.cli import main
from mcqcal.metrics import ece
from mcqcal.numerics import softmax_with_temperature
from mcqcal.records import dump_dataset, load_dataset

from .conftest import FIXTURES

SYNTH = str(FIXTURES / "synth.jsonl")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def write_jsonl(path, ds):
    path.write_text(dump_dataset(ds), encoding="utf-8")
    return str(path)


def test_validate_happy_path(capsys):
    code, out, err = run(capsys, "validate", SYNTH)
    assert code == 0
    payload = json.loads(out)
    assert payload["records"] == 50
    assert payload["rejects"] == []
    assert len(payload["inputs"][0]["sha256"]) == 64


def test_validate_strict_fails_on_bad_line(tmp_path, capsys):
    p = tmp_path / "bad.jsonl"
    good = (FIXTURES / "synth.jsonl").read_text().splitlines()[0]
    p.write_text(good + "\n" + '{"item_id": "x"}\n')
    code, out, err = run(capsys, "validate", str(p))
    assert code == 1
    diag = json.loads(err)
    assert diag["error"] == "MissingField"
    assert "line 2" in diag["message"]


def test_validate_lenient_reports_rejects(tmp_path, capsys):
    p = tmp_path / "bad.jsonl"
    good = (FIXTURES / "synth.jsonl").read_text().splitlines()[0]
    p.write_text(good + "\n" + "garbage\n")
    code, out, _ = run(capsys, "validate", str(p), "--lenient")
    assert code == 0
    payload = json.loads(out)
    assert payload["records"] == 1
    assert payload["rejects"][0]["line"] == 2


def test_ece_report_on_fixture(capsys):
    code, out, _ = run(capsys, "ece", "--input", SYNTH, "--bins", "10",
                       "--binning", "equal-mass")
    assert code == 0
    payload = json.loads(out)
    ds = load_dataset(open(SYNTH, encoding="utf-8"))
    want = ece(ds, 10)
    assert payload["ece"] == want.ece
    assert payload["n"] == 50
    assert len(payload["bins"]) == 10


def test_ece_deterministic_output(capsys):
    _, first, _ = run(capsys, "ece", "--input", SYNTH)
    _, second, _ = run(capsys, "ece", "--input", SYNTH)
    assert first == second


def test_fit_kl_requires_pretrained(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--method", "ts-kl", "--calib", SYNTH, "--out", "/tmp/x.json"])
    assert exc.value.code == 2


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_fit_and_apply_constant(tmp_path, capsys):
    cal_path = tmp_path / "cal.json"
    code, *_ = run(capsys, "fit", "--method", "ts-const", "--temperature", "2.5",
                   "--calib", SYNTH, "--out", str(cal_path))
    assert code == 0
    assert json.loads(cal_path.read_text())["temperature"] == 2.5

    out_path = tmp_path / "scaled.jsonl"
    code, *_ = run(capsys, "apply", "--calibrator", str(cal_path),
                   "--input", SYNTH, "--out", str(out_path))
    assert code == 0
    src = load_dataset(open(SYNTH, encoding="utf-8"))
    scaled = load_dataset(open(out_path, encoding="utf-8"))
    for a, b in zip(src.records, scaled.records):
        want = softmax_with_temperature(a.choice_logits, 2.5)
        got = softmax_with_temperature(b.choice_logits, 1.0)
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_fit_nll_matches_module(tmp_path, capsys):
    cal_path = tmp_path / "nll.json"
    code, *_ = run(capsys, "fit", "--method", "ts-nll", "--calib", SYNTH,
                   "--out", str(cal_path))
    assert code == 0
    ds = load_dataset(open(SYNTH, encoding="utf-8"))
    want = fit_temperature_nll(ds).fitted_temperature
    assert json.loads(cal_path.read_text())["temperature"] == want


def test_fit_kl_with_reference(tmp_path, capsys):
    # Reference = the same records, so the fitted temperature is 1.
    code, *_ = run(capsys, "fit", "--method", "ts-kl", "--calib", SYNTH,
                   "--pretrained", SYNTH, "--out", str(tmp_path / "kl.json"))
    assert code == 0
    t = json.loads((tmp_path / "kl.json").read_text())["temperature"]
    assert t == pytest.approx(1.0, abs=1e-3)


def test_apply_rejects_kde(tmp_path, capsys):
    cal_path = tmp_path / "kde.json"
    run(capsys, "fit", "--method", "kde", "--calib", SYNTH, "--out", str(cal_path))
    code, _, err = run(capsys, "apply", "--calibrator", str(cal_path),
                       "--input", SYNTH, "--out", str(tmp_path / "x.jsonl"))
    assert code == 1
    assert json.loads(err)["error"] == "McqcalError"


def test_ece_through_kde_calibrator(tmp_path, capsys):
    cal_path = tmp_path / "kde.json"
    run(capsys, "fit", "--method", "kde", "--calib", SYNTH, "--out", str(cal_path))
    code, out, _ = run(capsys, "ece", "--input", SYNTH, "--calibrator", str(cal_path))
    assert code == 0
    assert 0.0 <= json.loads(out)["ece"] <= 1.0


def test_reliability_outputs(tmp_path, capsys):
    for suffix in ("json", "csv", "svg"):
        out_path = tmp_path / f"rel.{suffix}"
        code, *_ = run(capsys, "reliability", "--input", SYNTH, "--bins", "10",
                       "--out", str(out_path))
        assert code == 0 and out_path.exists()
    csv_text = (tmp_path / "rel.csv").read_text()
    assert csv_text.startswith("bin_lo,bin_hi,count,accuracy,mean_confidence\n")
    assert len(csv_text.splitlines()) == 11
    svg_first = (tmp_path / "rel.svg").read_bytes()
    run(capsys, "reliability", "--input", SYNTH, "--bins", "10",
        "--out", str(tmp_path / "rel.svg"))
    assert (tmp_path / "rel.svg").read_bytes() == svg_first
    assert svg_first.startswith(b"<svg ")


def test_decompose_rows(tmp_path, capsys):
    out_path = tmp_path / "rows.csv"
    code, *_ = run(capsys, "decompose", "--input", SYNTH, "--out", str(out_path))
    assert code == 0
    lines = out_path.read_text().splitlines()
    assert lines[0] == "item_id,p_format,source,answer_confidence,answer_pred_index,label_index"
    assert len(lines) == 51
    assert all(",choice-mass," in line for line in lines[1:])


def test_prompt_subcommand(tmp_path, capsys):
    items_path = tmp_path / "items.jsonl"
    items_path.write_text(
        json.dumps(
            {
                "item_id": "i1",
                "task": "demo",
                "question": "Q?",
                "candidates": ["a", "b"],
                "gold_index": 0,
            }
        )
        + "\n"
    )
    out_path = tmp_path / "plans.jsonl"
    code, *_ = run(capsys, "prompt", "--items", str(items_path),
                   "--choice-format", "paren", "--task-description", "Demo.",
                   "--out", str(out_path))
    assert code == 0
    row = json.loads(out_path.read_text().splitlines()[0])
    assert row["prompt"] == "Demo.\n\nQ?\n(A). a\n(B). b\nAnswer: ("
    assert row["position"] == 0


def _items_file(tmp_path, n=3):
    path = tmp_path / "dev.jsonl"
    rows = [
        {
            "item_id": f"d{i}",
            "task": "demo",
            "question": f"Q{i}?",
            "candidates": ["a", "b"],
            "gold_index": i % 2,
        }
        for i in range(n)
    ]
    path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    return path


def test_permute_plans_and_selection(tmp_path, capsys):
    items_path = _items_file(tmp_path, 3)
    plans_path = tmp_path / "plans.jsonl"
    code, *_ = run(capsys, "permute", "--items", str(items_path), "--emit", "plans",
                   "--choice-format", "paren", "--out", str(plans_path))
    assert code == 0
    plan_lines = plans_path.read_text().splitlines()
    assert len(plan_lines) == 18  # 3! permutations x 3 positions

    pairs_path = tmp_path / "pairs.jsonl"
    pairs = []
    for line in plan_lines:
        row = json.loads(line)
        pairs.append(
            {
                "permutation_id": row["permutation_id"],
                "position": row["position"],
                "item_id": row["item_id"],
                "confidence": 0.5,
                "predicted_index": 0,
                "label_index": 0,
            }
        )
    pairs_path.write_text("".join(json.dumps(p) + "\n" for p in pairs))

    uniq_path = tmp_path / "uniq.jsonl"
    code, *_ = run(capsys, "permute", "--items", str(items_path),
                   "--emit", "select-all-unique", "--pairs", str(pairs_path),
                   "--out", str(uniq_path))
    assert code == 0
    assert len(uniq_path.read_text().splitlines()) == 15

    last_path = tmp_path / "last.jsonl"
    code, *_ = run(capsys, "permute", "--items", str(items_path),
                   "--emit", "select-last", "--pairs", str(pairs_path),
                   "--out", str(last_path))
    assert code == 0
    rows = [json.loads(l) for l in last_path.read_text().splitlines()]
    assert len(rows) == 6 and all(r["position"] == 2 for r in rows)


def test_permute_selection_requires_pairs(tmp_path):
    items_path = _items_file(tmp_path, 2)
    with pytest.raises(SystemExit) as exc:
        main(["permute", "--items", str(items_path), "--emit", "select-last"])
    assert exc.value.code == 2
