from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from mcqcal.records import CalibrationDataset, ChoiceFormat, PredictionRecord

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"
TEMPLATES = REPO_ROOT / "templates"


def make_record(
    logits,
    label=None,
    item_id="item-0",
    fmt=ChoiceFormat.PLAIN,
    fullvocab=None,
    identifier_prob=None,
    permutation_id=None,
    position=None,
    shots=0,
):
    k = len(logits)
    return PredictionRecord(
        item_id=item_id,
        task="unit",
        model_id="test-model",
        shots=shots,
        choice_format=fmt,
        choices=tuple("ABCDEFGHIJKLMNOPQRSTUVWXYZ"[:k]),
        choice_logits=tuple(float(x) for x in logits),
        choice_probs_fullvocab=None if fullvocab is None else tuple(fullvocab),
        format_identifier_prob=identifier_prob,
        label_index=label,
        permutation_id=permutation_id,
        position=position,
    )


def make_dataset(rows) -> CalibrationDataset:
    """rows: iterable of (logits, label) or PredictionRecord."""
    records = []
    for i, row in enumerate(rows):
        if isinstance(row, PredictionRecord):
            records.append(row)
        else:
            logits, label = row
            records.append(make_record(logits, label, item_id=f"item-{i}"))
    return CalibrationDataset(records=tuple(records))


def random_labeled_dataset(rng: np.random.Generator, n=None, k=None, scale=3.0):
    n = n or int(rng.integers(1, 51))
    k = k or int(rng.integers(2, 7))
    rows = []
    for _ in range(n):
        logits = rng.normal(0.0, scale, size=k)
        label = int(rng.integers(k))
        rows.append((logits, label))
    return make_dataset(rows)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
