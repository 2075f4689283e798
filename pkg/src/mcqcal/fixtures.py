"""Seeded synthetic record generators for demos and end-to-end tests.

The overconfident generator mimics a model whose confidences crowd near 1
while only ~60% of predictions are right, the regime temperature scaling is
meant to repair. Everything is a pure function of the seed.
"""

from __future__ import annotations

import numpy as np

from .decomposition import SyntheticJoint
from .records import CalibrationDataset, ChoiceFormat, PredictionRecord

FIXTURE_SEED = 1234
OVERCONFIDENT_ACCURACY = 0.6


def make_overconfident_dataset(
    seed: int,
    n: int,
    k: int = 4,
    accuracy: float = OVERCONFIDENT_ACCURACY,
    sharpness: float = 5.5,
    model_id: str = "toy-overconfident-v1",
    task: str = "synthetic-overconfident",
    id_prefix: str = "synth",
) -> CalibrationDataset:
    """n records with near-1 restricted confidences and ~``accuracy`` accuracy.

    Logits put a ``sharpness``-sized bump on the predicted letter; the label
    matches the prediction with probability ``accuracy`` and is otherwise a
    uniformly random other letter. Full-vocab probabilities are the softmax
    scaled by a <1 mass factor, so the plain-format decomposition path works
    on the same records.
    """
    rng = np.random.default_rng(seed)
    choices = tuple("ABCDEFGHIJKLMNOPQRSTUVWXYZ"[:k])
    records = []
    for i in range(n):
        pred = int(rng.integers(k))
        logits = rng.normal(0.0, 0.5, size=k)
        logits[pred] += sharpness + rng.normal(0.0, 0.4)
        if rng.random() < accuracy:
            label = pred
        else:
            others = [j for j in range(k) if j != pred]
            label = int(others[rng.integers(k - 1)])
        mass = 0.9 + 0.08 * rng.random()
        e = np.exp(logits - logits.max())
        probs = (e / e.sum()) * mass
        records.append(
            PredictionRecord(
                item_id=f"{id_prefix}-{i:04d}",
                task=task,
                model_id=model_id,
                shots=0,
                choice_format=ChoiceFormat.PLAIN,
                choices=choices,
                choice_logits=tuple(float(v) for v in logits),
                choice_probs_fullvocab=tuple(float(v) for v in probs),
                format_identifier_prob=None,
                label_index=label,
            )
        )
    return CalibrationDataset(records=tuple(records))


def make_overconfident_splits(
    seed: int = FIXTURE_SEED, n_calib: int = 300, n_heldout: int = 300
) -> tuple[CalibrationDataset, CalibrationDataset]:
    """Calibration and held-out splits drawn from the same distribution."""
    calib = make_overconfident_dataset(seed, n_calib, id_prefix="calib")
    heldout = make_overconfident_dataset(seed + 1, n_heldout, id_prefix="heldout")
    return calib, heldout


def make_random_joint(
    rng: np.random.Generator, max_responses: int = 20, max_formats: int = 5
) -> SyntheticJoint:
    """A random enumerable joint with one format tag per response."""
    n = int(rng.integers(1, max_responses + 1))
    n_formats = int(rng.integers(1, max_formats + 1))
    weights = rng.random(n) + 1e-9
    probs = weights / weights.sum()
    rows = [
        (f"y{i}", f"F{int(rng.integers(n_formats))}", float(probs[i]))
        for i in range(n)
    ]
    return SyntheticJoint.from_rows(rows)
