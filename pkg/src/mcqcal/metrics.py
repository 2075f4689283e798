"""Calibration measurement: accuracy, ECE, reliability bins, confidence histograms.

ECE is the count-weighted mean absolute gap between per-bin accuracy and
per-bin mean confidence. "Equal-sized" binning defaults to equal population
(robust to the usual confidence pile-up near 1.0); fixed-width bins over
[0, 1] are selectable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import EmptyDataset, PolicyUnavailable, UnlabeledRecord
from .numerics import softmax_with_temperature
from .records import CalibrationDataset, ConfidencePolicy, PredictionRecord


class BinningMode(enum.Enum):
    EQUAL_MASS = "equal-mass"
    EQUAL_WIDTH = "equal-width"


@dataclass(frozen=True)
class CalibrationBin:
    """One reliability-diagram bin; statistics are absent when the bin is empty."""

    index: int
    lo: float
    hi: float
    count: int
    accuracy: float | None
    mean_confidence: float | None

    def to_json_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "count": self.count,
            "acc": self.accuracy,
            "conf": self.mean_confidence,
        }


@dataclass(frozen=True)
class EceReport:
    bins: tuple[CalibrationBin, ...]
    ece: float
    n: int
    binning_mode: BinningMode
    policy: ConfidencePolicy

    def to_json_dict(self) -> dict:
        return {
            "ece": self.ece,
            "n": self.n,
            "binning": self.binning_mode.value,
            "bins": [b.to_json_dict() for b in self.bins],
        }


class HistogramBin(NamedTuple):
    lo: float
    hi: float
    count: int


def confidence_and_prediction(
    record: PredictionRecord, policy: ConfidencePolicy
) -> tuple[float, int]:
    """The record's confidence and predicted candidate index under a policy.

    Restricted policy: max of softmax over the stored choice logits.
    Full-vocab policy: max of the stored whole-vocabulary-normalized choice
    probabilities. Argmax ties break toward the lowest index.
    """
    if policy is ConfidencePolicy.FULL_VOCAB:
        if record.choice_probs_fullvocab is None:
            raise PolicyUnavailable(
                f"record {record.item_id!r} has no choice_probs_fullvocab"
            )
        probs = np.asarray(record.choice_probs_fullvocab)
    else:
        probs = softmax_with_temperature(record.choice_logits, 1.0)
    idx = int(np.argmax(probs))  # np.argmax returns the first (lowest) maximum
    return float(probs[idx]), idx


def _require_labeled(ds: CalibrationDataset) -> None:
    if len(ds) == 0:
        raise EmptyDataset("no records")
    for r in ds.records:
        if r.label_index is None:
            raise UnlabeledRecord(f"record {r.item_id!r} has no label_index")


def _conf_correct(
    ds: CalibrationDataset, policy: ConfidencePolicy
) -> tuple[np.ndarray, np.ndarray]:
    confs = np.empty(len(ds))
    correct = np.empty(len(ds), dtype=bool)
    for i, r in enumerate(ds.records):
        conf, pred = confidence_and_prediction(r, policy)
        confs[i] = conf
        correct[i] = pred == r.label_index
    return confs, correct


def accuracy(ds: CalibrationDataset, policy: ConfidencePolicy) -> float:
    """Fraction of records whose predicted index equals the label."""
    _require_labeled(ds)
    _, correct = _conf_correct(ds, policy)
    return _mean(correct)


def _mean(values) -> float:
    # Exactly rounded, so the result does not depend on summation order and
    # permuting a dataset leaves every reported statistic bit-identical.
    return math.fsum(map(float, values)) / len(values)


def _equal_width_index(confs: np.ndarray, m: int) -> np.ndarray:
    # Bin k covers (k/m, (k+1)/m]; bin 0 is closed at 0.
    edges = np.array([(j + 1) / m for j in range(m - 1)])
    return np.searchsorted(edges, confs, side="left")


def _bin_memberships(
    confs: np.ndarray, correct: np.ndarray, m: int, mode: BinningMode
) -> list[CalibrationBin]:
    n = len(confs)
    bins: list[CalibrationBin] = []

    if mode is BinningMode.EQUAL_WIDTH:
        which = _equal_width_index(confs, m)
        for k in range(m):
            members = which == k
            count = int(members.sum())
            bins.append(_make_bin(k, k / m, (k + 1) / m, confs[members], correct[members], count))
        return bins

    # Equal mass: stable sort by confidence, contiguous groups whose sizes
    # differ by at most one, earlier bins taking the extra element.
    order = np.argsort(confs, kind="stable")
    base, extra = divmod(n, m)
    start = 0
    prev_hi = 0.0
    for k in range(m):
        size = base + (1 if k < extra else 0)
        members = order[start : start + size]
        start += size
        if size == 0:
            bins.append(CalibrationBin(k, prev_hi, prev_hi, 0, None, None))
            continue
        lo = float(confs[members].min())
        hi = float(confs[members].max())
        prev_hi = hi
        bins.append(_make_bin(k, lo, hi, confs[members], correct[members], size))
    return bins


def _make_bin(
    k: int, lo: float, hi: float, confs: np.ndarray, correct: np.ndarray, count: int
) -> CalibrationBin:
    if count == 0:
        return CalibrationBin(k, lo, hi, 0, None, None)
    return CalibrationBin(
        index=k,
        lo=lo,
        hi=hi,
        count=count,
        accuracy=_mean(correct),
        mean_confidence=_mean(confs),
    )


def reliability_bins(
    ds: CalibrationDataset,
    m: int,
    mode: BinningMode = BinningMode.EQUAL_MASS,
    policy: ConfidencePolicy = ConfidencePolicy.RESTRICTED_SOFTMAX,
) -> list[CalibrationBin]:
    if m < 1:
        raise ValueError(f"need at least one bin, got m={m}")
    _require_labeled(ds)
    confs, correct = _conf_correct(ds, policy)
    return _bin_memberships(confs, correct, m, mode)


def ece(
    ds: CalibrationDataset,
    m: int = 10,
    mode: BinningMode = BinningMode.EQUAL_MASS,
    policy: ConfidencePolicy = ConfidencePolicy.RESTRICTED_SOFTMAX,
) -> EceReport:
    """Expected calibration error over m bins; empty bins carry zero weight."""
    bins = reliability_bins(ds, m, mode, policy)
    n = len(ds)
    total = 0.0
    for b in bins:
        if b.count:
            total += (b.count / n) * abs(b.accuracy - b.mean_confidence)
    return EceReport(
        bins=tuple(bins), ece=total, n=n, binning_mode=mode, policy=policy
    )


def ece_report_from_confidences(
    confs: Sequence[float],
    correct: Sequence[bool],
    m: int,
    mode: BinningMode = BinningMode.EQUAL_MASS,
    policy: ConfidencePolicy = ConfidencePolicy.RESTRICTED_SOFTMAX,
) -> EceReport:
    """ECE over precomputed (confidence, correctness) pairs.

    Used when confidences come from somewhere other than the stored record
    fields, e.g. after KDE refinement.
    """
    confs = np.asarray(confs, dtype=float)
    correct = np.asarray(correct, dtype=bool)
    if confs.shape != correct.shape or confs.ndim != 1:
        raise ValueError("confidences and correctness must be equal-length vectors")
    if len(confs) == 0:
        raise EmptyDataset("no pairs")
    if m < 1:
        raise ValueError(f"need at least one bin, got m={m}")
    bins = _bin_memberships(confs, correct, m, mode)
    n = len(confs)
    total = sum(
        (b.count / n) * abs(b.accuracy - b.mean_confidence) for b in bins if b.count
    )
    return EceReport(bins=tuple(bins), ece=total, n=n, binning_mode=mode, policy=policy)


def confidence_histogram(
    ds: CalibrationDataset,
    m: int = 10,
    policy: ConfidencePolicy = ConfidencePolicy.RESTRICTED_SOFTMAX,
) -> list[HistogramBin]:
    """Fixed-width confidence counts over [0, 1]; counts sum to the dataset size."""
    if m < 1:
        raise ValueError(f"need at least one bin, got m={m}")
    if len(ds) == 0:
        raise EmptyDataset("no records")
    confs = np.array(
        [confidence_and_prediction(r, policy)[0] for r in ds.records]
    )
    which = _equal_width_index(confs, m)
    return [
        HistogramBin(k / m, (k + 1) / m, int((which == k).sum())) for k in range(m)
    ]


def choice_prob_mass(record: PredictionRecord) -> float:
    """Total whole-vocabulary probability on the choice letters.

    Under the plain choice format this sum is the natural estimate of the
    model's preference for answering in the multiple-choice format at all.
    """
    if record.choice_probs_fullvocab is None:
        raise PolicyUnavailable(
            f"record {record.item_id!r} has no choice_probs_fullvocab"
        )
    return float(sum(record.choice_probs_fullvocab))
