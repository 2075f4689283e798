"""Answer/format uncertainty decomposition.

A model's probability of a response factors into the probability of the
response *given* its format times the probability of the format itself,
provided each response belongs to exactly one format. Empirical estimators
read the two factors off stored token probabilities; the synthetic joint
model makes the identity checkable exactly by enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    OutOfRange,
    PolicyUnavailable,
    UnknownFormat,
    WrongChoiceFormat,
    ZeroMarginal,
    ZeroMass,
)
from .metrics import choice_prob_mass
from .records import ChoiceFormat, PredictionRecord

# Total choice probability below this is treated as zero mass.
ZERO_MASS_THRESHOLD = 1e-12

SOURCE_IDENTIFIER = "identifier"
SOURCE_CHOICE_MASS = "choice-mass"


@dataclass(frozen=True)
class FormatEstimate:
    """Estimated format probability plus the conditional answer distribution."""

    p_format: float
    source: str
    answer_distribution: tuple[float, ...]

    def __post_init__(self):
        if not 0.0 <= self.p_format <= 1.0:
            raise OutOfRange(f"p_format {self.p_format!r} outside [0, 1]")


def _renormalized(record: PredictionRecord) -> tuple[float, tuple[float, ...]]:
    if record.choice_probs_fullvocab is None:
        raise PolicyUnavailable(
            f"record {record.item_id!r} has no choice_probs_fullvocab"
        )
    total = choice_prob_mass(record)
    if total < ZERO_MASS_THRESHOLD:
        raise ZeroMass(
            f"record {record.item_id!r}: all stored choice probabilities are zero"
        )
    return total, tuple(p / total for p in record.choice_probs_fullvocab)


def estimate_format_from_identifier(record: PredictionRecord) -> FormatEstimate:
    """Format probability from the identifier token (paren format only).

    The stored choice probabilities were produced after the identifier, so
    they are already conditioned on the multiple-choice format; renormalizing
    them only removes the residual mass on non-letter tokens.
    """
    if record.choice_format is not ChoiceFormat.PAREN:
        raise WrongChoiceFormat(
            f"record {record.item_id!r} uses {record.choice_format.value!r}; "
            "the identifier estimator needs the paren format"
        )
    if record.format_identifier_prob is None:
        raise PolicyUnavailable(
            f"record {record.item_id!r} has no format_identifier_prob"
        )
    _, dist = _renormalized(record)
    return FormatEstimate(
        p_format=record.format_identifier_prob,
        source=SOURCE_IDENTIFIER,
        answer_distribution=dist,
    )


def estimate_format_from_choice_mass(record: PredictionRecord) -> FormatEstimate:
    """Format probability as total letter mass (plain format only).

    With no identifier token, a letter emission is itself the format signal:
    the stored probabilities play the role of the joint over (answer, format),
    so their sum estimates the format marginal and renormalizing conditions
    on it.
    """
    if record.choice_format is not ChoiceFormat.PLAIN:
        raise WrongChoiceFormat(
            f"record {record.item_id!r} uses {record.choice_format.value!r}; "
            "the choice-mass estimator needs the plain format"
        )
    total, dist = _renormalized(record)
    return FormatEstimate(
        p_format=total, source=SOURCE_CHOICE_MASS, answer_distribution=dist
    )


def estimate_format(record: PredictionRecord) -> FormatEstimate:
    """Dispatch to the estimator matching the record's choice format."""
    if record.choice_format is ChoiceFormat.PAREN:
        return estimate_format_from_identifier(record)
    return estimate_format_from_choice_mass(record)


@dataclass(frozen=True)
class JointResponse:
    text_id: str
    format_id: str
    probability: float


@dataclass(frozen=True)
class SyntheticJoint:
    """An enumerable toy response space with one format tag per response.

    Probabilities are non-negative and sum to 1 within 1e-12. Because every
    response carries exactly one format, conditioning on a format is plain
    renormalization over its members.
    """

    responses: tuple[JointResponse, ...]
    formats: frozenset[str]

    def __post_init__(self):
        for r in self.responses:
            if r.probability < 0 or not math.isfinite(r.probability):
                raise OutOfRange(
                    f"response {r.text_id!r} has probability {r.probability!r}"
                )
            if r.format_id not in self.formats:
                raise UnknownFormat(
                    f"response {r.text_id!r} tagged with unknown format {r.format_id!r}"
                )
        total = math.fsum(r.probability for r in self.responses)
        if abs(total - 1.0) > 1e-12:
            raise OutOfRange(f"response probabilities sum to {total!r}, expected 1")

    @classmethod
    def from_rows(cls, rows) -> "SyntheticJoint":
        responses = tuple(JointResponse(t, f, float(p)) for t, f, p in rows)
        return cls(responses=responses, formats=frozenset(r.format_id for r in responses))


def format_members(joint: SyntheticJoint, format_id: str) -> list[JointResponse]:
    if format_id not in joint.formats:
        raise UnknownFormat(f"format {format_id!r} not in joint")
    return [r for r in joint.responses if r.format_id == format_id]


def joint_format_marginal(joint: SyntheticJoint, format_id: str) -> float:
    """Probability of a format: total probability of its member responses."""
    return math.fsum(r.probability for r in format_members(joint, format_id))


def joint_conditional(joint: SyntheticJoint, format_id: str) -> list[float]:
    """Conditional response distribution within a format, in response order.

    Responses outside the format have conditional probability exactly zero;
    this returns the (renormalized) vector over the members only.
    """
    members = format_members(joint, format_id)
    marginal = math.fsum(r.probability for r in members)
    if marginal <= 0.0:
        raise ZeroMarginal(f"format {format_id!r} has zero marginal probability")
    return [r.probability / marginal for r in members]


def verify_decomposition(joint: SyntheticJoint) -> float:
    """Max |p(y) - p(y|F) * p(F)| over all responses; <= 1e-12 for valid joints."""
    marginals = {f: joint_format_marginal(joint, f) for f in joint.formats}
    worst = 0.0
    for r in joint.responses:
        m = marginals[r.format_id]
        reconstructed = (r.probability / m) * m if m > 0.0 else 0.0
        worst = max(worst, abs(r.probability - reconstructed))
    return worst


def decomposition_row(record: PredictionRecord) -> dict:
    """One report row: format probability plus conditional answer stats."""
    est = estimate_format(record)
    dist = est.answer_distribution
    pred = max(range(len(dist)), key=lambda i: (dist[i], -i))
    return {
        "item_id": record.item_id,
        "p_format": est.p_format,
        "source": est.source,
        "answer_confidence": dist[pred],
        "answer_pred_index": pred,
        "label_index": record.label_index,
    }


def answer_uncertainty_ece(records, m: int = 10, mode=None):
    """ECE of the conditional answer distribution's confidences.

    Whether these conditioned confidences are better calibrated than the raw
    ones is an empirical question about the model, so it is reported, never
    asserted.
    """
    from .metrics import BinningMode, ece_report_from_confidences

    rows = [decomposition_row(r) for r in records]
    confs = [r["answer_confidence"] for r in rows]
    correct = [r["answer_pred_index"] == r["label_index"] for r in rows]
    return ece_report_from_confidences(
        confs, correct, m, mode or BinningMode.EQUAL_MASS
    )
