"""Domain types and the line-delimited wire format for prediction records.

Every other module consumes the types defined here. All types are immutable
after validation; line validation has no shared state, so independent lines
can be checked in parallel and merged in input order.
"""

from __future__ import annotations

import enum
import json
import math
import string
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from .errors import (
    DuplicateKey,
    IndexOutOfRange,
    LengthMismatch,
    MissingField,
    NonFinite,
    OutOfRange,
    SchemaError,
)

# Float noise allowed on the restricted sum of a full-vocabulary softmax.
FULLVOCAB_SUM_TOLERANCE = 1e-6

LETTERS = string.ascii_uppercase


class ChoiceFormat(enum.Enum):
    """Rendering convention for candidate letters: ``A`` or ``(A)``.

    The paren variant wraps the letter in parentheses; its opening ``(`` is
    the format-identifier token whose probability estimates format preference.
    """

    PLAIN = "plain"
    PAREN = "paren"

    def render(self, letter_index: int) -> str:
        if not 0 <= letter_index < len(LETTERS):
            raise IndexOutOfRange(f"letter index {letter_index} outside [0, 26)")
        letter = LETTERS[letter_index]
        return f"({letter})" if self is ChoiceFormat.PAREN else letter

    @property
    def identifier(self) -> str | None:
        """The format-identifier token, if this format defines one."""
        return "(" if self is ChoiceFormat.PAREN else None


class ConfidencePolicy(enum.Enum):
    """Which stored probability convention confidence is read from.

    ``RESTRICTED_SOFTMAX`` renormalizes the raw choice-letter logits among
    themselves; ``FULL_VOCAB`` uses the stored whole-vocabulary-normalized
    choice probabilities and is only usable on records that carry them.
    """

    RESTRICTED_SOFTMAX = "restricted"
    FULL_VOCAB = "full-vocab"


@dataclass(frozen=True)
class MCQItem:
    """One multiple-choice question: body, candidates, optional gold index."""

    item_id: str
    task: str
    question: str
    candidates: tuple[str, ...]
    gold_index: int | None = None

    def __post_init__(self):
        if not 2 <= len(self.candidates) <= len(LETTERS):
            raise SchemaError(
                f"item {self.item_id!r}: candidate count {len(self.candidates)} "
                f"outside [2, 26]"
            )
        if self.gold_index is not None and not 0 <= self.gold_index < len(self.candidates):
            raise OutOfRange(
                f"item {self.item_id!r}: gold_index {self.gold_index} out of range"
            )

    def to_json_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "task": self.task,
            "question": self.question,
            "candidates": list(self.candidates),
            "gold_index": self.gold_index,
        }


@dataclass(frozen=True)
class PredictionRecord:
    """One model prediction event over the choice letters of an MCQ."""

    item_id: str
    task: str
    model_id: str
    shots: int
    choice_format: ChoiceFormat
    choices: tuple[str, ...]
    choice_logits: tuple[float, ...]
    choice_probs_fullvocab: tuple[float, ...] | None = None
    format_identifier_prob: float | None = None
    label_index: int | None = None
    permutation_id: int | None = None
    position: int | None = None

    @property
    def n_choices(self) -> int:
        return len(self.choices)

    def to_json_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "task": self.task,
            "model_id": self.model_id,
            "shots": self.shots,
            "choice_format": self.choice_format.value,
            "choices": list(self.choices),
            "choice_logits": list(self.choice_logits),
            "choice_probs_fullvocab": (
                None
                if self.choice_probs_fullvocab is None
                else list(self.choice_probs_fullvocab)
            ),
            "format_identifier_prob": self.format_identifier_prob,
            "label_index": self.label_index,
            "permutation_id": self.permutation_id,
            "position": self.position,
        }


@dataclass(frozen=True)
class RejectedLine:
    """One input line refused during lenient loading."""

    line_number: int
    error: str
    message: str


@dataclass(frozen=True)
class CalibrationDataset:
    """An ordered, validated collection of prediction records."""

    records: tuple[PredictionRecord, ...]
    rejects: tuple[RejectedLine, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[PredictionRecord]:
        return iter(self.records)


def _require(raw: dict, name: str):
    if name not in raw or raw[name] is None:
        raise MissingField(f"missing required field {name!r}")
    return raw[name]


def _check_finite(name: str, values: Iterable[float]) -> tuple[float, ...]:
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise SchemaError(f"{name} must contain numbers, got {v!r}")
        f = float(v)
        if not math.isfinite(f):
            raise NonFinite(f"{name} contains non-finite value {v!r}")
        out.append(f)
    return tuple(out)


def _check_probs(name: str, values: Sequence[float]) -> tuple[float, ...]:
    probs = _check_finite(name, values)
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise OutOfRange(f"{name} entry {p!r} outside [0, 1]")
    return probs


def validate_record(raw: dict | PredictionRecord) -> PredictionRecord:
    """Validate one decoded wire-format object into a PredictionRecord.

    Idempotent: feeding back an already-valid record returns an equal record.
    """
    if isinstance(raw, PredictionRecord):
        raw = raw.to_json_dict()
    if not isinstance(raw, dict):
        raise SchemaError(f"record must be an object, got {type(raw).__name__}")

    item_id = _require(raw, "item_id")
    task = _require(raw, "task")
    model_id = _require(raw, "model_id")
    for name, value in (("item_id", item_id), ("task", task), ("model_id", model_id)):
        if not isinstance(value, str):
            raise SchemaError(f"{name} must be a string, got {value!r}")

    shots = _require(raw, "shots")
    if isinstance(shots, bool) or not isinstance(shots, int) or shots < 0:
        raise SchemaError(f"shots must be a non-negative integer, got {shots!r}")

    fmt_raw = _require(raw, "choice_format")
    if isinstance(fmt_raw, ChoiceFormat):
        fmt = fmt_raw
    else:
        try:
            fmt = ChoiceFormat(fmt_raw)
        except ValueError:
            raise SchemaError(f"unknown choice_format {fmt_raw!r}") from None

    choices = _require(raw, "choices")
    if not isinstance(choices, (list, tuple)):
        raise SchemaError("choices must be a list of letter strings")
    if len(choices) < 2:
        raise SchemaError(f"need at least 2 choices, got {len(choices)}")
    if len(choices) > len(LETTERS):
        raise SchemaError(f"more than 26 choices ({len(choices)})")
    expected = tuple(LETTERS[: len(choices)])
    if tuple(choices) != expected:
        raise SchemaError(
            f"choices must be the letters {''.join(expected)!r} in order, got {choices!r}"
        )

    logits = _check_finite("choice_logits", _require(raw, "choice_logits"))
    if len(logits) != len(choices):
        raise LengthMismatch(
            f"{len(logits)} logits for {len(choices)} choices"
        )

    probs_fv = raw.get("choice_probs_fullvocab")
    if probs_fv is not None:
        probs_fv = _check_probs("choice_probs_fullvocab", probs_fv)
        if len(probs_fv) != len(choices):
            raise LengthMismatch(
                f"{len(probs_fv)} full-vocab probabilities for {len(choices)} choices"
            )
        total = sum(probs_fv)
        if total > 1.0 + FULLVOCAB_SUM_TOLERANCE:
            raise OutOfRange(
                f"full-vocab choice probabilities sum to {total}, above 1; they are "
                "entries of a softmax over the whole vocabulary"
            )

    ident_prob = raw.get("format_identifier_prob")
    if ident_prob is not None:
        (ident_prob,) = _check_probs("format_identifier_prob", [ident_prob])

    label_index = raw.get("label_index")
    if label_index is not None:
        if isinstance(label_index, bool) or not isinstance(label_index, int):
            raise SchemaError(f"label_index must be an integer, got {label_index!r}")
        if not 0 <= label_index < len(choices):
            raise OutOfRange(f"label_index {label_index} out of range for {len(choices)} choices")

    def _opt_int(name: str) -> int | None:
        v = raw.get(name)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise SchemaError(f"{name} must be a non-negative integer, got {v!r}")
        return v

    return PredictionRecord(
        item_id=item_id,
        task=task,
        model_id=model_id,
        shots=shots,
        choice_format=fmt,
        choices=expected,
        choice_logits=logits,
        choice_probs_fullvocab=probs_fv,
        format_identifier_prob=ident_prob,
        label_index=label_index,
        permutation_id=_opt_int("permutation_id"),
        position=_opt_int("position"),
    )


def load_dataset(lines: Iterable[str], lenient: bool = False) -> CalibrationDataset:
    """Parse line-delimited records into a validated dataset.

    Strict mode (default) raises on the first bad line, annotated with its
    line number. Lenient mode keeps the valid records and collects a reject
    report instead, so a long extraction run stays salvageable.
    """
    records: list[PredictionRecord] = []
    rejects: list[RejectedLine] = []
    seen: set[tuple[str, int | None]] = set()

    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc}") from None
            record = validate_record(raw)
            key = (record.item_id, record.permutation_id)
            if key in seen:
                raise DuplicateKey(
                    f"repeated (item_id, permutation_id) = {key!r}"
                )
        except (SchemaError, OutOfRange, NonFinite, DuplicateKey) as exc:
            if lenient:
                rejects.append(
                    RejectedLine(line_number, type(exc).__name__, str(exc))
                )
                continue
            exc.args = (f"line {line_number}: {exc}",)
            raise
        seen.add(key)
        records.append(record)

    return CalibrationDataset(records=tuple(records), rejects=tuple(rejects))


def dump_record(record: PredictionRecord) -> str:
    """Serialize one record to its wire-format line (no trailing newline).

    Floats go through :func:`repr`, the shortest decimal that round-trips
    the exact IEEE value (at most 17 significant digits).
    """
    return json.dumps(record.to_json_dict(), ensure_ascii=False)


def dump_dataset(ds: CalibrationDataset) -> str:
    return "".join(dump_record(r) + "\n" for r in ds.records)


def labeled_only(ds: CalibrationDataset) -> CalibrationDataset:
    """Restrict a dataset to records carrying a label."""
    return CalibrationDataset(
        records=tuple(r for r in ds.records if r.label_index is not None)
    )


def with_logits(record: PredictionRecord, logits: Sequence[float]) -> PredictionRecord:
    """Copy of ``record`` with replaced logits and derived fields dropped.

    Stored full-vocab probabilities and the identifier probability are not
    rescalable without whole-vocabulary logits, so they do not survive.
    """
    return replace(
        record,
        choice_logits=tuple(float(v) for v in logits),
        choice_probs_fullvocab=None,
        format_identifier_prob=None,
    )


ITEM_FIELDS = ("item_id", "task", "question", "candidates", "gold_index")


def validate_item(raw: dict) -> MCQItem:
    """Validate one decoded MCQ item object."""
    if not isinstance(raw, dict):
        raise SchemaError(f"item must be an object, got {type(raw).__name__}")
    item_id = _require(raw, "item_id")
    task = _require(raw, "task")
    question = _require(raw, "question")
    candidates = _require(raw, "candidates")
    for name, value in (("item_id", item_id), ("task", task), ("question", question)):
        if not isinstance(value, str):
            raise SchemaError(f"{name} must be a string, got {value!r}")
    if not isinstance(candidates, (list, tuple)) or not all(
        isinstance(c, str) for c in candidates
    ):
        raise SchemaError("candidates must be a list of strings")
    gold = raw.get("gold_index")
    if gold is not None and (isinstance(gold, bool) or not isinstance(gold, int)):
        raise SchemaError(f"gold_index must be an integer, got {gold!r}")
    return MCQItem(
        item_id=item_id,
        task=task,
        question=question,
        candidates=tuple(candidates),
        gold_index=gold,
    )


def load_items(lines: Iterable[str]) -> list[MCQItem]:
    """Parse line-delimited MCQ items, preserving input order."""
    items = []
    for line_number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc}") from None
            items.append(validate_item(raw))
        except (SchemaError, OutOfRange) as exc:
            exc.args = (f"line {line_number}: {exc}",)
            raise
    return items
