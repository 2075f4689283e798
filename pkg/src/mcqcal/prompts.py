"""MCQ prompt construction and the few-shot permutation/selection protocol.

Prompt text is byte-deterministic: LF newlines, UTF-8, no trailing
whitespace, no trailing newline after the answer cue. Identical specs give
byte-identical strings, which makes prompt hashes reproducible.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .errors import (
    EmptyCalibSet,
    IndexOutOfRange,
    MissingGold,
    MissingPosition,
    SchemaError,
    TooManyItems,
)
from .records import LETTERS, ChoiceFormat, MCQItem

# Hard cap on permutation enumeration; 8! = 40320 plans.
MAX_PERMUTATION_ITEMS = 8


def render_choice(letter_index: int, fmt: ChoiceFormat) -> str:
    """Letter at ``letter_index`` under the format: ``"A"`` or ``"(A)"``."""
    return fmt.render(letter_index)


@dataclass(frozen=True)
class PromptSpec:
    """Everything needed to build one prompt: question item, shots, format."""

    item: MCQItem
    choice_format: ChoiceFormat
    shots: tuple[MCQItem, ...] = ()
    task_description: str | None = None


def _question_block(item: MCQItem, fmt: ChoiceFormat, completed: bool) -> str:
    lines = [item.question]
    for i, candidate in enumerate(item.candidates):
        lines.append(f"{render_choice(i, fmt)}. {candidate}")
    if completed:
        if item.gold_index is None:
            raise MissingGold(f"shot item {item.item_id!r} has no gold_index")
        letter = LETTERS[item.gold_index]
        if fmt is ChoiceFormat.PAREN:
            lines.append(f"Answer: ({letter}).")
        else:
            lines.append(f"Answer: {letter}.")
    else:
        lines.append("Answer: (" if fmt is ChoiceFormat.PAREN else "Answer: ")
    return "\n".join(lines)


def build_prompt(spec: PromptSpec) -> str:
    """Render the prompt for a spec: description, completed shots, then the item.

    Blocks are separated by one blank line. Shot answers are completed in the
    active format (``Answer: (B).`` / ``Answer: B.``); the item ends with the
    incomplete cue (``Answer: (`` / ``Answer: ``) so the next token position
    is the choice letter.
    """
    parts: list[str] = []
    if spec.task_description is not None:
        parts.append(spec.task_description)
    for shot in spec.shots:
        parts.append(_question_block(shot, spec.choice_format, completed=True))
    parts.append(_question_block(spec.item, spec.choice_format, completed=False))
    return "\n\n".join(parts)


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class PlanStep:
    """One prompt slot: the question at ``position`` with its shot sequence."""

    permutation_id: int
    position: int
    item: MCQItem
    shots: tuple[MCQItem, ...]

    @property
    def shot_item_ids(self) -> tuple[str, ...]:
        return tuple(s.item_id for s in self.shots)


@dataclass(frozen=True)
class PromptPlan:
    """One ordering of the calibration items; yields one prompt per position."""

    permutation_id: int
    order: tuple[int, ...]
    steps: tuple[PlanStep, ...]


def enumerate_permutations(items: Sequence[MCQItem]) -> Iterator[PromptPlan]:
    """All orderings of the calibration items, in lexicographic index order.

    Position k of a plan asks the k-th item of the ordering with the k
    preceding items as completed shots, so the last position carries the
    most context. Streams one plan at a time; never materializes all M!.
    """
    m = len(items)
    if m == 0:
        raise EmptyCalibSet("no calibration items")
    if m > MAX_PERMUTATION_ITEMS:
        raise TooManyItems(
            f"{m} items would need {m}! = {math.factorial(m)} permutations; "
            f"cap is {MAX_PERMUTATION_ITEMS}"
        )

    def _generate() -> Iterator[PromptPlan]:
        for rank, order in enumerate(itertools.permutations(range(m))):
            steps = tuple(
                PlanStep(
                    permutation_id=rank,
                    position=k,
                    item=items[order[k]],
                    shots=tuple(items[j] for j in order[:k]),
                )
                for k in range(m)
            )
            yield PromptPlan(permutation_id=rank, order=order, steps=steps)

    return _generate()


def unrank_permutation(rank: int, m: int) -> tuple[int, ...]:
    """Index sequence whose lexicographic rank is ``rank`` among m! orderings."""
    if not 0 <= rank < math.factorial(m):
        raise IndexOutOfRange(f"rank {rank} outside [0, {m}!)")
    pool = list(range(m))
    order = []
    for i in range(m, 0, -1):
        f = math.factorial(i - 1)
        idx, rank = divmod(rank, f)
        order.append(pool.pop(idx))
    return tuple(order)


@dataclass(frozen=True)
class PredictionPair:
    """A (confidence, prediction) observation for one question in one slot."""

    permutation_id: int
    position: int
    item_id: str
    confidence: float
    predicted_index: int
    label_index: int

    def to_json_dict(self) -> dict:
        return {
            "permutation_id": self.permutation_id,
            "position": self.position,
            "item_id": self.item_id,
            "confidence": self.confidence,
            "predicted_index": self.predicted_index,
            "label_index": self.label_index,
        }


def pair_from_json_dict(raw: dict) -> PredictionPair:
    try:
        return PredictionPair(
            permutation_id=int(raw["permutation_id"]),
            position=int(raw["position"]),
            item_id=raw["item_id"],
            confidence=float(raw["confidence"]),
            predicted_index=int(raw["predicted_index"]),
            label_index=int(raw["label_index"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad prediction pair: {exc}") from None


def _shot_ids_for(pair: PredictionPair, item_ids: Sequence[str]) -> tuple[str, ...]:
    order = unrank_permutation(pair.permutation_id, len(item_ids))
    return tuple(item_ids[j] for j in order[: pair.position])


def _base_item_ids(pairs: Sequence[PredictionPair]) -> list[str]:
    # Permutation 0 is the identity ordering, so its positions spell out the
    # item universe in base order.
    m = max(p.position for p in pairs) + 1
    by_pos = {p.position: p.item_id for p in pairs if p.permutation_id == 0}
    if len(by_pos) != m:
        raise MissingPosition(
            "cannot infer the item order: permutation 0 is incomplete; "
            "pass item_ids explicitly"
        )
    return [by_pos[k] for k in range(m)]


def select_pairs_all_unique(
    pairs: Sequence[PredictionPair],
    item_ids: Sequence[str] | None = None,
    ignore_shot_order: bool = False,
) -> list[PredictionPair]:
    """Deduplicate pairs by (question, exact shot sequence) context.

    Two slots with the same question and identical ordered shots produce
    bit-identical model output, so only the first (lowest permutation id,
    then position) is kept. ``ignore_shot_order`` relaxes the key to the
    shot *set* for sensitivity analysis. ``item_ids`` gives the base item
    ordering; when omitted it is reconstructed from permutation 0.
    """
    if not pairs:
        return []
    if item_ids is None:
        item_ids = _base_item_ids(pairs)
    seen: set = set()
    out: list[PredictionPair] = []
    for pair in sorted(pairs, key=lambda p: (p.permutation_id, p.position)):
        shot_ids = _shot_ids_for(pair, item_ids)
        key = (pair.item_id, frozenset(shot_ids) if ignore_shot_order else shot_ids)
        if key in seen:
            continue
        seen.add(key)
        out.append(pair)
    return out


def select_pairs_last(pairs: Sequence[PredictionPair], m: int) -> list[PredictionPair]:
    """The final-position pair of every permutation, ordered by permutation id.

    The last slot sees the most shots and is where in-context predictions are
    best calibrated, which is what the reference-distribution fit consumes.
    """
    if m < 1:
        raise EmptyCalibSet("need at least one item")
    last = {}
    for pair in pairs:
        if pair.position == m - 1 and pair.permutation_id not in last:
            last[pair.permutation_id] = pair
    out = []
    for rank in range(math.factorial(m)):
        if rank not in last:
            raise MissingPosition(
                f"permutation {rank} lacks its final pair (position {m - 1})"
            )
        out.append(last[rank])
    return out


def plan_rows(
    plans: Iterable[PromptPlan],
    choice_format: ChoiceFormat,
    task_description: str | None = None,
) -> Iterator[dict]:
    """Wire-format rows for prompt plans, one per (permutation, position) slot."""
    for plan in plans:
        for step in plan.steps:
            prompt = build_prompt(
                PromptSpec(
                    item=step.item,
                    choice_format=choice_format,
                    shots=step.shots,
                    task_description=task_description,
                )
            )
            yield {
                "permutation_id": step.permutation_id,
                "position": step.position,
                "item_id": step.item.item_id,
                "shot_item_ids": list(step.shot_item_ids),
                "prompt_sha256": prompt_sha256(prompt),
                "prompt": prompt,
            }


def dump_plan_row(row: dict) -> str:
    return json.dumps(row, ensure_ascii=False)
