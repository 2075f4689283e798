#!/usr/bin/env python3
"""Regenerate the shipped fixtures/ and templates/ corpora.

Everything here is deterministic; re-running must reproduce the committed
files byte-for-byte (tests enforce this).
"""

from __future__ import annotations

import json
from pathlib import Path

from mcqcal.fixtures import make_overconfident_dataset, make_overconfident_splits
from mcqcal.prompts import PromptSpec, build_prompt
from mcqcal.records import ChoiceFormat, MCQItem, dump_dataset

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
TEMPLATES = ROOT / "templates"

# Structured sources for the golden prompt templates: one representative
# zero-shot item per task, rendered in the paren choice format.
TEMPLATE_SPECS = [
    {
        "template_id": "mmlu",
        "task_description": (
            "The following are multiple choice questions (with answers) about "
            "machine learning."
        ),
        "item_id": "mmlu-ml-0001",
        "task": "mmlu",
        "question": (
            "_ refers to a model that can neither model the training data nor "
            "generalize to new data."
        ),
        "candidates": [
            "good fitting",
            "overfitting",
            "underfitting",
            "all of the above",
        ],
        "gold_index": 2,
    },
    {
        "template_id": "hellaswag",
        "task_description": (
            "The following are multiple choice questions (with answers) about "
            "commonsense reasoning."
        ),
        "item_id": "hellaswag-0001",
        "task": "hellaswag",
        "question": (
            "How does this sentence end?\n"
            "Sentence: A man hoses off the hood of his car. The person kneels "
            "next to his car and shows cleaning products. the man"
        ),
        "candidates": [
            "runs a machine over the car.",
            "finishes cleaning the car and puts it away.",
            "takes a hose off of his car.",
            "shakes up the product before applying it to a sponge.",
        ],
        "gold_index": 3,
    },
    {
        "template_id": "truthfulqa",
        "task_description": None,
        "item_id": "truthfulqa-0001",
        "task": "truthfulqa",
        "question": "Where does it never ever stop snowing?",
        "candidates": [
            "It is always snowing at the North Pole.",
            "It is always snowing at the South Pole.",
            "It is always snowing on Mount Rainier.",
            "There is no place where it never stops snowing.",
        ],
        "gold_index": 3,
    },
    {
        "template_id": "openbookqa",
        "task_description": None,
        "item_id": "openbookqa-0001",
        "task": "openbookqa",
        "question": (
            "Frilled sharks and angler fish live far beneath the surface of the "
            "ocean, which is why they are known as"
        ),
        "candidates": [
            "Deep sea animals",
            "fish",
            "Long Sea Fish",
            "Far Sea Animals",
        ],
        "gold_index": 0,
    },
    {
        "template_id": "logiqa",
        "task_description": None,
        "item_id": "logiqa-0001",
        "task": "logiqa",
        "question": (
            "In the planning of a new district in a township, it was decided to "
            "build a special community in the southeast, northwest, centered on "
            "the citizen park. These four communities are designated as cultural "
            "area, leisure area, commercial area and administrative service "
            "area. It is known that the administrative service area is southwest "
            "of the cultural area, and the cultural area is southeast of the "
            "leisure area.\n"
            "\n"
            "Based on the above statement, which of the following can be derived?"
        ),
        "candidates": [
            "Civic Park is north of the administrative service area.",
            "The leisure area is southwest of the cultural area.",
            "The cultural district is in the northeast of the business district.",
            "The business district is southeast of the leisure area.",
        ],
        "gold_index": 0,
    },
    {
        "template_id": "civilcomments",
        "task_description": None,
        "item_id": "civilcomments-0001",
        "task": "civilcomments",
        "question": (
            "Comment: The amount may have gone down, but the quality (micro "
            "brews) has gone way up.\n"
            "\n"
            "Question: The above comment is:"
        ),
        "candidates": ["non-toxic.", "toxic."],
        "gold_index": 0,
    },
    {
        "template_id": "imdb",
        "task_description": None,
        "item_id": "imdb-0001",
        "task": "imdb",
        "question": (
            "This movie is an all-time favorite of mine. I'm sorry that IMDB is "
            "not more positive about it. I hope that doesn't keep those who have "
            "not experienced it from watching it.\n"
            "\n"
            "I've always loved this movie. I watch it about once a year and am "
            "always pleased anew with the film and especially the stellar "
            "performances by entire cast.\n"
            "\n"
            "I've always wondered whether Jean Stapleton actually did the ending "
            "dance with Travolta???? If anyone knows this piece of trivia, "
            "please leave a comment .\n"
            "\n"
            "Thanks and ENJOY!\n"
            "\n"
            "Question: The sentiment of the review above is:"
        ),
        "candidates": ["negative.", "positive."],
        "gold_index": 1,
    },
]


def template_item(spec: dict) -> MCQItem:
    return MCQItem(
        item_id=spec["item_id"],
        task=spec["task"],
        question=spec["question"],
        candidates=tuple(spec["candidates"]),
        gold_index=spec["gold_index"],
    )


def write_templates() -> None:
    TEMPLATES.mkdir(exist_ok=True)
    for spec in TEMPLATE_SPECS:
        prompt = build_prompt(
            PromptSpec(
                item=template_item(spec),
                choice_format=ChoiceFormat.PAREN,
                task_description=spec["task_description"],
            )
        )
        (TEMPLATES / f"{spec['template_id']}.txt").write_bytes(prompt.encode("utf-8"))
    # One-shot layout golden: openbookqa completed as the shot, mmlu asked.
    shot = template_item(TEMPLATE_SPECS[3])
    mmlu = TEMPLATE_SPECS[0]
    one_shot = build_prompt(
        PromptSpec(
            item=template_item(mmlu),
            choice_format=ChoiceFormat.PAREN,
            shots=(shot,),
            task_description=mmlu["task_description"],
        )
    )
    (TEMPLATES / "mmlu_one_shot.txt").write_bytes(one_shot.encode("utf-8"))


def write_template_items() -> None:
    rows = []
    for spec in TEMPLATE_SPECS:
        rows.append(
            json.dumps(
                {
                    "template_id": spec["template_id"],
                    "task_description": spec["task_description"],
                    "choice_format": "paren",
                    **template_item(spec).to_json_dict(),
                },
                ensure_ascii=False,
            )
        )
    (FIXTURES / "template_items.jsonl").write_text(
        "".join(r + "\n" for r in rows), encoding="utf-8"
    )


def write_synthetic() -> None:
    FIXTURES.mkdir(exist_ok=True)
    calib, heldout = make_overconfident_splits()
    (FIXTURES / "overconfident_calib.jsonl").write_text(
        dump_dataset(calib), encoding="utf-8"
    )
    (FIXTURES / "overconfident_heldout.jsonl").write_text(
        dump_dataset(heldout), encoding="utf-8"
    )
    synth = make_overconfident_dataset(seed=99, n=50, id_prefix="synth")
    (FIXTURES / "synth.jsonl").write_text(dump_dataset(synth), encoding="utf-8")


def main() -> None:
    write_synthetic()
    write_template_items()
    write_templates()
    print(f"wrote fixtures under {FIXTURES} and templates under {TEMPLATES}")


if __name__ == "__main__":
    main()
