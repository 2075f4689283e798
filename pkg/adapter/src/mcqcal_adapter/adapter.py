"""Run a causal LM over prompt plans and emit prediction records.

For each plan slot the model is evaluated once at the answer cue; the record
stores the raw logits of the choice-letter tokens plus their full-vocabulary
softmax probabilities. Under the paren format a second pass on the prompt
truncated before "(" yields the format-identifier probability. Evaluation is
greedy and gradient-free, so two runs over the same weights produce identical
records.

The calibration toolkit is consumed strictly through its external surfaces:
plan/record JSON lines, and the `mcqcal prompt` CLI when an over-long prompt
has to be rebuilt with fewer shots.
"""

from __future__ import annotations

import json
import shutil
import string
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

LETTERS = string.ascii_uppercase

PLAIN_CUE = "Answer: "
PAREN_CUE = "Answer: ("


class AdapterError(Exception):
    pass


class ModelLoadError(AdapterError):
    pass


class TokenizationAmbiguity(AdapterError):
    """A choice letter or the identifier is not a single vocabulary token."""


class ContextOverflow(AdapterError):
    """Prompt still exceeds the context window with every shot dropped."""


@dataclass(frozen=True)
class AdapterConfig:
    model_ref: str
    device: str = "cpu"
    batch_size: int = 8
    choice_format: str = "paren"
    max_context: int = 2048
    model_id: str | None = None
    task_description: str | None = None

    def __post_init__(self):
        if self.batch_size < 1:
            raise AdapterError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_context < 1:
            raise AdapterError(f"max_context must be >= 1, got {self.max_context}")
        if self.choice_format not in ("plain", "paren"):
            raise AdapterError(f"unknown choice_format {self.choice_format!r}")

    @property
    def resolved_model_id(self) -> str:
        return self.model_id or Path(self.model_ref).name


@dataclass(frozen=True)
class Item:
    item_id: str
    task: str
    question: str
    candidates: tuple[str, ...]
    gold_index: int | None


def load_items(lines: Iterable[str]) -> dict[str, Item]:
    items: dict[str, Item] = {}
    for line in lines:
        if not line.strip():
            continue
        raw = json.loads(line)
        candidates = tuple(raw["candidates"])
        if not 2 <= len(candidates) <= len(LETTERS):
            raise AdapterError(
                f"item {raw['item_id']!r}: {len(candidates)} candidates, "
                "letters support 2..26"
            )
        items[raw["item_id"]] = Item(
            item_id=raw["item_id"],
            task=raw["task"],
            question=raw["question"],
            candidates=candidates,
            gold_index=raw.get("gold_index"),
        )
    return items


def _single_token_id(tokenizer, text: str) -> int | None:
    ids = tokenizer.encode(text, add_special_tokens=False)
    return ids[0] if len(ids) == 1 else None


def resolve_letter_tokens(
    tokenizer, n_choices: int, cue_ends_with_space: bool
) -> tuple[list[int], bool]:
    """Token ids for the first ``n_choices`` letters at the cue position.

    When the cue ends with a space the leading-space letter variant is
    preferred (and the prompt loses its trailing space); otherwise, or as a
    fallback, bare letters directly follow the full cue.
    Returns (token ids, strip_trailing_space).
    """
    letters = LETTERS[:n_choices]
    if cue_ends_with_space:
        spaced = [_single_token_id(tokenizer, f" {c}") for c in letters]
        if all(t is not None for t in spaced):
            return list(spaced), True
    bare = [_single_token_id(tokenizer, c) for c in letters]
    if all(t is not None for t in bare):
        return list(bare), False
    missing = [c for c, t in zip(letters, bare) if t is None]
    raise TokenizationAmbiguity(
        f"choice letters {missing} are not single tokens under this tokenizer"
    )


def resolve_identifier_token(tokenizer) -> tuple[int, bool]:
    """Token id for "(" following "Answer: "; same spacing preference."""
    spaced = _single_token_id(tokenizer, " (")
    if spaced is not None:
        return spaced, True
    bare = _single_token_id(tokenizer, "(")
    if bare is not None:
        return bare, False
    raise TokenizationAmbiguity('"(" is not a single token under this tokenizer')


class _Scorer:
    """Holds the loaded model and turns prompt texts into next-token logits."""

    def __init__(self, cfg: AdapterConfig):
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:  # pragma: no cover
            raise ModelLoadError(f"inference stack unavailable: {exc}") from exc
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(cfg.model_ref)
            self.model = AutoModelForCausalLM.from_pretrained(cfg.model_ref)
        except Exception as exc:
            raise ModelLoadError(f"cannot load {cfg.model_ref!r}: {exc}") from exc
        self.model.to(cfg.device)
        self.model.eval()
        self.device = cfg.device

    def encode(self, text: str) -> list[int]:
        return self.tokenizer.encode(text, add_special_tokens=False)

    def next_token_logits(self, token_id_rows: Sequence[list[int]]) -> np.ndarray:
        """Full-vocabulary logits at each row's final position, as float64."""
        torch = self._torch
        lengths = [len(row) for row in token_id_rows]
        width = max(lengths)
        batch = torch.zeros((len(token_id_rows), width), dtype=torch.long)
        mask = torch.zeros((len(token_id_rows), width), dtype=torch.long)
        for i, row in enumerate(token_id_rows):
            batch[i, : len(row)] = torch.tensor(row, dtype=torch.long)
            mask[i, : len(row)] = 1
        with torch.no_grad():
            out = self.model(
                input_ids=batch.to(self.device), attention_mask=mask.to(self.device)
            )
        logits = out.logits.detach().to("cpu").double().numpy()
        return np.stack([logits[i, lengths[i] - 1, :] for i in range(len(lengths))])


def _rebuild_prompt(
    item_id: str,
    shot_ids: Sequence[str],
    items_path: Path,
    cfg: AdapterConfig,
) -> str:
    """Ask the toolkit CLI for the same question with a reduced shot list."""
    items = load_items(items_path.read_text(encoding="utf-8").splitlines())
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        item_file = tmp / "item.jsonl"
        item_file.write_text(_item_line(items[item_id]) + "\n", encoding="utf-8")
        argv = [
            "prompt",
            "--items",
            str(item_file),
            "--choice-format",
            cfg.choice_format,
            "--out",
            str(tmp / "plan.jsonl"),
        ]
        if shot_ids:
            shots_file = tmp / "shots.jsonl"
            shots_file.write_text(
                "".join(_item_line(items[s]) + "\n" for s in shot_ids),
                encoding="utf-8",
            )
            argv += ["--shots-file", str(shots_file), "--k", str(len(shot_ids))]
        if cfg.task_description is not None:
            argv += ["--task-description", cfg.task_description]
        _run_mcqcal(argv)
        row = json.loads((tmp / "plan.jsonl").read_text(encoding="utf-8").splitlines()[0])
        return row["prompt"]


def _item_line(item: Item) -> str:
    return json.dumps(
        {
            "item_id": item.item_id,
            "task": item.task,
            "question": item.question,
            "candidates": list(item.candidates),
            "gold_index": item.gold_index,
        },
        ensure_ascii=False,
    )


def _run_mcqcal(argv: list[str]) -> None:
    exe = shutil.which("mcqcal")
    cmd = [exe] + argv if exe else [sys.executable, "-m", "mcqcal.cli"] + argv
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise AdapterError(f"mcqcal {argv[0]} failed: {proc.stderr.strip()}")


def _fit_prompt(
    plan: dict, items_path: Path | None, cfg: AdapterConfig, scorer: _Scorer
) -> tuple[str, list[str]]:
    """Prompt and effective shot list after front-dropping to fit the context.

    The +1 head-room keeps the generated letter inside the window too.
    """
    prompt = plan["prompt"]
    shot_ids = list(plan.get("shot_item_ids") or [])
    while len(scorer.encode(prompt)) + 1 > cfg.max_context:
        if not shot_ids:
            raise ContextOverflow(
                f"plan {plan['item_id']!r} exceeds max_context={cfg.max_context} "
                "with all shots dropped"
            )
        if items_path is None:
            raise ContextOverflow(
                "prompt exceeds max_context and no items file was given to "
                "rebuild it with fewer shots"
            )
        shot_ids = shot_ids[1:]
        prompt = _rebuild_prompt(plan["item_id"], shot_ids, items_path, cfg)
    return prompt, shot_ids


def extract(
    plans: Iterable[dict],
    cfg: AdapterConfig,
    items: dict[str, Item],
    items_path: Path | None = None,
) -> Iterator[dict]:
    """Yield one wire-format record per plan row, in plan order."""
    scorer = _Scorer(cfg)
    paren = cfg.choice_format == "paren"
    cue = PAREN_CUE if paren else PLAIN_CUE
    if paren:
        ident_token, ident_spaced = resolve_identifier_token(scorer.tokenizer)

    batch: list[tuple[dict, str, list[str]]] = []

    def flush() -> Iterator[dict]:
        if not batch:
            return
        main_rows = []
        ident_rows = []
        letter_ids = []
        for plan, prompt, _shots in batch:
            item = items[plan["item_id"]]
            if not prompt.endswith(cue):
                raise AdapterError(
                    f"plan {plan['item_id']!r}: prompt does not end with the "
                    f"{cfg.choice_format} answer cue"
                )
            ids, strip_space = resolve_letter_tokens(
                scorer.tokenizer, len(item.candidates), cue_ends_with_space=not paren
            )
            letter_ids.append(ids)
            scored = prompt[:-1] if (not paren and strip_space) else prompt
            main_rows.append(scorer.encode(scored))
            if paren:
                # Identifier probability comes from the prompt truncated
                # before "(" so the model is predicting the identifier itself.
                trunk = prompt[:-1]
                if ident_spaced:
                    trunk = trunk[:-1]
                ident_rows.append(scorer.encode(trunk))
        main_logits = scorer.next_token_logits(main_rows)
        ident_probs = [None] * len(batch)
        if paren:
            ident_logits = scorer.next_token_logits(ident_rows)
            for i, vec in enumerate(ident_logits):
                ident_probs[i] = float(_softmax(vec)[ident_token])
        for i, (plan, _prompt, shots) in enumerate(batch):
            item = items[plan["item_id"]]
            vec = main_logits[i]
            probs = _softmax(vec)
            yield {
                "item_id": plan["item_id"],
                "task": item.task,
                "model_id": cfg.resolved_model_id,
                "shots": len(shots),
                "choice_format": cfg.choice_format,
                "choices": list(LETTERS[: len(item.candidates)]),
                "choice_logits": [float(vec[t]) for t in letter_ids[i]],
                "choice_probs_fullvocab": [float(probs[t]) for t in letter_ids[i]],
                "format_identifier_prob": ident_probs[i],
                "label_index": item.gold_index,
                "permutation_id": plan.get("permutation_id"),
                "position": plan.get("position"),
            }
        batch.clear()

    for plan in plans:
        if plan["item_id"] not in items:
            raise AdapterError(f"plan references unknown item {plan['item_id']!r}")
        prompt, shots = _fit_prompt(plan, items_path, cfg, scorer)
        batch.append((plan, prompt, shots))
        if len(batch) >= cfg.batch_size:
            yield from flush()
    yield from flush()


def _softmax(vec: np.ndarray) -> np.ndarray:
    z = vec - vec.max()
    e = np.exp(z)
    return e / e.sum()


def extract_to_lines(
    plan_lines: Iterable[str],
    cfg: AdapterConfig,
    item_lines: Iterable[str],
    items_path: Path | None = None,
) -> Iterator[str]:
    items = load_items(item_lines)
    plans = (json.loads(line) for line in plan_lines if line.strip())
    for record in extract(plans, cfg, items, items_path=items_path):
        yield json.dumps(record, ensure_ascii=False)
