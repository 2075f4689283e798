from __future__ import annotations

import json
from pathlib import Path

import pytest


def build_tiny_model(target: Path) -> Path:
    """A deterministic character-level causal LM saved under ``target``.

    Every printable ASCII character (plus newline) is one vocabulary token,
    so choice letters and "(" are single tokens while " A" is not, which
    exercises the bare-letter fallback path.
    """
    import torch
    from tokenizers import Tokenizer, models
    from transformers import GPT2Config, GPT2LMHeadModel, PreTrainedTokenizerFast

    chars = sorted(set(map(chr, range(32, 127))) | {"\n"})
    vocab = {ch: i for i, ch in enumerate(chars)}
    vocab["<unk>"] = len(vocab)
    tok = Tokenizer(models.BPE(vocab=vocab, merges=[], unk_token="<unk>"))
    fast = PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="<unk>")

    torch.manual_seed(20240601)
    config = GPT2Config(
        vocab_size=len(vocab),
        n_embd=32,
        n_layer=2,
        n_head=2,
        n_positions=1024,
        bos_token_id=None,
        eos_token_id=None,
    )
    model = GPT2LMHeadModel(config)
    model.eval()
    model.save_pretrained(target)
    fast.save_pretrained(target)
    return target


@pytest.fixture(scope="session")
def tiny_model(tmp_path_factory) -> Path:
    return build_tiny_model(tmp_path_factory.mktemp("tinylm") / "model")


FIXTURE_ITEMS = [
    {
        "item_id": f"fx-{i}",
        "task": "adapter-smoke",
        "question": f"Probe question number {i}: which label is stored as gold?",
        "candidates": ["first option", "second option", "third option", "fourth option"][
            : 2 + (i % 3)
        ],
        "gold_index": i % 2,
    }
    for i in range(5)
]


@pytest.fixture(scope="session")
def items_file(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("items") / "items.jsonl"
    path.write_text(
        "".join(json.dumps(it) + "\n" for it in FIXTURE_ITEMS), encoding="utf-8"
    )
    return path
