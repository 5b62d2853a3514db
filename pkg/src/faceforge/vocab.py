"""Closed-vocabulary word tokenizer over the prompt clause templates."""

from __future__ import annotations

from functools import lru_cache

from .errors import VocabularyError
from .synthface.attributes import all_clauses

MAX_TOKENS = 77
PAD = "<pad>"
COMMA = ","


@lru_cache(maxsize=1)
def build_vocab() -> dict[str, int]:
    """Word -> id table covering every clause template; id 0 is padding."""
    words = set()
    for clause in all_clauses():
        words.update(clause.split())
    vocab = {PAD: 0, COMMA: 1}
    for w in sorted(words):
        vocab[w] = len(vocab)
    return vocab


@lru_cache(maxsize=1)
def inverse_vocab() -> dict[int, str]:
    return {i: w for w, i in build_vocab().items()}


def vocab_size() -> int:
    return len(build_vocab())


def tokenize(text: str) -> list[int]:
    """Encode a prompt into token ids; commas are their own token."""
    vocab = build_vocab()
    ids = []
    for word in text.replace(",", f" {COMMA} ").split():
        if word not in vocab:
            raise VocabularyError(word)
        ids.append(vocab[word])
    return ids


def detokenize(ids: list[int]) -> str:
    inv = inverse_vocab()
    words = []
    for i in ids:
        if i not in inv:
            raise VocabularyError(i)
        if inv[i] == PAD:
            continue
        words.append(inv[i])
    return " ".join(words).replace(" ,", ",")
