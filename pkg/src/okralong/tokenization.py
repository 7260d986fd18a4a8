"""Tokenizers used for chunk sizing and local token accounting.

All token-count constants in the engine (granularities, context limits) are
interpreted in the units of the active tokenizer, so the tokenizer must be
deterministic and must report character offsets for every token.
"""

from __future__ import annotations

import re
from typing import Protocol

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


class Tokenizer(Protocol):
    """Minimal tokenizer contract: identity, counting, offsets."""

    tokenizer_id: str

    def count(self, text: str) -> int: ...

    def spans(self, text: str) -> list[tuple[int, int]]:
        """Character [start, end) span of every token, in order."""
        ...


class SimpleTokenizer:
    """Whitespace-plus-punctuation splitter.

    A word is a maximal run of word characters; every other non-space
    character is its own token. Stands in for a backend BPE tokenizer at
    desk scale.
    """

    tokenizer_id = "simple-v1"

    def count(self, text: str) -> int:
        return sum(1 for _ in _TOKEN_RE.finditer(text))

    def spans(self, text: str) -> list[tuple[int, int]]:
        return [m.span() for m in _TOKEN_RE.finditer(text)]


_REGISTRY: dict[str, Tokenizer] = {}


def register_tokenizer(tokenizer: Tokenizer) -> None:
    _REGISTRY[tokenizer.tokenizer_id] = tokenizer


def get_tokenizer(tokenizer_id: str) -> Tokenizer:
    try:
        return _REGISTRY[tokenizer_id]
    except KeyError:
        raise KeyError(f"unknown tokenizer id: {tokenizer_id!r}") from None


register_tokenizer(SimpleTokenizer())

DEFAULT_TOKENIZER_ID = SimpleTokenizer.tokenizer_id
