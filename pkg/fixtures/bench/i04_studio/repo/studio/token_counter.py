"""Token counting helpers for budget enforcement (max_tokens)."""

import tiktoken

ENCODING = tiktoken.get_encoding("cl100k_base")


def count_tokens(text, max_tokens=None):
    n = len(ENCODING.encode(text))
    if max_tokens is not None and n > max_tokens:
        raise ValueError(f"{n} tokens exceeds max_tokens={max_tokens}")
    return n
