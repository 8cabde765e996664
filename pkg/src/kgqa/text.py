from __future__ import annotations

import re

# hyphens survive only between word characters, so "CC-3068" stays one token
_TOKEN = re.compile(r"\w+(?:-\w+)*")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word tokens, dropping punctuation."""
    return _TOKEN.findall(text.lower())
