"""Corpus handling: specs, tokenisation, year-labelled document discovery."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")
_YEAR_RE = re.compile(r"^(\d{3,4})\D*")


@dataclass
class CorpusSpec:
    """What to extract: documents, targets, and model/window parameters."""

    documents: Iterable[tuple[str, int]]
    targets: list[str]
    interval_width: int = 10
    window: int = 128
    model: str = "toy"

    def __post_init__(self):
        if self.interval_width < 1:
            raise ValueError(f"interval_width must be positive, got {self.interval_width}")
        if self.window < 1:
            raise ValueError(f"window must be positive, got {self.window}")
        if not self.targets:
            raise ValueError("need at least one target word")
        self.targets = [t.lower() for t in self.targets]

    def interval_of(self, year: int) -> int:
        return (year // self.interval_width) * self.interval_width


def tokenize(text: str) -> list[str]:
    """Lowercased word/punctuation tokens."""
    return _TOKEN_RE.findall(text.lower())


def window_around(tokens: list[str], position: int, width: int) -> tuple[list[str], int]:
    """A ``width``-token window centred on ``position``, truncated at the
    document boundaries. Returns the window and the target's offset in it."""
    start = max(0, position - width // 2)
    end = min(len(tokens), start + width)
    start = max(0, end - width)
    return tokens[start:end], position - start


def read_corpus_dir(root: str | Path) -> list[tuple[str, int]]:
    """Read ``*.txt`` documents whose filenames start with a year.

    Returns (text, year) pairs ordered by (year, filename) so corpus order,
    and therefore bundle row order, is stable.
    """
    root = Path(root)
    found = []
    for path in sorted(root.rglob("*.txt")):
        match = _YEAR_RE.match(path.stem)
        if not match:
            continue
        found.append((int(match.group(1)), path.name, path))
    if not found:
        raise ValueError(f"no year-labelled *.txt documents under {root}")
    found.sort(key=lambda item: (item[0], item[1]))
    return [(path.read_text(encoding="utf-8"), year) for year, _, path in found]
