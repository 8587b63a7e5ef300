"""Canonicalize raw model captions before scoring.

Instruction-tuned captioners decorate output with markdown emphasis,
headers, numbered lists, and trailing chatter.  The cleanup pipeline, in
order per pass:

  1. strip markdown header markers and emphasis characters
  2. remove numbered/bulleted list prefixes per line, repeated to fixpoint;
     lines left with no letters or digits are dropped outright
  3. flatten remaining lines to one line, drop every character other than
     letters, digits, whitespace, commas, periods
  4. collapse whitespace runs to single spaces
  5. trim ends
  6. lowercase (configurable, default on)

The pass repeats until the string stops changing, so the function is
idempotent by construction: character deletions in step 3 can uncover a new
list prefix ("3-. dog" -> "3. dog") that only the next pass removes.

References are never routed through here; only model output is normalized.
"""

from __future__ import annotations

import re

_HEADER = re.compile(r"^\s*#{1,6}\s*")
_LIST_PREFIX = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s+")
_SPACE_RUN = re.compile(r"\s+")
_EMPHASIS = str.maketrans("", "", "*_`")

KEPT_PUNCTUATION = ",."


def _one_pass(text: str, lowercase: bool) -> str:
    kept_lines = []
    for line in text.splitlines() or [text]:
        line = _HEADER.sub("", line).translate(_EMPHASIS)
        while True:
            stripped = _LIST_PREFIX.sub("", line)
            if stripped == line:
                break
            line = stripped
        if not any(ch.isalnum() for ch in line):
            continue
        kept_lines.append(line)
    flat = " ".join(kept_lines)
    flat = "".join(
        ch for ch in flat if ch.isalnum() or ch.isspace() or ch in KEPT_PUNCTUATION
    )
    flat = _SPACE_RUN.sub(" ", flat).strip()
    return flat.lower() if lowercase else flat


def normalize_caption(raw: str, lowercase: bool = True) -> str:
    """Canonical form of a raw caption; total over any Unicode string."""
    text = raw
    for _ in range(100):
        new = _one_pass(text, lowercase)
        if new == text:
            return text
        text = new
    return text


def normalize_batch(records: list, lowercase: bool = True) -> list:
    """Fill each record's `normalized` field from its `raw` field, in place."""
    for record in records:
        record.normalized = normalize_caption(record.raw, lowercase=lowercase)
    return records
