"""Tweet text cleanup: lowercase, strip URLs, emoji, punctuation.

Applied in that order, then whitespace is collapsed. A record whose text
comes out empty is dropped by the extractor (and counted). Emoji removal
filters the Unicode pictograph blocks listed in EMOJI_RANGES plus the
zero-width joiner and variation selectors that glue emoji sequences
together.
"""

from __future__ import annotations

import re
import unicodedata

__all__ = ["preprocess", "EMOJI_RANGES"]

URL_RE = re.compile(r"https?://\S+|www\.\S+")

# (start, end) inclusive codepoint ranges treated as emoji
EMOJI_RANGES = (
    (0x1F300, 0x1F5FF),  # symbols & pictographs
    (0x1F600, 0x1F64F),  # emoticons
    (0x1F680, 0x1F6FF),  # transport & map
    (0x1F700, 0x1F77F),  # alchemical
    (0x1F780, 0x1F8FF),  # geometric extended, arrows-C
    (0x1F900, 0x1F9FF),  # supplemental pictographs
    (0x1FA00, 0x1FAFF),  # extended-A
    (0x2600, 0x26FF),  # miscellaneous symbols
    (0x2700, 0x27BF),  # dingbats
    (0x1F1E6, 0x1F1FF),  # regional indicators (flags)
    (0x2B00, 0x2BFF),  # arrows and stars used as emoji
    (0xFE00, 0xFE0F),  # variation selectors
    (0x200D, 0x200D),  # zero-width joiner
    (0x20E3, 0x20E3),  # combining enclosing keycap
)


def _is_emoji(ch: str) -> bool:
    code = ord(ch)
    return any(start <= code <= end for start, end in EMOJI_RANGES)


def preprocess(text: str) -> str:
    """Normalize one tweet; may return an empty string (caller drops it)."""
    text = text.lower()
    text = URL_RE.sub(" ", text)
    text = "".join(ch for ch in text if not _is_emoji(ch))
    text = "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))
    return " ".join(text.split())
