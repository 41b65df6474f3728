"""Parse ``Area <n>: <score>, <reason>`` response lines and classify reasons."""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from ..errors import ValidationError


class Category(str, Enum):
    FUNCTIONALITY = "Functionality"
    AESTHETICS = "Aesthetics"
    SOCIAL = "Social"
    HEALTH_SAFETY = "HealthSafety"
    OTHER = "Other"
    UNCLASSIFIED = "Unclassified"


# tie-break order for modal categories
CATEGORY_ORDER = tuple(Category)

_KEYWORDS = [
    (re.compile(r"\bfunctional(?:ity)?\b", re.I), Category.FUNCTIONALITY),
    (re.compile(r"\baesthetic(?:s|ally)?\b", re.I), Category.AESTHETICS),
    (re.compile(r"\bsocial(?:ly)?\b", re.I), Category.SOCIAL),
    (re.compile(r"\b(?:health|safety|sanitation|hygien\w*)\b", re.I), Category.HEALTH_SAFETY),
]
_OTHER_LEAD = re.compile(r"^\W*other\b", re.I)


def classify_reason(text: str) -> Category:
    """Category whose keyword appears first in ``text``.

    "other" only counts as the leading word, since it is common in ordinary
    prose ("other people").
    """
    best: tuple[int, Category] | None = None
    for pattern, cat in _KEYWORDS:
        m = pattern.search(text)
        if m and (best is None or m.start() < best[0]):
            best = (m.start(), cat)
    if best is not None:
        return best[1]
    if _OTHER_LEAD.match(text):
        return Category.OTHER
    return Category.UNCLASSIFIED


@dataclass(frozen=True)
class RatingResponse:
    area: int
    score: int
    reason: str
    category: Category

    def __post_init__(self) -> None:
        if isinstance(self.score, bool) or not 1 <= self.score <= 5:
            raise ValidationError(f"score must be an integer 1..5, got {self.score!r}")
        if self.area < 1:
            raise ValidationError(f"area index must be >= 1, got {self.area}")


@dataclass(frozen=True)
class Diagnostic:
    line: int
    text: str
    problem: str


@dataclass(frozen=True)
class ParseResult:
    responses: tuple[RatingResponse, ...]
    diagnostics: tuple[Diagnostic, ...]


class ParseFailure(ValueError):
    """No well-formed line in a response; carries the diagnostics."""

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics = tuple(diagnostics)
        detail = "; ".join(f"line {d.line}: {d.problem}" for d in self.diagnostics[:5])
        super().__init__("no well-formed rating line" + (f" ({detail})" if detail else ""))


_LINE = re.compile(r"^[\s*\-•]*Area\s+(\d+)\s*\**\s*:\s*\**\s*([^,\s*]+)\**\s*(?:,\s*(.*?))?\s*$", re.I)


def parse_response(text: str) -> ParseResult:
    """One response per well-formed line; other non-blank lines become diagnostics.

    Raises :class:`ParseFailure` when no line is well formed. A repeated area
    keeps its first rating.
    """
    responses: list[RatingResponse] = []
    diags: list[Diagnostic] = []
    seen: set[int] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            diags.append(Diagnostic(lineno, line, "not of the form 'Area <n>: <score>, <reason>'"))
            continue
        area, raw, reason = int(m.group(1)), m.group(2), m.group(3) or ""
        if not re.fullmatch(r"[1-5]", raw):
            diags.append(Diagnostic(lineno, line, f"score {raw!r} is not an integer in 1..5"))
            continue
        if area < 1:
            diags.append(Diagnostic(lineno, line, "area index must be >= 1"))
            continue
        if area in seen:
            diags.append(Diagnostic(lineno, line, f"duplicate rating for area {area}"))
            continue
        seen.add(area)
        responses.append(RatingResponse(area, int(raw), reason, classify_reason(reason)))
    if not responses:
        raise ParseFailure(diags)
    return ParseResult(tuple(responses), tuple(diags))


def render_responses(responses: Iterable[RatingResponse]) -> str:
    """Canonical text form; ``parse_response`` inverts it."""
    return "".join(f"Area {r.area}: {r.score}, {r.reason}\n" for r in responses)
