"""Section identifiers of the form ``164.502(a)(1)(ii)``.

An identifier is a part number, a section number, and zero or more
parenthesized paragraph labels.  Parsing ignores whitespace and letter case;
the canonical rendering is lowercase with no internal whitespace, so parsing
a canonical string round-trips exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import total_ordering

from ciforge.errors import MalformedId

_ID_RE = re.compile(r"(\d+)\.(\d+)((?:\([a-z0-9]+\))*)$")
_LABEL_RE = re.compile(r"\(([a-z0-9]+)\)")
# Citation scanner.  Parts are at least two digits so plain decimals such as
# "2.5 hours" are not mistaken for section ids.
_SCAN_RE = re.compile(r"\b\d{2,}\.\d+(?:\s*\(\s*[A-Za-z0-9]+\s*\))*")


@total_ordering
@dataclass(frozen=True)
class NormId:
    part: int
    section: int
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.part <= 0 or self.section <= 0:
            raise MalformedId(f"part and section must be positive: {self!r}")
        for label in self.labels:
            if not label or label != label.lower() or not label.isalnum():
                raise MalformedId(f"bad paragraph label {label!r}")

    @classmethod
    def parse(cls, text: str) -> NormId:
        compact = re.sub(r"\s+", "", text).lower()
        match = _ID_RE.fullmatch(compact)
        if match is None:
            raise MalformedId(f"not a section id: {text!r}")
        part, section, label_text = match.groups()
        return cls(int(part), int(section), tuple(_LABEL_RE.findall(label_text)))

    def canonical(self) -> str:
        return f"{self.part}.{self.section}" + "".join(f"({l})" for l in self.labels)

    def parent(self) -> NormId | None:
        """Drop the last paragraph label; None at section level."""
        if not self.labels:
            return None
        return NormId(self.part, self.section, self.labels[:-1])

    def with_labels(self, labels: tuple[str, ...]) -> NormId:
        return NormId(self.part, self.section, labels)

    def is_ancestor_of(self, other: NormId) -> bool:
        """True for proper ancestors and for the id itself."""
        return (
            self.part == other.part
            and self.section == other.section
            and self.labels == other.labels[: len(self.labels)]
        )

    def sort_key(self):
        # Numeric labels sort numerically so (10) lands after (9), not after (1).
        label_key = tuple(
            (0, int(l), "") if l.isdigit() else (1, 0, l) for l in self.labels
        )
        return (self.part, self.section, label_key)

    def __lt__(self, other: NormId) -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return self.canonical()


def looks_like_id(text: str) -> bool:
    """Heuristic: identifiers starting with a digit must parse as NormIds."""
    stripped = text.strip()
    return bool(stripped) and stripped[0].isdigit()


def scan_ids(text: str) -> list[NormId]:
    """All section ids cited in free text, deduplicated in citation order."""
    found: list[NormId] = []
    seen: set[NormId] = set()
    for raw in _SCAN_RE.findall(text):
        try:
            norm_id = NormId.parse(raw)
        except MalformedId:
            continue
        if norm_id not in seen:
            seen.add(norm_id)
            found.append(norm_id)
    return found
