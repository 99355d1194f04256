"""Shared primitives for parsing question-numbered model responses.

Responses follow a loose "Q1: ... Q2: ..." layout with feature lists such as
"Sender: Jane, Sender Role: Nurse, ...".  Parsers here are total: they return
whatever could be located and never raise on weird input.
"""

from __future__ import annotations

import re

# Display names in canonical order; the first seven are the vital fields, the
# last four the transmission principles.
FEATURE_NAMES = (
    "Sender",
    "Sender Role",
    "Recipient",
    "Recipient Role",
    "Subject",
    "Subject Role",
    "Type",
    "Purpose",
    "In Reply To",
    "Consented By",
    "Belief",
)

FEATURE_ATTRS = (
    "sender",
    "sender_role",
    "recipient",
    "recipient_role",
    "subject",
    "subject_role",
    "info_type",
    "purpose",
    "in_reply_to",
    "consented_by",
    "belief",
)

ATTR_BY_NAME = dict(zip(FEATURE_NAMES, FEATURE_ATTRS))
NAME_BY_ATTR = dict(zip(FEATURE_ATTRS, FEATURE_NAMES))

_Q_MARKER_RE = re.compile(r"^\s*q(\d+)\s*[:.)]\s*", re.IGNORECASE | re.MULTILINE)

# Longer names first so "Sender Role" is not split at "Sender".
_FEATURE_KEY_RE = re.compile(
    "(" + "|".join(sorted(FEATURE_NAMES, key=len, reverse=True)) + r")\s*:",
    re.IGNORECASE,
)

_NONE_SENTINEL_RE = re.compile(r"none\b", re.IGNORECASE)


def split_q_sections(text: str) -> dict[int, str]:
    """Map question number to the text between its marker and the next one."""
    sections: dict[int, str] = {}
    matches = list(_Q_MARKER_RE.finditer(text))
    for current, following in zip(matches, matches[1:] + [None]):
        number = int(current.group(1))
        end = following.start() if following is not None else len(text)
        # First marker wins when a number repeats.
        sections.setdefault(number, text[current.end():end].strip())
    return sections


def is_none_sentinel(value: str) -> bool:
    """True for "None", "none.", "None (explanation)" and similar."""
    return bool(_NONE_SENTINEL_RE.match(value.strip()))


def parse_feature_list(text: str) -> dict[str, str]:
    """Extract "Name: value" pairs keyed by attribute name.

    Values run until the next known feature key, so commas inside values
    survive.  Sentinel "None" values are dropped entirely.
    """
    found: dict[str, str] = {}
    matches = list(_FEATURE_KEY_RE.finditer(text))
    for current, following in zip(matches, matches[1:] + [None]):
        attr = ATTR_BY_NAME.get(_canonical_feature_name(current.group(1)))
        if attr is None:
            continue
        end = following.start() if following is not None else len(text)
        value = text[current.end():end].strip().strip(",").rstrip(".").strip()
        if not value or is_none_sentinel(value):
            continue
        found.setdefault(attr, value)
    return found


def _canonical_feature_name(raw: str) -> str:
    lowered = raw.strip().lower()
    for name in FEATURE_NAMES:
        if name.lower() == lowered:
            return name
    return raw


def first_label(text: str, labels: dict[str, str]) -> str | None:
    """Earliest case-insensitive occurrence of any label pattern.

    ``labels`` maps regex patterns to canonical values.  Overlapping matches
    resolve to the earliest start, then the longest match ("Not Applicable"
    beats the "Applicable" inside it).
    """
    best: tuple[int, int] | None = None
    best_value: str | None = None
    for pattern, value in labels.items():
        match = re.search(pattern, text, re.IGNORECASE)
        if match is None:
            continue
        key = (match.start(), -(match.end() - match.start()))
        if best is None or key < best:
            best = key
            best_value = value
    return best_value
