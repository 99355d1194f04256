"""Norm-type classification through the chat gateway.

Each norm is classified into a subset of {Definition, Permit, Forbid,
Exception, Requirement, Other} by a question-numbered prompt; per-type
payload answers annotate the permitted action, the forbidden action, and so
on.  Norms whose answers stay unparseable after the retry budget degrade to
Other and are flagged rather than dropped.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

from ciforge import prompts
from ciforge.errors import UnparseableResponse
from ciforge.gateway import (
    DEFAULT_CLASSIFICATION_TEMPERATURE,
    ChatRequest,
    Gateway,
    GatewayMode,
)
from ciforge.parsing import is_none_sentinel, split_q_sections
from ciforge.statute import Norm, NormType

log = logging.getLogger(__name__)

DEFAULT_RESAMPLE_BUDGET = 2

_TYPE_WORD_RE = re.compile(
    r"\b(definition|permit|forbid|exception|requirement|other)\b", re.IGNORECASE
)

# Which follow-up answer annotates each type.
_PAYLOAD_QUESTIONS = {
    NormType.DEFINITION: 2,
    NormType.PERMIT: 4,
    NormType.FORBID: 5,
    NormType.EXCEPTION: 6,
    NormType.REQUIREMENT: 7,
    NormType.OTHER: 8,
}


def render_classification_prompt(norm: Norm) -> str:
    return prompts.NORM_CLASSIFICATION_PROMPT.replace("{text}", norm.full_text)


def classification_request(
    norm: Norm, *, max_tokens: int = 1024, temperature: float | None = None
) -> ChatRequest:
    return ChatRequest(
        user_prompt=render_classification_prompt(norm),
        temperature=(
            DEFAULT_CLASSIFICATION_TEMPERATURE if temperature is None else temperature
        ),
        n_samples=1,
        max_tokens=max_tokens,
        tag=f"classify:{norm.leaf_id.canonical()}",
    )


def parse_classification_response(
    text: str,
) -> tuple[set[NormType], dict[NormType, str]]:
    """Recover the type set from Q1 and payload annotations from Q2..Q8."""
    sections = split_q_sections(text)
    answer = sections.get(1)
    if answer is None:
        raise UnparseableResponse("no Q1 answer found")
    # Only the first line of the answer names the types; later lines may
    # restate the full type menu.
    first_line = answer.strip().splitlines()[0] if answer.strip() else ""
    types = {NormType(w.title()) for w in _TYPE_WORD_RE.findall(first_line)}
    if not types:
        raise UnparseableResponse(f"no type named in Q1 answer {first_line!r}")
    if len(types) > 1:
        types.discard(NormType.OTHER)

    payloads: dict[NormType, str] = {}
    for norm_type in types:
        section = sections.get(_PAYLOAD_QUESTIONS[norm_type], "").strip()
        if section and not is_none_sentinel(section):
            payloads[norm_type] = section
    return types, payloads


def classify_norms(
    norms: list[Norm],
    gateway: Gateway,
    *,
    resample_budget: int = DEFAULT_RESAMPLE_BUDGET,
    max_tokens: int = 1024,
) -> list[Norm]:
    """Classify every norm, preserving input order.

    Requests run with the gateway's parallelism bound.  In replay mode a
    resample would return the identical recorded response, so unparseable
    replays degrade immediately instead of burning the budget.
    """

    def classify_one(norm: Norm) -> Norm:
        request = classification_request(norm, max_tokens=max_tokens)
        attempts = 1 + (0 if gateway.mode is GatewayMode.REPLAY else resample_budget)
        failure = None
        for _ in range(attempts):
            response = gateway.complete(request)
            try:
                types, payloads = parse_classification_response(response.texts[0])
            except UnparseableResponse as exc:
                failure = exc
                continue
            norm.types = types
            norm.type_payloads = payloads
            norm.flagged = False
            return norm
        log.warning(
            "classification for %s unparseable (%s); degrading to Other",
            norm.leaf_id.canonical(),
            failure,
        )
        norm.types = {NormType.OTHER}
        norm.type_payloads = {}
        norm.flagged = True
        return norm

    if gateway.mode is GatewayMode.REPLAY or gateway.max_parallel <= 1:
        return [classify_one(n) for n in norms]
    with ThreadPoolExecutor(max_workers=gateway.max_parallel) as pool:
        return list(pool.map(classify_one, norms))


def bundled_classification_cassette_path() -> Path:
    """Path of the packaged cassette typing every bundled-snapshot norm."""
    return Path(
        str(
            resources.files("ciforge.fixtures").joinpath(
                "classification_cassette.jsonl"
            )
        )
    )


def seed_norms(norms: list[Norm]) -> list[Norm]:
    """Norms typed Permit or Forbid, each stamped with its polarity.

    Norms carrying both polarities are contradictory seeds and are excluded
    (and logged); everything else without a polarity simply does not seed
    case generation.
    """
    seeds = []
    for norm in norms:
        has_permit = NormType.PERMIT in norm.types
        has_forbid = NormType.FORBID in norm.types
        if has_permit and has_forbid:
            log.warning(
                "norm %s is typed both Permit and Forbid; excluded from seeds",
                norm.leaf_id.canonical(),
            )
            continue
        if has_permit or has_forbid:
            norm.seed_polarity = NormType.PERMIT if has_permit else NormType.FORBID
            seeds.append(norm)
    return seeds
