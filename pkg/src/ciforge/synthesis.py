"""Candidate generation, filtering, and per-norm case selection.

For every seed norm the gateway samples several candidate cases; candidates
then pass the feature filter (all vital flow fields present), the norm filter
(the seed id is cited), and the conclusion filter (statute applies and the
verdict matches the seed polarity).  One survivor per norm is kept: by
default the candidate least similar (max ROUGE-L) to everything already
selected, which spreads the corpus out.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

from ciforge import rouge
from ciforge.cases import (
    Case,
    CaseSet,
    build_generation_prompt,
    conclusion_filter,
    feature_filter,
    norm_filter,
    parse_case_response,
)
from ciforge.errors import AuthMissing, GatewayError, UnparseableResponse
from ciforge.gateway import ChatRequest, ChatResponse, Gateway, GatewayMode
from ciforge.statute import Norm

log = logging.getLogger(__name__)

SELECTION_MIN_MAX = "min-max"
SELECTION_HIGHEST_ROUGE = "highest-rouge"

# The packaged generation cassette was recorded at this sampling width.
BUNDLED_SAMPLES_PER_NORM = 10


def bundled_generation_cassette_path() -> Path:
    """Path of the packaged cassette with candidate cases for both seeds.

    Ten candidates per seed norm: per seed, four pass every filter, two
    drop a vital feature, two cite the wrong norm, and two conclude against
    the seed polarity, so ablation flags have candidates to re-admit.
    """
    return Path(
        str(resources.files("ciforge.fixtures").joinpath("generation_cassette.jsonl"))
    )


@dataclass
class SynthesisConfig:
    samples_per_norm: int = 5
    temperature: float = 1.0
    max_tokens: int = 2048
    feature_filter_on: bool = True
    norm_filter_on: bool = True
    conclusion_filter_on: bool = True
    diversity_rank: bool = True
    selection: str = SELECTION_MIN_MAX
    random_seed: int = 0

    def __post_init__(self):
        if self.selection not in (SELECTION_MIN_MAX, SELECTION_HIGHEST_ROUGE):
            raise ValueError(f"unknown selection strategy {self.selection!r}")


def generation_request(seed: Norm, config: SynthesisConfig) -> ChatRequest:
    return ChatRequest(
        user_prompt=build_generation_prompt(seed),
        temperature=config.temperature,
        n_samples=config.samples_per_norm,
        max_tokens=config.max_tokens,
        tag=f"generate:{seed.leaf_id.canonical()}",
    )


def diversity_select(
    candidates_per_norm: dict[str, list[Case]],
    *,
    selection: str = SELECTION_MIN_MAX,
) -> CaseSet:
    """Pick one candidate per seed norm, walking norms in canonical order.

    Each candidate is scored by its maximum ROUGE-L against the backgrounds
    selected so far.  min-max keeps the least similar candidate; the
    highest-rouge strategy keeps the most similar one instead.  Ties resolve
    to the earliest sample index.  Norms with no candidates are skipped; the
    caller reports them.
    """
    case_set = CaseSet()
    index = rouge.SimilarityIndex()
    pick_most_similar = selection == SELECTION_HIGHEST_ROUGE
    for norm_key in sorted(candidates_per_norm, key=_canonical_sort_key):
        candidates = candidates_per_norm[norm_key]
        if not candidates:
            continue
        best_position = 0
        best_score = None
        for position, candidate in enumerate(candidates):
            score = index.max_similarity(candidate.background)
            if best_score is None:
                better = True
            elif pick_most_similar:
                better = score > best_score
            else:
                better = score < best_score
            if better:
                best_score = score
                best_position = position
        chosen = candidates[best_position]
        index.add(chosen.background)
        case_set.per_norm_index[norm_key] = len(case_set.cases)
        case_set.cases.append(chosen)
    return case_set


def _canonical_sort_key(norm_key: str):
    from ciforge.ids import NormId

    return NormId.parse(norm_key).sort_key()


@dataclass
class SynthesisResult:
    case_set: CaseSet
    manifest: dict


def run_synthesis(
    seeds: list[Norm], gateway: Gateway, config: SynthesisConfig
) -> SynthesisResult:
    """Generate, filter, and select one case per seed norm.

    Per-norm gateway or parse failures are recorded in the manifest and do
    not abort the run; configuration problems (missing credentials, missing
    cassette) do.  The manifest tracks survivors per stage, which must shrink
    monotonically.
    """
    ordered = sorted(seeds, key=lambda n: n.leaf_id.sort_key())
    requests = [generation_request(seed, config) for seed in ordered]
    responses = _complete_tolerant(gateway, requests)

    rng = random.Random(config.random_seed)
    survivors: dict[str, list[Case]] = {}
    per_norm: dict[str, dict] = {}
    totals = {
        "seeds": len(ordered),
        "sampled": 0,
        "parsed": 0,
        "feature_pass": 0,
        "norm_pass": 0,
        "conclusion_pass": 0,
        "selected": 0,
    }

    for seed, response in zip(ordered, responses):
        key = seed.leaf_id.canonical()
        disposition = {
            "sampled": len(response.texts),
            "parsed": 0,
            "feature_pass": 0,
            "norm_pass": 0,
            "conclusion_pass": 0,
            "selected": False,
        }
        candidates: list[Case] = []
        for text in response.texts:
            try:
                candidates.append(parse_case_response(text, seed))
            except UnparseableResponse:
                continue
        disposition["parsed"] = len(candidates)

        if config.feature_filter_on:
            candidates = [c for c in candidates if feature_filter(c)]
        disposition["feature_pass"] = len(candidates)

        if config.norm_filter_on:
            candidates = [c for c in candidates if norm_filter(c, seed)]
        disposition["norm_pass"] = len(candidates)

        if config.conclusion_filter_on:
            candidates = [c for c in candidates if conclusion_filter(c, seed)]
        disposition["conclusion_pass"] = len(candidates)

        survivors[key] = candidates
        per_norm[key] = disposition
        totals["sampled"] += disposition["sampled"]
        totals["parsed"] += disposition["parsed"]
        totals["feature_pass"] += disposition["feature_pass"]
        totals["norm_pass"] += disposition["norm_pass"]
        totals["conclusion_pass"] += disposition["conclusion_pass"]

    if config.diversity_rank:
        case_set = diversity_select(survivors, selection=config.selection)
    else:
        # Ablation: take a seeded random survivor per norm instead.
        case_set = CaseSet()
        for key in sorted(survivors, key=_canonical_sort_key):
            pool = survivors[key]
            if not pool:
                continue
            chosen = pool[rng.randrange(len(pool))]
            case_set.per_norm_index[key] = len(case_set.cases)
            case_set.cases.append(chosen)

    unfilled = sorted(
        (key for key in survivors if key not in case_set.per_norm_index),
        key=_canonical_sort_key,
    )
    for key in case_set.per_norm_index:
        per_norm[key]["selected"] = True
    for key in unfilled:
        log.warning("seed norm %s has no surviving candidates", key)
    totals["selected"] = len(case_set.cases)

    manifest = {
        "config": asdict(config),
        "config_hash": _config_hash(config),
        "stages": totals,
        "unfilled_norms": unfilled,
        "per_norm": {key: per_norm[key] for key in sorted(per_norm)},
    }
    return SynthesisResult(case_set=case_set, manifest=manifest)


def _config_hash(config: SynthesisConfig) -> str:
    payload = json.dumps(asdict(config), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _complete_tolerant(
    gateway: Gateway, requests: list[ChatRequest]
) -> list[ChatResponse]:
    """Complete all requests, degrading per-request failures to empty responses.

    Configuration problems (missing credentials) still abort the whole run.
    """

    def one(request: ChatRequest) -> ChatResponse:
        try:
            return gateway.complete(request)
        except AuthMissing:
            raise
        except GatewayError as exc:
            log.warning("generation failed for tag=%r: %s", request.tag, exc)
            return ChatResponse(texts=())

    if gateway.mode is GatewayMode.REPLAY or gateway.max_parallel <= 1:
        return [one(r) for r in requests]
    with ThreadPoolExecutor(max_workers=gateway.max_parallel) as pool:
        return list(pool.map(one, requests))
