"""Court-case ingestion and dataset assembly.

Records come from a keyword search against a caselaw API (or a local JSONL
snapshot of one), get length-filtered, and are turned into cases by a
question-numbered extraction prompt.  Extraction also raises annotation
flags mirroring the manual review steps: flows that are missing, backgrounds
that still contain court analysis, and conclusions that look uncertain.

assemble() balances the four instruction-tuning splits and guarantees that
no test background ever appears in a train split.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from ciforge import prompts
from ciforge.cases import (
    Applicability,
    Case,
    Provenance,
    features_from_section,
    parse_verdict,
)
from ciforge.errors import (
    InsufficientNegatives,
    NetworkError,
    SnapshotMissing,
    SplitLeak,
    UnparseableResponse,
)
from ciforge.flows import FlowVerdict, aggregate_verdicts
from ciforge.gateway import ChatRequest, Gateway
from ciforge.ids import scan_ids
from ciforge.parsing import first_label, split_q_sections

log = logging.getLogger(__name__)

MIN_WORDS = 100
MAX_WORDS = 30000


@dataclass(frozen=True)
class RealCaseRecord:
    source_id: str
    court: str
    decision_text: str
    query_keyword: str

    @property
    def word_count(self) -> int:
        return len(self.decision_text.split())

    def to_json_obj(self) -> dict:
        return {
            "source_id": self.source_id,
            "court": self.court,
            "decision_text": self.decision_text,
            "query_keyword": self.query_keyword,
        }

    @classmethod
    def from_json_obj(cls, obj: dict, keyword: str = "") -> RealCaseRecord:
        return cls(
            source_id=str(obj["source_id"]),
            court=str(obj.get("court", "")),
            decision_text=str(obj.get("decision_text", "")),
            query_keyword=str(obj.get("query_keyword", keyword)),
        )


@dataclass(frozen=True)
class FetchLimits:
    max_results: int | None = None
    page_size: int = 100


class CaselawClient:
    """Paginated keyword search against a caselaw HTTP API.

    Responses follow {"results": [...], "next": url-or-null}; each result
    carries id, court name, and the decision text.  Results arrive in
    relevance order and are kept that way.
    """

    def __init__(self, base_url: str, api_key: str | None = None, transport=None):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.transport = transport or self._http_get

    def _http_get(self, url: str, params: dict | None) -> dict:
        import requests

        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Token {self.api_key}"
        try:
            response = requests.get(url, params=params, headers=headers, timeout=60)
            response.raise_for_status()
            return response.json()
        except requests.RequestException as exc:
            raise NetworkError(f"caselaw request failed: {exc}") from exc

    def search(self, keyword: str, limits: FetchLimits) -> list[dict]:
        results: list[dict] = []
        url = f"{self.base_url}/cases/"
        params: dict | None = {
            "search": keyword,
            "page_size": limits.page_size,
            "full_case": "true",
        }
        while url:
            page = self.transport(url, params)
            params = None  # the "next" link already encodes them
            results.extend(page.get("results", []))
            if limits.max_results is not None and len(results) >= limits.max_results:
                break
            url = page.get("next")
        return results


def _record_from_api_result(result: dict, keyword: str) -> RealCaseRecord:
    court = result.get("court", "")
    if isinstance(court, dict):
        court = court.get("name", "")
    casebody = result.get("casebody", {})
    if isinstance(casebody, dict):
        data = casebody.get("data", casebody)
        if isinstance(data, dict):
            opinions = data.get("opinions", [])
            text = "\n".join(op.get("text", "") for op in opinions)
        else:
            text = str(data)
    else:
        text = str(casebody)
    return RealCaseRecord(
        source_id=str(result.get("id", "")),
        court=str(court),
        decision_text=text,
        query_keyword=keyword,
    )


def fetch_cases(
    keyword: str,
    *,
    client: CaselawClient | None = None,
    snapshot: str | Path | None = None,
    limits: FetchLimits = FetchLimits(),
) -> list[RealCaseRecord]:
    """Fetch records for a keyword, preserving relevance order.

    Either a live client or a snapshot path must be given.  Duplicate
    source_ids keep their first (most relevant) occurrence; the list is
    truncated to limits.max_results.
    """
    if snapshot is not None:
        records = _load_snapshot(Path(snapshot), keyword)
    elif client is not None:
        records = [
            _record_from_api_result(result, keyword)
            for result in client.search(keyword, limits)
        ]
    else:
        raise NetworkError("fetch_cases needs a client or a snapshot path")

    seen: set[str] = set()
    unique: list[RealCaseRecord] = []
    for record in records:
        if record.source_id in seen:
            continue
        seen.add(record.source_id)
        unique.append(record)
    if limits.max_results is not None:
        unique = unique[: limits.max_results]
    return unique


def _load_snapshot(path: Path, keyword: str) -> list[RealCaseRecord]:
    if not path.exists():
        raise SnapshotMissing(f"snapshot not found: {path}")
    records = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = RealCaseRecord.from_json_obj(json.loads(line), keyword)
            # Snapshots may mix several query dumps; keep the requested one.
            if record.query_keyword == keyword or not keyword:
                records.append(record)
    return records


def save_snapshot(records: list[RealCaseRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record.to_json_obj(), ensure_ascii=False) + "\n")


def length_filter(
    records: list[RealCaseRecord],
    min_words: int = MIN_WORDS,
    max_words: int = MAX_WORDS,
) -> list[RealCaseRecord]:
    """Keep records whose word count lies in [min_words, max_words]."""
    return [r for r in records if min_words <= r.word_count <= max_words]


@dataclass(frozen=True)
class AnnotationFlags:
    """Review cues mirroring the manual annotation pass."""

    missing_flow: bool = False
    court_analysis: bool = False
    conclusion_uncertain: bool = False

    def any(self) -> bool:
        return self.missing_flow or self.court_analysis or self.conclusion_uncertain

    def to_json_obj(self) -> dict:
        return {
            "missing_flow": self.missing_flow,
            "court_analysis": self.court_analysis,
            "conclusion_uncertain": self.conclusion_uncertain,
        }


_COURT_ANALYSIS_RE = re.compile(
    r"\b(the court|court's|judge|ruling|verdict|appeal|motion to dismiss)\b",
    re.IGNORECASE,
)

_VERDICT_WORD_RE = re.compile(
    r"\bnot\s+applicable\b|\bpermit\w*\b|\bforbid\w*\b", re.IGNORECASE
)


def real_case_request(record: RealCaseRecord, *, max_tokens: int = 2048) -> ChatRequest:
    return ChatRequest(
        user_prompt=prompts.REAL_CASE_PROMPT.replace("{case}", record.decision_text),
        temperature=0.0,
        n_samples=1,
        max_tokens=max_tokens,
        tag=f"real:{record.source_id}",
    )


def _per_norm_verdicts(section: str) -> list[FlowVerdict]:
    verdicts = []
    for word in _VERDICT_WORD_RE.findall(section):
        lowered = word.lower()
        if lowered.startswith("not"):
            verdicts.append(FlowVerdict.NOT_APPLICABLE)
        elif lowered.startswith("permit"):
            verdicts.append(FlowVerdict.PERMIT)
        else:
            verdicts.append(FlowVerdict.FORBID)
    return verdicts


def parse_real_case_response(raw: str, record: RealCaseRecord) -> tuple[Case, AnnotationFlags]:
    """Build a real case from one extraction response.

    Features come from Q1, cited norms from Q2, per-norm relations from Q4,
    the statute-level relation from Q5, and the restored background from Q6.
    """
    sections = split_q_sections(raw)
    background = (sections.get(6) or "").strip()
    if not background:
        raise UnparseableResponse(
            f"extraction for {record.source_id} has no background"
        )

    features = features_from_section(sections.get(1))
    cited = tuple(scan_ids(sections.get(2, "")))
    statute_relation = parse_verdict(sections.get(5, ""))
    if statute_relation is None:
        applicability = None
    elif statute_relation is FlowVerdict.NOT_APPLICABLE:
        applicability = Applicability.NOT_APPLICABLE
    else:
        applicability = Applicability.APPLICABLE

    case = Case(
        background=background,
        features=features,
        cited_norm_ids=cited,
        appl_conclusion=applicability,
        comp_conclusion=statute_relation,
        seed_norm_id=None,
        provenance=Provenance.REAL,
        raw_response=raw,
    )

    per_norm = _per_norm_verdicts(sections.get(4, ""))
    uncertain = statute_relation is None
    if per_norm and statute_relation is not None:
        uncertain = uncertain or aggregate_verdicts(per_norm) is not statute_relation
    if statute_relation in (FlowVerdict.PERMIT, FlowVerdict.FORBID) and not cited:
        uncertain = True
    flags = AnnotationFlags(
        missing_flow=not features.complete(),
        court_analysis=bool(_COURT_ANALYSIS_RE.search(background)),
        conclusion_uncertain=uncertain,
    )
    return case, flags


def extract_real_case(
    record: RealCaseRecord, gateway: Gateway, *, max_tokens: int = 2048
) -> tuple[Case, AnnotationFlags]:
    response = gateway.complete(real_case_request(record, max_tokens=max_tokens))
    return parse_real_case_response(response.texts[0], record)


# --- dataset assembly -------------------------------------------------------


@dataclass
class AssembleConfig:
    oversample: bool = False
    negative_sampling: str = "relevance"  # or "random"
    random_seed: int = 0


@dataclass
class DatasetBundle:
    applicability_train: list[Case] = field(default_factory=list)
    applicability_test: list[Case] = field(default_factory=list)
    compliance_train: list[Case] = field(default_factory=list)
    compliance_test: list[Case] = field(default_factory=list)
    split_manifest: dict = field(default_factory=dict)

    def splits(self) -> dict[str, list[Case]]:
        return {
            "applicability_train": self.applicability_train,
            "applicability_test": self.applicability_test,
            "compliance_train": self.compliance_train,
            "compliance_test": self.compliance_test,
        }

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, cases in self.splits().items():
            with open(out / f"{name}.jsonl", "w", encoding="utf-8") as handle:
                for case in cases:
                    row = {"case_id": case.case_id}
                    row.update(case.to_json_obj())
                    handle.write(json.dumps(row, ensure_ascii=False) + "\n")
        with open(out / "split_manifest.json", "w", encoding="utf-8") as handle:
            json.dump(self.split_manifest, handle, indent=2, sort_keys=True)
            handle.write("\n")


def _label_counts(cases: list[Case], label_of) -> dict[str, int]:
    counts: dict[str, int] = {}
    for case in cases:
        key = f"{label_of(case)}/{case.provenance.value}"
        counts[key] = counts.get(key, 0) + 1
    return dict(sorted(counts.items()))


def assemble(
    synthetic: list[Case],
    real_applicable: list[Case],
    real_irrelevant: list[Case],
    config: AssembleConfig | None = None,
) -> DatasetBundle:
    """Balance the four splits.

    Applicability train pairs every synthetic case (Applicable) with one real
    irrelevant case (Not Applicable); applicability test pairs the held-out
    real applicable cases with fresh negatives.  Negatives are consumed in
    relevance order by default, or by seeded sampling.  Compliance train is
    the synthetic pool split by verdict; compliance test is the real
    applicable pool split by verdict.  Oversampling duplicates forbid train
    cases until they match the permit count, spreading duplicates evenly
    across norms.
    """
    config = config or AssembleConfig()
    rng = random.Random(config.random_seed)

    need_train = len(synthetic)
    need_test = len(real_applicable)
    if len(real_irrelevant) < need_train + need_test:
        raise InsufficientNegatives(
            f"need {need_train + need_test} negatives, have {len(real_irrelevant)}"
        )

    pool = list(real_irrelevant)
    if config.negative_sampling == "random":
        chosen = rng.sample(range(len(pool)), need_train + need_test)
        train_negatives = [pool[i] for i in chosen[:need_train]]
        test_negatives = [pool[i] for i in chosen[need_train:]]
    else:
        train_negatives = pool[:need_train]
        test_negatives = pool[need_train : need_train + need_test]

    bundle = DatasetBundle(
        applicability_train=list(synthetic) + train_negatives,
        applicability_test=list(real_applicable) + test_negatives,
        compliance_train=[
            c for c in synthetic if c.comp_conclusion is FlowVerdict.PERMIT
        ]
        + [c for c in synthetic if c.comp_conclusion is FlowVerdict.FORBID],
        compliance_test=[
            c for c in real_applicable if c.comp_conclusion is FlowVerdict.PERMIT
        ]
        + [c for c in real_applicable if c.comp_conclusion is FlowVerdict.FORBID],
    )

    if config.oversample:
        bundle.compliance_train = _oversample_forbid(bundle.compliance_train, rng)

    _check_split_hygiene(bundle)
    bundle.split_manifest = {
        "applicability_train": _label_counts(
            bundle.applicability_train, lambda c: c.appl_conclusion.value
        ),
        "applicability_test": _label_counts(
            bundle.applicability_test, lambda c: c.appl_conclusion.value
        ),
        "compliance_train": _label_counts(
            bundle.compliance_train, lambda c: c.comp_conclusion.value
        ),
        "compliance_test": _label_counts(
            bundle.compliance_test, lambda c: c.comp_conclusion.value
        ),
    }
    return bundle


def _oversample_forbid(train: list[Case], rng: random.Random) -> list[Case]:
    """Duplicate forbid cases until they match the permit count.

    Copies are spread evenly over the forbid norms: per-norm totals differ by
    at most one, with the norms receiving the extra copy drawn by the seeded
    generator.
    """
    permits = [c for c in train if c.comp_conclusion is FlowVerdict.PERMIT]
    forbids = [c for c in train if c.comp_conclusion is FlowVerdict.FORBID]
    if not forbids or len(forbids) >= len(permits):
        return train
    by_norm: dict[str, list[Case]] = {}
    for case in forbids:
        key = case.seed_norm_id.canonical() if case.seed_norm_id else case.case_id
        by_norm.setdefault(key, []).append(case)
    norm_keys = sorted(by_norm)
    target = len(permits)
    base, extra = divmod(target, len(norm_keys))
    lucky = set(rng.sample(norm_keys, extra))
    oversampled: list[Case] = []
    for key in norm_keys:
        copies = base + (1 if key in lucky else 0)
        source = by_norm[key]
        for i in range(copies):
            oversampled.append(source[i % len(source)])
    return permits + oversampled


def _check_split_hygiene(bundle: DatasetBundle) -> None:
    train_hashes = {
        c.background_hash()
        for c in bundle.applicability_train + bundle.compliance_train
    }
    for name in ("applicability_test", "compliance_test"):
        for case in bundle.splits()[name]:
            if case.background_hash() in train_hashes:
                raise SplitLeak(
                    f"test case {case.case_id} from {name} leaks into training"
                )
