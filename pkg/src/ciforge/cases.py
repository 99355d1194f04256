"""Cases: generated or court-sourced stories with annotated flows.

A case couples a background story with the eleven flow features, the norm
ids it implicates, and two conclusions: whether the statute applies at all
and whether the flow is permitted or forbidden.  Parsing is tolerant (absent
answers stay absent); the filters downstream decide what survives.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from ciforge import prompts
from ciforge.errors import UnparseableResponse
from ciforge.flows import FlowFeatures, FlowVerdict
from ciforge.ids import NormId, scan_ids
from ciforge.parsing import first_label, parse_feature_list, split_q_sections
from ciforge.statute import Norm, NormType


class Provenance(str, Enum):
    SYNTHETIC = "Synthetic"
    REAL = "Real"


class Applicability(str, Enum):
    APPLICABLE = "Applicable"
    NOT_APPLICABLE = "Not Applicable"


VERDICT_LABELS = {
    r"\bnot\s+applicable\b": FlowVerdict.NOT_APPLICABLE.value,
    r"\bpermit": FlowVerdict.PERMIT.value,
    r"\bforbid": FlowVerdict.FORBID.value,
}


def parse_verdict(text: str) -> FlowVerdict | None:
    label = first_label(text, VERDICT_LABELS)
    return FlowVerdict(label) if label is not None else None


@dataclass
class Case:
    background: str
    features: FlowFeatures = field(default_factory=FlowFeatures)
    cited_norm_ids: tuple[NormId, ...] = ()
    appl_conclusion: Applicability | None = None
    comp_conclusion: FlowVerdict | None = None
    seed_norm_id: NormId | None = None
    provenance: Provenance = Provenance.SYNTHETIC
    raw_response: str = ""

    def __post_init__(self):
        if not self.background.split():
            raise UnparseableResponse("case background is empty")

    @property
    def case_id(self) -> str:
        digest = hashlib.sha256(self.background.encode("utf-8")).hexdigest()
        return f"c{digest[:12]}"

    def background_hash(self) -> str:
        return hashlib.sha256(self.background.encode("utf-8")).hexdigest()

    def to_json_obj(self) -> dict:
        f = self.features
        return {
            "background": self.background,
            "sender": f.sender,
            "sender_role": f.sender_role,
            "recipient": f.recipient,
            "recipient_role": f.recipient_role,
            "subject": f.subject,
            "subject_role": f.subject_role,
            "type": f.info_type,
            "purpose": f.purpose,
            "in_reply_to": f.in_reply_to,
            "consented_by": list(f.consented_by) if f.consented_by else None,
            "belief": f.belief,
            "cited_norm_ids": [n.canonical() for n in self.cited_norm_ids],
            "applicability": (
                self.appl_conclusion.value if self.appl_conclusion else None
            ),
            "compliance": (
                self.comp_conclusion.value if self.comp_conclusion else None
            ),
            "seed_norm_id": (
                self.seed_norm_id.canonical() if self.seed_norm_id else None
            ),
            "provenance": self.provenance.value,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> Case:
        consented = obj.get("consented_by")
        return cls(
            background=obj["background"],
            features=FlowFeatures(
                sender=obj.get("sender"),
                sender_role=obj.get("sender_role"),
                recipient=obj.get("recipient"),
                recipient_role=obj.get("recipient_role"),
                subject=obj.get("subject"),
                subject_role=obj.get("subject_role"),
                info_type=obj.get("type"),
                purpose=obj.get("purpose"),
                in_reply_to=obj.get("in_reply_to"),
                consented_by=tuple(consented) if consented else None,
                belief=obj.get("belief"),
            ),
            cited_norm_ids=tuple(
                NormId.parse(n) for n in obj.get("cited_norm_ids", [])
            ),
            appl_conclusion=(
                Applicability(obj["applicability"])
                if obj.get("applicability")
                else None
            ),
            comp_conclusion=(
                FlowVerdict(obj["compliance"]) if obj.get("compliance") else None
            ),
            seed_norm_id=(
                NormId.parse(obj["seed_norm_id"]) if obj.get("seed_norm_id") else None
            ),
            provenance=Provenance(obj.get("provenance", "Synthetic")),
        )


@dataclass
class CaseSet:
    """Selected cases plus the seed-to-case index.

    After diversity selection the index maps each filled seed norm to exactly
    one position in ``cases``.
    """

    cases: list[Case] = field(default_factory=list)
    per_norm_index: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cases)

    def case_for(self, norm_id: NormId) -> Case | None:
        index = self.per_norm_index.get(norm_id.canonical())
        return self.cases[index] if index is not None else None

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as handle:
            for case in self.cases:
                handle.write(
                    json.dumps(case.to_json_obj(), ensure_ascii=False) + "\n"
                )

    @classmethod
    def from_cases(cls, cases: list[Case]) -> CaseSet:
        case_set = cls(cases=list(cases))
        for position, case in enumerate(case_set.cases):
            if case.seed_norm_id is not None:
                case_set.per_norm_index.setdefault(
                    case.seed_norm_id.canonical(), position
                )
        return case_set


def save_cases(cases: list[Case], path: str | Path) -> None:
    CaseSet(cases=list(cases)).save(path)


def load_cases(path: str | Path) -> list[Case]:
    cases = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                cases.append(Case.from_json_obj(json.loads(line)))
    return cases


def build_generation_prompt(seed: Norm) -> str:
    """Fill the case-generation template for one seed norm."""
    if seed.seed_polarity is None:
        raise ValueError(f"norm {seed.leaf_id.canonical()} has no seed polarity")
    return (
        prompts.CASE_GENERATION_PROMPT.replace("{text}", seed.full_text)
        .replace("{id}", seed.leaf_id.canonical())
        .replace("{type}", seed.seed_polarity.value)
    )


def features_from_section(section: str | None) -> FlowFeatures:
    """Parse a "Name: value" feature run into a FlowFeatures record."""
    if not section:
        return FlowFeatures()
    values = parse_feature_list(section)
    if "consented_by" in values:
        names = [
            name.strip()
            for name in re.split(r"[;,]", values["consented_by"])
            if name.strip()
        ]
        values["consented_by"] = tuple(names) or None
    return FlowFeatures(**values)


def parse_case_response(raw: str, seed: Norm) -> Case:
    """Build a synthetic case from one generation response.

    Background comes from Q1, features from Q2, cited ids from Q3, the
    seed-relation verdict from Q4, and the statute-level relation from Q5
    (permit or forbid there means the statute applies).  A response without
    a background is unusable.
    """
    sections = split_q_sections(raw)
    background = (sections.get(1) or "").strip()
    if not background:
        raise UnparseableResponse("response has no background section")

    features = features_from_section(sections.get(2))
    cited = tuple(scan_ids(sections.get(3, "")))
    comp = parse_verdict(sections.get(4, ""))
    statute_relation = parse_verdict(sections.get(5, ""))
    if statute_relation is None:
        applicability = None
    elif statute_relation is FlowVerdict.NOT_APPLICABLE:
        applicability = Applicability.NOT_APPLICABLE
    else:
        applicability = Applicability.APPLICABLE

    return Case(
        background=background,
        features=features,
        cited_norm_ids=cited,
        appl_conclusion=applicability,
        comp_conclusion=comp,
        seed_norm_id=seed.leaf_id,
        provenance=Provenance.SYNTHETIC,
        raw_response=raw,
    )


def feature_filter(case: Case) -> bool:
    """Keep cases whose seven vital features are all present."""
    return case.features.complete()


def norm_filter(case: Case, seed: Norm) -> bool:
    """Keep cases that cite the exact seed leaf id (no ancestor credit)."""
    return seed.leaf_id in case.cited_norm_ids


def conclusion_filter(case: Case, seed: Norm) -> bool:
    """Keep cases the statute covers and whose verdict matches the seed."""
    if case.appl_conclusion is not Applicability.APPLICABLE:
        return False
    expected = (
        FlowVerdict.PERMIT
        if seed.seed_polarity is NormType.PERMIT
        else FlowVerdict.FORBID
    )
    return case.comp_conclusion is expected


def consistency_filter(case: Case, seed: Norm) -> bool:
    return norm_filter(case, seed) and conclusion_filter(case, seed)
