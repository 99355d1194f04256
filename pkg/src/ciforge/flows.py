"""Information flows, norm predicates, and flow legality checking.

A flow names who sent what about whom (seven vital fields) plus optional
transmission principles (purpose, in reply to, consented by, belief).  A norm
predicate encodes one permit or forbid rule as role sets, information types,
and principle constraints.  A predicate that matches returns its own effect;
one that does not match returns Not Applicable, never the opposite effect.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields
from enum import Enum
from importlib import resources
from pathlib import Path

from ciforge import rouge
from ciforge.errors import CiForgeError
from ciforge.ids import NormId


class FlowVerdict(str, Enum):
    PERMIT = "Permit"
    FORBID = "Forbid"
    NOT_APPLICABLE = "Not Applicable"


@dataclass(frozen=True)
class TransmissionPrinciples:
    """Optional flow context; None means the principle was not stated."""

    purpose: str | None = None
    in_reply_to: str | None = None
    consented_by: tuple[str, ...] | None = None
    belief: str | None = None


@dataclass(frozen=True)
class FlowFeatures:
    """Possibly incomplete feature record as parsed from a model response.

    All eleven fields are optional here; InformationFlow is the validated
    form used for legality checks.
    """

    sender: str | None = None
    sender_role: str | None = None
    recipient: str | None = None
    recipient_role: str | None = None
    subject: str | None = None
    subject_role: str | None = None
    info_type: str | None = None
    purpose: str | None = None
    in_reply_to: str | None = None
    consented_by: tuple[str, ...] | None = None
    belief: str | None = None

    VITAL = (
        "sender",
        "sender_role",
        "recipient",
        "recipient_role",
        "subject",
        "subject_role",
        "info_type",
    )

    def missing_vital(self) -> list[str]:
        missing = []
        for name in self.VITAL:
            value = getattr(self, name)
            if value is None or not str(value).strip():
                missing.append(name)
            elif re.match(r"none\b", str(value).strip(), re.IGNORECASE):
                missing.append(name)
        return missing

    def complete(self) -> bool:
        return not self.missing_vital()

    def to_flow(self) -> InformationFlow:
        if not self.complete():
            raise CiForgeError(f"vital fields missing: {self.missing_vital()}")
        return InformationFlow(
            sender=self.sender,
            sender_role=self.sender_role,
            recipient=self.recipient,
            recipient_role=self.recipient_role,
            subject=self.subject,
            subject_role=self.subject_role,
            info_type=self.info_type,
            principles=TransmissionPrinciples(
                purpose=self.purpose,
                in_reply_to=self.in_reply_to,
                consented_by=self.consented_by,
                belief=self.belief,
            ),
        )


@dataclass(frozen=True)
class InformationFlow:
    sender: str
    sender_role: str
    recipient: str
    recipient_role: str
    subject: str
    subject_role: str
    info_type: str
    principles: TransmissionPrinciples = field(default_factory=TransmissionPrinciples)

    def __post_init__(self):
        for f in fields(self):
            if f.name == "principles":
                continue
            value = getattr(self, f.name)
            if not value or not value.strip():
                raise CiForgeError(f"flow field {f.name} must be non-empty")
            if value.strip().lower() == "none":
                raise CiForgeError(f"flow field {f.name} holds the None sentinel")


@dataclass(frozen=True)
class PrincipleConstraint:
    """One requirement on a transmission principle.

    kind "present" checks the principle was stated at all; "exact" compares
    normalized text; "contains" is a normalized substring test.
    """

    principle: str
    kind: str
    value: str | None = None

    KINDS = ("exact", "contains", "present")
    PRINCIPLES = ("purpose", "in_reply_to", "consented_by", "belief")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise CiForgeError(f"unknown constraint kind {self.kind!r}")
        if self.principle not in self.PRINCIPLES:
            raise CiForgeError(f"unknown principle {self.principle!r}")
        if self.kind != "present" and not self.value:
            raise CiForgeError(f"constraint kind {self.kind!r} needs a value")


WILDCARD = "*"


@dataclass(frozen=True)
class NormPredicate:
    norm_id: NormId
    effect: FlowVerdict
    sender_roles: frozenset[str]
    recipient_roles: frozenset[str]
    subject_roles: frozenset[str]
    info_types: frozenset[str]
    principle_constraints: tuple[PrincipleConstraint, ...] = ()

    def __post_init__(self):
        if self.effect not in (FlowVerdict.PERMIT, FlowVerdict.FORBID):
            raise CiForgeError("predicate effect must be Permit or Forbid")
        for name in ("sender_roles", "recipient_roles", "subject_roles", "info_types"):
            if not getattr(self, name):
                raise CiForgeError(f"{name} must be non-empty or the wildcard")

    @classmethod
    def from_json_obj(cls, obj: dict) -> NormPredicate:
        return cls(
            norm_id=NormId.parse(obj["norm_id"]),
            effect=FlowVerdict(obj["effect"]),
            sender_roles=frozenset(obj["sender_roles"]),
            recipient_roles=frozenset(obj["recipient_roles"]),
            subject_roles=frozenset(obj["subject_roles"]),
            info_types=frozenset(obj["info_types"]),
            principle_constraints=tuple(
                PrincipleConstraint(
                    principle=c["principle"],
                    kind=c["kind"],
                    value=c.get("value"),
                )
                for c in obj.get("principle_constraints", [])
            ),
        )


_ARTICLES = {"a", "an", "the"}


class RoleLexicon:
    """Alias table mapping role synonyms onto canonical role names."""

    def __init__(self, aliases: dict[str, str] | None = None):
        self.aliases = {
            _basic_normalize(k): _basic_normalize(v)
            for k, v in (aliases or {}).items()
        }
        for source, target in self.aliases.items():
            # Alias targets must be fixed points, otherwise normalize() would
            # not be idempotent.
            if self.aliases.get(target, target) != target:
                raise CiForgeError(f"alias chain {source!r} -> {target!r} -> ...")

    def normalize(self, raw: str) -> str:
        base = _basic_normalize(raw)
        return self.aliases.get(base, base)

    @classmethod
    def from_json_obj(cls, obj: dict) -> RoleLexicon:
        return cls(obj.get("aliases", {}))


def _basic_normalize(raw: str) -> str:
    words = raw.strip().lower().split()
    kept = [w for w in words if w not in _ARTICLES]
    return " ".join(kept)


def normalize_role(raw: str, lexicon: RoleLexicon | None = None) -> str:
    """Lowercase, trim, drop articles, then apply the alias table."""
    return (lexicon or RoleLexicon()).normalize(raw)


def _in_role(raw_role: str, role_set: frozenset[str], lexicon: RoleLexicon) -> bool:
    if WILDCARD in role_set:
        return True
    normalized = lexicon.normalize(raw_role)
    return any(lexicon.normalize(entry) == normalized for entry in role_set)


def _info_type_matches(flow_type: str, info_types: frozenset[str], mode: str) -> bool:
    if WILDCARD in info_types:
        return True
    if mode == "exact":
        flow_norm = " ".join(rouge.tokenize(flow_type))
        return any(" ".join(rouge.tokenize(t)) == flow_norm for t in info_types)
    flow_tokens = set(rouge.tokenize(flow_type))
    if not flow_tokens:
        return False
    for entry in info_types:
        entry_tokens = set(rouge.tokenize(entry))
        if not entry_tokens:
            continue
        if entry_tokens <= flow_tokens or flow_tokens <= entry_tokens:
            return True
    return False


def _principle_value(principles: TransmissionPrinciples, name: str) -> str | None:
    value = getattr(principles, name)
    if name == "consented_by" and value is not None:
        return ", ".join(value)
    return value


def _constraint_holds(
    constraint: PrincipleConstraint, principles: TransmissionPrinciples
) -> bool:
    value = _principle_value(principles, constraint.principle)
    if constraint.kind == "present":
        return value is not None
    if value is None:
        return False
    value_norm = " ".join(rouge.tokenize(value))
    target_norm = " ".join(rouge.tokenize(constraint.value))
    if constraint.kind == "exact":
        return value_norm == target_norm
    return target_norm in value_norm


def check_flow(
    flow: InformationFlow,
    predicate: NormPredicate,
    lexicon: RoleLexicon | None = None,
    *,
    info_type_match: str = "subset",
) -> FlowVerdict:
    """Match a flow against one predicate.

    All of the role checks, the information-type check, and every principle
    constraint must hold for the predicate's effect to fire; any miss yields
    Not Applicable.  ``info_type_match`` is "subset" (token containment in
    either direction) or "exact".
    """
    lexicon = lexicon or RoleLexicon()
    if not _in_role(flow.sender_role, predicate.sender_roles, lexicon):
        return FlowVerdict.NOT_APPLICABLE
    if not _in_role(flow.recipient_role, predicate.recipient_roles, lexicon):
        return FlowVerdict.NOT_APPLICABLE
    if not _in_role(flow.subject_role, predicate.subject_roles, lexicon):
        return FlowVerdict.NOT_APPLICABLE
    if not _info_type_matches(flow.info_type, predicate.info_types, info_type_match):
        return FlowVerdict.NOT_APPLICABLE
    for constraint in predicate.principle_constraints:
        if not _constraint_holds(constraint, flow.principles):
            return FlowVerdict.NOT_APPLICABLE
    return predicate.effect


def aggregate_verdicts(verdicts: list[FlowVerdict]) -> FlowVerdict:
    """Combine per-norm verdicts: any Forbid wins, then any Permit."""
    if FlowVerdict.FORBID in verdicts:
        return FlowVerdict.FORBID
    if FlowVerdict.PERMIT in verdicts:
        return FlowVerdict.PERMIT
    return FlowVerdict.NOT_APPLICABLE


def _fixture_text(name: str) -> str:
    return resources.files("ciforge.fixtures").joinpath(name).read_text("utf-8")


def load_role_lexicon(path: str | Path | None = None) -> RoleLexicon:
    """Bundled lexicon by default, or one from an explicit JSON path."""
    if path is None:
        obj = json.loads(_fixture_text("role_lexicon.json"))
    else:
        obj = json.loads(Path(path).read_text("utf-8"))
    return RoleLexicon.from_json_obj(obj)


def load_norm_predicates(path: str | Path | None = None) -> dict[str, NormPredicate]:
    """Predicates keyed by canonical norm id."""
    if path is None:
        obj = json.loads(_fixture_text("norm_predicates.json"))
    else:
        obj = json.loads(Path(path).read_text("utf-8"))
    predicates = {}
    for entry in obj["predicates"]:
        predicate = NormPredicate.from_json_obj(entry)
        predicates[predicate.norm_id.canonical()] = predicate
    return predicates
