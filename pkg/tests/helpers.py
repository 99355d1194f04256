"""Canned model responses, case factories, and replay-cassette builders.

The response builders produce the question-numbered layout the parsers
expect; cassette builders pair them with the exact requests the pipeline
will issue so replay runs are fully offline.
"""

from ciforge.cases import Applicability, Case, Provenance
from ciforge.flows import FlowFeatures, FlowVerdict
from ciforge.gateway import Cassette, ChatResponse, Gateway
from ciforge.ids import NormId
from ciforge.parsing import FEATURE_ATTRS, NAME_BY_ATTR

VITAL_VALUES = {
    "sender": "Dr. Reyes",
    "sender_role": "doctor",
    "recipient": "Dr. Chen",
    "recipient_role": "doctor",
    "subject": "Maria Lopez",
    "subject_role": "patient",
    "info_type": "blood test results",
}

PRINCIPLE_VALUES = {
    "purpose": "treatment planning",
    "in_reply_to": "a referral request",
    "consented_by": "Maria Lopez",
    "belief": None,
}


def feature_text(values, sep=", "):
    """Render attr->text values as a "Name: value" list in canonical order."""
    parts = []
    for attr in FEATURE_ATTRS:
        if attr in values and values[attr] is not None:
            parts.append(f"{NAME_BY_ATTR[attr]}: {values[attr]}")
    return sep.join(parts)


def full_features(**overrides):
    values = dict(VITAL_VALUES, purpose="treatment planning")
    values.update(overrides)
    consented = values.get("consented_by")
    if isinstance(consented, str):
        values["consented_by"] = (consented,)
    return FlowFeatures(**values)


def gen_response(
    background,
    *,
    features=None,
    cited="cites 164.502(a)(1)(ii) of the Privacy Rule",
    q4="Permit",
    q5="Permit",
):
    """One synthetic-case generation answer (Q1 background .. Q5 relation)."""
    values = dict(VITAL_VALUES, purpose="treatment planning") if features is None else features
    return (
        f"Q1: {background}\n"
        f"Q2: {feature_text(values)}\n"
        f"Q3: {cited}\n"
        f"Q4: {q4}\n"
        f"Q5: {q5}\n"
    )


def classify_response(q1, **answers):
    """One norm-classification answer; unsupplied payload answers say None."""
    lines = [f"Q1: {q1}"]
    for number in range(2, 9):
        lines.append(f"Q{number}: {answers.get(f'q{number}', 'None')}")
    return "\n".join(lines)


def real_response(
    background,
    *,
    features=None,
    q2="164.502(a)(1)(ii)",
    q3="Permit",
    q4="164.502(a)(1)(ii): Permit",
    q5="Permit",
):
    """One court-case extraction answer (Q1 features .. Q6 background)."""
    values = dict(VITAL_VALUES, purpose="treatment planning") if features is None else features
    return (
        f"Q1: {feature_text(values)}\n"
        f"Q2: {q2}\n"
        f"Q3: {q3}\n"
        f"Q4: {q4}\n"
        f"Q5: {q5}\n"
        f"Q6: {background}\n"
    )


def make_case(
    background,
    *,
    appl=Applicability.APPLICABLE,
    comp=FlowVerdict.PERMIT,
    seed=None,
    cited=(),
    provenance=Provenance.SYNTHETIC,
    features=None,
):
    return Case(
        background=background,
        features=full_features() if features is None else features,
        cited_norm_ids=tuple(NormId.parse(c) for c in cited),
        appl_conclusion=appl,
        comp_conclusion=comp,
        seed_norm_id=NormId.parse(seed) if seed else None,
        provenance=provenance,
    )


def cassette_for(pairs, path=None):
    """Record (request, texts) pairs; texts may be one string or a list."""
    cassette = Cassette(path)
    for request, texts in pairs:
        if isinstance(texts, str):
            texts = [texts]
        cassette.record(request, ChatResponse(texts=tuple(texts)))
    return cassette


def replay_gateway(cassette):
    return Gateway("replay", cassette=cassette)


def ok_body(texts, model="scripted"):
    return {
        "choices": [{"message": {"content": t}} for t in texts],
        "usage": {"prompt_tokens": 7, "completion_tokens": 11},
        "model": model,
    }


class ScriptedTransport:
    """Plays back queued (status, body) steps; exceptions in the queue raise."""

    def __init__(self, steps):
        self.steps = list(steps)
        self.calls = []

    def __call__(self, url, headers, payload):
        self.calls.append({"url": url, "headers": headers, "payload": payload})
        step = self.steps.pop(0)
        if isinstance(step, Exception):
            raise step
        return step


def live_gateway(transport, **kwargs):
    kwargs.setdefault("endpoint", "https://example.test/v1")
    kwargs.setdefault("api_key", "test-key")
    kwargs.setdefault("sleep", lambda delay: None)
    return Gateway("live", transport=transport, **kwargs)


# Part-164-sized classification fixture: 691 leaves whose Q1 answers
# produce a fixed type distribution (269 permits, 40 forbids,
# 555 requirements, 112 exceptions, 44 definitions).
TYPE_PLAN = (
    (269, "Permit and Requirement"),
    (40, "Forbid and Requirement"),
    (44, "Definition"),
    (20, "Exception and Requirement"),
    (92, "Exception"),
    (226, "Requirement"),
)


def part164_scale_norms():
    from ciforge.statute import Norm

    type_lines = []
    for count, line in TYPE_PLAN:
        type_lines.extend([line] * count)
    norms = []
    for i, line in enumerate(type_lines):
        norm_id = NormId(164, 500 + i // 10, (str(i % 10),))
        canonical = norm_id.canonical()
        norms.append(
            Norm(
                leaf_id=norm_id,
                path_ids=(canonical,),
                full_text=f"{canonical}: rule text number {i} for the fixture",
            )
        )
    return norms, type_lines


def classification_cassette(norms, type_lines, path=None):
    from ciforge.classify import classification_request

    pairs = []
    for norm, line in zip(norms, type_lines):
        text = classify_response(
            line,
            q2="The defined term",
            q4="The permitted disclosure",
            q5="The forbidden disclosure",
            q6="The exception",
            q7="The requirement",
        )
        pairs.append((classification_request(norm), text))
    return cassette_for(pairs, path)
