"""Regenerate the replay cassettes packaged under ciforge/fixtures.

Run from the repository root after changing prompts or the statute
snapshot; the recorded fingerprints must match the requests the pipeline
issues or replay runs will miss.

The classification cassette types every norm in the bundled snapshot
(the two worked-example sections get their polarities, everything else is
a Requirement).  The generation cassette records ten candidates per seed
norm: four clean, two missing a vital feature, two citing the wrong norm,
and two concluding against the seed polarity, so each synthesis filter has
candidates to reject and each --no-* flag has candidates to re-admit.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from ciforge import classify, statute, synthesis  # noqa: E402
from ciforge.gateway import Cassette, ChatResponse  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "ciforge" / "fixtures"

PERMIT_SEED = "164.502(a)(1)(ii)"
FORBID_SEED = "164.502(a)(5)(ii)(b)(1)"

FEATURES = (
    ("Sender", "Dr. Reyes"),
    ("Sender Role", "doctor"),
    ("Recipient", "Dr. Chen"),
    ("Recipient Role", "doctor"),
    ("Subject", "Maria Lopez"),
    ("Subject Role", "patient"),
    ("Type", "blood test results"),
    ("Purpose", "treatment planning"),
)

PERMIT_STORIES = [
    "Dr. Reyes faxed Maria Lopez's blood test results to Dr. Chen so the two"
    " doctors could plan her treatment together.",
    "Before the consult, Dr. Reyes forwarded the latest lab panel for Maria"
    " Lopez to Dr. Chen, who is taking over her care.",
    "Dr. Chen requested Maria Lopez's bloodwork from Dr. Reyes to rule out"
    " anemia ahead of her procedure.",
    "After reviewing the draw, Dr. Reyes shared Maria Lopez's blood test"
    " results with Dr. Chen to coordinate the dosage schedule.",
    "Dr. Reyes summarized Maria Lopez's blood test results for Dr. Chen"
    " during the weekly treatment huddle.",
    "On Tuesday Dr. Reyes emailed Dr. Chen the full blood workup for Maria"
    " Lopez ahead of the oncology review.",
    "Dr. Reyes walked Dr. Chen through Maria Lopez's blood test results to"
    " settle on an infusion plan.",
    "To speed up the referral, Dr. Reyes attached Maria Lopez's blood test"
    " results for Dr. Chen's intake review.",
    "Dr. Reyes called Dr. Chen and read out Maria Lopez's blood counts so"
    " the transfusion could be scheduled.",
    "During rounds, Dr. Reyes handed Dr. Chen the printed blood test results"
    " for Maria Lopez to confirm the taper.",
]

FORBID_STORIES = [
    "A clinic billing manager sold Maria Lopez's blood test results to a"
    " supplement marketing firm for a commission.",
    "The practice administrator exchanged Maria Lopez's lab records for a"
    " payment from a data broker.",
    "A front-desk coordinator accepted gift cards from an advertiser in"
    " return for Maria Lopez's blood test results.",
    "The clinic's office lead invoiced a wellness startup for a copy of"
    " Maria Lopez's blood panel.",
    "A records clerk quietly sold Maria Lopez's blood test results to an"
    " insurance lead-generation vendor.",
    "The billing office traded Maria Lopez's blood test results to a"
    " pharmaceutical rep for referral fees.",
    "An office manager licensed Maria Lopez's lab results to an analytics"
    " reseller in exchange for a cut of sales.",
    "The practice sold a spreadsheet of Maria Lopez's blood counts to a"
    " direct-mail marketer.",
    "A scheduler passed Maria Lopez's blood test results to a nutrition"
    " chain that paid per record.",
    "The clinic bartered Maria Lopez's blood test results to a lab-supply"
    " vendor for discounted equipment.",
]


def feature_line(drop=None):
    return ", ".join(f"{k}: {v}" for k, v in FEATURES if k != drop)


def candidate(background, *, cite, conclusion, drop=None):
    return (
        f"Q1: {background}\n"
        f"Q2: {feature_line(drop)}\n"
        f"Q3: cites {cite} of the HIPAA Privacy Rule\n"
        f"Q4: {conclusion}\n"
        f"Q5: {conclusion}\n"
    )


def candidates_for(stories, seed_id, polarity):
    against = "Forbid" if polarity == "Permit" else "Permit"
    texts = [
        candidate(stories[i], cite=seed_id, conclusion=polarity) for i in range(4)
    ]
    texts.append(candidate(stories[4], cite=seed_id, conclusion=polarity, drop="Subject Role"))
    texts.append(candidate(stories[5], cite=seed_id, conclusion=polarity, drop="Recipient"))
    texts.append(candidate(stories[6], cite="164.506", conclusion=polarity))
    texts.append(candidate(stories[7], cite="164.502(a)", conclusion=polarity))
    texts.append(candidate(stories[8], cite=seed_id, conclusion=against))
    texts.append(candidate(stories[9], cite=seed_id, conclusion=against))
    return texts


def classification_line(norm):
    canonical = norm.leaf_id.canonical()
    if canonical == PERMIT_SEED:
        return "Permit"
    if canonical == FORBID_SEED:
        return "Forbid"
    return "Requirement"


def main():
    graph = statute.parse_statute(statute.load_document(statute.bundled_snapshot_path()))
    norms = statute.extract_norms(graph)

    classification_path = FIXTURES / "classification_cassette.jsonl"
    classification_path.unlink(missing_ok=True)
    cassette = Cassette(classification_path)
    for norm in norms:
        line = classification_line(norm)
        text = "\n".join(
            [
                f"Q1: {line}",
                "Q2: None",
                "Q3: None",
                f"Q4: {'The permitted disclosure' if line == 'Permit' else 'None'}",
                f"Q5: {'The forbidden disclosure' if line == 'Forbid' else 'None'}",
                "Q6: None",
                f"Q7: {'The requirement' if line == 'Requirement' else 'None'}",
                "Q8: None",
            ]
        )
        cassette.record(classify.classification_request(norm), ChatResponse(texts=(text,)))
    print(f"{classification_path.name}: {len(norms)} entries")

    for norm in norms:
        norm.types = set()
    classified = {
        PERMIT_SEED: "Permit",
        FORBID_SEED: "Forbid",
    }
    for norm in norms:
        canonical = norm.leaf_id.canonical()
        if canonical in classified:
            norm.types = {statute.NormType(classified[canonical])}
    seeds = classify.seed_norms(norms)
    config = synthesis.SynthesisConfig(
        samples_per_norm=synthesis.BUNDLED_SAMPLES_PER_NORM
    )
    generation_path = FIXTURES / "generation_cassette.jsonl"
    generation_path.unlink(missing_ok=True)
    cassette = Cassette(generation_path)
    for seed in seeds:
        stories = PERMIT_STORIES if seed.leaf_id.canonical() == PERMIT_SEED else FORBID_STORIES
        texts = candidates_for(
            stories, seed.leaf_id.canonical(), seed.seed_polarity.value
        )
        cassette.record(
            synthesis.generation_request(seed, config), ChatResponse(texts=tuple(texts))
        )
    print(f"{generation_path.name}: {len(seeds)} entries")


if __name__ == "__main__":
    main()
