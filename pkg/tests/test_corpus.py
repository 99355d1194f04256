import json

import pytest

from ciforge.cases import Applicability, Provenance
from ciforge.corpus import (
    AssembleConfig,
    CaselawClient,
    DatasetBundle,
    FetchLimits,
    RealCaseRecord,
    assemble,
    extract_real_case,
    fetch_cases,
    length_filter,
    parse_real_case_response,
    real_case_request,
    save_snapshot,
)
from ciforge.errors import (
    InsufficientNegatives,
    NetworkError,
    SnapshotMissing,
    SplitLeak,
    UnparseableResponse,
)
from ciforge.flows import FlowVerdict
from helpers import (
    VITAL_VALUES,
    cassette_for,
    make_case,
    real_response,
    replay_gateway,
)

COURT_TEXT = (
    "The plaintiff alleged that her physician disclosed blood test results "
    "to an insurer without authorization. "
) * 10

BACKGROUND = (
    "A hospital employee noticed that patient records for Maria Lopez were "
    "shared with an outside marketing firm without her authorization or any "
    "treatment purpose."
)


def record(source_id="1001", keyword="hipaa", words=200):
    text = " ".join(f"w{i}" for i in range(words))
    return RealCaseRecord(
        source_id=source_id,
        court="Court of Appeals",
        decision_text=text,
        query_keyword=keyword,
    )


class TestFetch:
    def test_record_round_trip_and_word_count(self):
        rec = record(words=123)
        assert rec.word_count == 123
        assert RealCaseRecord.from_json_obj(rec.to_json_obj()) == rec

    def test_client_paginates_until_next_is_null(self):
        pages = {
            "https://api.test/v1/cases/": {
                "results": [{"id": 1}, {"id": 2}],
                "next": "https://api.test/v1/cases/?cursor=abc",
            },
            "https://api.test/v1/cases/?cursor=abc": {
                "results": [{"id": 3}],
                "next": None,
            },
        }
        calls = []

        def transport(url, params):
            calls.append((url, params))
            return pages[url]

        client = CaselawClient("https://api.test/v1", transport=transport)
        results = client.search("hipaa", FetchLimits())
        assert [r["id"] for r in results] == [1, 2, 3]
        # Query params ride only on the first request; "next" encodes the rest.
        assert calls[0][1] == {"search": "hipaa", "page_size": 100, "full_case": "true"}
        assert calls[1][1] is None

    def test_client_stops_at_max_results(self):
        def transport(url, params):
            return {
                "results": [{"id": i} for i in range(5)],
                "next": "https://api.test/v1/cases/?cursor=more",
            }

        client = CaselawClient("https://api.test/v1", transport=transport)
        results = client.search("hipaa", FetchLimits(max_results=4))
        assert len(results) == 5  # one page; truncation happens in fetch_cases

    def test_http_errors_wrapped(self, monkeypatch):
        import requests

        def boom(url, params=None, headers=None, timeout=None):
            raise requests.ConnectionError("refused")

        monkeypatch.setattr(requests, "get", boom)
        client = CaselawClient("https://api.test/v1", api_key="k")
        with pytest.raises(NetworkError):
            client.search("hipaa", FetchLimits())

    def test_fetch_cases_parses_api_shape(self):
        def transport(url, params):
            return {
                "results": [
                    {
                        "id": 77,
                        "court": {"name": "Supreme Court of Ohio"},
                        "casebody": {
                            "data": {
                                "opinions": [
                                    {"text": "First opinion."},
                                    {"text": "Concurrence."},
                                ]
                            }
                        },
                    }
                ],
                "next": None,
            }

        client = CaselawClient("https://api.test/v1", transport=transport)
        records = fetch_cases("hipaa", client=client)
        assert records[0].source_id == "77"
        assert records[0].court == "Supreme Court of Ohio"
        assert records[0].decision_text == "First opinion.\nConcurrence."
        assert records[0].query_keyword == "hipaa"

    def test_fetch_cases_dedupes_and_truncates(self):
        def transport(url, params):
            return {
                "results": [
                    {"id": 1, "casebody": {"data": {"opinions": [{"text": "a"}]}}},
                    {"id": 1, "casebody": {"data": {"opinions": [{"text": "b"}]}}},
                    {"id": 2, "casebody": {"data": {"opinions": [{"text": "c"}]}}},
                    {"id": 3, "casebody": {"data": {"opinions": [{"text": "d"}]}}},
                ],
                "next": None,
            }

        client = CaselawClient("https://api.test/v1", transport=transport)
        records = fetch_cases(
            "hipaa", client=client, limits=FetchLimits(max_results=2)
        )
        assert [r.source_id for r in records] == ["1", "2"]
        assert records[0].decision_text == "a"  # first occurrence wins

    def test_snapshot_round_trip_and_keyword_filter(self, tmp_path):
        path = tmp_path / "snapshot.jsonl"
        save_snapshot(
            [record("1", "hipaa"), record("2", "privacy"), record("3", "hipaa")],
            path,
        )
        assert [r.source_id for r in fetch_cases("hipaa", snapshot=path)] == ["1", "3"]
        # Empty keyword takes the whole snapshot.
        assert len(fetch_cases("", snapshot=path)) == 3

    def test_snapshot_missing(self, tmp_path):
        with pytest.raises(SnapshotMissing):
            fetch_cases("hipaa", snapshot=tmp_path / "absent.jsonl")

    def test_fetch_needs_a_source(self):
        with pytest.raises(NetworkError):
            fetch_cases("hipaa")


class TestLengthFilter:
    def test_bounds_are_inclusive(self):
        records = [record(str(n), words=n) for n in (99, 100, 5000, 30000, 30001)]
        kept = length_filter(records)
        assert [r.source_id for r in kept] == ["100", "5000", "30000"]

    def test_idempotent_and_order_preserving(self):
        records = [record("b", words=150), record("a", words=120)]
        kept = length_filter(records)
        assert kept == records
        assert length_filter(kept) == kept

    def test_custom_bounds(self):
        records = [record(str(n), words=n) for n in (10, 20, 30)]
        assert [r.source_id for r in length_filter(records, 15, 25)] == ["20"]


class TestExtraction:
    def test_request_shape(self):
        rec = record("55")
        request = real_case_request(rec, max_tokens=512)
        assert rec.decision_text in request.user_prompt
        assert request.temperature == 0.0
        assert request.max_tokens == 512
        assert request.tag == "real:55"

    def test_parse_clean_response(self):
        raw = real_response(BACKGROUND, q5="Forbid", q4="164.502(a): Forbid")
        case, flags = parse_real_case_response(raw, record())
        assert case.background == BACKGROUND
        assert case.provenance is Provenance.REAL
        assert case.seed_norm_id is None
        assert case.features.sender == "Dr. Reyes"
        assert [n.canonical() for n in case.cited_norm_ids] == ["164.502(a)(1)(ii)"]
        assert case.appl_conclusion is Applicability.APPLICABLE
        assert case.comp_conclusion is FlowVerdict.FORBID
        assert not flags.any()

    def test_not_applicable_case(self):
        raw = real_response(
            "A grocery chain mailed coupons to shoppers based on their "
            "purchase history from loyalty cards.",
            q2="None",
            q4="None",
            q5="Not Applicable",
        )
        case, flags = parse_real_case_response(raw, record())
        assert case.appl_conclusion is Applicability.NOT_APPLICABLE
        assert case.comp_conclusion is FlowVerdict.NOT_APPLICABLE
        assert case.cited_norm_ids == ()
        assert not flags.conclusion_uncertain

    def test_missing_background_rejected(self):
        with pytest.raises(UnparseableResponse):
            parse_real_case_response("Q1: Sender: A\nQ5: Permit", record())

    def test_missing_flow_flagged(self):
        gappy = dict(VITAL_VALUES)
        del gappy["subject"]
        raw = real_response(BACKGROUND, features=gappy)
        _, flags = parse_real_case_response(raw, record())
        assert flags.missing_flow
        assert flags.any()

    def test_court_analysis_flagged(self):
        leaky = BACKGROUND + " The court granted the motion to dismiss."
        _, flags = parse_real_case_response(real_response(leaky), record())
        assert flags.court_analysis

    def test_uncertain_when_no_statute_relation(self):
        raw = real_response(BACKGROUND, q5="unclear")
        case, flags = parse_real_case_response(raw, record())
        assert case.appl_conclusion is None
        assert flags.conclusion_uncertain

    def test_uncertain_when_aggregate_disagrees(self):
        raw = real_response(
            BACKGROUND,
            q4="164.502(a): Forbid; 164.506: Permit",
            q5="Permit",
        )
        _, flags = parse_real_case_response(raw, record())
        assert flags.conclusion_uncertain  # any Forbid must dominate

    def test_uncertain_when_verdict_lacks_citations(self):
        raw = real_response(BACKGROUND, q2="None", q4="None", q5="Permit")
        _, flags = parse_real_case_response(raw, record())
        assert flags.conclusion_uncertain

    def test_extract_real_case_through_gateway(self):
        rec = record("88")
        cassette = cassette_for(
            [(real_case_request(rec), real_response(BACKGROUND))]
        )
        case, flags = extract_real_case(rec, replay_gateway(cassette))
        assert case.background == BACKGROUND
        assert not flags.any()

    def test_flags_serialize(self):
        raw = real_response(BACKGROUND + " The judge disagreed.", q5="unclear")
        _, flags = parse_real_case_response(raw, record())
        assert flags.to_json_obj() == {
            "missing_flow": False,
            "court_analysis": True,
            "conclusion_uncertain": True,
        }


def synthetic_pool(n, polarity=FlowVerdict.PERMIT, start=0):
    return [
        make_case(
            f"Synthetic story number {i} about a disclosure at the clinic.",
            comp=polarity,
            seed=f"164.50{2 + (i % 2) * 2}(a)({i})",
        )
        for i in range(start, start + n)
    ]


def negative_pool(n, start=0):
    return [
        make_case(
            f"Irrelevant story number {i} about warehouse inventory counts.",
            appl=Applicability.NOT_APPLICABLE,
            comp=FlowVerdict.NOT_APPLICABLE,
            provenance=Provenance.REAL,
        )
        for i in range(start, start + n)
    ]


def real_pool(n, polarity=FlowVerdict.PERMIT, start=0):
    return [
        make_case(
            f"Real docket number {i} describing a contested disclosure.",
            comp=polarity,
            provenance=Provenance.REAL,
            cited=["164.502(a)"],
        )
        for i in range(start, start + n)
    ]


class TestAssemble:
    def test_balanced_splits(self):
        synthetic = synthetic_pool(4) + synthetic_pool(2, FlowVerdict.FORBID, 4)
        real_applicable = real_pool(2) + real_pool(1, FlowVerdict.FORBID, 2)
        negatives = negative_pool(12)
        bundle = assemble(synthetic, real_applicable, negatives)

        assert len(bundle.applicability_train) == 12  # 6 positive + 6 negative
        assert len(bundle.applicability_test) == 6  # 3 positive + 3 negative
        assert bundle.applicability_train[:6] == synthetic
        assert bundle.applicability_train[6:] == negatives[:6]
        assert bundle.applicability_test[3:] == negatives[6:9]

        assert [c.comp_conclusion for c in bundle.compliance_train] == (
            [FlowVerdict.PERMIT] * 4 + [FlowVerdict.FORBID] * 2
        )
        assert [c.comp_conclusion for c in bundle.compliance_test] == (
            [FlowVerdict.PERMIT] * 2 + [FlowVerdict.FORBID]
        )

    def test_split_manifest_counts(self):
        synthetic = synthetic_pool(3)
        bundle = assemble(synthetic, real_pool(1), negative_pool(4))
        assert bundle.split_manifest["applicability_train"] == {
            "Applicable/Synthetic": 3,
            "Not Applicable/Real": 3,
        }
        assert bundle.split_manifest["applicability_test"] == {
            "Applicable/Real": 1,
            "Not Applicable/Real": 1,
        }
        assert bundle.split_manifest["compliance_train"] == {"Permit/Synthetic": 3}
        assert bundle.split_manifest["compliance_test"] == {"Permit/Real": 1}

    def test_insufficient_negatives(self):
        with pytest.raises(InsufficientNegatives):
            assemble(synthetic_pool(3), real_pool(2), negative_pool(4))

    def test_random_negative_sampling_is_seeded(self):
        synthetic = synthetic_pool(3)
        real_applicable = real_pool(2)
        negatives = negative_pool(20)
        config = AssembleConfig(negative_sampling="random", random_seed=11)
        first = assemble(synthetic, real_applicable, negatives, config)
        second = assemble(synthetic, real_applicable, negatives, config)
        assert [c.case_id for c in first.applicability_train] == [
            c.case_id for c in second.applicability_train
        ]
        other_seed = assemble(
            synthetic,
            real_applicable,
            negatives,
            AssembleConfig(negative_sampling="random", random_seed=12),
        )
        assert [c.case_id for c in other_seed.applicability_train] != [
            c.case_id for c in first.applicability_train
        ]

    def test_random_sampling_never_shares_negatives_across_splits(self):
        config = AssembleConfig(negative_sampling="random", random_seed=3)
        bundle = assemble(synthetic_pool(5), real_pool(4), negative_pool(30), config)
        train_ids = {c.case_id for c in bundle.applicability_train}
        test_negatives = bundle.applicability_test[4:]
        assert all(c.case_id not in train_ids for c in test_negatives)

    def test_oversample_balances_forbid(self):
        permits = synthetic_pool(9)
        forbids = [
            make_case(
                f"Forbidden sale number {i} of records for remuneration.",
                comp=FlowVerdict.FORBID,
                seed=f"164.508(a)({i % 2})",  # two forbid norms
            )
            for i in range(2)
        ]
        bundle = assemble(
            permits + forbids,
            real_pool(1),
            negative_pool(12),
            AssembleConfig(oversample=True),
        )
        train = bundle.compliance_train
        permit_count = sum(
            1 for c in train if c.comp_conclusion is FlowVerdict.PERMIT
        )
        forbid_count = sum(
            1 for c in train if c.comp_conclusion is FlowVerdict.FORBID
        )
        assert permit_count == forbid_count == 9
        per_norm = {}
        for case in train:
            if case.comp_conclusion is FlowVerdict.FORBID:
                key = case.seed_norm_id.canonical()
                per_norm[key] = per_norm.get(key, 0) + 1
        assert max(per_norm.values()) - min(per_norm.values()) <= 1

    def test_oversample_noop_when_already_balanced(self):
        synthetic = synthetic_pool(2) + synthetic_pool(2, FlowVerdict.FORBID, 2)
        bundle = assemble(
            synthetic, real_pool(1), negative_pool(6), AssembleConfig(oversample=True)
        )
        assert len(bundle.compliance_train) == 4

    def test_split_leak_detected(self):
        shared = make_case(
            "The same story appears on both sides of the split somehow.",
            provenance=Provenance.REAL,
            cited=["164.502(a)"],
        )
        with pytest.raises(SplitLeak):
            assemble(
                [shared] + synthetic_pool(2),
                [shared],
                negative_pool(8),
            )

    def test_save_writes_four_splits_and_manifest(self, tmp_path):
        bundle = assemble(synthetic_pool(2), real_pool(1), negative_pool(4))
        bundle.save(tmp_path)
        names = {p.name for p in tmp_path.iterdir()}
        assert names == {
            "applicability_train.jsonl",
            "applicability_test.jsonl",
            "compliance_train.jsonl",
            "compliance_test.jsonl",
            "split_manifest.json",
        }
        rows = [
            json.loads(line)
            for line in (tmp_path / "applicability_train.jsonl").read_text().splitlines()
        ]
        assert len(rows) == 4
        assert all(row["case_id"].startswith("c") for row in rows)
        manifest = json.loads((tmp_path / "split_manifest.json").read_text())
        assert manifest == bundle.split_manifest
