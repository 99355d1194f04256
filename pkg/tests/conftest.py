import pytest

from ciforge import statute
from ciforge.statute import NormType


@pytest.fixture(scope="session")
def mini_document():
    return statute.load_document(statute.bundled_snapshot_path())


@pytest.fixture(scope="session")
def mini_graph(mini_document):
    return statute.parse_statute(mini_document)


@pytest.fixture
def mini_norms(mini_graph):
    # Fresh Norm objects per test; classification tests mutate them.
    return statute.extract_norms(mini_graph)


@pytest.fixture
def norm_by_id(mini_norms):
    return {n.leaf_id.canonical(): n for n in mini_norms}


@pytest.fixture
def permit_seed(norm_by_id):
    norm = norm_by_id["164.502(a)(1)(ii)"]
    norm.types = {NormType.PERMIT}
    norm.seed_polarity = NormType.PERMIT
    return norm


@pytest.fixture
def forbid_seed(norm_by_id):
    norm = norm_by_id["164.502(a)(5)(ii)(b)(1)"]
    norm.types = {NormType.FORBID}
    norm.seed_polarity = NormType.FORBID
    return norm
