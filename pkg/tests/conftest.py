from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from cmekselect.corpus import Document, LabeledCorpus, preprocess

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_DIR = Path(__file__).parent / "golden"


def make_corpus(name, labeled_texts, provenance="test"):
    """Corpus from (text, label) pairs; label may be None."""
    docs = [
        Document(tuple(preprocess(text)), label, i)
        for i, (text, label) in enumerate(labeled_texts)
    ]
    return LabeledCorpus(name, tuple(docs), provenance)


@pytest.fixture
def tiny_pair():
    a = make_corpus("a", [("good fun good", 1), ("bad sad bad", 0)])
    b = make_corpus("b", [("fine day fine", 1), ("poor gray poor", 0)])
    return a, b
