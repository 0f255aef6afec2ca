import json
import warnings

import pytest

from persum.corpus import featurize, load_corpus
from persum.errors import DegenerateFeatureWarning


@pytest.fixture(autouse=True)
def _quiet_degenerate_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateFeatureWarning)
        yield


NEWS_DOCS = [
    ("parks", "The council approved new funding for city parks. Parks will gain "
              "trees and a playground this year. Residents praised the parks plan "
              "at the meeting. However the parks budget remains tight."),
    ("harbor", "A storm damaged the harbor cranes early this week. Repair crews "
               "assessed the harbor damage closely. Also the harbor will close "
               "for cargo ships until repairs finish."),
    ("schools", "Local schools reported record exam results this spring. Teachers "
                "credited new lesson plans for the exam results. The school board "
                "will expand the lesson program next year."),
]


def write_news_corpus(tmp_path, refs=True):
    path = tmp_path / "corpus.jsonl"
    lines = [json.dumps({"doc_id": d, "text": t}) for d, t in NEWS_DOCS]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if refs:
        refdir = tmp_path / "refs"
        refdir.mkdir()
        (refdir / "0.1.txt").write_text(
            "The council approved new funding for city parks. "
            "A storm damaged the harbor cranes early this week.\n",
            encoding="utf-8")
    return path


@pytest.fixture
def news_corpus(tmp_path):
    corp = load_corpus(write_news_corpus(tmp_path))
    featurize(corp)
    return corp


@pytest.fixture
def news_corpus_noref(tmp_path):
    corp = load_corpus(write_news_corpus(tmp_path, refs=False))
    featurize(corp)
    return corp
