import pytest

from tsforge.demo import build_demo_corpus
from tsforge.manifest import Manifest, Utterance, read_manifest


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("demo_corpus")
    build_demo_corpus(str(d), seed=11)
    return d


@pytest.fixture(scope="session")
def demo_corpus(demo_dir) -> Manifest:
    return read_manifest(str(demo_dir / "corpus.jsonl"), Utterance)
