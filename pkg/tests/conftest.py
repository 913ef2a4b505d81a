import pytest

from helpers import load_fixture_corpus, make_bundle


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    corpus, _ = load_fixture_corpus(tmp_path_factory.mktemp("corpus"))
    return corpus


@pytest.fixture(scope="session")
def fixture_corpus_path(tmp_path_factory):
    _, path = load_fixture_corpus(tmp_path_factory.mktemp("corpus-file"))
    return path


@pytest.fixture(scope="session")
def fixture_bundle(fixture_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("bundle")
    manifest, reader = make_bundle(fixture_corpus, out, layers=(0, 1), dim=12)
    return manifest, reader, out
