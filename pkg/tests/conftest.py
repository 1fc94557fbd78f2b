import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"
CORPUS_C = FIXTURES / "corpus_c"
BENCHMARKS = FIXTURES / "benchmarks"


@pytest.fixture(scope="session")
def fixture_corpus_dir():
    return CORPUS_C


@pytest.fixture(scope="session")
def fixture_benchmarks_dir():
    return BENCHMARKS


@pytest.fixture(scope="session")
def pragma_fixture_lines():
    text = (FIXTURES / "pragmas.txt").read_text(encoding="utf-8")
    return [line for line in text.splitlines() if line.strip()]


@pytest.fixture(scope="session")
def built_corpus(tmp_path_factory, fixture_corpus_dir):
    """The fixture corpus built once per session: (samples, rejects, stats, out_dir)."""
    from ompadvisor.corpus import build_corpus

    out = tmp_path_factory.mktemp("corpus_build")
    samples, rejects, stats = build_corpus(fixture_corpus_dir, out, seed=0)
    return samples, rejects, stats, out
