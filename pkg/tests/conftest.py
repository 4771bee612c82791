from __future__ import annotations

import pytest

from eventprompt.corpus import write_corpus
from eventprompt.pipeline import PipelineConfig
from eventprompt.schema import save_schema
from eventprompt.synthetic import build_synthetic_corpus, build_synthetic_schema


@pytest.fixture(scope="session")
def schema():
    return build_synthetic_schema()


@pytest.fixture(scope="session")
def corpus():
    return build_synthetic_corpus(n_docs=20, seed=7)


@pytest.fixture(scope="session")
def docs(corpus):
    return corpus[0]


@pytest.fixture(scope="session")
def mentions(corpus):
    return corpus[1]


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory, schema, corpus):
    """Schema and corpus written to disk once per session."""
    path = tmp_path_factory.mktemp("fixture")
    save_schema(schema, path / "schema.json")
    write_corpus(corpus[0], corpus[1], path / "corpus.jsonl")
    return path


def memorization_config(fixture_dir, docs, output_dir) -> PipelineConfig:
    ids = [d.doc_id for d in docs]
    return PipelineConfig(
        schema_path=str(fixture_dir / "schema.json"),
        corpus_path=str(fixture_dir / "corpus.jsonl"),
        output_dir=str(output_dir),
        splits={"train": ids, "test": ids},
    )


@pytest.fixture()
def memo_config(fixture_dir, docs, tmp_path):
    return memorization_config(fixture_dir, docs, tmp_path / "out")
