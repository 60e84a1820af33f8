import json

import numpy as np
import pytest

from transit_agent.errors import DuplicateId, EmptyStore, InvalidExemplar
from transit_agent.exemplars import (
    ExemplarStore,
    build_index,
    load_exemplars,
    load_index,
    save_index,
)
from transit_agent.providers import ScriptedProvider, hashed_embedding


@pytest.fixture
def provider():
    return ScriptedProvider([])


def write_exemplars(tmp_path, records):
    path = tmp_path / "exemplars.json"
    path.write_text(json.dumps(records), encoding="utf-8")
    return path


def test_fixture_exemplars_load(fixtures_dir, catalog):
    pairs = load_exemplars(fixtures_dir / "exemplars.json", catalog)
    assert len(pairs) == 6
    assert {p.id for p in pairs} >= {"ex-count-agency", "ex-map-route"}
    # one exemplar per evaluation template family
    tags = set().union(*(p.tags for p in pairs))
    assert {"T1", "T2", "T3"} <= tags


def test_every_fixture_exemplar_executes(exemplar_store, transit_db):
    for pair in exemplar_store.pairs:
        columns, _rows = transit_db.execute_query(pair.sql)
        assert columns  # executed and produced a result shape


def test_non_select_exemplar_rejected(tmp_path):
    path = write_exemplars(
        tmp_path, [{"id": "bad", "question": "q", "sql": "DROP TABLE x"}]
    )
    with pytest.raises(InvalidExemplar):
        load_exemplars(path)


def test_unresolvable_exemplar_rejected_with_catalog(tmp_path, catalog):
    path = write_exemplars(
        tmp_path, [{"id": "bad", "question": "q", "sql": "select nope from routes"}]
    )
    with pytest.raises(InvalidExemplar):
        load_exemplars(path, catalog)


def test_duplicate_id_rejected(tmp_path):
    path = write_exemplars(
        tmp_path,
        [
            {"id": "dup", "question": "q1", "sql": "select 1"},
            {"id": "dup", "question": "q2", "sql": "select 2"},
        ],
    )
    with pytest.raises(DuplicateId):
        load_exemplars(path)


class TestTopK:
    def test_identical_question_ranked_first(self, exemplar_store, provider):
        results = exemplar_store.top_k("Which municipalities are served by route 18?", 3, provider)
        assert results[0].id == "ex-municipalities-route"

    def test_k_larger_than_store(self, exemplar_store, provider):
        results = exemplar_store.top_k("anything at all", 10, provider)
        assert len(results) == len(exemplar_store.pairs)

    def test_empty_store(self, provider):
        with pytest.raises(EmptyStore):
            ExemplarStore([]).top_k("q", 3, provider)

    def test_top3_matches_exhaustive_similarity_sort(self, exemplar_store, provider):
        # oracle: compute every similarity directly and sort by hand
        question = "How many routes serve the stop Piazza Maggiore?"
        query = hashed_embedding(question, provider.embedding_dim, provider.embedding_seed)
        scored = []
        for pair in exemplar_store.pairs:
            vector = hashed_embedding(
                pair.question, provider.embedding_dim, provider.embedding_seed
            )
            scored.append((-float(np.dot(query.values, vector.values)), pair.id))
        expected = [pair_id for _, pair_id in sorted(scored)]
        got = [p.id for p in exemplar_store.top_k(question, 3, provider)]
        assert got == expected[:3]

    def test_output_is_prefix_of_full_ranking(self, exemplar_store, provider):
        question = "Which stops does line 27 serve on Sundays?"
        full = [p.id for p in exemplar_store.top_k(question, len(exemplar_store.pairs), provider)]
        for k in range(1, len(full) + 1):
            assert [p.id for p in exemplar_store.top_k(question, k, provider)] == full[:k]

    def test_retrieval_deterministic(self, exemplar_store, provider):
        a = [p.id for p in exemplar_store.top_k("trips of line 18", 3, provider)]
        b = [p.id for p in exemplar_store.top_k("trips of line 18", 3, provider)]
        assert a == b

    def test_index_rebuilt_when_provider_changes(self, exemplar_store):
        p1 = ScriptedProvider([], embedding_seed=7)
        p2 = ScriptedProvider([], embedding_seed=99)
        exemplar_store.top_k("q", 1, p1)
        index_1 = exemplar_store.index_for(p1)
        exemplar_store.top_k("q", 1, p2)
        index_2 = exemplar_store.index_for(p2)
        assert index_1.provider_id != index_2.provider_id


def test_index_save_load_roundtrip(tmp_path, exemplar_store, provider):
    index = build_index(exemplar_store.pairs, provider)
    path = tmp_path / "index.json"
    save_index(index, path)
    loaded = load_index(path)
    assert loaded.provider_id == index.provider_id
    assert [e[0] for e in loaded.entries] == [e[0] for e in index.entries]
    for (_, v1), (_, v2) in zip(loaded.entries, index.entries):
        assert np.allclose(v1.values, v2.values)
