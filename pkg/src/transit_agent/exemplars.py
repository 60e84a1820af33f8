"""Curated question/SQL exemplars and similarity retrieval.

The store is small, so retrieval is an exact scan over cosine similarities;
the index is rebuilt whenever the provider identity changes because vectors
from different providers are not comparable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from transit_agent.errors import DuplicateId, EmptyStore, InvalidExemplar
from transit_agent.providers import EmbeddingVector, Provider, cosine_similarity

logger = logging.getLogger(__name__)

DEFAULT_K = 3


@dataclass
class ExemplarPair:
    id: str
    question: str
    sql: str
    tags: set[str] = field(default_factory=set)


@dataclass
class SimilarityIndex:
    provider_id: str
    entries: list[tuple[str, EmbeddingVector]]  # one per exemplar


def load_exemplars(path: str | Path, catalog=None) -> list[ExemplarPair]:
    """Load and validate exemplar records from a JSON array.

    Every SQL statement must pass the guard's read-only check, and the
    syntax check as well when a catalog is supplied.  Duplicate ids are
    rejected outright.
    """
    from transit_agent.guard import QueryCandidate, enforce_read_only, syntax_check

    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("exemplars", [])
    pairs: list[ExemplarPair] = []
    seen: set[str] = set()
    for record in data:
        pair = ExemplarPair(
            id=str(record["id"]),
            question=str(record["question"]).strip(),
            sql=str(record["sql"]).strip(),
            tags=set(record.get("tags", [])),
        )
        if pair.id in seen:
            raise DuplicateId(f"duplicate exemplar id {pair.id!r}")
        seen.add(pair.id)
        candidate = QueryCandidate(sql=pair.sql, origin="gold")
        report = enforce_read_only(candidate)
        if report.verdict == "rejected":
            raise InvalidExemplar(f"exemplar {pair.id}: {report.diagnostics[0].message}")
        if catalog is not None:
            report = syntax_check(candidate, catalog)
            if report.verdict == "rejected":
                raise InvalidExemplar(
                    f"exemplar {pair.id}: "
                    + "; ".join(d.message for d in report.diagnostics)
                )
        pairs.append(pair)
    return pairs


def build_index(pairs: list[ExemplarPair], provider: Provider) -> SimilarityIndex:
    entries = [(pair.id, provider.embed(pair.question)) for pair in pairs]
    dims = {vector.dimension for _, vector in entries}
    if len(dims) > 1:
        raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
    return SimilarityIndex(provider_id=provider.provider_id, entries=entries)


class ExemplarStore:
    """Pairs plus a lazily (re)built similarity index."""

    def __init__(self, pairs: list[ExemplarPair]):
        self.pairs = list(pairs)
        self._by_id = {pair.id: pair for pair in self.pairs}
        self._index: SimilarityIndex | None = None

    def index_for(self, provider: Provider) -> SimilarityIndex:
        if self._index is None or self._index.provider_id != provider.provider_id:
            self._index = build_index(self.pairs, provider)
        return self._index

    def top_k(self, question: str, k: int, provider: Provider) -> list[ExemplarPair]:
        """The k most similar exemplars, best first.

        Ordered by descending cosine similarity with ties broken by id
        ascending; returns fewer when the store is smaller than k.
        """
        if k <= 0:
            raise ValueError("k must be positive")
        if not self.pairs:
            raise EmptyStore("no exemplars loaded")
        index = self.index_for(provider)
        query_vector = provider.embed(question)
        scored = [
            (-cosine_similarity(query_vector, vector), pair_id)
            for pair_id, vector in index.entries
        ]
        scored.sort()
        return [self._by_id[pair_id] for _, pair_id in scored[:k]]


def save_index(index: SimilarityIndex, path: str | Path):
    payload = {
        "provider_id": index.provider_id,
        "entries": [
            {"id": pair_id, "values": vector.values.tolist(), "dimension": vector.dimension}
            for pair_id, vector in index.entries
        ],
    }
    Path(path).write_text(json.dumps(payload, indent=2), encoding="utf-8")


def load_index(path: str | Path) -> SimilarityIndex:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = [
        (entry["id"], EmbeddingVector(values=entry["values"], dimension=entry["dimension"]))
        for entry in data["entries"]
    ]
    return SimilarityIndex(provider_id=data["provider_id"], entries=entries)
