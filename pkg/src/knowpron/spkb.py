"""Selectional-preference knowledge base.

Stores counts of (predicate, argument, relation) tuples harvested from
dependency edges, and maps raw counts onto a ten-value bucket scale: bucket 0
is reserved for unseen tuples, buckets 1-9 cover the count intervals
[1] [2] [3] [4] [5-7] [8-15] [16-31] [32-63] [64+].
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Iterable, Iterator, Sequence

RELATIONS = ("nsubj", "dobj")

NUM_BUCKETS = 10


class KbError(ValueError):
    """Bad edge, malformed KB file, or invalid query input."""


def _check_key(predicate: str, argument: str, relation: str) -> tuple[str, str, str]:
    if relation not in RELATIONS:
        raise KbError(f"unknown relation {relation!r}; expected one of {RELATIONS}")
    if not predicate or not argument:
        raise KbError("predicate and argument must be non-empty")
    return (predicate.lower(), argument.lower(), relation)


class SpKnowledgeBase:
    """Count store; built once, then treated as immutable for reads."""

    def __init__(self) -> None:
        self._counts: dict[tuple[str, str, str], int] = {}

    @classmethod
    def from_edges(cls, edges: Iterable[tuple]) -> "SpKnowledgeBase":
        kb = cls()
        ingest_edges(kb, edges)
        return kb

    def add(self, predicate: str, argument: str, relation: str, count: int = 1) -> None:
        if count <= 0:
            raise KbError(f"count must be >= 1, got {count}")
        key = _check_key(predicate, argument, relation)
        self._counts[key] = self._counts.get(key, 0) + count

    def query(self, predicate: str, argument: str, relation: str) -> int:
        return self._counts.get((predicate.lower(), argument.lower(), relation), 0)

    def items(self) -> Iterator[tuple[tuple[str, str, str], int]]:
        return iter(self._counts.items())

    def __len__(self) -> int:
        return len(self._counts)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SpKnowledgeBase):
            return NotImplemented
        return self._counts == other._counts


def ingest_edges(kb: SpKnowledgeBase, edges: Iterable[tuple]) -> SpKnowledgeBase:
    """Sum edge counts into ``kb``.  Edges are (predicate, argument, relation)
    or (predicate, argument, relation, count) tuples; ingestion order does not
    affect the result."""
    for edge in edges:
        if len(edge) == 3:
            predicate, argument, relation = edge
            count = 1
        elif len(edge) == 4:
            predicate, argument, relation, count = edge
        else:
            raise KbError(f"edge must have 3 or 4 fields, got {len(edge)}")
        kb.add(predicate, argument, relation, int(count))
    return kb


def merge_kbs(kbs: Sequence[SpKnowledgeBase]) -> SpKnowledgeBase:
    merged = SpKnowledgeBase()
    for kb in kbs:
        for (predicate, argument, relation), count in kb.items():
            merged.add(predicate, argument, relation, count)
    return merged


def bucketize(count: int) -> int:
    """Map a raw tuple count to its bucket id (0 = unseen)."""
    if count < 0:
        raise KbError(f"count must be non-negative, got {count}")
    if count <= 4:
        return count
    if count <= 7:
        return 5
    if count <= 15:
        return 6
    if count <= 31:
        return 7
    if count <= 63:
        return 8
    return 9


def read_edge_file(path: str | Path) -> Iterator[tuple[str, str, str, int]]:
    """Yield (predicate, argument, relation, count) rows from a TSV edge file.

    Lines carry 3 columns (implicit count 1) or 4 columns.
    """
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) == 3:
                cols = cols + ["1"]
            if len(cols) != 4:
                raise KbError(f"{path}:{lineno}: expected 3 or 4 tab-separated columns")
            predicate, argument, relation, count_str = cols
            try:
                count = int(count_str)
            except ValueError as exc:
                raise KbError(f"{path}:{lineno}: bad count {count_str!r}") from exc
            yield predicate, argument, relation, count


def save_kb(kb: SpKnowledgeBase, path: str | Path) -> None:
    """Write the KB as a 4-column TSV sorted bytewise ascending."""
    rows = sorted(kb.items())
    with open(path, "w", encoding="utf-8") as fh:
        for (predicate, argument, relation), count in rows:
            fh.write(f"{predicate}\t{argument}\t{relation}\t{count}\n")


def load_kb(path: str | Path) -> SpKnowledgeBase:
    """Load a KB file; duplicate keys are summed with a warning."""
    kb = SpKnowledgeBase()
    seen: set[tuple[str, str, str]] = set()
    for lineno, (predicate, argument, relation, count) in enumerate(read_edge_file(path), start=1):
        try:
            key = _check_key(predicate, argument, relation)
            kb.add(predicate, argument, relation, count)
        except KbError as exc:
            raise KbError(f"{path}:{lineno}: {exc}") from exc
        if key in seen:
            warnings.warn(f"{path}: duplicate key {key} (counts summed)", stacklevel=2)
        seen.add(key)
    return kb


def _ingest_chunk(args: tuple) -> SpKnowledgeBase:
    path, lo, hi = args
    kb = SpKnowledgeBase()
    for i, edge in enumerate(read_edge_file(path)):
        if lo <= i < hi:
            kb.add(*edge)
    return kb


def build_kb(edge_paths: Sequence[str | Path], jobs: int = 1) -> SpKnowledgeBase:
    """Aggregate edge files into a KB, optionally sharding across processes.

    The sharded build merges per-shard counts; the result is identical to a
    serial pass regardless of shard boundaries.
    """
    if jobs <= 1:
        kb = SpKnowledgeBase()
        for path in edge_paths:
            ingest_edges(kb, read_edge_file(path))
        return kb
    chunks = []
    for path in edge_paths:
        n = sum(1 for _ in read_edge_file(path))
        step = max(1, -(-n // jobs))
        for lo in range(0, n, step):
            chunks.append((path, lo, min(n, lo + step)))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        shards = list(pool.map(_ingest_chunk, chunks))
    return merge_kbs(shards)
