"""Triple ingestion and per-predicate bipartite subgraphs."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable

import numpy as np

log = logging.getLogger(__name__)


class TripleFormatError(ValueError):
    """Raised for input that cannot be decoded at all (not for malformed lines)."""


class UnknownPredicateError(KeyError):
    def __init__(self, predicate, available):
        self.predicate = predicate
        self.available = sorted(available)
        super().__init__(f"unknown predicate {predicate!r}; available: {', '.join(self.available) or '(none)'}")

    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: str

    def __post_init__(self):
        for name in ("subject", "predicate", "object"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise ValueError(f"triple {name} must be non-empty text, got {value!r}")


@dataclass(frozen=True)
class TripleFormat:
    """Line format of a triple file.

    Only delimited text is supported for now; ``columns`` gives the position of
    subject, predicate and object within a line.
    """

    delimiter: str = "\t"
    comment: str = "#"
    columns: tuple[int, int, int] = (0, 1, 2)
    encoding: str = "utf-8"


TSV = TripleFormat()


@dataclass(frozen=True)
class ParseStats:
    parsed: int = 0
    duplicates: int = 0
    malformed: int = 0
    malformed_lines: tuple[int, ...] = ()


@dataclass(frozen=True)
class KnowledgeGraph:
    """A set of distinct triples, kept in first-seen order."""

    triples: tuple[Triple, ...]
    stats: ParseStats = field(default_factory=ParseStats, compare=False)

    def __post_init__(self):
        by_predicate: dict[str, list[tuple[str, str]]] = {}
        for t in self.triples:
            by_predicate.setdefault(t.predicate, []).append((t.subject, t.object))
        object.__setattr__(self, "_by_predicate", by_predicate)
        object.__setattr__(self, "_members", frozenset(self.triples))

    @classmethod
    def from_triples(cls, triples: Iterable) -> "KnowledgeGraph":
        """Accepts :class:`Triple` objects or plain ``(s, p, o)`` tuples."""
        seen = dict.fromkeys(t if isinstance(t, Triple) else Triple(*t) for t in triples)
        return cls(tuple(seen))

    @property
    def predicates(self) -> frozenset[str]:
        return frozenset(self._by_predicate)

    def pairs(self, predicate: str) -> list[tuple[str, str]]:
        try:
            return self._by_predicate[predicate]
        except KeyError:
            raise UnknownPredicateError(predicate, self._by_predicate) from None

    def __len__(self):
        return len(self.triples)

    def __contains__(self, triple):
        return triple in self._members


def parse_triples(stream: BinaryIO | bytes, fmt: TripleFormat = TSV) -> KnowledgeGraph:
    """Parse delimited triples from a byte stream.

    Blank lines and comment lines are skipped. Lines with the wrong number of
    fields (or an empty field) are counted as malformed and skipped. Exact
    duplicate triples collapse into one.
    """
    raw = stream if isinstance(stream, (bytes, bytearray)) else stream.read()
    try:
        text = bytes(raw).decode(fmt.encoding)
    except UnicodeDecodeError as exc:
        raise TripleFormatError(f"input is not valid {fmt.encoding}: bad byte at offset {exc.start}") from exc

    ncols = max(fmt.columns) + 1
    seen: dict[Triple, None] = {}
    parsed = duplicates = 0
    malformed: list[int] = []
    for lineno, line in enumerate(io.StringIO(text, newline=None), start=1):
        line = line.rstrip("\n")
        stripped = line.strip()
        if not stripped or stripped.startswith(fmt.comment):
            continue
        fields = line.split(fmt.delimiter)
        if len(fields) != ncols:
            malformed.append(lineno)
            continue
        s, p, o = (fields[i].strip() for i in fmt.columns)
        if not (s and p and o):
            malformed.append(lineno)
            continue
        t = Triple(s, p, o)
        parsed += 1
        if t in seen:
            duplicates += 1
        else:
            seen[t] = None
    if malformed:
        log.warning("skipped %d malformed line(s), first at line %d", len(malformed), malformed[0])
    stats = ParseStats(parsed, duplicates, len(malformed), tuple(malformed))
    return KnowledgeGraph(tuple(seen), stats)


def read_triples(path, fmt: TripleFormat = TSV) -> KnowledgeGraph:
    with open(path, "rb") as fh:
        return parse_triples(fh, fmt)


class Adjacency:
    """Immutable CSR adjacency of a bipartite graph (subject rows, object columns).

    Neighbor lists are sorted and duplicate free.
    """

    __slots__ = ("m", "n", "indptr", "indices")

    def __init__(self, m: int, n: int, indptr: np.ndarray, indices: np.ndarray):
        self.m = int(m)
        self.n = int(n)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @classmethod
    def from_edges(cls, m, n, src, dst) -> "Adjacency":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        if src.shape != dst.shape:
            raise ValueError("src and dst must have the same length")
        if src.size and (src.min() < 0 or src.max() >= m or dst.min() < 0 or dst.max() >= n):
            raise ValueError("edge endpoint out of range")
        keys = np.unique(src * n + dst) if n else np.empty(0, dtype=np.int64)
        rows = keys // n if n else keys
        indptr = np.zeros(m + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=m), out=indptr[1:])
        return cls(m, n, indptr, keys - rows * n if n else keys)

    @property
    def edge_count(self) -> int:
        return int(self.indices.size)

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, s: int) -> np.ndarray:
        return self.indices[self.indptr[s]:self.indptr[s + 1]]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(self.m, dtype=np.int64), self.degrees())
        return src, self.indices.copy()

    def keys(self) -> np.ndarray:
        """Sorted ``s * n + o`` codes of all edges."""
        src, dst = self.edges()
        return src * self.n + dst

    def has_edge(self, s: int, o: int) -> bool:
        row = self.neighbors(s)
        i = np.searchsorted(row, o)
        return bool(i < row.size and row[i] == o)

    def contains(self, src, dst) -> np.ndarray:
        """Vectorized membership test for edge arrays."""
        keys = self.keys()
        q = np.asarray(src, dtype=np.int64) * self.n + np.asarray(dst, dtype=np.int64)
        pos = np.searchsorted(keys, q)
        pos = np.minimum(pos, max(keys.size - 1, 0))
        return keys[pos] == q if keys.size else np.zeros(q.shape, dtype=bool)

    def without(self, src, dst) -> "Adjacency":
        """Copy with the given edges removed."""
        drop = np.asarray(src, dtype=np.int64) * self.n + np.asarray(dst, dtype=np.int64)
        keys = self.keys()
        kept = keys[~np.isin(keys, drop)]
        return Adjacency.from_edges(self.m, self.n, kept // self.n, kept % self.n)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.m, self.n), dtype=bool)
        src, dst = self.edges()
        a[src, dst] = True
        return a

    def __eq__(self, other):
        return (
            isinstance(other, Adjacency)
            and (self.m, self.n) == (other.m, other.n)
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __repr__(self):
        return f"Adjacency(m={self.m}, n={self.n}, edges={self.edge_count})"


@dataclass(frozen=True, eq=False)
class PredicateBipartiteGraph:
    """Indexed bipartite subgraph of one predicate.

    ``subjects[i]`` is the label of subject id ``i``; ``objects[j]`` likewise.
    Ids follow lexicographic label order and the two sides are numbered
    independently.
    """

    predicate: str
    subjects: tuple[str, ...]
    objects: tuple[str, ...]
    adjacency: Adjacency

    def __post_init__(self):
        object.__setattr__(self, "subject_index", {label: i for i, label in enumerate(self.subjects)})
        object.__setattr__(self, "object_index", {label: i for i, label in enumerate(self.objects)})

    @property
    def m(self) -> int:
        return len(self.subjects)

    @property
    def n(self) -> int:
        return len(self.objects)

    @property
    def edge_count(self) -> int:
        return self.adjacency.edge_count

    def neighbors(self, s: int) -> np.ndarray:
        return self.adjacency.neighbors(s)

    def to_triples(self) -> list[Triple]:
        src, dst = self.adjacency.edges()
        return [Triple(self.subjects[s], self.predicate, self.objects[o]) for s, o in zip(src, dst)]

    def dump_tsv(self) -> str:
        lines = sorted(f"{t.subject}\t{t.predicate}\t{t.object}" for t in self.to_triples())
        return "".join(line + "\n" for line in lines)

    def __eq__(self, other):
        return (
            isinstance(other, PredicateBipartiteGraph)
            and self.predicate == other.predicate
            and self.subjects == other.subjects
            and self.objects == other.objects
            and self.adjacency == other.adjacency
        )


def graph_from_pairs(predicate: str, pairs: Iterable[tuple[str, str]]) -> PredicateBipartiteGraph:
    pairs = list(pairs)
    subjects = tuple(sorted({s for s, _ in pairs}))
    objects = tuple(sorted({o for _, o in pairs}))
    sidx = {label: i for i, label in enumerate(subjects)}
    oidx = {label: i for i, label in enumerate(objects)}
    src = np.fromiter((sidx[s] for s, _ in pairs), dtype=np.int64, count=len(pairs))
    dst = np.fromiter((oidx[o] for _, o in pairs), dtype=np.int64, count=len(pairs))
    adj = Adjacency.from_edges(len(subjects), len(objects), src, dst)
    return PredicateBipartiteGraph(predicate, subjects, objects, adj)


def extract_bipartite(kg: KnowledgeGraph, predicate: str) -> PredicateBipartiteGraph:
    return graph_from_pairs(predicate, kg.pairs(predicate))


def subgraph_stats(g: PredicateBipartiteGraph) -> tuple[int, int, int]:
    return g.m, g.n, g.edge_count


def write_triples(path, triples: Iterable) -> None:
    """Write :class:`Triple` objects or ``(s, p, o)`` tuples as TSV."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for t in triples:
            s, p, o = (t.subject, t.predicate, t.object) if isinstance(t, Triple) else t
            fh.write(f"{s}\t{p}\t{o}\n")
