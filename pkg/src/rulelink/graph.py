"""Immutable triple store with per-relation CSR adjacency.

Entity and relation ids are dense integers handed out by first occurrence
(train, then valid, then test). Adjacency is built from train triples only;
the valid and test splits are kept for filtering and evaluation.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Iterable, Sequence
from os import PathLike
from typing import Literal

import numpy as np

from .errors import ContractError, ParseError

log = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
Direction = Literal["forward", "backward"]


class Vocabulary:
    """Bijective label <-> dense id mapping."""

    def __init__(self, labels: Iterable[str] = ()):
        self._labels: list[str] = []
        self._index: dict[str, int] = {}
        for label in labels:
            self.add(label)

    def add(self, label: str) -> int:
        idx = self._index.get(label)
        if idx is None:
            idx = len(self._labels)
            self._labels.append(label)
            self._index[label] = idx
        return idx

    def id(self, label: str) -> int:
        return self._index[label]

    def get(self, label: str, default=None):
        return self._index.get(label, default)

    def label(self, idx: int) -> str:
        return self._labels[idx]

    @property
    def labels(self) -> Sequence[str]:
        return tuple(self._labels)

    def __contains__(self, label: object) -> bool:
        return label in self._index

    def __len__(self) -> int:
        return len(self._labels)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._labels == other._labels


class CSR:
    """Row-compressed adjacency of one relation in one direction."""

    __slots__ = ("indptr", "indices")

    def __init__(self, rows: np.ndarray, cols: np.ndarray, n_rows: int):
        order = np.lexsort((cols, rows))
        rows = rows[order]
        cols = cols[order]
        counts = np.bincount(rows, minlength=n_rows)
        indptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indptr.setflags(write=False)
        cols = np.ascontiguousarray(cols, dtype=np.int64)
        cols.setflags(write=False)
        self.indptr = indptr
        self.indices = cols

    def row(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def pairs(self) -> np.ndarray:
        """All (row, col) pairs as an (n, 2) array."""
        rows = np.repeat(np.arange(len(self.indptr) - 1), np.diff(self.indptr))
        return np.column_stack([rows, self.indices])


def _parse_triples(path, lineno_offset: int = 0) -> list[tuple[str, str, str]]:
    triples = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1 + lineno_offset):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3 or not all(fields):
                raise ParseError(
                    f"expected 'head<TAB>relation<TAB>tail', got {len(fields)} field(s)",
                    path=path, line=lineno)
            triples.append((fields[0], fields[1], fields[2]))
    return triples


class KnowledgeGraph:
    """Train/valid/test triples plus train-only CSR adjacency per relation.

    Treat instances as read-only; the arrays are flagged non-writeable.
    """

    def __init__(self, train, valid=(), test=()):
        self.entities = Vocabulary()
        self.relations = Vocabulary()
        self.duplicates: dict[str, int] = {}
        splits = {}
        for name, triples in zip(SPLITS, (train, valid, test)):
            seen: dict[tuple[int, int, int], None] = {}
            dups = 0
            for h, r, t in triples:
                key = (self.entities.add(h), self.relations.add(r), self.entities.add(t))
                if key in seen:
                    dups += 1
                else:
                    seen[key] = None
            if dups:
                log.warning("%s: dropped %d duplicate triple(s)", name, dups)
            self.duplicates[name] = dups
            arr = np.array(list(seen), dtype=np.int64).reshape(-1, 3)
            arr.setflags(write=False)
            splits[name] = arr
        self.train: np.ndarray = splits["train"]
        self.valid: np.ndarray = splits["valid"]
        self.test: np.ndarray = splits["test"]

        n_ent = len(self.entities)
        self._forward: list[CSR] = []
        self._backward: list[CSR] = []
        for r in range(len(self.relations)):
            sel = self.train[self.train[:, 1] == r]
            self._forward.append(CSR(sel[:, 0], sel[:, 2], n_ent))
            self._backward.append(CSR(sel[:, 2], sel[:, 0], n_ent))

        # (relation, entity) -> answers, per split and per direction
        self._answers: dict[str, tuple[dict, dict]] = {}
        for name in SPLITS:
            tails: dict[tuple[int, int], set[int]] = defaultdict(set)
            heads: dict[tuple[int, int], set[int]] = defaultdict(set)
            for h, r, t in splits[name].tolist():
                tails[(r, h)].add(t)
                heads[(r, t)].add(h)
            self._answers[name] = (dict(tails), dict(heads))
        self._adj_cache: dict[tuple[int, bool], dict[int, tuple[int, ...]]] = {}

    @property
    def num_entities(self) -> int:
        return len(self.entities)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def split(self, name: str) -> np.ndarray:
        if name not in SPLITS:
            raise ContractError(f"unknown split {name!r}")
        return getattr(self, name)

    def counts(self) -> dict[str, int]:
        return {name: len(self.split(name)) for name in SPLITS}

    def _check_entity(self, e: int) -> None:
        if not 0 <= e < len(self.entities):
            raise ContractError(f"entity id {e} out of range [0, {len(self.entities)})")

    def _check_relation(self, r: int) -> None:
        if not 0 <= r < len(self.relations):
            raise ContractError(f"relation id {r} out of range [0, {len(self.relations)})")

    def csr(self, relation: int, direction: Direction = "forward") -> CSR:
        self._check_relation(relation)
        if direction == "forward":
            return self._forward[relation]
        if direction == "backward":
            return self._backward[relation]
        raise ContractError(f"direction must be 'forward' or 'backward', got {direction!r}")

    def neighbors(self, relation: int, entity: int, direction: Direction = "forward") -> np.ndarray:
        """Sorted train neighbours of ``entity`` along ``relation``.

        ``forward`` gives every t with (entity, relation, t) in train,
        ``backward`` every h with (h, relation, entity).
        """
        self._check_entity(entity)
        return self.csr(relation, direction).row(entity)

    def adjacency(self, relation: int, forward: bool) -> dict[int, tuple[int, ...]]:
        """Dict view of one CSR (non-empty rows only), cached.

        Grounding code walks these instead of slicing numpy arrays, which
        is several times faster from pure Python.
        """
        key = (relation, forward)
        adj = self._adj_cache.get(key)
        if adj is None:
            csr = self._forward[relation] if forward else self._backward[relation]
            ptr = csr.indptr.tolist()
            idx = csr.indices.tolist()
            adj = {}
            for row in np.flatnonzero(np.diff(csr.indptr)).tolist():
                adj[row] = tuple(idx[ptr[row]:ptr[row + 1]])
            self._adj_cache[key] = adj
        return adj

    def warm(self) -> None:
        """Build every adjacency view up front (before forking workers)."""
        for r in range(len(self.relations)):
            self.adjacency(r, True)
            self.adjacency(r, False)

    def is_known(self, h: int, r: int, t: int, splits: Iterable[str] = SPLITS) -> bool:
        self._check_entity(h)
        self._check_entity(t)
        self._check_relation(r)
        for name in splits:
            if name not in SPLITS:
                raise ContractError(f"unknown split {name!r}")
            if t in self._answers[name][0].get((r, h), ()):
                return True
        return False

    def answers(self, relation: int, entity: int, predict: Literal["head", "tail"],
                splits: Iterable[str] = SPLITS) -> set[int]:
        """Entities completing (entity, relation, ?) or (?, relation, entity) in ``splits``."""
        which = 0 if predict == "tail" else 1
        out: set[int] = set()
        for name in splits:
            out |= self._answers[name][which].get((relation, entity), set())
        return out

    def triple_labels(self, h: int, r: int, t: int) -> tuple[str, str, str]:
        return self.entities.label(h), self.relations.label(r), self.entities.label(t)


def load_graph(train_path: str | PathLike, valid_path: str | PathLike | None = None,
               test_path: str | PathLike | None = None) -> KnowledgeGraph:
    """Read three TAB-separated triple files into a :class:`KnowledgeGraph`."""
    train = _parse_triples(train_path)
    valid = _parse_triples(valid_path) if valid_path is not None else []
    test = _parse_triples(test_path) if test_path is not None else []
    graph = KnowledgeGraph(train, valid, test)
    log.info("loaded %d entities, %d relations; triples %s",
             graph.num_entities, graph.num_relations, graph.counts())
    return graph
