"""Readers and writers for prediction, cluster and signature files.

Prediction file (AnyBURL layout), three lines per test triple::

    head relation tail
    Heads: e1<TAB>s1<TAB>e2<TAB>s2 ...
    Tails: e1<TAB>s1 ...

Cluster file: an optional ``#`` header line, then per section a line
``rel<TAB>relation<TAB>direction<TAB>t1 ... t6`` (six TAB-separated
thresholds in the order C-C, AC1-AC1, AC2-AC2, C-AC1, C-AC2, AC1-AC2)
followed by ``clusterId<TAB>rule`` lines. ``direction`` is ``head``,
``tail`` or ``both``. Trailing ``fitness<TAB>relation<TAB>direction<TAB>value``
lines summarise the search.

Signature file: a ``#`` header with k and seed, then one line per rule:
``id<TAB>relation<TAB>type<TAB>size<TAB>signature<TAB>rule`` where the
signature is k comma-separated 16-digit hex words, or ``empty``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import ThresholdSet
from .errors import ParseError
from .minhash import EMPTY, MinHashParams

SCORE_FMT = "{:.6f}"


# ---------------------------------------------------------------- predictions

@dataclass
class PredictionRecord:
    triple: tuple[str, str, str]
    heads: list[tuple[str, float]]
    tails: list[tuple[str, float]]


def _format_answers(prefix: str, answers) -> str:
    parts = []
    for label, score in answers:
        parts.append(label)
        parts.append(SCORE_FMT.format(score))
    return prefix + " " + "\t".join(parts)


def write_predictions(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(" ".join(rec.triple) + "\n")
            fh.write(_format_answers("Heads:", rec.heads) + "\n")
            fh.write(_format_answers("Tails:", rec.tails) + "\n")


def _parse_answers(line: str, prefix: str, path, lineno: int) -> list[tuple[str, float]]:
    if not line.startswith(prefix):
        raise ParseError(f"expected line starting with {prefix!r}", path=path, line=lineno)
    rest = line[len(prefix):].lstrip(" ")
    if not rest:
        return []
    fields = rest.split("\t")
    if len(fields) % 2:
        raise ParseError("odd number of fields in answer list", path=path, line=lineno)
    try:
        return [(fields[i], float(fields[i + 1])) for i in range(0, len(fields), 2)]
    except ValueError as exc:
        raise ParseError(f"bad score: {exc}", path=path, line=lineno) from None


def read_predictions(path) -> list[PredictionRecord]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\r\n") for ln in fh]
    while lines and not lines[-1].strip():
        lines.pop()
    if len(lines) % 3:
        raise ParseError(f"expected 3 lines per triple, got {len(lines)} lines", path=path)
    records = []
    for i in range(0, len(lines), 3):
        triple = lines[i].split(" ")
        if len(triple) != 3:
            triple = lines[i].split("\t")
        if len(triple) != 3:
            raise ParseError("triple line must hold head, relation and tail", path=path, line=i + 1)
        records.append(PredictionRecord(
            tuple(triple),
            _parse_answers(lines[i + 1], "Heads:", path, i + 2),
            _parse_answers(lines[i + 2], "Tails:", path, i + 3),
        ))
    return records


# ------------------------------------------------------------------- clusters

@dataclass
class ClusterSection:
    relation: str
    direction: str
    thresholds: ThresholdSet
    clusters: list[tuple[int, str]] = field(default_factory=list)  # (cluster id, rule text)
    fitness: float | None = None


def write_clusters(path, sections, header: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write("# " + header + "\n")
        for sec in sections:
            ts = "\t".join(repr(float(v)) for v in sec.thresholds.values)
            fh.write(f"rel\t{sec.relation}\t{sec.direction}\t{ts}\n")
            for cid, text in sec.clusters:
                fh.write(f"{cid}\t{text}\n")
        for sec in sections:
            if sec.fitness is not None:
                fh.write(f"fitness\t{sec.relation}\t{sec.direction}\t{sec.fitness:.6f}\n")


def read_clusters(path) -> list[ClusterSection]:
    sections: list[ClusterSection] = []
    by_key: dict[tuple[str, str], ClusterSection] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if fields[0] == "rel":
                if len(fields) != 9 or fields[2] not in ("head", "tail", "both"):
                    raise ParseError("section header must be rel, relation, direction, 6 thresholds",
                                     path=path, line=lineno)
                try:
                    ts = ThresholdSet(*(float(x) for x in fields[3:]))
                except ValueError as exc:
                    raise ParseError(f"bad threshold: {exc}", path=path, line=lineno) from None
                sec = ClusterSection(fields[1], fields[2], ts)
                sections.append(sec)
                by_key[(sec.relation, sec.direction)] = sec
            elif fields[0] == "fitness":
                if len(fields) != 4 or (fields[1], fields[2]) not in by_key:
                    raise ParseError("fitness line for an unknown section", path=path, line=lineno)
                by_key[(fields[1], fields[2])].fitness = float(fields[3])
            else:
                if not sections or len(fields) != 2:
                    raise ParseError("expected 'clusterId<TAB>rule'", path=path, line=lineno)
                try:
                    cid = int(fields[0])
                except ValueError:
                    raise ParseError(f"bad cluster id {fields[0]!r}", path=path, line=lineno) from None
                sections[-1].clusters.append((cid, fields[1]))
    return sections


# ----------------------------------------------------------------- signatures

@dataclass
class SignatureRecord:
    rule_id: int
    relation: str
    kind: str
    size: int
    signature: np.ndarray
    text: str


def write_signatures(path, params: MinHashParams, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# signatures k={params.k} seed={params.seed}\n")
        for rec in records:
            if np.all(rec.signature == EMPTY):
                sig = "empty"
            else:
                sig = ",".join(f"{int(v):016x}" for v in rec.signature)
            fh.write(f"{rec.rule_id}\t{rec.relation}\t{rec.kind}\t{rec.size}\t{sig}\t{rec.text}\n")


def read_signatures(path) -> tuple[MinHashParams, list[SignatureRecord]]:
    params = None
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line:
                continue
            if line.startswith("#"):
                kv = dict(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
                try:
                    params = MinHashParams(int(kv["k"]), int(kv["seed"]))
                except (KeyError, ValueError):
                    raise ParseError("signature header needs k= and seed=", path=path, line=lineno) from None
                continue
            if params is None:
                raise ParseError("missing signature header", path=path, line=lineno)
            fields = line.split("\t")
            if len(fields) != 6:
                raise ParseError("expected 6 TAB-separated fields", path=path, line=lineno)
            if fields[4] == "empty":
                sig = np.full(params.k, EMPTY, dtype=np.uint64)
            else:
                sig = np.array([int(w, 16) for w in fields[4].split(",")], dtype=np.uint64)
                if sig.size != params.k:
                    raise ParseError(f"signature has {sig.size} values, header says {params.k}",
                                     path=path, line=lineno)
            records.append(SignatureRecord(int(fields[0]), fields[1], fields[2], int(fields[3]),
                                           sig, fields[5]))
    if params is None:
        raise ParseError("empty signature file", path=path)
    return params, records
