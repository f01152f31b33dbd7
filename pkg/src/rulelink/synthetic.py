"""Random graphs and rulesets for tests, benchmarks and demos."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .graph import KnowledgeGraph
from .inference import solution_set
from .rules import Rule, RuleSet, format_rule, parse_rule


def random_graph(rng: np.random.Generator, n_entities: int, n_relations: int, n_triples: int,
                 valid: int = 0, test: int = 0) -> KnowledgeGraph:
    """Uniform random triples, split into train/valid/test."""
    total = n_triples + valid + test
    h = rng.integers(0, n_entities, total)
    r = rng.integers(0, n_relations, total)
    t = rng.integers(0, n_entities, total)
    rows = [(f"e{a}", f"r{b}", f"e{c}") for a, b, c in zip(h.tolist(), r.tolist(), t.tolist())]
    rows = list(dict.fromkeys(rows))
    n_triples = min(n_triples, len(rows))
    return KnowledgeGraph(rows[:n_triples], rows[n_triples:n_triples + valid], rows[n_triples + valid:])


def _walk(rng, graph: KnowledgeGraph, start: int, length: int):
    """Random walk following edges in either direction; None if it gets stuck."""
    nodes, steps = [start], []
    for _ in range(length):
        options = []
        for rel in range(graph.num_relations):
            for fwd in (True, False):
                for nb in graph.adjacency(rel, fwd).get(nodes[-1], ()):
                    options.append((rel, fwd, nb))
        if not options:
            return None
        rel, fwd, nb = options[rng.integers(len(options))]
        steps.append((rel, fwd))
        nodes.append(nb)
    return nodes, steps


def _rule_text(graph, head_rel: str, kind: str, steps, nodes, c0: str, c0_first: bool) -> str:
    n = len(steps)
    names = ["X"] + [f"A{i + 2}" for i in range(n - 1)]
    if kind == "C":
        names.append("Y")
        head = f"{head_rel}(X,Y)"
    else:
        names.append(graph.entities.label(nodes[-1]) if kind == "AC1" else f"A{n + 1}")
        head = f"{head_rel}({c0},X)" if c0_first else f"{head_rel}(X,{c0})"
    atoms = []
    for i, (rel, fwd) in enumerate(steps):
        label = graph.relations.label(rel)
        a, b = names[i], names[i + 1]
        atoms.append(f"{label}({a},{b})" if fwd else f"{label}({b},{a})")
    return f"{head} <= {', '.join(atoms)}"


def random_rules(rng: np.random.Generator, graph: KnowledgeGraph, n_rules: int,
                 max_length: int = 3, kinds=("C", "AC1", "AC2"), attempts: int = 50) -> RuleSet:
    """Rules shaped from random walks in the train graph, with random confidences.

    Walk-based bodies make most rules ground at least once, which keeps
    oracle comparisons from being vacuous.
    """
    starts = np.unique(graph.train[:, [0, 2]])
    rels = graph.relations.labels
    texts: list[str] = []
    seen = set()
    for _ in range(n_rules * attempts):
        if len(texts) >= n_rules or starts.size == 0:
            break
        length = int(rng.integers(1, max_length + 1))
        walked = _walk(rng, graph, int(starts[rng.integers(starts.size)]), length)
        if walked is None:
            continue
        nodes, steps = walked
        kind = kinds[rng.integers(len(kinds))]
        if len(set(nodes)) != len(nodes) and kind == "C":
            continue
        c0 = graph.entities.label(int(rng.integers(graph.num_entities)))
        if kind == "AC1" and rng.random() < 0.2:
            c0 = graph.entities.label(nodes[-1])
        text = _rule_text(graph, rels[rng.integers(len(rels))], kind, steps, nodes, c0,
                          bool(rng.random() < 0.5))
        if text in seen:
            continue
        seen.add(text)
        texts.append(text)
    rules = []
    for i, text in enumerate(texts):
        predicted = int(rng.integers(1, 100))
        correct = int(rng.integers(0, predicted + 1))
        rules.append(parse_rule(text, predicted, correct, correct / predicted, rule_id=i))
    return RuleSet(rules)


def structured_dataset(seed: int = 0, n_entities: int = 1000, n_relations: int = 10,
                       n_triples: int = 10000, valid_frac: float = 0.05, test_frac: float = 0.05):
    """Graph with compositional regularities, split into train/valid/test label triples.

    Half of the relations are random "base" relations; each remaining one
    is mostly the composition of two base relations, with some noise, plus
    a few hub entities that attract many links (material for AC rules).
    """
    rng = np.random.default_rng(seed)
    n_base = max(2, n_relations // 2)
    triples: set[tuple[int, int, int]] = set()
    hubs = rng.choice(n_entities, size=max(1, n_entities // 100), replace=False)
    base_target = int(n_triples * 0.55)
    while len(triples) < base_target:
        h = int(rng.integers(n_entities))
        r = int(rng.integers(n_base))
        t = int(hubs[rng.integers(hubs.size)]) if rng.random() < 0.15 else int(rng.integers(n_entities))
        if h != t:
            triples.add((h, r, t))
    out_edges: dict[tuple[int, int], list[int]] = {}
    for h, r, t in sorted(triples):
        out_edges.setdefault((h, r), []).append(t)
    derived = list(range(n_base, n_relations))
    recipes = {d: (int(rng.integers(n_base)), int(rng.integers(n_base))) for d in derived}
    heads = sorted({h for h, _, _ in triples})
    guard = 0
    while len(triples) < n_triples and guard < n_triples * 50:
        guard += 1
        d = derived[rng.integers(len(derived))]
        r1, r2 = recipes[d]
        h = heads[rng.integers(len(heads))]
        mids = out_edges.get((h, r1))
        if not mids or rng.random() < 0.1:
            t = int(rng.integers(n_entities))
        else:
            m = mids[rng.integers(len(mids))]
            ends = out_edges.get((m, r2))
            if not ends:
                continue
            t = ends[rng.integers(len(ends))]
        if t != h:
            triples.add((h, d, t))
    rows = sorted(triples)
    order = rng.permutation(len(rows))
    rows = [(f"e{h}", f"r{r}", f"e{t}") for h, r, t in (rows[i] for i in order)]
    n_valid = int(len(rows) * valid_frac)
    n_test = int(len(rows) * test_frac)
    train = rows[:len(rows) - n_valid - n_test]
    valid = rows[len(train):len(train) + n_valid]
    test = rows[len(train) + n_valid:]
    # keep only held-out triples whose entities and relation also occur in train
    seen_e = {x for h, _, t in train for x in (h, t)}
    seen_r = {r for _, r, _ in train}
    keep = lambda tr: tr[0] in seen_e and tr[2] in seen_e and tr[1] in seen_r  # noqa: E731
    return train, [tr for tr in valid if keep(tr)], [tr for tr in test if keep(tr)]


def _steps_from(graph: KnowledgeGraph, node: int):
    for rel in range(graph.num_relations):
        for fwd in (True, False):
            for nb in graph.adjacency(rel, fwd).get(node, ()):
                yield rel, fwd, nb


def _closing_paths(graph: KnowledgeGraph, h: int, t: int, head_rel: int, max_length: int):
    """Acyclic paths of length 1 or 2 from h to t, skipping the head triple itself."""
    out = []
    for rel, fwd, m in _steps_from(graph, h):
        if m == t and not (rel == head_rel and fwd):
            out.append(([h, t], [(rel, fwd)]))
        if max_length >= 2 and m not in (h, t):
            for rel2, fwd2, e in _steps_from(graph, m):
                if e == t:
                    out.append(([h, m, t], [(rel, fwd), (rel2, fwd2)]))
    return out


def mined_rules(graph: KnowledgeGraph, n_rules: int, seed: int = 0, max_length: int = 2,
                min_correct: int = 2) -> RuleSet:
    """Bottom-up style rules: generalise sampled paths behind train triples.

    Confidence is the share of a rule's solution set that is in train.
    """
    rng = np.random.default_rng(seed)
    kinds = ("C", "C", "AC1", "AC2")
    train_pairs: dict[int, set[int]] = {}
    n = graph.num_entities
    for h, r, t in graph.train.tolist():
        train_pairs.setdefault(r, set()).add(h * n + t)
    rules: list[Rule] = []
    seen: set[str] = set()
    tries = 0
    while len(rules) < n_rules and tries < n_rules * 40:
        tries += 1
        h, r, t = graph.train[rng.integers(len(graph.train))].tolist()
        kind = kinds[rng.integers(len(kinds))]
        length = int(rng.integers(1, max_length + 1))
        c0_first = bool(rng.random() < 0.5)
        var, c0 = (t, h) if c0_first else (h, t)
        if kind == "C":
            options = _closing_paths(graph, h, t, r, max_length)
            if not options:
                continue
            nodes, steps = options[rng.integers(len(options))]
        else:
            walked = _walk(rng, graph, var, length)
            if walked is None:
                continue
            nodes, steps = walked
        text = _rule_text(graph, graph.relations.label(r), kind, steps, nodes,
                          graph.entities.label(c0), c0_first)
        if text in seen:
            continue
        seen.add(text)
        try:
            rule = parse_rule(text, rule_id=len(rules))
        except Exception:
            continue
        ss = solution_set(rule, graph)
        predicted = ss.size
        correct = len(train_pairs.get(r, set()).intersection(ss.pairs.tolist()))
        if predicted == 0 or correct < min_correct:
            continue
        rules.append(parse_rule(text, predicted, correct, correct / predicted, rule_id=len(rules)))
    return RuleSet(rules)


def write_dataset(directory, train, valid, test, ruleset: RuleSet | None = None) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, rows in (("train", train), ("valid", valid), ("test", test)):
        p = directory / f"{name}.txt"
        p.write_text("".join(f"{h}\t{r}\t{t}\n" for h, r, t in rows), encoding="utf-8")
        paths[name] = p
    if ruleset is not None:
        p = directory / "rules.txt"
        p.write_text("".join(format_rule(r) + "\n" for r in ruleset), encoding="utf-8")
        paths["rules"] = p
    return paths
