"""Brute-force reference implementations used as test oracles.

These deliberately share no code with the package: they work on label
strings, enumerate every variable assignment over the full entity set and
check atoms against a plain set of triples.
"""

import re

_ATOM = re.compile(r"\s*([^(),\s]+)\(([^,()]+),([^,()]+)\)\s*")


def is_var(term):
    return re.fullmatch(r"[A-Z][0-9]*", term) is not None


def split_rule(text):
    head, body = text.split(" <= ")
    atoms = [_ATOM.fullmatch(a).groups() for a in re.findall(r"[^(),\s]+\([^()]*\)", body)]
    return _ATOM.fullmatch(head).groups(), atoms


def groundings(text, triples, entities):
    """All full variable assignments satisfying the body under Object Identity."""
    head, body = split_rule(text)
    order = []
    for atom in body + [head]:
        for term in atom[1:]:
            if is_var(term) and term not in order:
                order.append(term)
    consts = {t for atom in body + [head] for t in atom[1:] if not is_var(t)}
    pool = [e for e in entities if e not in consts]
    # an atom is checked at the depth where its last variable gets bound
    due = [[] for _ in range(len(order) + 1)]
    for rel, a, b in body:
        depth = max([order.index(t) + 1 for t in (a, b) if is_var(t)], default=0)
        due[depth].append((rel, a, b))
    out = []

    def holds(depth, env):
        return all((env.get(a, a), rel, env.get(b, b)) in triples for rel, a, b in due[depth])

    def extend(i, env):
        if not holds(i, env):
            return
        if i == len(order):
            out.append(dict(env))
            return
        used = set(env.values())
        for e in pool:
            if e not in used:
                env[order[i]] = e
                extend(i + 1, env)
                del env[order[i]]

    extend(0, {})
    return out


def solution_pairs(text, triples, entities):
    head, _ = split_rule(text)
    _, a, b = head
    return {(env.get(a, a), env.get(b, b)) for env in groundings(text, triples, entities)}


def apply_oracle(pairs, triples, relation, entity, predict):
    """Candidates of one rule, given its solution pairs, for (entity, relation, ?) or (?, relation, entity)."""
    if predict == "tail":
        cands = {t for h, t in pairs if h == entity}
        known = {t for h, r, t in triples if h == entity and r == relation}
    else:
        cands = {h for h, t in pairs if t == entity}
        known = {h for h, r, t in triples if t == entity and r == relation}
    return cands - known


def union_find_components(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), set()).add(i)
    return frozenset(frozenset(g) for g in groups.values())


def bottom_rank(scores, correct_index):
    """1-based rank of scores[correct_index] with the correct entity placed last among ties."""
    c = scores[correct_index]
    return 1 + sum(1 for i, s in enumerate(scores) if i != correct_index and s >= c)
