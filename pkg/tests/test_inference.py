import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from oracle import apply_oracle, solution_pairs

from rulelink.aggregation import aggregate_max
from rulelink.errors import ContractError
from rulelink.graph import KnowledgeGraph
from rulelink.inference import (CompletionTask, InferenceEngine, apply_rule, generate_candidates,
                                solution_set, tasks_from_triples)
from rulelink.rules import RuleSet, parse_rule
from rulelink.synthetic import random_graph, random_rules

CHAIN = "r(X,Y) <= s(X,A2), s(A2,Y)"


def task(graph, rel, entity, predict):
    return CompletionTask(graph.relations.id(rel), graph.entities.id(entity), predict)


def labels(graph, ids):
    return {graph.entities.label(e) for e in ids}


def label_pairs(graph, ss):
    lab = graph.entities.label
    return {(lab(h), lab(t)) for h, t in ss.decode(graph.num_entities)}


def train_labels(graph):
    return {graph.triple_labels(*row) for row in graph.train.tolist()}


def test_chain_rule_tail_task(chain_graph):
    rule = parse_rule(CHAIN, 2, 1, 0.5)
    assert labels(chain_graph, apply_rule(rule, task(chain_graph, "r", "a", "tail"), chain_graph)) == {"c"}


def test_chain_rule_no_path(chain_graph):
    rule = parse_rule(CHAIN, 2, 1, 0.5)
    assert apply_rule(rule, task(chain_graph, "r", "d", "tail"), chain_graph) == set()


def test_body_relation_without_train_triples(chain_graph):
    # "r" only occurs in valid, so a body over r never grounds
    rule = parse_rule("s(X,Y) <= r(X,Y)", 1, 1, 1.0)
    for e in chain_graph.entities.labels:
        for d in ("head", "tail"):
            assert apply_rule(rule, task(chain_graph, "s", e, d), chain_graph) == set()


def test_train_answers_are_filtered(toy_graph):
    # r(a,c) is in train, so the chain rule proposes nothing new for (a, r, ?)
    rule = parse_rule(CHAIN, 2, 1, 0.5)
    assert apply_rule(rule, task(toy_graph, "r", "a", "tail"), toy_graph) == set()
    assert label_pairs(toy_graph, solution_set(rule, toy_graph)) == {("a", "c")}


def test_solution_set_of_chain(chain_graph):
    assert label_pairs(chain_graph, solution_set(parse_rule(CHAIN), chain_graph)) == {("a", "c")}


def test_solution_set_empty_when_end_constant_unreached(chain_graph):
    rule = parse_rule("r(a,X) <= s(X,a)")
    ss = solution_set(rule, chain_graph)
    assert ss.size == 0


def test_relation_mismatch_is_contract_error(chain_graph):
    rule = parse_rule(CHAIN, 2, 1, 0.5)
    with pytest.raises(ContractError):
        apply_rule(rule, task(chain_graph, "s", "a", "tail"), chain_graph)


def test_redundant_drug_rules_share_solution_sets():
    # serotonin grounds the first pair, the DAO / D-alanine link the second
    g = KnowledgeGraph([
        ("serotonin", "drug_activation_gene", "HTR1A"),
        ("serotonin", "drug_reaction_gene", "HTR2A"),
        ("D-alanine", "drug_catalysis_gene", "DAO"),
        ("DAO", "gene_drug", "aspirin"),
    ])
    r1 = parse_rule("drug_reaction_gene(X,Y) <= drug_activation_gene(X,Y)")
    r2 = parse_rule("drug_reaction_gene(serotonin,Y) <= drug_activation_gene(serotonin,Y)")
    r3 = parse_rule("gene_drug(X,D-alanine) <= drug_catalysis_gene(D-alanine,X)", rule_id=0)
    r4 = parse_rule("gene_drug(DAO,Y) <= drug_catalysis_gene(Y,DAO)", rule_id=1)
    assert label_pairs(g, solution_set(r1, g)) == label_pairs(g, solution_set(r2, g)) == {("serotonin", "HTR1A")}
    assert label_pairs(g, solution_set(r3, g)) == label_pairs(g, solution_set(r4, g)) == {("DAO", "D-alanine")}
    # both answer (DAO, gene_drug, ?) with D-alanine
    t = CompletionTask(g.relations.id("gene_drug"), g.entities.id("DAO"), "tail")
    eng = InferenceEngine(g, RuleSet([r3, r4]))
    assert labels(g, eng.apply(0, t)) == labels(g, eng.apply(1, t)) == {"D-alanine"}


def test_object_identity_blocks_repeated_entities():
    # the only 2-step path from a returns to a, so X and Y would coincide
    g = KnowledgeGraph([("a", "s", "b"), ("b", "s", "a"), ("a", "r", "z")])
    assert solution_set(parse_rule("r(X,Y) <= s(X,A2), s(A2,Y)"), g).size == 0
    # X may not take the constant's value, and A2 may not either
    g2 = KnowledgeGraph([("a", "s", "a2"), ("b", "s", "a"), ("c", "s", "d"), ("a", "r", "z")])
    pairs = label_pairs(g2, solution_set(parse_rule("r(a,X) <= s(X,A2)"), g2))
    assert pairs == {("a", "c")}


def test_ac_rule_constant_side_and_variable_side():
    g = KnowledgeGraph([("x1", "s", "c"), ("x2", "s", "c"), ("x3", "s", "d")], valid=[("h", "r", "x1")])
    rule = parse_rule("r(h,X) <= s(X,c)", 4, 2, 0.5)
    eng = InferenceEngine(g, [rule])
    # known entity is the head constant: the rule proposes every X value
    assert labels(g, eng.apply(0, task(g, "r", "h", "tail"))) == {"x1", "x2"}
    # known entity binds X: the rule proposes only the constant
    assert labels(g, eng.apply(0, task(g, "r", "x1", "head"))) == {"h"}
    assert eng.apply(0, task(g, "r", "x3", "head")) == set()
    # wrong side for the constant
    assert eng.apply(0, task(g, "r", "h", "head")) == set()


def test_candidate_pool_counts(chain_graph):
    rules = [parse_rule(CHAIN, 2, 1, 0.5, rule_id=0),
             parse_rule("r(X,Y) <= s(X,Y)", 4, 1, 0.25, rule_id=1)]
    pool = generate_candidates(RuleSet(rules), task(chain_graph, "r", "a", "tail"), chain_graph)
    props = {chain_graph.entities.label(e): p for e, p in pool.proposals.items()}
    assert set(props) == {"b", "c", "d"}
    assert [r for r, _ in props["c"]] == [0]
    assert [r for r, _ in props["b"]] == [1]


def test_two_rules_proposing_overlap():
    g = KnowledgeGraph([("a", "s", "b"), ("b", "s", "c"), ("a", "t", "c"), ("a", "t", "b")],
                       valid=[("a", "r", "c")])
    rules = RuleSet([parse_rule(CHAIN, 2, 1, 0.5, rule_id=0),
                     parse_rule("r(X,Y) <= t(X,Y)", 3, 1, 1 / 3, rule_id=1)])
    pool = generate_candidates(rules, task(g, "r", "a", "tail"), g)
    counts = {g.entities.label(e): len(p) for e, p in pool.proposals.items()}
    assert counts == {"c": 2, "b": 1}


def test_empty_ruleset_gives_empty_pool(chain_graph):
    pool = generate_candidates(RuleSet([]), task(chain_graph, "r", "a", "tail"), chain_graph)
    assert len(pool) == 0


def test_max_mode_rejects_k_zero(chain_graph):
    with pytest.raises(ContractError):
        generate_candidates(RuleSet([parse_rule(CHAIN, 2, 1, 0.5)]),
                            task(chain_graph, "r", "a", "tail"), chain_graph, ("max", 0))


def test_max_mode_can_skip_low_rules():
    g = KnowledgeGraph([("a", "s", "b"), ("a", "t", "c")], valid=[("a", "r", "b")])
    rules = RuleSet([parse_rule("r(X,Y) <= s(X,Y)", 10, 9, 0.9, rule_id=0),
                     parse_rule("r(X,Y) <= t(X,Y)", 10, 1, 0.1, rule_id=1)])
    t = task(g, "r", "a", "tail")
    full = generate_candidates(rules, t, g)
    early = generate_candidates(rules, t, g, ("max", 1))
    assert aggregate_max(early).top(1).entries == aggregate_max(full).top(1).entries
    assert len(early) < len(full)


def _check_against_oracle(graph, ruleset):
    triples = train_labels(graph)
    ents = list(graph.entities.labels)
    eng = InferenceEngine(graph, ruleset)
    for rule in ruleset:
        expected = solution_pairs(rule.text, triples, ents)
        assert label_pairs(graph, solution_set(rule, graph)) == expected, rule.text
        rel = graph.relations.id(rule.relation)
        for e in ents:
            for d in ("head", "tail"):
                got = labels(graph, eng.apply(rule.id, CompletionTask(rel, graph.entities.id(e), d)))
                assert got == apply_oracle(expected, triples, rule.relation, e, d), (rule.text, e, d)


@pytest.mark.parametrize("seed", range(6))
def test_grounding_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    graph = random_graph(rng, int(rng.integers(5, 25)), int(rng.integers(1, 5)), int(rng.integers(10, 120)))
    _check_against_oracle(graph, random_rules(rng, graph, 25))


def test_c_rule_solution_set_matches_application():
    rng = np.random.default_rng(11)
    graph = random_graph(rng, 20, 3, 90)
    rules = random_rules(rng, graph, 30, kinds=("C",))
    eng = InferenceEngine(graph, rules)
    n = graph.num_entities
    for rule in rules:
        pairs = solution_set(rule, graph).decode(n)
        rel = graph.relations.id(rule.relation)
        for h in range(n):
            got = eng.apply(rule.id, CompletionTask(rel, h, "tail"))
            want = {t for hh, t in pairs if hh == h} - graph.answers(rel, h, "tail", ("train",))
            assert got == want


def _rankings_agree(graph, ruleset, k):
    eng = InferenceEngine(graph, ruleset)
    for t in tasks_from_triples(graph.train):
        full = aggregate_max(eng.candidates(t, "all")).top(k).entries
        early = aggregate_max(eng.candidates(t, "max", k)).top(k).entries
        assert early == full, t


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 5))
def test_early_termination_equals_full_inference(seed, k):
    rng = np.random.default_rng(seed)
    graph = random_graph(rng, 15, 2, 60)
    rules = random_rules(rng, graph, 20)
    # coarse confidences create many ties, the hard case for early stopping
    rules = RuleSet([parse_rule(r.text, 10, c, c / 10, rule_id=r.id)
                     for r, c in zip(rules, rng.integers(0, 11, len(rules)).tolist())])
    _rankings_agree(graph, rules, k)


def test_groundings_respect_object_identity():
    rng = np.random.default_rng(5)
    graph = random_graph(rng, 12, 2, 60)
    for rule in random_rules(rng, graph, 30):
        consts = set(rule.constants())
        for h, t in label_pairs(graph, solution_set(rule, graph)):
            if rule.kind.value == "C":
                assert h != t
            else:
                var = t if rule.constant_position == 0 else h
                assert var not in consts
