"""Rule-based link prediction over knowledge graphs.

Rules learned elsewhere (AnyBURL format) are grounded against the train
graph; redundant rules are grouped by MinHash-estimated overlap of their
solution sets, and candidates are ranked by noisy-or over per-cluster
maxima.
"""

from .aggregation import (CandidateRanking, aggregate_max, aggregate_noisy_or,
                          aggregate_nr_noisy_or)
from .clustering import ClusterAssignment, ThresholdSet, cluster_rules
from .evaluation import EvalReport, evaluate, rank_of_correct
from .graph import KnowledgeGraph, load_graph
from .inference import (CandidatePool, CompletionTask, InferenceEngine, SolutionSet, apply_rule,
                        generate_candidates, solution_set)
from .minhash import MinHashParams, estimate_jaccard, exact_jaccard, minhash_signature
from .rules import Rule, RuleSet, RuleType, classify, directly_redundant, parse_rule, parse_ruleset
from .search import SearchConfig, fitness, grid_search, random_search

__all__ = [
    "CandidatePool", "CandidateRanking", "ClusterAssignment", "CompletionTask", "EvalReport",
    "InferenceEngine", "KnowledgeGraph", "MinHashParams", "Rule", "RuleSet", "RuleType",
    "SearchConfig", "SolutionSet", "ThresholdSet", "aggregate_max", "aggregate_noisy_or",
    "aggregate_nr_noisy_or", "apply_rule", "classify", "cluster_rules", "directly_redundant",
    "estimate_jaccard", "evaluate", "exact_jaccard", "fitness", "generate_candidates",
    "grid_search", "load_graph", "minhash_signature", "parse_rule", "parse_ruleset",
    "random_search", "rank_of_correct", "solution_set",
]
