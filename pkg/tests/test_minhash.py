import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rulelink.errors import ContractError
from rulelink.minhash import (EMPTY, MinHashParams, estimate_jaccard, exact_jaccard, is_empty_signature,
                              minhash_signature, minhash_signatures, similarity_matrix)

P = MinHashParams(128, 42)


def sets_with_jaccard(rng, j, size=200, universe=1 << 40):
    """Two random sets whose exact Jaccard is j (up to rounding of the overlap)."""
    shared = int(round(2 * size * j / (1 + j)))
    total = shared + 2 * (size - shared)
    elems = rng.choice(universe, size=total, replace=False)
    a = elems[:size]
    b = np.concatenate([elems[:shared], elems[size:size + size - shared]])
    return a, b


def test_exact_jaccard_examples():
    assert exact_jaccard({1, 2, 3}, {2, 3, 4}) == 0.5
    assert exact_jaccard({1, 5}, {1, 5}) == 1.0
    assert exact_jaccard({1}, set()) == 0.0
    assert exact_jaccard(set(), set()) == 1.0


def test_signatures_are_deterministic():
    s = [7, 11, 1 << 40]
    assert np.array_equal(minhash_signature(s, P), minhash_signature(s, MinHashParams(128, 42)))
    assert not np.array_equal(minhash_signature(s, P), minhash_signature(s, MinHashParams(128, 43)))


def test_signature_ignores_order_and_duplicates():
    assert np.array_equal(minhash_signature([3, 1, 2, 2], P), minhash_signature([1, 2, 3], P))


def test_singletons_estimate_one():
    assert estimate_jaccard(minhash_signature([5], P), minhash_signature([5], P)) == 1.0


def test_empty_set_sentinel():
    empty = minhash_signature([], P)
    assert is_empty_signature(empty) and np.all(empty == EMPTY)
    full = minhash_signature([1, 2], P)
    assert not is_empty_signature(full)
    # hash outputs are 63-bit, so they can never collide with the sentinel
    assert np.all(full < np.uint64(1 << 63))
    assert estimate_jaccard(empty, full) == 0.0
    assert estimate_jaccard(empty, minhash_signature([], P)) == 1.0


def test_length_mismatch_is_contract_error():
    with pytest.raises(ContractError):
        estimate_jaccard(minhash_signature([1], P), minhash_signature([1], MinHashParams(64, 42)))


def test_bad_params_rejected():
    with pytest.raises(ContractError):
        MinHashParams(0, 1)


def test_batch_equals_single():
    rng = np.random.default_rng(0)
    sets = [rng.integers(0, 10**9, rng.integers(0, 50)) for _ in range(30)]
    batch = minhash_signatures(sets, P)
    for row, s in zip(batch, sets):
        assert np.array_equal(row, minhash_signature(s, P))


def test_similarity_matrix_matches_pairwise():
    rng = np.random.default_rng(1)
    sigs = minhash_signatures([rng.integers(0, 30, 10) for _ in range(12)], P)
    m = similarity_matrix(sigs)
    for i in range(12):
        for j in range(12):
            assert m[i, j] == estimate_jaccard(sigs[i], sigs[j])


def test_half_overlap_within_tolerance_in_most_trials():
    rng = np.random.default_rng(7)
    hits = 0
    trials = 400
    for t in range(trials):
        a, b = sets_with_jaccard(rng, 0.5)
        assert exact_jaccard(a, b) == pytest.approx(0.5, abs=0.01)
        params = MinHashParams(128, t)
        est = estimate_jaccard(minhash_signature(a, params), minhash_signature(b, params))
        hits += abs(est - exact_jaccard(a, b)) <= 0.15
    assert hits / trials >= 0.99


def test_small_sets_mean_over_seeds():
    ests = [estimate_jaccard(minhash_signature([1, 2, 3], MinHashParams(128, s)),
                             minhash_signature([2, 3, 4], MinHashParams(128, s))) for s in range(200)]
    assert np.mean(ests) == pytest.approx(0.5, abs=0.1)


def test_disjoint_sets_estimate_near_zero():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = sets_with_jaccard(rng, 0.0, size=500)
        assert estimate_jaccard(minhash_signature(a, P), minhash_signature(b, P)) <= 0.05


@settings(max_examples=50, deadline=None)
@given(st.sets(st.integers(0, 2**62), max_size=40), st.sets(st.integers(0, 2**62), max_size=40))
def test_estimate_is_a_fraction_and_symmetric(a, b):
    sa, sb = minhash_signature(sorted(a), P), minhash_signature(sorted(b), P)
    est = estimate_jaccard(sa, sb)
    assert 0.0 <= est <= 1.0
    assert est == estimate_jaccard(sb, sa)
    if a == b:
        assert est == 1.0
