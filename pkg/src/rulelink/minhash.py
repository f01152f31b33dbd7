"""MinHash signatures over integer-coded sets and Jaccard estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

#: Signature value reserved for the empty set. Hash outputs are 63-bit,
#: so no non-empty set can produce it.
EMPTY = np.uint64(0xFFFFFFFFFFFFFFFF)

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_CHUNK = 1 << 22  # hash values materialised per block


@dataclass(frozen=True)
class MinHashParams:
    k: int = 128
    seed: int = 42

    def __post_init__(self):
        if self.k < 1:
            raise ContractError(f"signature length must be >= 1, got {self.k}")

    def family(self) -> tuple[np.ndarray, np.ndarray]:
        """Odd multipliers and offsets of the k hash functions."""
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed & (2**64 - 1))))
        a = rng.integers(0, 2**64, size=self.k, dtype=np.uint64, endpoint=False) | np.uint64(1)
        b = rng.integers(0, 2**64, size=self.k, dtype=np.uint64, endpoint=False)
        return a, b


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finaliser; bijective on 64-bit words
    z ^= z >> np.uint64(30)
    z *= _M1
    z ^= z >> np.uint64(27)
    z *= _M2
    z ^= z >> np.uint64(31)
    z >>= np.uint64(1)
    return z


def hash_values(elements, params: MinHashParams) -> np.ndarray:
    """(k, n) matrix of hash values h_i(x) = mix(a_i * x + b_i)."""
    x = np.asarray(elements, dtype=np.int64).astype(np.uint64)
    a, b = params.family()
    with np.errstate(over="ignore"):
        return _mix(x[None, :] * a[:, None] + b[:, None])


def minhash_signature(elements, params: MinHashParams) -> np.ndarray:
    """Per-function minimum hash over ``elements``; all-``EMPTY`` for an empty set."""
    x = np.unique(np.asarray(list(elements) if isinstance(elements, (set, frozenset)) else elements,
                             dtype=np.int64))
    if x.size == 0:
        return np.full(params.k, EMPTY, dtype=np.uint64)
    step = max(1, _CHUNK // params.k)
    sig = np.full(params.k, EMPTY, dtype=np.uint64)
    for lo in range(0, x.size, step):
        np.minimum(sig, hash_values(x[lo:lo + step], params).min(axis=1), out=sig)
    return sig


def minhash_signatures(sets, params: MinHashParams) -> np.ndarray:
    """Signatures for many sets at once, shape (len(sets), k)."""
    arrays = [np.unique(np.asarray(list(s) if isinstance(s, (set, frozenset)) else s,
                                   dtype=np.int64)) for s in sets]
    out = np.full((len(arrays), params.k), EMPTY, dtype=np.uint64)
    batch: list[int] = []
    size = 0
    step = max(1, _CHUNK // params.k)

    def flush():
        nonlocal batch, size
        if not batch:
            return
        x = np.concatenate([arrays[i] for i in batch])
        starts = np.cumsum([0] + [arrays[i].size for i in batch[:-1]])
        h = hash_values(x, params)
        out[batch] = np.minimum.reduceat(h, starts, axis=1).T
        batch, size = [], 0

    for i, arr in enumerate(arrays):
        if arr.size == 0:
            continue
        if arr.size > step:
            out[i] = minhash_signature(arr, params)
            continue
        if size + arr.size > step:
            flush()
        batch.append(i)
        size += arr.size
    flush()
    return out


def is_empty_signature(sig: np.ndarray) -> bool:
    return bool(np.all(sig == EMPTY))


def estimate_jaccard(sig1: np.ndarray, sig2: np.ndarray) -> float:
    """Fraction of agreeing positions.

    Two empty-set signatures agree everywhere (1.0); an empty and a
    non-empty one nowhere (0.0).
    """
    if len(sig1) != len(sig2):
        raise ContractError(f"signature lengths differ: {len(sig1)} vs {len(sig2)}")
    return float(np.count_nonzero(np.asarray(sig1) == np.asarray(sig2))) / len(sig1)


def similarity_matrix(signatures: np.ndarray) -> np.ndarray:
    """Pairwise estimate_jaccard for the rows of ``signatures``, as float64."""
    sigs = np.asarray(signatures)
    n, k = sigs.shape
    out = np.empty((n, n), dtype=np.float64)
    rows = max(1, (1 << 24) // max(1, n * k))
    for lo in range(0, n, rows):
        block = sigs[lo:lo + rows]
        agree = (block[:, None, :] == sigs[None, :, :]).sum(axis=2)
        out[lo:lo + rows] = agree / k
    return out


def exact_jaccard(a, b) -> float:
    """|A & B| / |A | B|, with two empty sets counting as identical."""
    a, b = set(a), set(b)
    union = len(a | b)
    if union == 0:
        return 1.0
    return len(a & b) / union
