"""Pure-Python kernel backend.

Mirrors the API of the compiled ``patlas._kernels`` extension. The similarity
primitives run on plain strings; the co-clustering sweeps are vectorized with
numpy. Both backends use exact integer arithmetic for assignment scores, so
they produce bit-identical results.
"""

from __future__ import annotations

import numpy as np

BACKEND = "py"


# ---------------------------------------------------------------------------
# string similarity
# ---------------------------------------------------------------------------

def levenshtein(a: str, b: str) -> int:
    """Plain edit distance (insert/delete/substitute, unit costs)."""
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    if la < lb:
        a, b, la, lb = b, a, lb, la
    prev = list(range(lb + 1))
    for i in range(la):
        ca = a[i]
        cur = [i + 1]
        append = cur.append
        for j in range(lb):
            append(min(prev[j + 1] + 1, cur[j] + 1, prev[j] + (ca != b[j])))
        prev = cur
    return prev[lb]


def _normal_ratio(a: str, b: str) -> float:
    m = max(len(a), len(b))
    if m == 0:
        return 100.0
    return 100.0 * (1.0 - levenshtein(a, b) / m)


def _partial_ratio(a: str, b: str) -> float:
    """Best normal ratio of the shorter string vs every equal-length window."""
    if len(a) > len(b):
        a, b = b, a
    ls, ll = len(a), len(b)
    if ls == 0:
        return 100.0
    if ls == ll:
        return _normal_ratio(a, b)
    best = 0.0
    for start in range(ll - ls + 1):
        d = levenshtein(a, b[start:start + ls])
        r = 100.0 * (1.0 - d / ls)
        if r > best:
            best = r
            if best == 100.0:
                break
    return best


def prepare_name(name: str) -> tuple[str, str]:
    """Precompute the (raw, token-sorted) forms used by pair scoring."""
    return name, " ".join(sorted(name.split()))


def score_one(a: tuple[str, str], b: tuple[str, str]) -> float:
    """max(normal ratio, partial ratio, partial token sort ratio) ∈ [0, 100]."""
    raw_a, srt_a = a
    raw_b, srt_b = b
    s = _normal_ratio(raw_a, raw_b)
    if s < 100.0:
        s = max(s, _partial_ratio(raw_a, raw_b))
    if s < 100.0:
        s = max(s, _partial_ratio(srt_a, srt_b))
    return s


def score_pairs(prepared: list, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    out = np.empty(len(left), dtype=np.float64)
    for k in range(len(left)):
        out[k] = score_one(prepared[left[k]], prepared[right[k]])
    return out


# ---------------------------------------------------------------------------
# co-clustering sweeps
# ---------------------------------------------------------------------------

def assign_sweep(indptr, indices, deg, other_assign, other_mass, total, assign, contrib):
    """Batch-reassign every item on one axis to its best cluster.

    Scores are the integer quantities total*count_k - deg_i*other_mass_k
    (the per-item modularity contribution scaled by total**2). Ties keep the
    current cluster when it attains the maximum, else take the lowest cluster
    id. Updates ``assign`` and ``contrib`` in place; returns the number of
    items moved.
    """
    n = assign.shape[0]
    g = other_mass.shape[0]
    if n == 0:
        return 0
    owner = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    labels = other_assign[indices].astype(np.int64)
    counts = np.bincount(owner * g + labels, minlength=n * g).reshape(n, g)
    scores = total * counts - deg[:, None] * other_mass[None, :]
    best = scores.max(axis=1)
    new = scores.argmax(axis=1).astype(np.int32)  # first max == lowest id
    cur = scores[np.arange(n), assign]
    keep = cur == best
    new[keep] = assign[keep]
    changed = int(np.count_nonzero(new != assign))
    assign[:] = new
    contrib[:] = best
    return changed


def member_contrib(indptr, indices, deg, other_assign, other_mass, total, assign, item):
    """Scaled modularity contribution of one item in its current cluster."""
    k = int(assign[item])
    count = int(np.count_nonzero(other_assign[indices[indptr[item]:indptr[item + 1]]] == k))
    return int(total) * count - int(deg[item]) * int(other_mass[k])


def inblock_count(indptr, indices, assign, other_assign) -> int:
    """Number of matrix entries whose row and column share a cluster."""
    n = assign.shape[0]
    owner = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    return int(np.count_nonzero(assign[owner] == other_assign[indices]))
