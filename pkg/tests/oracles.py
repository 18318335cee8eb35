"""Independent brute-force oracles shared by the test modules.

These deliberately recompute results along different paths than the library
(full-matrix DP, literal double sums, exhaustive scans, exact rationals).
"""

import itertools
from fractions import Fraction

import numpy as np


def lev_oracle(a: str, b: str) -> int:
    """Full-matrix DP, independent of the two-row implementations."""
    n, m = len(a), len(b)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[n][m]


def score_oracle(a: str, b: str) -> float:
    """The three similarity ratios recomputed by brute-force substring scans."""
    def normal(x, y):
        m = max(len(x), len(y))
        return 100.0 if m == 0 else 100.0 * (1 - lev_oracle(x, y) / m)

    def partial(x, y):
        if len(x) > len(y):
            x, y = y, x
        if len(x) == len(y):
            return normal(x, y)
        return max(100.0 * (1 - lev_oracle(x, y[s:s + len(x)]) / len(x))
                   for s in range(len(y) - len(x) + 1))

    sa = " ".join(sorted(a.split()))
    sb = " ".join(sorted(b.split()))
    return max(normal(a, b), partial(a, b), partial(sa, sb))


def modularity_fraction_oracle(dense, row_assign, col_assign) -> Fraction:
    """Literal double-sum of the modularity objective, in exact rationals."""
    dense = np.asarray(dense)
    n, d = dense.shape
    total = int(dense.sum())
    r = dense.sum(axis=1)
    c = dense.sum(axis=0)
    q = Fraction(0)
    for i in range(n):
        for j in range(d):
            if row_assign[i] == col_assign[j]:
                q += Fraction(int(dense[i, j])) - Fraction(int(r[i]) * int(c[j]), total)
    return q / total


def brute_force_modularity_max(dense, g=2) -> float:
    """Exhaustive maximum over every g^(rows+cols) assignment."""
    dense = np.asarray(dense, dtype=np.float64)
    n, d = dense.shape
    total = dense.sum()
    b = dense - np.outer(dense.sum(1), dense.sum(0)) / total
    best = -np.inf
    for ra in itertools.product(range(g), repeat=n):
        ra = np.array(ra)
        for ca in itertools.product(range(g), repeat=d):
            mask = ra[:, None] == np.array(ca)[None, :]
            best = max(best, float((b * mask).sum() / total))
    return best


def brute_force_modularity_max_batch(mats) -> np.ndarray:
    """Vectorized exhaustive g=2 maximum for a batch of same-shape matrices."""
    r, c = mats[0].shape
    a = np.array(mats, dtype=np.float64)
    total = a.sum(axis=(1, 2))
    b = a - a.sum(axis=2)[:, :, None] * a.sum(axis=1)[:, None, :] / total[:, None, None]
    ra = np.array(list(itertools.product((0, 1), repeat=r)))
    ca = np.array(list(itertools.product((0, 1), repeat=c)))
    masks = (ra[:, None, :, None] == ca[None, :, None, :]).reshape(-1, r, c)
    return (np.einsum('pij,nij->np', masks.astype(np.float64), b)
            / total[:, None]).max(axis=1)


def otsu_oracle(counts, edges) -> float:
    """Between-class variance at every cut, exact Fractions, middle tied cut."""
    total_n = sum(counts)
    best = None
    tied = []
    for k in range(len(counts) - 1):
        n0 = sum(counts[:k + 1])
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        mu0 = Fraction(sum(c * (2 * i + 1) for i, c in enumerate(counts[:k + 1])), n0)
        mu1 = Fraction(sum(c * (2 * i + 1)
                           for i, c in enumerate(counts[k + 1:], k + 1)), n1)
        bcv = Fraction(n0, total_n) * Fraction(n1, total_n) * (mu0 - mu1) ** 2
        if best is None or bcv > best:
            best = bcv
            tied = [k]
        elif bcv == best:
            tied.append(k)
    return float(edges[tied[len(tied) // 2] + 1])


def all_binary_matrices(r: int, c: int):
    """Every r x c binary matrix with no empty rows or columns."""
    n_bits = r * c
    ks = np.arange(n_bits)
    out = []
    for bits in range(1, 1 << n_bits):
        a = ((bits >> ks) & 1).astype(np.int8).reshape(r, c)
        if a.sum(1).min() == 0 or a.sum(0).min() == 0:
            continue
        out.append(a)
    return out


def identity_recovery(registry_name_to_entity, identity_of_name) -> float:
    """Fraction of names whose entity's majority planted identity matches
    their own planted identity (ties count as wrong)."""
    from collections import Counter

    members: dict = {}
    for name, ident in identity_of_name.items():
        members.setdefault(registry_name_to_entity.get(name), []).append(ident)
    majority = {}
    for eid, idents in members.items():
        top = Counter(idents).most_common(2)
        majority[eid] = top[0][0] if len(top) == 1 or top[0][1] > top[1][1] else None
    good = sum(1 for name, ident in identity_of_name.items()
               if majority.get(registry_name_to_entity.get(name)) == ident)
    return good / len(identity_of_name)
