"""Diagonal block co-clustering by modularity maximization.

The objective is the degree-null modularity of a binary matrix A under a
joint row/column partition C:

    Q(A, C) = (1/T) * sum_ij (a_ij - r_i * c_j / T) * [row and col share a cluster]

with T the total entry count, r_i the row degrees, and c_j the column
degrees. Internally Q is held as the exact integer numerator
T*E_in - sum_k R_k*C_k over the denominator T**2, so trivial cases are exact
and tie-breaking never depends on float rounding.

Fitting alternates batch reassignment of all rows (given columns) and all
columns (given rows); each half-step maximizes Q over its own axis, so Q is
non-decreasing across sweeps except when an emptied cluster is reseeded to
preserve the requested cluster count.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import kernels
from .errors import PatlasError
from .ingest import SparseBinaryMatrix


@dataclass(frozen=True, eq=False)
class CoClustering:
    """A joint assignment of rows and columns to g clusters."""

    g: int
    row_assignment: np.ndarray  # int32, len n_rows
    col_assignment: np.ndarray  # int32, len n_cols
    modularity: float
    row_labels: tuple | None = None
    col_labels: tuple | None = None
    history: tuple[float, ...] = ()       # modularity after each sweep (best restart)
    reseed_sweeps: tuple[int, ...] = ()   # sweeps in which an empty cluster was reseeded

    def rows_of(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.row_assignment == cluster)

    def cols_of(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.col_assignment == cluster)

    def row_partition(self) -> dict:
        labels = self.row_labels if self.row_labels is not None else tuple(range(len(self.row_assignment)))
        return {labels[i]: int(k) for i, k in enumerate(self.row_assignment)}

    def col_partition(self) -> dict:
        labels = self.col_labels if self.col_labels is not None else tuple(range(len(self.col_assignment)))
        return {labels[j]: int(k) for j, k in enumerate(self.col_assignment)}


@dataclass(frozen=True)
class ModularityCurve:
    points: tuple[tuple[int, float], ...]  # (g, best modularity), g strictly increasing

    def plateau_g(self, gain: float = 0.02) -> int | None:
        """First g whose successive modularity gain falls below ``gain``."""
        for (g0, q0), (_, q1) in zip(self.points, self.points[1:]):
            if q1 - q0 < gain:
                return g0
        return None


@dataclass(frozen=True)
class OverlapMatrix:
    """f(k_l, k) = |intersection| / max(|left cluster|, |right cluster|)."""

    left_clusters: tuple[int, ...]
    right_clusters: tuple[int, ...]
    values: np.ndarray


@dataclass(frozen=True)
class SubsampleTrial:
    kept: tuple
    curve: ModularityCurve
    overlap_vs_full: OverlapMatrix
    modularity: float


# ---------------------------------------------------------------------------
# modularity
# ---------------------------------------------------------------------------

def _cluster_mass(assign: np.ndarray, deg: np.ndarray, g: int) -> np.ndarray:
    # float64 bincount is exact here: per-cluster degree sums are <= nnz << 2**53
    return np.bincount(assign, weights=deg, minlength=g).astype(np.int64)


def _modularity_num(m: SparseBinaryMatrix, row_assign, col_assign, g: int) -> int:
    e_in = int(kernels.inblock_count(m.indptr, m.indices, row_assign, col_assign))
    r_mass = _cluster_mass(row_assign, m.row_degrees.astype(np.int64), g)
    c_mass = _cluster_mass(col_assign, m.col_degrees, g)
    return m.nnz * e_in - int(r_mass @ c_mass)


def modularity_of(m: SparseBinaryMatrix, row_assignment, col_assignment) -> float:
    """Exact modularity of the given assignments (any non-negative labels)."""
    if m.nnz == 0:
        raise PatlasError("modularity undefined for an empty matrix")
    row_assign = np.ascontiguousarray(row_assignment, dtype=np.int32)
    col_assign = np.ascontiguousarray(col_assignment, dtype=np.int32)
    if row_assign.shape != (m.n_rows,) or col_assign.shape != (m.n_cols,):
        raise PatlasError("assignments must cover all rows and columns")
    if (row_assign.size and row_assign.min() < 0) or (col_assign.size and col_assign.min() < 0):
        raise PatlasError("cluster ids must be non-negative")
    g = int(max(row_assign.max(initial=0), col_assign.max(initial=0))) + 1
    return _modularity_num(m, row_assign, col_assign, g) / (m.nnz ** 2)


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------

def _reseed_empty(indptr, indices, deg, other_assign, other_mass, total, assign, contrib, g):
    """Move the worst-contribution members into clusters that lost everything.

    Donors must leave a cluster with >= 2 members so the repair cannot empty
    another cluster. Returns the number of members moved.
    """
    counts = np.bincount(assign, minlength=g)
    if counts.min() > 0:
        return 0
    order = np.argsort(contrib, kind="stable")
    pos = 0
    moved = 0
    for k in range(g):
        if counts[k] > 0:
            continue
        while pos < len(order):
            i = int(order[pos])
            pos += 1
            if counts[assign[i]] > 1:
                counts[assign[i]] -= 1
                counts[k] += 1
                assign[i] = k
                contrib[i] = kernels.member_contrib(
                    indptr, indices, deg, other_assign, other_mass, total, assign, i)
                moved += 1
                break
    return moved


def _enum_assignment(index: int, size: int, g: int) -> np.ndarray:
    """index written in base g, as an assignment vector of the given size."""
    out = np.empty(size, dtype=np.int32)
    for pos in range(size):
        out[pos] = index % g
        index //= g
    return out


def fit(m: SparseBinaryMatrix, g: int, seed: int = 0, max_iter: int = 100,
        restarts: int = 10) -> CoClustering:
    """Best-of-restarts alternating ascent.

    Each restart starts from a uniform random row assignment, initializes
    columns to their best clusters given the rows, then alternates full row
    and column reassignment sweeps until nothing changes or ``max_iter``
    sweeps have run. When g**min(n_rows, n_cols) <= restarts, the restart
    loop instead enumerates every assignment of the smaller axis, which makes
    the search exhaustive on tiny matrices (from an optimal assignment of one
    axis, a single sweep of the other axis reaches the optimum).

    A cluster that loses all rows (or all columns) is reseeded with the
    worst-contribution row (column) so the requested g is preserved. The
    returned clustering is the best state visited across all sweeps and
    restarts. Deterministic for fixed (matrix, g, seed, restarts, max_iter).
    """
    if m.nnz == 0:
        raise PatlasError("cannot fit an empty matrix")
    if g < 1 or g > min(m.n_rows, m.n_cols):
        raise PatlasError(f"g={g} out of range [1, {min(m.n_rows, m.n_cols)}]")
    if max_iter < 1 or restarts < 1:
        raise PatlasError("max_iter and restarts must be >= 1")
    n, d = m.n_rows, m.n_cols
    if g == 1:
        rows = np.zeros(n, dtype=np.int32)
        cols = np.zeros(d, dtype=np.int32)
        return CoClustering(1, rows, cols, modularity_of(m, rows, cols),
                            m.row_labels, m.col_labels)

    indptr, indices = m.indptr, m.indices
    cindptr, cindices = m.csc()
    row_deg = m.row_degrees.astype(np.int64)
    col_deg = m.col_degrees
    total = m.nnz
    rng = np.random.Generator(np.random.PCG64(seed))

    enum_size = min(n, d)
    enum_count = 0
    if enum_size * np.log2(g) <= 24 and g ** enum_size <= restarts:
        enum_count = g ** enum_size
    starts = enum_count if enum_count else restarts
    enum_rows = enum_count > 0 and n <= d

    best_num = None
    best = None
    for start in range(starts):
        if enum_count:
            seed_assign = _enum_assignment(start, enum_size, g)
            row_assign = seed_assign if enum_rows else np.zeros(n, dtype=np.int32)
            col_assign = np.zeros(d, dtype=np.int32) if enum_rows else seed_assign
        else:
            row_assign = rng.integers(0, g, size=n).astype(np.int32)
            col_assign = np.zeros(d, dtype=np.int32)
        row_contrib = np.zeros(n, dtype=np.int64)
        col_contrib = np.zeros(d, dtype=np.int64)

        run_num = None
        run_state = None

        def snapshot(num):
            nonlocal run_num, run_state
            if run_num is None or num > run_num:
                run_num = num
                run_state = (row_assign.copy(), col_assign.copy())

        if enum_count == 0 or enum_rows:
            # columns take their best clusters given the initial rows
            row_mass = _cluster_mass(row_assign, row_deg, g)
            kernels.assign_sweep(cindptr, cindices, col_deg, row_assign, row_mass,
                                 total, col_assign, col_contrib)
            _reseed_empty(cindptr, cindices, col_deg, row_assign, row_mass,
                          total, col_assign, col_contrib, g)
            snapshot(int(col_contrib.sum()))

        history: list[float] = []
        reseeds: list[int] = []
        for sweep in range(max_iter):
            col_mass = _cluster_mass(col_assign, col_deg, g)
            changed = kernels.assign_sweep(indptr, indices, row_deg, col_assign,
                                           col_mass, total, row_assign, row_contrib)
            snapshot(int(row_contrib.sum()))
            r_res = _reseed_empty(indptr, indices, row_deg, col_assign, col_mass,
                                  total, row_assign, row_contrib, g)
            if r_res:
                snapshot(int(row_contrib.sum()))
            row_mass = _cluster_mass(row_assign, row_deg, g)
            changed += kernels.assign_sweep(cindptr, cindices, col_deg, row_assign,
                                            row_mass, total, col_assign, col_contrib)
            snapshot(int(col_contrib.sum()))
            c_res = _reseed_empty(cindptr, cindices, col_deg, row_assign, row_mass,
                                  total, col_assign, col_contrib, g)
            if c_res:
                snapshot(int(col_contrib.sum()))
            changed += r_res + c_res
            history.append(int(col_contrib.sum()) / (total ** 2))
            if r_res or c_res:
                reseeds.append(sweep)
            if changed == 0:
                break

        if best_num is None or run_num > best_num:
            best_num = run_num
            best = (run_state[0], run_state[1], tuple(history), tuple(reseeds))

    row_assign, col_assign, history, reseeds = best
    return CoClustering(g, row_assign, col_assign, best_num / (total ** 2),
                        m.row_labels, m.col_labels, history, reseeds)


def modularity_curve(m: SparseBinaryMatrix, g_range, seed: int = 0,
                     restarts: int = 10, max_iter: int = 100) -> ModularityCurve:
    """Best-of-restarts modularity for each g in the (increasing) range."""
    gs = sorted(set(int(g) for g in g_range))
    if not gs:
        raise PatlasError("empty g range")
    points = []
    for g in gs:
        points.append((g, fit(m, g, seed=seed, restarts=restarts, max_iter=max_iter).modularity))
    return ModularityCurve(points=tuple(points))


# ---------------------------------------------------------------------------
# partition comparison
# ---------------------------------------------------------------------------

def _partition_of(obj, side: str) -> dict:
    if isinstance(obj, CoClustering):
        return obj.row_partition() if side == "rows" else obj.col_partition()
    if isinstance(obj, Mapping):
        return dict(obj)
    raise PatlasError("expected a CoClustering or a label->cluster mapping")


def overlap(left, right, side: str = "rows") -> OverlapMatrix:
    """Cluster-pair overlaps |A∩B| / max(|A|, |B|) between two partitions of
    the same universe."""
    if side not in ("rows", "cols"):
        raise PatlasError(f"side must be 'rows' or 'cols', got {side!r}")
    pl = _partition_of(left, side)
    pr = _partition_of(right, side)
    if set(pl) != set(pr):
        raise PatlasError("partitions cover different universes")
    sets_l: dict[int, set] = {}
    sets_r: dict[int, set] = {}
    for label, k in pl.items():
        sets_l.setdefault(int(k), set()).add(label)
    for label, k in pr.items():
        sets_r.setdefault(int(k), set()).add(label)
    kl = tuple(sorted(sets_l))
    kr = tuple(sorted(sets_r))
    values = np.zeros((len(kl), len(kr)), dtype=np.float64)
    for a, ka in enumerate(kl):
        for b, kb in enumerate(kr):
            inter = len(sets_l[ka] & sets_r[kb])
            values[a, b] = inter / max(len(sets_l[ka]), len(sets_r[kb]))
    return OverlapMatrix(kl, kr, values)


def sensitivity_subsample(m: SparseBinaryMatrix, axis: str, fraction: float = 0.9,
                          trials: int = 10, g: int = 7, seed: int = 0,
                          restarts: int = 10, max_iter: int = 100,
                          g_range=None) -> list[SubsampleTrial]:
    """Refit on random subsamples of one axis and compare with the full fit.

    Each trial keeps round(fraction * size) items of the chosen axis, refits,
    and reports a modularity curve (over ``g_range``, default just ``g``) plus
    the overlap between the trial clustering and the full-data clustering
    restricted to the surviving items.
    """
    if axis not in ("rows", "cols"):
        raise PatlasError(f"axis must be 'rows' or 'cols', got {axis!r}")
    if not 0.0 < fraction < 1.0:
        raise PatlasError("fraction must be in (0, 1)")
    if m.row_labels is None or m.col_labels is None:
        m = SparseBinaryMatrix(m.n_rows, m.n_cols, m.indptr, m.indices,
                               row_labels=tuple(range(m.n_rows)),
                               col_labels=tuple(range(m.n_cols)))
    full = fit(m, g, seed=seed, restarts=restarts, max_iter=max_iter)
    full_part = full.row_partition() if axis == "rows" else full.col_partition()
    size = m.n_rows if axis == "rows" else m.n_cols
    keep_count = int(round(fraction * size))
    if keep_count < 1:
        raise PatlasError("subsample would be empty")
    gs = tuple(sorted(set(int(x) for x in g_range))) if g_range is not None else (g,)

    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for _ in range(trials):
        kept_idx = np.sort(rng.choice(size, size=keep_count, replace=False))
        trial_seed = int(rng.integers(0, 2**31 - 1))
        sub = m.take_rows(kept_idx) if axis == "rows" else m.take_cols(kept_idx)
        if sub.nnz == 0:
            raise PatlasError("subsample produced an empty matrix")
        curve = modularity_curve(sub, gs, seed=trial_seed, restarts=restarts, max_iter=max_iter)
        trial_fit = fit(sub, g, seed=trial_seed, restarts=restarts, max_iter=max_iter)
        trial_part = trial_fit.row_partition() if axis == "rows" else trial_fit.col_partition()
        restricted = {label: full_part[label] for label in trial_part}
        ov = overlap(restricted, trial_part, side=axis)
        q_at_g = dict(curve.points)[g] if g in dict(curve.points) else trial_fit.modularity
        kept_labels = tuple(sorted(trial_part))
        out.append(SubsampleTrial(kept_labels, curve, ov, q_at_g))
    return out
