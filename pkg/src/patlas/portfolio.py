"""Portfolio composition, entropy, trajectories, and report aggregations.

An entity's portfolio over g technology areas is the vector of its credit
proportions p_0..p_{g-1}; its diversification is the natural-log Shannon
entropy S = -sum p_k ln p_k, between 0 (specialized) and ln g (uniform).
Display axes that need a log of something that can be zero use
log10(value + EPS) with EPS = 1e-3.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .entity import CreditLedger
from .errors import PatlasError

EPS = 1e-3
GROUPS = ("lower", "interquartile", "upper")
DENSITY_CLASSES = ("low", "intermediate", "high")


def portfolio_vector(credits_by_area: Mapping[int, float], g: int) -> np.ndarray:
    """Normalized proportion vector over areas 0..g-1."""
    weights = np.zeros(g, dtype=np.float64)
    for area, credit in credits_by_area.items():
        if not 0 <= int(area) < g:
            raise PatlasError(f"area {area} outside [0, {g})")
        weights[int(area)] += credit
    total = weights.sum()
    if total <= 0:
        raise PatlasError("portfolio has no credit")
    return weights / total


def entropy(p) -> float:
    """Natural-log entropy of a proportion vector; zero entries contribute 0.

    Terms are sorted before summation, so the result is exactly invariant
    under permutations of p.
    """
    arr = np.asarray(p, dtype=np.float64)
    if arr.size == 0:
        return 0.0
    if arr.min() < 0:
        raise PatlasError("proportions must be non-negative")
    pos = arr[arr > 0]
    if pos.size == 0:
        return 0.0
    terms = -pos * np.log(pos)
    return float(np.sum(np.sort(terms)))


# ---------------------------------------------------------------------------
# time series and rankings
# ---------------------------------------------------------------------------

def _group_key(row, group_by: str) -> str:
    if group_by == "none":
        return "all"
    if group_by == "region":
        return row.region
    if group_by == "category":
        return row.category
    raise PatlasError(f"group_by must be none/region/category, got {group_by!r}")


def proportions_timeseries(ledger: CreditLedger, group_by: str = "none"):
    """Per (group, year): patent counts per area and proportions summing to 1.

    Rows without an attached area are skipped; years with no patents are
    omitted.
    """
    counts: dict[str, dict[int, Counter]] = defaultdict(lambda: defaultdict(Counter))
    for row in ledger.rows:
        if row.area is None:
            continue
        counts[_group_key(row, group_by)][row.year][row.area] += 1
    out: dict[str, dict[int, dict]] = {}
    for group in sorted(counts):
        out[group] = {}
        for year in sorted(counts[group]):
            per_area = dict(sorted(counts[group][year].items()))
            total = sum(per_area.values())
            out[group][year] = {
                "counts": per_area,
                "proportions": {a: c / total for a, c in per_area.items()},
            }
    return out


def region_rankings(ledger: CreditLedger, area: int | None = None,
                    top_n: int = 10) -> dict[int, list[tuple[str, int]]]:
    """Per year, regions ranked by credited application count (desc, ties by
    region code), truncated to top_n. Bump-chart data."""
    per_year: dict[int, Counter] = defaultdict(Counter)
    for row in ledger.rows:
        if area is not None and row.area != area:
            continue
        per_year[row.year][row.region] += 1
    out = {}
    for year in sorted(per_year):
        ranked = sorted(per_year[year].items(), key=lambda kv: (-kv[1], kv[0]))
        out[year] = ranked[:top_n]
    return out


def region_totals(ledger: CreditLedger, area: int | None = None) -> list[tuple[str, int]]:
    """Aggregate credited application counts per region, ranked."""
    totals: Counter = Counter()
    for row in ledger.rows:
        if area is not None and row.area != area:
            continue
        totals[row.region] += 1
    return sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PortfolioTrajectory:
    """Per-entity yearly (accumulated credit, entropy) series.

    Entities enter at their first credited year; years without new credits
    carry the previous portfolio forward.
    """

    entity_id: str
    points: tuple[tuple[int, float, float], ...]  # (year, credit, entropy)

    def credit_at(self, year: int) -> float:
        credit = 0.0
        for y, c, _ in self.points:
            if y > year:
                break
            credit = c
        return credit


def build_trajectories(ledger: CreditLedger, g: int,
                       last_year: int | None = None) -> list[PortfolioTrajectory]:
    """Accumulate each entity's per-area credits year by year.

    Rows without an area are ignored (they carry no technology signal).
    Trajectories run from each entity's first credited year to ``last_year``
    (default: the ledger's latest year).
    """
    by_entity: dict[str, dict[int, dict[int, float]]] = defaultdict(lambda: defaultdict(dict))
    years = []
    for row in ledger.rows:
        if row.area is None:
            continue
        years.append(row.year)
        for entity_id, credit in row.credits:
            areas = by_entity[entity_id][row.year]
            areas[row.area] = areas.get(row.area, 0.0) + credit
    if not years:
        return []
    end = last_year if last_year is not None else max(years)
    out = []
    for entity_id in sorted(by_entity):
        yearly = by_entity[entity_id]
        start = min(yearly)
        acc = np.zeros(g, dtype=np.float64)
        points = []
        for year in range(start, end + 1):
            for area, credit in yearly.get(year, {}).items():
                acc[area] += credit
            total = acc.sum()
            points.append((year, float(total), entropy(acc / total)))
        out.append(PortfolioTrajectory(entity_id, tuple(points)))
    return out


def quartile_groups(trajectories: Iterable[PortfolioTrajectory],
                    as_of_year: int) -> dict[str, str]:
    """Split entities into lower / interquartile / upper groups by accumulated
    credit at ``as_of_year`` (25th/75th percentiles; both boundaries belong to
    the interquartile group). Needs >= 4 entities with positive credit."""
    credits = {t.entity_id: t.credit_at(as_of_year) for t in trajectories}
    credits = {e: c for e, c in credits.items() if c > 0}
    if len(credits) < 4:
        raise PatlasError("need at least 4 entities with positive credit")
    values = np.array(sorted(credits.values()))
    q25, q75 = np.percentile(values, [25, 75])
    out = {}
    for entity_id, credit in credits.items():
        if credit < q25:
            out[entity_id] = "lower"
        elif credit > q75:
            out[entity_id] = "upper"
        else:
            out[entity_id] = "interquartile"
    return out


# ---------------------------------------------------------------------------
# vector fields and heat maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VectorField:
    x_axis: str
    y_axis: str
    x_edges: np.ndarray
    y_edges: np.ndarray
    mean_dx: np.ndarray       # (bins, bins), nan where empty
    mean_dy: np.ndarray
    counts: np.ndarray        # displacement vectors binned by start point
    density_class: np.ndarray  # -1 empty, else 0/1/2 = low/intermediate/high

    @property
    def total_vectors(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class Heatmap2D:
    x_edges: np.ndarray
    y_edges: np.ndarray
    counts: np.ndarray
    density_class: np.ndarray
    n_points: int


def _edges(values: np.ndarray, bins: int) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def _bin_index(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.digitize(values, edges) - 1
    return np.clip(idx, 0, len(edges) - 2)


def _density_classes(counts: np.ndarray) -> np.ndarray:
    """Tercile classes over nonempty bins: 0 low, 1 intermediate, 2 high."""
    classes = np.full(counts.shape, -1, dtype=np.int8)
    filled = counts[counts > 0]
    if filled.size == 0:
        return classes
    q1, q2 = np.percentile(filled, [100 / 3, 200 / 3])
    nonzero = counts > 0
    classes[nonzero] = 1
    classes[nonzero & (counts <= q1)] = 0
    classes[nonzero & (counts > q2)] = 2
    return classes


def _coord(which: str, years, credits, entropies, base_year: int) -> np.ndarray:
    if which == "log_credit":
        return np.log10(credits)
    if which == "relative_year":
        return years - base_year
    if which == "entropy":
        return entropies
    if which == "log_entropy":
        return np.log10(entropies + EPS)
    raise PatlasError(f"unknown axis {which!r}")


def trajectories_and_vector_field(trajectories: Iterable[PortfolioTrajectory],
                                  x_axis: str = "log_credit",
                                  y_axis: str = "entropy",
                                  bins: int = 20,
                                  base_year: int = 2004) -> VectorField:
    """Yearly displacement vectors binned by start point; per bin the mean
    vector, the sample count, and a density tercile class."""
    if x_axis not in ("log_credit", "relative_year"):
        raise PatlasError(f"x_axis must be log_credit or relative_year, got {x_axis!r}")
    if y_axis not in ("entropy", "log_entropy"):
        raise PatlasError(f"y_axis must be entropy or log_entropy, got {y_axis!r}")
    starts_x, starts_y, dxs, dys = [], [], [], []
    for traj in trajectories:
        pts = traj.points
        if len(pts) < 2:
            continue
        years = np.array([p[0] for p in pts], dtype=np.float64)
        credits = np.array([p[1] for p in pts], dtype=np.float64)
        entropies = np.array([p[2] for p in pts], dtype=np.float64)
        xs = _coord(x_axis, years, credits, entropies, base_year)
        ys = _coord(y_axis, years, credits, entropies, base_year)
        starts_x.append(xs[:-1])
        starts_y.append(ys[:-1])
        dxs.append(np.diff(xs))
        dys.append(np.diff(ys))
    if not starts_x:
        raise PatlasError("no trajectories with at least two points")
    sx = np.concatenate(starts_x)
    sy = np.concatenate(starts_y)
    dx = np.concatenate(dxs)
    dy = np.concatenate(dys)

    x_edges = _edges(sx, bins)
    y_edges = _edges(sy, bins)
    xi = _bin_index(sx, x_edges)
    yi = _bin_index(sy, y_edges)
    counts = np.zeros((bins, bins), dtype=np.int64)
    sum_dx = np.zeros((bins, bins), dtype=np.float64)
    sum_dy = np.zeros((bins, bins), dtype=np.float64)
    np.add.at(counts, (xi, yi), 1)
    np.add.at(sum_dx, (xi, yi), dx)
    np.add.at(sum_dy, (xi, yi), dy)
    with np.errstate(invalid="ignore"):
        mean_dx = np.where(counts > 0, sum_dx / np.maximum(counts, 1), np.nan)
        mean_dy = np.where(counts > 0, sum_dy / np.maximum(counts, 1), np.nan)
    return VectorField(x_axis, y_axis, x_edges, y_edges, mean_dx, mean_dy,
                       counts, _density_classes(counts))


def heatmap(points: list[tuple[float, float]], bins: int = 50) -> Heatmap2D:
    """2D histogram of (credit, entropy) points on log10 axes.

    Credits must be positive (log axis); entropies may be zero thanks to the
    EPS offset. Total counts equal the number of points for any bin count.
    """
    if not points:
        raise PatlasError("no points to bin")
    if bins < 1:
        raise PatlasError("bins must be >= 1")
    credits = np.array([p[0] for p in points], dtype=np.float64)
    entropies = np.array([p[1] for p in points], dtype=np.float64)
    if credits.min() <= 0:
        raise PatlasError("credits must be positive on a log axis")
    xs = np.log10(credits)
    ys = np.log10(entropies + EPS)
    x_edges = _edges(xs, bins)
    y_edges = _edges(ys, bins)
    counts = np.zeros((bins, bins), dtype=np.int64)
    np.add.at(counts, (_bin_index(xs, x_edges), _bin_index(ys, y_edges)), 1)
    return Heatmap2D(x_edges, y_edges, counts, _density_classes(counts), len(points))


def avg_log_entropy_curves(trajectories: Iterable[PortfolioTrajectory],
                           groups: Mapping[str, str],
                           years: Iterable[int]) -> dict[str, dict[int, float]]:
    """Per-group, per-year mean of log10(entropy + EPS) over entities alive
    (credit > 0) that year. Empty group-years are absent."""
    years = sorted(set(int(y) for y in years))
    sums: dict[str, dict[int, list]] = defaultdict(lambda: defaultdict(list))
    for traj in trajectories:
        group = groups.get(traj.entity_id)
        if group is None:
            continue
        by_year = {p[0]: p for p in traj.points}
        for year in years:
            point = by_year.get(year)
            if point is not None and point[1] > 0:
                sums[group][year].append(np.log10(point[2] + EPS))
    return {
        group: {year: float(np.mean(vals)) for year, vals in sorted(per.items())}
        for group, per in sorted(sums.items())
    }


def entity_portfolios(ledger: CreditLedger, g: int) -> dict[str, dict[int, float]]:
    """Accumulated per-area credits per entity over the whole ledger."""
    out: dict[str, dict[int, float]] = defaultdict(dict)
    for row in ledger.rows:
        if row.area is None:
            continue
        for entity_id, credit in row.credits:
            areas = out[entity_id]
            areas[row.area] = areas.get(row.area, 0.0) + credit
    return dict(out)
