"""Entropy, time series, rankings, quartiles, vector fields, heat maps."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from patlas import portfolio
from patlas.entity import CreditLedger, CreditRow
from patlas.errors import PatlasError


def row(app, year, region="US", category="corporation", credits=(("E0", 1.0),), area=0):
    return CreditRow(app, year, region, category, tuple(credits), area)


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------

def test_entropy_point_mass_zero():
    assert portfolio.entropy([1, 0, 0, 0, 0, 0, 0]) == 0.0


def test_entropy_uniform_seven():
    assert portfolio.entropy([1 / 7] * 7) == pytest.approx(math.log(7), abs=1e-12)


def test_entropy_half_half():
    assert portfolio.entropy([0.5, 0.5, 0, 0, 0, 0, 0]) == pytest.approx(
        math.log(2), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=2, max_size=9),
       st.randoms(use_true_random=False))
def test_entropy_permutation_invariant_exact(weights, rnd):
    p = np.array(weights) / sum(weights)
    shuffled = list(p)
    rnd.shuffle(shuffled)
    assert portfolio.entropy(p) == portfolio.entropy(shuffled)


def test_entropy_max_iff_uniform():
    rng = np.random.default_rng(0)
    smax = portfolio.entropy([1 / 7] * 7)
    for _ in range(200):
        p = rng.dirichlet(np.ones(7))
        s = portfolio.entropy(p)
        assert s <= smax + 1e-12
        if abs(s - smax) < 1e-12:
            assert np.allclose(p, 1 / 7)


def test_entropy_negative_rejected():
    with pytest.raises(PatlasError):
        portfolio.entropy([-0.1, 1.1])


def _partitions(n, maxparts, maxval=None):
    if maxval is None:
        maxval = n
    if maxparts == 1:
        if n <= maxval:
            yield (n,)
        return
    for first in range(min(n, maxval), 0, -1):
        for rest in _partitions(n - first, maxparts - 1, first):
            yield (first,) + rest
        if n == first:
            yield (first,)


def test_entropy_finite_size_scale_for_20_patent_portfolios():
    # direct enumeration over all 20-patent compositions of <=7 areas: the
    # per-patent entropy change is quantized (bounded away from 0) and its
    # typical magnitude is the documented few-hundredths scale (~0.05)
    deltas = []
    for part in set(_partitions(20, 7)):
        s0 = portfolio.entropy(np.array(part) / 20)
        for k in range(len(part)):
            grown = list(part)
            grown[k] += 1
            s1 = portfolio.entropy(np.array(grown) / 21)
            d = abs(s1 - s0)
            if d > 1e-15:
                deltas.append(d)
        if len(part) < 7:
            s1 = portfolio.entropy(np.array(list(part) + [1]) / 21)
            deltas.append(abs(s1 - s0))
    deltas = np.array(deltas)
    assert deltas.min() > 1e-6
    assert 0.01 <= np.median(deltas) <= 0.1
    assert deltas.min() < 0.05 < deltas.max() < 0.25


# ---------------------------------------------------------------------------
# proportions and rankings
# ---------------------------------------------------------------------------

def test_proportions_single_patent():
    ledger = CreditLedger((row("A", 2010, area=2),))
    series = portfolio.proportions_timeseries(ledger)
    assert series["all"][2010]["proportions"] == {2: 1.0}


def test_proportions_sum_to_one_and_omit_empty_years():
    rng = np.random.default_rng(1)
    rows = [row(f"A{i}", int(rng.choice([2008, 2011])), area=int(rng.integers(0, 4)))
            for i in range(300)]
    series = portfolio.proportions_timeseries(CreditLedger(tuple(rows)))
    assert set(series["all"]) == {2008, 2011}
    for year, cell in series["all"].items():
        assert sum(cell["proportions"].values()) == pytest.approx(1.0, abs=1e-9)
        assert sum(cell["counts"].values()) == sum(
            1 for r in rows if r.year == year)


def test_proportions_planted_ramp_recovered():
    rng = np.random.default_rng(5)
    rows = []
    years = range(2008, 2018)
    for year in years:
        share = 0.05 + 0.45 * (year - 2008) / 9
        for i in range(250):
            area = 2 if rng.random() < share else int(rng.choice([0, 1, 3, 4, 5, 6]))
            rows.append(row(f"A{year}_{i}", year, area=area))
    series = portfolio.proportions_timeseries(CreditLedger(tuple(rows)))
    p2 = [series["all"][y]["proportions"].get(2, 0.0) for y in years]
    assert p2[-1] > p2[0] + 0.25
    assert np.mean(p2[5:]) > np.mean(p2[:5]) + 0.15


def test_proportions_group_by_category():
    rows = [row("A", 2010, category="university", area=0),
            row("B", 2010, category="corporation", area=1)]
    series = portfolio.proportions_timeseries(CreditLedger(tuple(rows)), "category")
    assert series["university"][2010]["proportions"] == {0: 1.0}
    assert series["corporation"][2010]["proportions"] == {1: 1.0}


def test_region_rankings_basic():
    rows = [row(f"A{i}", 2010, region="CN") for i in range(5)] + \
           [row(f"B{i}", 2010, region="US") for i in range(3)]
    ranks = portfolio.region_rankings(CreditLedger(tuple(rows)))
    assert ranks[2010] == [("CN", 5), ("US", 3)]


def test_region_rankings_planted_crossover():
    rows = []
    counts_a = {2008: 10, 2009: 8, 2010: 6, 2011: 4}
    counts_b = {2008: 4, 2009: 6, 2010: 8, 2011: 10}
    k = 0
    for year in counts_a:
        for _ in range(counts_a[year]):
            rows.append(row(f"A{k}", year, region="AA")); k += 1
        for _ in range(counts_b[year]):
            rows.append(row(f"B{k}", year, region="BB")); k += 1
    ranks = portfolio.region_rankings(CreditLedger(tuple(rows)))
    leaders = {year: ranks[year][0][0] for year in ranks}
    assert leaders == {2008: "AA", 2009: "AA", 2010: "BB", 2011: "BB"}


def test_region_totals_order_mirrors_aggregate_counts():
    planted = {"CN": 50384, "US": 26059, "KR": 15824, "JP": 12097,
               "DE": 3871, "GB": 2030}
    rows = []
    k = 0
    for region, count in planted.items():
        for _ in range(count):
            rows.append(row(f"P{k}", 2015, region=region)); k += 1
    totals = portfolio.region_totals(CreditLedger(tuple(rows)))
    assert [r for r, _ in totals] == ["CN", "US", "KR", "JP", "DE", "GB"]
    assert dict(totals) == planted


# ---------------------------------------------------------------------------
# trajectories, quartiles, fields
# ---------------------------------------------------------------------------

def traj(entity_id, points):
    return portfolio.PortfolioTrajectory(entity_id, tuple(points))


def test_build_trajectories_carry_forward():
    rows = [row("A", 2010, credits=(("E1", 1.0),), area=0),
            row("B", 2013, credits=(("E1", 1.0),), area=1)]
    trajs = portfolio.build_trajectories(CreditLedger(tuple(rows)), g=7)
    assert len(trajs) == 1
    t = trajs[0]
    years = [p[0] for p in t.points]
    assert years == [2010, 2011, 2012, 2013]
    credits = [p[1] for p in t.points]
    assert credits == [1.0, 1.0, 1.0, 2.0]  # non-decreasing, carried forward
    assert t.points[0][2] == 0.0
    assert t.points[-1][2] == pytest.approx(math.log(2), abs=1e-12)


def test_quartile_groups_explicit_percentile_oracle():
    trajs = [traj(f"E{i}", [(2017, c, 0.0)])
             for i, c in enumerate([1, 1, 2, 2, 3, 3, 4, 4])]
    groups = portfolio.quartile_groups(trajs, 2017)
    values = sorted([1, 1, 2, 2, 3, 3, 4, 4])
    q25 = np.percentile(values, 25)
    q75 = np.percentile(values, 75)
    for i, c in enumerate([1, 1, 2, 2, 3, 3, 4, 4]):
        want = "lower" if c < q25 else "upper" if c > q75 else "interquartile"
        assert groups[f"E{i}"] == want
    assert sum(1 for v in groups.values() if v == "lower") == 2
    assert sum(1 for v in groups.values() if v == "upper") == 2
    assert sum(1 for v in groups.values() if v == "interquartile") == 4


def test_quartile_groups_all_equal_interquartile():
    trajs = [traj(f"E{i}", [(2017, 5.0, 0.0)]) for i in range(6)]
    groups = portfolio.quartile_groups(trajs, 2017)
    assert set(groups.values()) == {"interquartile"}


def test_quartile_groups_too_few():
    trajs = [traj(f"E{i}", [(2017, 1.0 + i, 0.0)]) for i in range(3)]
    with pytest.raises(PatlasError):
        portfolio.quartile_groups(trajs, 2017)


def test_quartile_partition_complete():
    rng = np.random.default_rng(3)
    trajs = [traj(f"E{i}", [(2017, float(rng.integers(1, 50)), 0.0)]) for i in range(40)]
    groups = portfolio.quartile_groups(trajs, 2017)
    assert set(groups) == {t.entity_id for t in trajs}
    assert set(groups.values()) <= set(portfolio.GROUPS)


def test_vector_field_single_vector():
    t = traj("E1", [(2010, 1.0, 0.0), (2011, 2.0, 0.5)])
    field = portfolio.trajectories_and_vector_field([t], bins=4)
    assert field.total_vectors == 1
    i, j = np.argwhere(field.counts == 1)[0]
    assert field.mean_dx[i, j] == pytest.approx(math.log10(2.0) - math.log10(1.0))
    assert field.mean_dy[i, j] == pytest.approx(0.5)


def test_vector_field_constant_composition_zero_dy():
    rows = [row(f"A{y}", y, credits=(("E1", 1.0),), area=0) for y in range(2010, 2016)]
    trajs = portfolio.build_trajectories(CreditLedger(tuple(rows)), g=7)
    field = portfolio.trajectories_and_vector_field(trajs, bins=5)
    nz = field.counts > 0
    assert np.allclose(field.mean_dy[nz], 0.0)


def test_vector_field_conservation_and_terciles():
    rng = np.random.default_rng(8)
    trajs = []
    n_vec = 0
    for e in range(60):
        pts = []
        credit = 1.0
        s = 0.0
        for y in range(2004, 2004 + int(rng.integers(2, 10))):
            credit += float(rng.random() * 3)
            s = min(math.log(7), max(0.0, s + rng.normal(0, 0.1)))
            pts.append((y, credit, s))
        trajs.append(traj(f"E{e}", pts))
        n_vec += len(pts) - 1
    field = portfolio.trajectories_and_vector_field(trajs, bins=6)
    assert field.total_vectors == n_vec
    assert set(np.unique(field.density_class[field.counts > 0])) <= {0, 1, 2}
    assert np.all(field.density_class[field.counts == 0] == -1)


def test_vector_field_planted_specialization_negative_dy():
    rng = np.random.default_rng(11)
    trajs = []
    for e in range(50):
        pts = []
        s = 1.5
        for k, y in enumerate(range(2004, 2014)):
            pts.append((y, 1.0 + k, s))
            s = max(0.0, s - 0.12)
        trajs.append(traj(f"E{e}", pts))
    field = portfolio.trajectories_and_vector_field(trajs, bins=5)
    nz = field.counts > 0
    assert np.nanmean(field.mean_dy[nz]) < -0.05


def test_vector_field_relative_year_axis():
    t = traj("E1", [(2006, 1.0, 0.0), (2007, 2.0, 0.1)])
    field = portfolio.trajectories_and_vector_field([t], x_axis="relative_year",
                                                    bins=3, base_year=2004)
    i, j = np.argwhere(field.counts == 1)[0]
    assert field.mean_dx[i, j] == pytest.approx(1.0)


def test_heatmap_single_point_and_conservation():
    hm = portfolio.heatmap([(10.0, 0.5)], bins=5)
    assert hm.counts.sum() == 1
    rng = np.random.default_rng(2)
    pts = [(float(rng.uniform(1, 100)), float(rng.uniform(0, 1.9))) for _ in range(500)]
    for bins in (1, 3, 50):
        hm = portfolio.heatmap(pts, bins=bins)
        assert hm.counts.sum() == 500


def test_heatmap_two_blobs_high_density_classes():
    rng = np.random.default_rng(4)
    blob1 = [(float(np.exp(rng.normal(1, 0.05))), float(rng.normal(0.3, 0.01)))
             for _ in range(300)]
    blob2 = [(float(np.exp(rng.normal(4, 0.05))), float(rng.normal(1.5, 0.01)))
             for _ in range(300)]
    sparse = [(float(np.exp(rng.uniform(0, 5))), float(rng.uniform(0.01, 1.8)))
              for _ in range(60)]
    hm = portfolio.heatmap(blob1 + blob2 + sparse, bins=12)
    high = np.argwhere(hm.density_class == 2)
    assert len(high) >= 2
    spread = high.max(axis=0) - high.min(axis=0)
    assert spread.max() >= 5  # the two red regions sit far apart


def test_heatmap_rejects_nonpositive_credit():
    with pytest.raises(PatlasError):
        portfolio.heatmap([(0.0, 0.5)])
    with pytest.raises(PatlasError):
        portfolio.heatmap([], bins=5)


def test_avg_log_entropy_curves():
    t1 = traj("E1", [(2010, 1.0, 0.4), (2011, 2.0, 0.6)])
    t2 = traj("E2", [(2010, 1.0, 0.4), (2011, 2.0, 0.6)])
    groups = {"E1": "g", "E2": "g"}
    curves = portfolio.avg_log_entropy_curves([t1, t2], groups, [2010, 2011, 2012])
    assert curves["g"][2010] == pytest.approx(math.log10(0.4 + portfolio.EPS))
    assert curves["g"][2011] == pytest.approx(math.log10(0.6 + portfolio.EPS))
    assert 2012 not in curves["g"]


def test_avg_log_entropy_planted_contrast():
    # diversifying group ends above the specializing group
    up = [traj(f"U{i}", [(2004 + k, 1.0 + k, 0.2 + 0.12 * k) for k in range(10)])
          for i in range(10)]
    down = [traj(f"D{i}", [(2004 + k, 1.0 + k, max(0.0, 1.2 - 0.12 * k)) for k in range(10)])
            for i in range(10)]
    groups = {t.entity_id: ("up" if t.entity_id.startswith("U") else "down")
              for t in up + down}
    curves = portfolio.avg_log_entropy_curves(up + down, groups, range(2004, 2014))
    assert curves["up"][2013] > curves["down"][2013]


def test_portfolio_vector_validation():
    with pytest.raises(PatlasError):
        portfolio.portfolio_vector({9: 1.0}, g=7)
    with pytest.raises(PatlasError):
        portfolio.portfolio_vector({}, g=7)
    v = portfolio.portfolio_vector({0: 2.0, 3: 2.0}, g=7)
    assert v.sum() == pytest.approx(1.0)
    assert v[0] == v[3] == 0.5
