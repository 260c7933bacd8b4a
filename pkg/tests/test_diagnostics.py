import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isinglim import diagnostics as D
from isinglim import graphs as G
from isinglim import sampling as S
from isinglim import tree as T


def _exact_batch(g, beta, nsamples, seed=0):
    return S.sample_exact(g, T.IsingParams(g.k, beta), nsamples, seed=seed)


@st.composite
def prob_tables(draw):
    size = draw(st.sampled_from([2, 4, 8]))
    raw = draw(st.lists(st.floats(0.01, 1.0), min_size=size, max_size=size))
    arr = np.array(raw)
    return arr / arr.sum()


@settings(max_examples=50, deadline=None)
@given(prob_tables(), prob_tables(), prob_tables())
def test_tv_is_a_metric(p, q, r):
    if not (len(p) == len(q) == len(r)):
        return
    assert D.tv_distance(p, p) == 0.0
    assert 0 <= D.tv_distance(p, q) <= 1
    assert D.tv_distance(p, q) == D.tv_distance(q, p)
    assert D.tv_distance(p, r) <= D.tv_distance(p, q) + D.tv_distance(q, r) + 1e-12


def test_tv_extremes():
    point_x = np.array([1.0, 0.0, 0.0, 0.0])
    point_y = np.array([0.0, 0.0, 1.0, 0.0])
    uniform2 = np.array([0.5, 0.5, 0.0, 0.0])
    assert D.tv_distance(point_x, point_y) == 1.0
    assert D.tv_distance(uniform2, point_x) == 0.5
    with pytest.raises(ValueError):
        D.tv_distance(point_x, np.ones(8) / 8)


def test_empirical_ball_law_point_mass():
    g = G.petersen()
    spins = np.ones((1, 10), dtype=np.int8)
    batch = S.SampleBatch(spins, {"beta": 0.0, "B": 0.0})
    law = D.empirical_ball_law(batch, g, 0, 1)
    assert law.tree_shaped
    assert law.table[-1] == 1.0
    assert law.table.sum() == 1.0


def test_empirical_ball_law_beta_zero_near_uniform():
    g = G.petersen()
    law = D.empirical_ball_law(_exact_batch(g, 0.0, 100_000), g, 3, 1)
    assert D.tv_distance(law.table, np.full(16, 1 / 16)) < 0.02


def test_empirical_ball_law_matches_exact_marginal():
    g = G.petersen()
    beta = 0.5
    batch = _exact_batch(g, beta, 200_000, seed=3)
    law = D.empirical_ball_law(batch, g, 0, 1)
    dist = S.exact_distribution(g, T.IsingParams(3, beta))
    orders, _ = G.tree_ball_table(g, 1)
    idx = np.arange(1 << 10)
    codes = np.zeros(1 << 10, dtype=np.int64)
    for j, c in enumerate(orders[0]):
        codes |= (((idx >> int(c)) & 1) << j)
    exact = np.bincount(codes, weights=dist.probs, minlength=16)
    assert D.tv_distance(law.table, exact) < 0.01


def test_empty_batch_rejected():
    g = G.k4()
    batch = S.SampleBatch(np.empty((0, 4), dtype=np.int8), {})
    with pytest.raises(ValueError):
        D.empirical_ball_law(batch, g, 0, 1)


def test_mode_statistics_on_exact_batch():
    # Petersen radius-1 balls are all tree-shaped, so mode A compares the
    # vertex-averaged empirical law directly with the tree marginal
    g = G.petersen()
    beta = 1.0
    p = T.IsingParams(3, beta)
    batch = _exact_batch(g, beta, 50_000, seed=5)
    ref = T.mixture_marginal(p, 1)
    mode_a = D.mode_A_statistic(batch, g, 1, ref)
    tvs, exceed = D.mode_C_statistic(batch, g, 1, ref, eps=0.5)
    assert 0 <= mode_a <= 1
    assert mode_a <= tvs.mean() + 1e-12  # averaging can only help
    assert exceed in (0.0, 1.0) or 0 <= exceed <= 1
    # non-tree balls contribute their full mass: radius-2 balls on Petersen
    mode_a2 = D.mode_A_statistic(batch, g, 2, T.mixture_marginal(p, 2))
    assert mode_a2 == 1.0
    tvs2, exceed2 = D.mode_C_statistic(batch, g, 2, T.mixture_marginal(p, 2), eps=0.5)
    assert (tvs2 == 1.0).all() and exceed2 == 1.0


def test_mode_a_bounded_by_mode_c_plus_nontree():
    g = G.generate_random_regular(60, 3, 2)
    batch = S.sample_unconditioned(g, T.IsingParams(3, 0.8), 2000, thin=5, seed=7)
    ref = T.mixture_marginal(T.IsingParams(3, 0.8), 2)
    counts, mask = D.ball_pattern_counts(batch, g, 2)
    mode_a = D.mode_A_from_counts(counts, mask, len(batch), g.n, ref.table())
    tvs, _ = D.mode_C_from_counts(counts, mask, len(batch), ref.table(), 0.1)
    non_tree = 1.0 - mask.mean()
    assert mode_a <= tvs.mean() + non_tree + 1e-12


def test_reference_validation():
    g = G.petersen()
    batch = _exact_batch(g, 0.5, 100)
    with pytest.raises(ValueError):
        D.mode_A_statistic(batch, g, 1, T.mixture_marginal(T.IsingParams(3, 0.5), 2))
    with pytest.raises(ValueError):
        D.mode_A_statistic(batch, g, 1, T.mixture_marginal(T.IsingParams(4, 0.5), 1))


def test_edge_agreement_exact_oracle():
    g = G.petersen()
    beta = 0.5
    batch = _exact_batch(g, beta, 100_000, seed=9)
    ea, se = D.edge_agreement(batch, g)
    dist = S.exact_distribution(g, T.IsingParams(3, beta))
    idx = np.arange(1 << 10)
    exact = 0.0
    for i, j in g.edges:
        si = ((idx >> int(i)) & 1) * 2 - 1
        sj = ((idx >> int(j)) & 1) * 2 - 1
        exact += float(np.dot(dist.probs, si * sj))
    exact /= g.num_edges
    assert se > 0
    assert abs(ea - exact) < 4 * se


def test_edge_agreement_trivials():
    g = G.k4()
    batch = _exact_batch(g, 0.0, 50_000, seed=1)
    ea, se = D.edge_agreement(batch, g)
    assert abs(ea) < 4 * max(se, 1e-4)
    point = S.SampleBatch(np.ones((10, 4), dtype=np.int8), {})
    ea, se = D.edge_agreement(point, g)
    assert ea == 1.0 and se == 0.0


def test_edge_agreement_invariant_under_conditioning():
    g = G.petersen()
    batch = _exact_batch(g, 1.0, 50_000, seed=2)
    cond = S.sample_conditioned_plus(batch)
    ea, se = D.edge_agreement(batch, g)
    ea_c, se_c = D.edge_agreement(cond, g)
    assert abs(ea - ea_c) <= 2 * (se + se_c)


def test_f_indicator_trivials():
    g = G.petersen()
    all_plus = S.SpinConfig.from_spins(np.ones(10, dtype=np.int8))
    all_minus = S.SpinConfig.from_spins(-np.ones(10, dtype=np.int8))
    assert D.f_indicator(all_plus, g, 0, 1, 0.5) == 0
    assert D.f_indicator(all_minus, g, 0, 1, 0.5) == 1
    # balanced ball: B_0(1) = {0,1,4,5}; two plus and two minus
    spins = -np.ones(10, dtype=np.int8)
    spins[[0, 1]] = 1
    half = S.SpinConfig.from_spins(spins)
    assert D.f_indicator(half, g, 0, 1, 0.25) == 0


def test_f_census_and_disagreement():
    g = G.petersen()
    all_plus = S.SpinConfig.from_spins(np.ones(10, dtype=np.int8))
    all_minus = S.SpinConfig.from_spins(-np.ones(10, dtype=np.int8))
    assert D.f_census(all_plus, g, 1, 0.5) == 0.0
    assert D.f_census(all_minus, g, 1, 0.5) == 1.0
    assert D.f_disagreement(all_plus, g, 1, 0.5) == 0.0
    spins = np.ones(10, dtype=np.int8)
    spins[5:] = -1
    mixed = S.SpinConfig.from_spins(spins)
    assert 0 <= D.f_disagreement(mixed, g, 1, 0.3) <= 1


def test_f_census_markov_bound_on_exact_batches():
    # configurations with nonnegative magnetization obey the census bound with
    # finite-size slack 2/n when every ball is tree-shaped (radius 1 here)
    g = G.petersen()
    p = T.IsingParams(3, 1.0)
    delta = T.root_magnetization(p) / 2
    bound = 1.0 / (1.0 + delta / 2.0) + 2.0 / g.n
    batch = _exact_batch(g, 1.0, 20_000, seed=4)
    keep = batch.magnetizations >= 0
    fractions = D._census_fractions(batch.spins[keep], g, 1, delta)
    assert fractions.max() <= bound


def test_q_hat_requires_conditioned_batch():
    g = G.petersen()
    batch = _exact_batch(g, 1.0, 100)
    with pytest.raises(ValueError):
        D.q_hat(batch, g, 1, 0.4)
    cond = S.sample_conditioned_plus(batch)
    val = D.q_hat(cond, g, 1, 0.4)
    assert 0 <= val <= 1


def test_anticoncentration_exact_k4():
    g = G.k4()
    batch = _exact_batch(g, 0.0, 200_000, seed=8)
    # at beta = 0 the magnetization is binomial: sup_m P(M=m) = C(4,2)/16
    stat = D.anticoncentration(batch, g)
    iset = len(G.greedy_independent_set(g))
    assert iset == 1
    assert stat == pytest.approx((6 / 16) * math.sqrt(iset), abs=0.01)


def test_anticoncentration_binomial_scaling():
    for n, seed in ((100, 0), (400, 1)):
        g = G.generate_random_regular(n, 3, seed)
        batch = _exact_batch_beta_zero(g, 40_000, seed)
        stat = D.anticoncentration(batch, g)
        iset = len(G.greedy_independent_set(g))
        predicted = _binomial_sup(n) * math.sqrt(iset)
        assert stat == pytest.approx(predicted, rel=0.15)


def _exact_batch_beta_zero(g, nsamples, seed):
    rng = np.random.default_rng(seed)
    spins = np.where(rng.random((nsamples, g.n)) < 0.5, 1, -1).astype(np.int8)
    return S.SampleBatch(spins, {"beta": 0.0, "B": 0.0, "conditioned": False})


def _binomial_sup(n):
    from scipy.stats import binom

    ks = np.arange(n + 1)
    return float(binom.pmf(ks, n, 0.5).max())


def test_anticoncentration_degenerate_flagged():
    g = G.k4()
    point = S.SampleBatch(np.ones((50, 4), dtype=np.int8), {})
    with pytest.warns(UserWarning):
        stat = D.anticoncentration(point, g)
    assert stat == pytest.approx(math.sqrt(1))


def test_local_average_variance():
    g = G.petersen()
    batch = _exact_batch(g, 0.0, 50_000, seed=3)
    const = D.local_average_variance(batch, g, lambda row, i, ball: 1.0)
    assert const == 0.0
    v = D.local_average_variance(batch, g, "center_spin")
    assert v == pytest.approx(1.0 / g.n, rel=0.05)  # iid spins
    va = D.local_average_variance(batch, g, "ball_agreement")
    assert va > 0
    with pytest.raises(ValueError):
        D.local_average_variance(batch, g, "nope")


def test_report_writers_deterministic(tmp_path):
    rep = D.ConvergenceReport(
        label="x", n=10, beta=0.5, t=1, nsamples=100,
        mode_A_tv=0.125, mode_C_exceed_fraction=0.5, mode_C_epsilon=0.05,
        mode_C_tv_per_vertex=np.array([0.1, 0.2]),
        edge_agreement=0.3, edge_agreement_stderr=0.01,
        extra={"q_series": [0.1, 0.2]},
    )
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    D.dump_json(rep.to_json_dict(), p1)
    D.dump_json(rep.to_json_dict(), p2)
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text()
    assert '"mode_A_tv":0.125' in text
    D.reports_to_csv([rep], tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert len(lines) == 2
    assert "mode_A_tv" in lines[0]


def test_format_float_17_digits_roundtrip():
    vals = [1 / 3, 0.1, math.pi, 1e-17, 123456.789]
    for v in vals:
        assert float(D.format_float(v)) == v
