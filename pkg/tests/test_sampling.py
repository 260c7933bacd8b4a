import math

import numpy as np
import pytest

from isinglim import _kernels
from isinglim import graphs as G
from isinglim import sampling as S
from isinglim.diagnostics import empirical_state_distribution, tv_distance
from isinglim.tree import IsingParams, NonzeroFieldError, SizeLimitError
from oracles import raw_graph_table


def test_exact_distribution_beta_zero_uniform():
    d = S.exact_distribution(G.k4(), IsingParams(3, 0.0))
    assert np.allclose(d.probs, 1 / 16, atol=1e-15)
    assert d.log_z == pytest.approx(4 * math.log(2), abs=1e-12)


def test_exact_distribution_k4_all_plus():
    beta = 0.8
    d = S.exact_distribution(G.k4(), IsingParams(3, beta))
    z = sum(math.exp(beta * (6 - 2 * c * (4 - c)))
            for x in range(16) for c in [bin(x).count("1")])
    assert d.probs[15] == pytest.approx(math.exp(6 * beta) / z, rel=1e-12)
    assert d.log_z == pytest.approx(math.log(z), rel=1e-12)


def test_exact_distribution_matches_raw_oracle():
    g = G.petersen()
    p = IsingParams(3, 0.5)
    d = S.exact_distribution(g, p)
    raw = raw_graph_table([tuple(e) for e in g.edges], 10, 0.5)
    assert np.abs(d.probs - raw).max() < 1e-15
    assert abs(d.probs.sum() - 1.0) < 1e-12


def test_exact_distribution_with_field():
    g = G.k4()
    p = IsingParams(3, 0.4, B=0.3)
    d = S.exact_distribution(g, p)
    raw = raw_graph_table([tuple(e) for e in g.edges], 4, 0.4, B=0.3)
    assert np.abs(d.probs - raw).max() < 1e-15


def test_exact_distribution_flip_symmetric_at_zero_field():
    d = S.exact_distribution(G.petersen(), IsingParams(3, 1.0))
    assert np.array_equal(d.probs, d.probs[::-1])


def test_exact_distribution_size_limit():
    g = G.generate_random_regular(26, 3, 0)
    with pytest.raises(SizeLimitError):
        S.exact_distribution(g, IsingParams(3, 0.5))


def test_log_partition():
    assert S.log_partition(G.k4(), IsingParams(3, 0.0)) == pytest.approx(4 * math.log(2))


def test_degree_mismatch_rejected():
    with pytest.raises(ValueError):
        S.exact_distribution(G.k4(), IsingParams(4, 0.5))


def test_seed_determinism_bit_identical():
    g = G.petersen()
    p = IsingParams(3, 0.8)
    b1 = S.sample_unconditioned(g, p, 200, algorithm="wolff", seed=11)
    b2 = S.sample_unconditioned(g, p, 200, algorithm="wolff", seed=11)
    assert np.array_equal(b1.spins, b2.spins)
    b3 = S.sample_unconditioned(g, p, 200, algorithm="wolff", seed=12)
    assert not np.array_equal(b1.spins, b3.spins)


def test_backends_produce_identical_chains():
    try:
        compiled = _kernels.get_backend("compiled")
    except ImportError:
        pytest.skip("compiled backend unavailable")
    pure = _kernels.get_backend("pure")
    g = G.petersen()
    indptr, indices = g.csr()
    for algo in ("glauber", "wolff"):
        results = []
        for be in (compiled, pure):
            rng = np.random.default_rng(99)
            spins = np.where(rng.random(g.n) < 0.5, 1, -1).astype(np.int8)
            out = np.empty((64, g.n), dtype=np.int8)
            stream = be.make_stream(rng)
            if algo == "glauber":
                pplus = S._pplus_table(3, 0.9, 0.0)
                be.glauber_sample(spins, indptr, indices, pplus, 17, 3, out, stream)
            else:
                be.wolff_sample(spins, indptr, indices, 1 - math.exp(-1.8), 17, 3,
                                out, stream)
            results.append((out.copy(), spins.copy()))
        assert np.array_equal(results[0][0], results[1][0])
        assert np.array_equal(results[0][1], results[1][1])


def test_glauber_beta_zero_single_site_means():
    g = G.petersen()
    b = S.sample_unconditioned(g, IsingParams(3, 0.0), 20_000, algorithm="glauber",
                               burn_in=20, thin=2, seed=4)
    means = b.spins.mean(axis=0)
    assert np.abs(means).max() < 4.0 / math.sqrt(20_000 / 1.5)


def test_glauber_frozen_limit():
    g = G.k4()
    p = IsingParams(3, 10.0)
    state = S.init_chain(g, p, seed=0, init="all_plus")
    state = S.glauber_sweep(g, p, state, nsweeps=1000)
    assert state.config.magnetization == 4
    assert state.sweeps_done == 1000


def test_wolff_beta_zero_flips_exactly_one_site():
    g = G.petersen()
    p = IsingParams(3, 0.0)
    state = S.init_chain(g, p, seed=3)
    before = state.config.spins.copy()
    state = S.wolff_step(g, p, state)
    after = state.config.spins
    assert int(np.count_nonzero(before != after)) == 1


def test_wolff_magnetization_symmetry():
    g = G.petersen()
    b = S.sample_unconditioned(g, IsingParams(3, 1.0), 100_000, algorithm="wolff",
                               thin=9, seed=8)
    m = b.magnetizations
    assert abs(m.mean()) < 0.05 * np.abs(m).mean()


def test_wolff_rejects_field():
    g = G.k4()
    with pytest.raises(NonzeroFieldError):
        S.sample_unconditioned(g, IsingParams(3, 0.5, B=0.2), 10, algorithm="wolff")
    state = S.init_chain(g, IsingParams(3, 0.5), seed=0)
    with pytest.raises(NonzeroFieldError):
        S.wolff_step(g, IsingParams(3, 0.5, B=0.2), state)


def test_sampler_tv_quick():
    # quick version of the exact-oracle validation; the acceptance suite runs
    # the full-scale batches
    g = G.petersen()
    p = IsingParams(3, 0.7)
    dist = S.exact_distribution(g, p)
    for algo in ("glauber", "wolff"):
        b = S.sample_unconditioned(g, p, 100_000, algorithm=algo, thin=9, seed=5)
        assert tv_distance(empirical_state_distribution(b), dist.probs) < 0.03


def test_samplers_agree_with_each_other():
    # inter-sampler agreement on Petersen: the two chains target the same
    # measure, so their empirical state laws must meet at the noise floor
    g = G.petersen()
    for beta, seed in ((0.3, 21), (0.7, 22), (1.2, 23)):
        p = IsingParams(3, beta)
        kwargs_g = {"chains": 20_000} if beta >= 1.0 else {"thin": 10}
        bg = S.sample_unconditioned(g, p, 2_000_000, algorithm="glauber",
                                    seed=seed, **kwargs_g)
        bw = S.sample_unconditioned(g, p, 2_000_000, algorithm="wolff", thin=9,
                                    seed=seed + 100)
        tv = tv_distance(empirical_state_distribution(bg),
                         empirical_state_distribution(bw))
        assert tv < 0.015, (beta, tv)


def test_conditioned_flip_trick_unit():
    spins = np.array([[1, 1, 1, -1], [-1, -1, -1, 1], [1, 1, -1, -1]], dtype=np.int8)
    batch = S.SampleBatch(spins, {"beta": 0.5, "B": 0.0, "conditioned": False})
    cond = S.sample_conditioned_plus(batch)
    assert len(cond) == 2
    assert np.array_equal(cond.spins[0], [1, 1, 1, -1])
    assert np.array_equal(cond.spins[1], [1, 1, 1, -1])
    assert cond.meta["conditioned"] is True
    assert cond.meta["dropped_zero_magnetization"] == 1
    with pytest.raises(ValueError):
        S.sample_conditioned_plus(cond)
    bad = S.SampleBatch(spins, {"beta": 0.5, "B": 0.1, "conditioned": False})
    with pytest.raises(NonzeroFieldError):
        S.sample_conditioned_plus(bad)


def test_conditioned_exactness_quick():
    g = G.petersen()
    p = IsingParams(3, 1.0)
    d = S.exact_distribution(g, p)
    m = np.array([2 * bin(x).count("1") - 10 for x in range(1024)])
    cond_exact = np.where(m > 0, d.probs, 0.0)
    cond_exact /= cond_exact.sum()
    b = S.sample_conditioned_plus(S.sample_exact(g, p, 100_000, seed=6))
    assert tv_distance(empirical_state_distribution(b), cond_exact) < 0.02
    assert (b.magnetizations > 0).all()


def test_sample_exact_matches_distribution():
    g = G.k4()
    p = IsingParams(3, 0.6)
    d = S.exact_distribution(g, p)
    b = S.sample_exact(g, p, 200_000, seed=2)
    assert tv_distance(empirical_state_distribution(b), d.probs) < 0.01


def test_multichain_batches():
    g = G.petersen()
    p = IsingParams(3, 1.2)
    b1 = S.sample_unconditioned(g, p, 1000, algorithm="glauber", chains=100, seed=3)
    b2 = S.sample_unconditioned(g, p, 1000, algorithm="glauber", chains=100, seed=3)
    assert np.array_equal(b1.spins, b2.spins)
    assert b1.meta["chains"] == 100
    # phase weights are symmetric by construction
    frac_plus = (b1.magnetizations > 0).mean()
    assert 0.35 < frac_plus < 0.65


def test_spin_config_validation():
    with pytest.raises(ValueError):
        S.SpinConfig.from_spins([1, 0, -1])
    c = S.SpinConfig.from_spins([1, -1, 1, 1])
    assert c.magnetization == 2


def test_batch_csv_roundtrip(tmp_path):
    g = G.k4()
    b = S.sample_unconditioned(g, IsingParams(3, 0.5), 50, algorithm="glauber", seed=1)
    path = tmp_path / "batch.csv"
    S.save_batch_csv(b, path)
    b2 = S.load_batch_csv(path)
    assert np.array_equal(b.spins, b2.spins)
    assert b2.meta["beta"] == 0.5
    assert b2.meta["algorithm"] == "glauber"
    assert b2.meta["conditioned"] is False
    assert b2.meta["graph_hash"] == g.hash_hex()


def test_batch_npz_roundtrip(tmp_path):
    b = S.sample_unconditioned(G.k4(), IsingParams(3, 0.5), 50, seed=1)
    path = tmp_path / "batch.npz"
    S.save_batch_npz(b, path)
    b2 = S.load_batch_npz(path)
    assert np.array_equal(b.spins, b2.spins)
    assert b2.meta == b.meta


def test_batch_immutable():
    b = S.sample_unconditioned(G.k4(), IsingParams(3, 0.5), 10, seed=1)
    with pytest.raises(ValueError):
        b.spins[0, 0] = -b.spins[0, 0]
