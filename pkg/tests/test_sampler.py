import numpy as np
import pytest
from scipy import stats

from oracles import naive_ground
from qatune.chimera import choi_clique_embedding
from qatune.errors import ConfigError
from qatune.ice import IceModel
from qatune.ising import Hamiltonian, energies
from qatune.sampler import (
    AnnealerConfig,
    anneal_once,
    beta_schedule,
    chain_polarization,
    chain_shim,
    read_seeds,
    run,
    split_reads,
    total_time,
)


def test_total_time_examples():
    cfg = AnnealerConfig()
    assert total_time(1000, 10, cfg) == pytest.approx(0.436)
    assert total_time(1, 1, cfg) == pytest.approx(0.030136)
    slow = cfg.with_anneal_time(2 * cfg.t_f)
    assert total_time(100_000, 1, slow) - total_time(100_000, 1, cfg) == pytest.approx(2.0)
    assert total_time(1000, 10, cfg) - total_time(1000, 1, cfg) == pytest.approx(9 * cfg.t_p)


def test_anneal_time_floor():
    with pytest.raises(ConfigError):
        AnnealerConfig(t_f=10e-6)
    with pytest.raises(ConfigError):
        AnnealerConfig(sweeps_per_min_anneal=0)


def test_sweeps_scale_with_anneal_time():
    cfg = AnnealerConfig(sweeps_per_min_anneal=10)
    assert cfg.sweeps == 10
    assert cfg.with_anneal_time(4 * cfg.t_f).sweeps == 40


def test_beta_schedule_is_geometric():
    b = beta_schedule(0.1, 10.0, 5)
    assert b[0] == pytest.approx(0.1) and b[-1] == pytest.approx(10.0)
    np.testing.assert_allclose(b[1:] / b[:-1], b[1] / b[0])


def test_split_reads():
    assert split_reads(10, 3) == [4, 3, 3]
    assert sum(split_reads(1001, 10)) == 1001


def test_read_seeds_prefix_stable():
    assert np.array_equal(read_seeds((3, 1), 5), read_seeds((3, 1), 9)[:5])
    assert not np.array_equal(read_seeds((3, 1), 5), read_seeds((3, 2), 5))


def test_trivial_problem_samples_uniformly():
    H = Hamiltonian(np.zeros(3))
    ss = run(H, 4000, 1, AnnealerConfig(seed=2))
    assert np.all(ss.energies == 0.0)
    codes = ((ss.states + 1) // 2) @ np.array([1, 2, 4])
    counts = np.bincount(codes, minlength=8)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_two_spin_ferromagnet_mostly_aligned():
    H = Hamiltonian(np.zeros(2), {(0, 1): -1.0})
    ss = run(H, 1000, 1, AnnealerConfig(seed=0))
    assert np.mean(ss.energies == -1.0) >= 0.99


def test_anneal_once_deterministic():
    H = Hamiltonian([0.1, -0.2, 0.0], {(0, 1): 1.0, (1, 2): -0.5})
    a = anneal_once(H, 20, np.random.default_rng(7))
    b = anneal_once(H, 20, np.random.default_rng(7))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        anneal_once(H, 0, np.random.default_rng(0))


def test_long_anneal_finds_ground():
    rng = np.random.default_rng(11)
    n = 8
    J = {(i, j): float(rng.choice([-1, 1])) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.5}
    H = Hamiltonian(rng.uniform(-0.5, 0.5, n), J)
    e0, _ = naive_ground(H.h, H.J)
    ss = run(H, 500, 1, AnnealerConfig(sweeps_per_min_anneal=200, seed=1))
    assert ss.energies.min() == pytest.approx(e0)
    assert np.mean(np.isclose(ss.energies, e0)) > 0.5
    assert np.all(ss.energies >= e0 - 1e-9)


def test_sample_set_bookkeeping():
    H = Hamiltonian([0.3, -0.1, 0.2, 0.0], {(0, 1): 1.0, (2, 3): -1.0, (1, 3): 0.5})
    ss = run(H, 103, 10, AnnealerConfig(seed=4), IceModel(seed=1))
    assert len(ss) == 103 and ss.p == 10
    np.testing.assert_allclose(ss.energies, energies(H, ss.states))
    assert np.bincount(ss.gauge_index).tolist() == split_reads(103, 10)
    assert ss.accounted_time == pytest.approx(total_time(103, 10, AnnealerConfig()))


def test_identity_gauge_for_single_programming():
    ss = run(Hamiltonian(np.zeros(5)), 10, 1, AnnealerConfig())
    assert np.all(ss.gauges == 1)


def test_bad_read_counts():
    H = Hamiltonian(np.zeros(2))
    with pytest.raises(ValueError):
        run(H, 5, 10, AnnealerConfig())
    with pytest.raises(ValueError):
        run(H, 10, 2, AnnealerConfig(), gauges=np.ones((3, 2)))


@pytest.mark.parametrize("workers", [4, 8])
def test_results_independent_of_workers(workers):
    rng = np.random.default_rng(3)
    H = Hamiltonian(rng.normal(size=12), {(i, i + 1): 1.0 for i in range(11)})
    cfg = AnnealerConfig(seed=5)
    base = run(H, 200, 4, cfg, IceModel(seed=2), workers=1)
    assert run(H, 200, 4, cfg, IceModel(seed=2), workers=workers).digest() == base.digest()


def test_gauges_are_neutral_without_control_errors():
    # frustrated ring: gauges relabel the search space but leave the problem unchanged
    H = Hamiltonian(np.zeros(6), {(i, (i + 1) % 6): 1.0 for i in range(6)} | {(0, 3): 1.0})
    e0 = naive_ground(H.h, H.J)[0]
    cfg = AnnealerConfig(sweeps_per_min_anneal=3, seed=9)
    a = np.isclose(run(H, 4000, 1, cfg).energies, e0).sum()
    b = np.isclose(run(H, 4000, 10, cfg).energies, e0).sum()
    table = np.array([[a, 4000 - a], [b, 4000 - b]])
    assert stats.chi2_contingency(table).pvalue > 1e-3


def test_more_sweeps_help():
    from qatune.chimera import build_chimera
    from qatune.exact import bipartite_ground
    from qatune.generators import gen_fl

    H, _, _ = gen_fl(build_chimera(2), seed=3)
    e0 = bipartite_ground(H).energy
    rates = []
    for spm in (1, 10, 100):
        ss = run(H, 300, 1, AnnealerConfig(sweeps_per_min_anneal=spm, seed=0))
        rates.append(np.mean(np.isclose(ss.energies, e0)))
    assert rates[0] <= rates[1] <= rates[2]
    assert rates[2] > rates[0]


def test_unbiased_chains_stay_unpolarized():
    emb = choi_clique_embedding(2)
    res = chain_shim(emb, 1.0, AnnealerConfig(seed=0), None, iterations=2, reads=2000)
    assert np.all(np.abs(res.initial) < 0.1)
    assert np.all(np.abs(res.biases) < 0.02)


def test_shim_reduces_injected_bias():
    emb = choi_clique_embedding(2)
    bias = np.zeros(emb.num_qubits)
    for q in emb.chain_positions[0]:
        bias[q] = 0.05
    res = chain_shim(emb, 1.0, AnnealerConfig(seed=1), None, iterations=5, step=0.15, reads=4000, h_bias=bias)
    assert abs(res.final[0]) < 0.5 * abs(res.initial[0])
    # a positive field favours -1, so the compensation must be negative
    assert res.initial[0] < 0 and np.all(res.biases[emb.chain_positions[0]] < 0)


def test_chain_polarization_nan_for_always_broken():
    emb = choi_clique_embedding(1)
    states = np.ones((3, emb.num_qubits), dtype=np.int8)
    states[:, emb.chain_positions[0][0]] = -1
    m = chain_polarization(states, emb)
    assert np.isnan(m[0]) and np.all(m[1:] == 1.0)
