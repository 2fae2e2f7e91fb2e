import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import max_cut_oracle, naive_ground
from qatune.chimera import build_chimera, choi_clique_embedding, remove_qubits
from qatune.embedding import (
    Embedding,
    broken_chains,
    chain_spanning_edges,
    default_kappa_grid,
    embed,
    embed_state,
    embedding_problems,
    estimate_kappa0,
    find_embedding,
    format_embedding,
    is_valid_embedding,
    parse_embedding,
    read_embedding,
    unembed,
    unembed_states,
    write_embedding,
)
from qatune.errors import DegenerateInputError, EmbeddingMismatchError, ParseError
from qatune.exact import bipartite_ground, brute_force
from qatune.ising import Hamiltonian, energies, energy
from qatune.sampler import AnnealerConfig


def _path_embedding():
    # logical path 0-1-2 on C_1: chain {0,4} for var 0, {5} for var 1, {1} for var 2
    G = build_chimera(1)
    return Embedding({0: (0, 4), 1: (5,), 2: (1,)}, 3, G), G


def test_identity_embedding_is_valid():
    G = build_chimera(1)
    emb = Embedding({i: (q,) for i, q in enumerate([0, 4])}, 2, G)
    assert is_valid_embedding(emb, nx.path_graph(2))


def test_validator_reports_each_violation():
    G = build_chimera(1)
    overlap = Embedding({0: (0, 4), 1: (4,)}, 2, G)
    assert any("shared" in p for p in embedding_problems(overlap, []))
    disconnected = Embedding({0: (0, 1), 1: (4,)}, 2, G)
    assert any("disconnected" in p for p in embedding_problems(disconnected, []))
    no_edge = Embedding({0: (0,), 1: (1,)}, 2, G)
    assert any("no coupler" in p for p in embedding_problems(no_edge, [(0, 1)]))
    dead = Embedding({0: (0,), 1: (4,)}, 2, remove_qubits(G, [4]))
    assert any("inactive" in p for p in embedding_problems(dead, [(0, 1)]))


def test_embedding_requires_every_variable():
    with pytest.raises(ValueError):
        Embedding({0: (0,), 2: (1,)}, 2, build_chimera(1))


def test_find_embedding_k8_on_c2():
    emb = find_embedding(nx.complete_graph(8), build_chimera(2), seed=1)
    assert emb is not None
    assert is_valid_embedding(emb, nx.complete_graph(8))


def test_find_embedding_impossible_returns_none():
    assert find_embedding(nx.complete_graph(9), build_chimera(1), seed=0, max_tries=3) is None
    assert find_embedding(nx.complete_graph(40), build_chimera(2), seed=0) is None


def test_find_embedding_deterministic():
    g = nx.random_regular_graph(3, 12, seed=4)
    a = find_embedding(g, build_chimera(3), seed=9)
    b = find_embedding(g, build_chimera(3), seed=9)
    assert a == b


def test_find_embedding_empty_source():
    with pytest.raises(DegenerateInputError):
        find_embedding(nx.empty_graph(0), build_chimera(1))


@settings(max_examples=15)
@given(st.integers(4, 14), st.integers(0, 10_000))
def test_found_embeddings_pass_independent_validation(n, seed):
    g = nx.gnm_random_graph(n, min(2 * n, n * (n - 1) // 2), seed=seed)
    emb = find_embedding(g, build_chimera(4), seed=seed, max_tries=5)
    if emb is None:
        return
    # recheck with networkx rather than the package validator
    G = build_chimera(4).to_networkx()
    owner = {}
    for i, chain in emb.chains.items():
        assert nx.is_connected(G.subgraph(chain))
        for q in chain:
            assert q not in owner
            owner[q] = i
    for u, v in g.edges:
        assert any(G.has_edge(a, b) for a in emb.chains[u] for b in emb.chains[v])


def test_spanning_edges_form_tree():
    emb = choi_clique_embedding(3)
    for i, chain in emb.chains.items():
        edges = chain_spanning_edges(emb, i)
        assert len(edges) == len(chain) - 1
        t = nx.Graph(edges)
        t.add_nodes_from(chain)
        assert nx.is_tree(t)


def test_embed_single_edge():
    emb, _ = _path_embedding()
    H0 = Hamiltonian([0.4, 0.0, 0.0], {(0, 1): 1.0, (1, 2): -1.0})
    ep = embed(H0, emb, kappa=2.0)
    assert ep.hardware.is_hardware_ready
    assert ep.alpha == pytest.approx(0.5)
    # chain {0,4}: field split in half, one chain coupler at -kappa
    pos = emb.position
    assert ep.hardware.h[pos[0]] == pytest.approx(0.1)
    assert ep.hardware.h[pos[4]] == pytest.approx(0.1)
    assert ep.J_chain == {(pos[0], pos[4]): pytest.approx(-1.0)}


def test_embed_preserves_logical_energy_on_intact_chains():
    emb = choi_clique_embedding(2)
    rng = np.random.default_rng(0)
    J = {(i, j): float(rng.integers(-2, 3)) for i in range(8) for j in range(i + 1, 8)}
    J = {e: w for e, w in J.items() if w}
    H0 = Hamiltonian(rng.integers(-2, 3, size=8).astype(float), J)
    ep = embed(H0, emb, 3.0)
    for _ in range(20):
        s = rng.choice([-1, 1], size=8)
        hw = embed_state(s, emb)
        assert energy(ep.hardware, hw) / ep.alpha == pytest.approx(energy(H0, s) + ep.chain_offset)


def test_embed_mismatch():
    emb, _ = _path_embedding()
    far = Embedding({0: (0,), 1: (8,)}, 2, build_chimera(2))
    with pytest.raises(EmbeddingMismatchError):
        embed(Hamiltonian(np.zeros(2), {(0, 1): 1.0}), far, 1.0)
    with pytest.raises(EmbeddingMismatchError):
        embed(Hamiltonian(np.zeros(4)), emb, 1.0)


def test_unembed_policies():
    emb, _ = _path_embedding()
    pos = emb.position
    s = np.ones(emb.num_qubits, dtype=np.int8)
    assert unembed(s, emb).tolist() == [1, 1, 1]
    s[pos[4]] = -1
    assert broken_chains(s, emb) == {0}
    assert unembed(s, emb, "discard") is None
    out = unembed(s, emb, "majority_vote", rng=np.random.default_rng(0))
    assert out[1:].tolist() == [1, 1] and out[0] in (-1, 1)


def test_majority_vote_clear_majority():
    emb = choi_clique_embedding(2)  # chains of 3
    s = embed_state(np.array([1, -1, 1, -1, 1, -1, 1, -1]), emb)
    s[emb.chain_positions[0][0]] *= -1
    logical, ok = unembed_states(s[None, :], emb, "majority_vote")
    assert ok.all()
    assert logical[0].tolist() == [1, -1, 1, -1, 1, -1, 1, -1]
    _, ok = unembed_states(s[None, :], emb, "discard")
    assert not ok.any()


def test_unembed_unknown_policy():
    emb, _ = _path_embedding()
    with pytest.raises(ValueError):
        unembed_states(np.ones((1, emb.num_qubits)), emb, "vote")


def test_strong_chains_give_logical_ground_states():
    rng = np.random.default_rng(5)
    H0 = Hamiltonian(rng.integers(-1, 2, 8).astype(float),
                     {(i, j): float(rng.choice([-1, 1])) for i in range(8) for j in range(i + 1, 8)})
    emb = choi_clique_embedding(2)
    ep = embed(H0, emb, kappa=10.0)
    gs = bipartite_ground(ep.hardware, cap=4096)
    e0, logical = naive_ground(H0.h, H0.J)
    assert len(gs.states) == gs.degeneracy
    for s in gs.states:
        s0 = unembed(s, emb)
        assert s0 is not None
        assert energy(H0, s0) == pytest.approx(e0)
    assert gs.degeneracy == len(logical)


def test_embedding_text_round_trip(tmp_path):
    emb = choi_clique_embedding(2)
    assert parse_embedding(format_embedding(emb), emb.target) == emb
    write_embedding(emb, tmp_path / "e.txt")
    assert read_embedding(tmp_path / "e.txt", emb.target) == emb


def test_embedding_parse_errors():
    G = build_chimera(1)
    with pytest.raises(ParseError) as info:
        parse_embedding("0: 0 4\n1 5\n", G)
    assert info.value.lineno == 2
    with pytest.raises(ParseError):
        parse_embedding("0: 0\n0: 4\n", G)


def test_default_kappa_grid():
    grid = default_kappa_grid()
    assert grid[0] == 1.0 and grid[-1] == 10.0 and len(grid) == 19


def test_kappa0_singleton_chains_need_no_search():
    G = build_chimera(1)
    emb = Embedding({0: (0,), 1: (4,)}, 2, G)
    est = estimate_kappa0(Hamiltonian(np.zeros(2), {(0, 1): 1.0}), emb)
    assert est.kappa == 1.0 and not est.saturated


def test_kappa0_on_cubic_maxcut():
    from qatune.generators import gen_3mc

    H0, g = gen_3mc(8, seed=2)
    emb = find_embedding(H0, build_chimera(2), seed=0)
    est = estimate_kappa0(H0, emb, AnnealerConfig(sweeps_per_min_anneal=50, seed=1), reads=300)
    assert est.kappa <= 4.0 and not est.saturated
    ep = embed(H0, emb, est.kappa)
    from qatune.sampler import run

    ss = run(ep.hardware, 300, 1, AnnealerConfig(sweeps_per_min_anneal=50, seed=1))
    lowest = ss.states[np.argmin(ss.energies)]
    s0 = unembed(lowest, emb)
    assert s0 is not None
    assert -energy(H0, s0) <= max_cut_oracle(g)


def test_kappa0_rejects_bad_grid():
    emb = choi_clique_embedding(1)
    with pytest.raises(ValueError):
        estimate_kappa0(Hamiltonian(np.zeros(4)), emb, grid=[2.0, 1.0])


def test_brute_force_on_embedded_agrees_with_bipartite():
    emb, _ = _path_embedding()
    ep = embed(Hamiltonian([0.3, -0.2, 0.1], {(0, 1): 1.0, (1, 2): -1.0}), emb, 1.5)
    a = brute_force(ep.hardware)
    b = bipartite_ground(ep.hardware)
    assert a.energy == pytest.approx(b.energy) and a.degeneracy == b.degeneracy
    np.testing.assert_allclose(energies(ep.hardware, a.states), a.energy)


@pytest.mark.slow
@pytest.mark.parametrize("n, seed", [(10, 0), (10, 1), (16, 0), (16, 1)])
def test_kappa0_range_on_nae(n, seed):
    from qatune.generators import gen_nae
    from qatune.ice import IceModel

    H0, _, _ = gen_nae(n, seed=seed)
    emb = find_embedding(H0, build_chimera(4), seed=seed)
    est = estimate_kappa0(H0, emb, AnnealerConfig(seed=seed), ice=IceModel(seed=seed), reads=1000)
    assert 1.5 <= est.kappa <= 6.0 and not est.saturated
