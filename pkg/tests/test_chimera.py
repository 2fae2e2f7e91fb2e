import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import chimera_oracle
from qatune.chimera import (
    ChimeraGraph,
    build_chimera,
    choi_chains,
    choi_clique_embedding,
    coordinates,
    format_working_graph,
    is_chimera_edge,
    linear_index,
    load_working_graph,
    random_yield,
    read_working_graph,
    remove_couplers,
    remove_qubits,
    synthesize_working_graph,
    write_working_graph,
)
from qatune.embedding import is_valid_embedding
from qatune.errors import GraphValidationError, InfeasibleError, ParseError


@pytest.mark.parametrize("k", [1, 2, 3, 4, 8])
def test_matches_networkx_oracle(k):
    G = build_chimera(k)
    oracle = chimera_oracle(k)
    assert set(G.qubits) == set(oracle.nodes)
    assert set(G.couplers) == {(min(u, v), max(u, v)) for u, v in oracle.edges}


@pytest.mark.parametrize("k, qubits, couplers", [(1, 8, 16), (2, 32, 80), (4, 128, 352), (8, 512, 1472)])
def test_counts(k, qubits, couplers):
    G = build_chimera(k)
    assert G.num_qubits == qubits
    assert G.num_couplers == couplers
    assert G.num_couplers == 24 * k * k - 8 * k


@pytest.mark.parametrize("k", [2, 3, 8])
def test_degree_profile(k):
    G = build_chimera(k)
    degrees = [G.degree(q) for q in G.qubits]
    assert degrees.count(5) == 16 * k
    assert degrees.count(6) == 8 * k * k - 16 * k
    assert sum(degrees) == 2 * G.num_couplers


def test_single_cell_is_k44():
    G = build_chimera(1)
    assert nx.is_isomorphic(G.to_networkx(), nx.complete_bipartite_graph(4, 4))


def test_chimera_is_bipartite():
    assert nx.is_bipartite(build_chimera(3).to_networkx())


@given(st.integers(1, 6), st.data())
def test_index_round_trip(k, data):
    q = data.draw(st.integers(0, 8 * k * k - 1))
    assert linear_index(k, *coordinates(k, q)) == q


def test_is_chimera_edge():
    assert is_chimera_edge(2, 0, 4)
    assert is_chimera_edge(2, 0, 16)       # vertical, row 0 -> row 1
    assert is_chimera_edge(2, 4, 12)       # horizontal, col 0 -> col 1
    assert not is_chimera_edge(2, 0, 1)
    assert not is_chimera_edge(2, 0, 8)
    assert not is_chimera_edge(2, 0, 999)


def test_invalid_k():
    with pytest.raises(ValueError):
        build_chimera(0)


def test_validation_rejects_foreign_coupler():
    with pytest.raises(GraphValidationError):
        ChimeraGraph(1, frozenset(range(8)), frozenset({(0, 1)}))
    with pytest.raises(GraphValidationError):
        ChimeraGraph(1, frozenset(range(7)), frozenset({(0, 7)}))


def test_removals():
    G = build_chimera(2)
    H = remove_qubits(G, [0])
    assert 0 not in H.qubits and all(0 not in c for c in H.couplers)
    assert H.num_couplers == G.num_couplers - G.degree(0)
    C = remove_couplers(G, [(0, 4)])
    assert not C.has_coupler(0, 4) and C.num_qubits == G.num_qubits
    assert not H.is_full and G.is_full


def test_random_yield_deterministic():
    G = build_chimera(4)
    a = random_yield(G, 10, seed=3)
    assert a == random_yield(G, 10, seed=3)
    assert a.num_qubits == G.num_qubits - 10


def test_v7_element_counts():
    G = synthesize_working_graph(8, 481, 1306, seed=1)
    assert G.num_qubits == 481
    assert G.num_couplers == 1306


def test_working_graph_round_trip(tmp_path):
    G = random_yield(build_chimera(3), 5, seed=0)
    assert load_working_graph(format_working_graph(G)) == G
    write_working_graph(G, tmp_path / "wg.txt")
    assert read_working_graph(tmp_path / "wg.txt") == G


def test_working_graph_errors():
    with pytest.raises(ParseError) as info:
        load_working_graph("chimera 1\nq 0\nz 1\n")
    assert info.value.lineno == 3
    with pytest.raises(GraphValidationError):
        load_working_graph("chimera 1\nq 0\nq 1\nc 0 1\n")
    with pytest.raises(ParseError):
        load_working_graph("q 0\n")


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_choi_clique(k):
    emb = choi_clique_embedding(k)
    assert emb.source_n == 4 * k
    assert emb.num_qubits == 4 * k * (k + 1)
    assert set(emb.chain_sizes) == {k + 1}
    assert is_valid_embedding(emb, nx.complete_graph(4 * k))


def test_choi_chains_are_disjoint():
    chains = choi_chains(3)
    flat = [q for c in chains.values() for q in c]
    assert len(flat) == len(set(flat))


def test_choi_on_damaged_graph():
    G = build_chimera(2)
    used = choi_chains(2)[0][0]
    with pytest.raises(InfeasibleError):
        choi_clique_embedding(2, remove_qubits(G, [used]))
    unused = sorted(set(G.qubits) - {q for c in choi_chains(2).values() for q in c})[0]
    assert choi_clique_embedding(2, remove_qubits(G, [unused])).num_qubits == 24


def test_adjacency_is_symmetric():
    G = build_chimera(2)
    rng = np.random.default_rng(0)
    for q in rng.choice(sorted(G.qubits), 10):
        for v in G.adjacency[int(q)]:
            assert int(q) in G.adjacency[v]
