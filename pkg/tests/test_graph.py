import numpy as np
import pytest

from graphunlearn.errors import (ConfigError, DataError, MaskError, ShapeError)
from graphunlearn.graph import (PropagationConfig, build_graph,
                                normalized_adjacency, propagate,
                                propagation_column)

from conftest import (dense_operator, dense_pi, make_graph,
                      random_connected_graph)


# ---------------------------------------------------------------- build_graph

def test_build_empty_graph():
    g = make_graph(0, [], features=np.zeros((0, 3)))
    assert g.num_edges == 0
    assert g.num_classes == 0


def test_build_dedup_and_symmetrize():
    g = make_graph(4, [(0, 1), (1, 0), (0, 1), (2, 3)])
    assert g.num_edges == 2
    assert g.has_edge(0, 1) and g.has_edge(1, 0)
    assert g.has_edge(2, 3) and g.has_edge(3, 2)
    assert not g.has_edge(0, 2)


def test_edge_direction_is_irrelevant():
    a = make_graph(5, [(0, 1), (1, 2), (3, 4)])
    b = make_graph(5, [(1, 0), (2, 1), (4, 3)])
    assert np.array_equal(a.indptr, b.indptr)
    assert np.array_equal(a.indices, b.indices)


def test_self_loops_dropped_and_counted():
    g = make_graph(3, [(0, 0), (1, 1), (0, 1)])
    assert g.self_loops_dropped == 2
    assert g.num_edges == 1


def test_degrees_and_neighbors():
    g = make_graph(4, [(0, 1), (0, 2), (0, 3)])
    assert list(g.degrees()) == [3, 1, 1, 1]
    assert list(g.neighbors(0)) == [1, 2, 3]
    assert list(g.neighbors(2)) == [0]
    with pytest.raises(IndexError):
        g.neighbors(4)


def test_undirected_edges_listing():
    g = make_graph(4, [(2, 0), (3, 1)])
    assert g.undirected_edges().tolist() == [[0, 2], [1, 3]]


def test_build_rejects_bad_endpoint():
    with pytest.raises(IndexError):
        make_graph(3, [(0, 3)])
    with pytest.raises(IndexError):
        make_graph(3, [(-1, 0)])


def test_build_rejects_bad_features():
    with pytest.raises(ShapeError):
        build_graph(3, [], np.zeros((2, 4)))
    with pytest.raises(DataError):
        build_graph(2, [], np.array([[np.nan, 0.0], [0.0, 0.0]]))


def test_build_rejects_bad_labels_and_masks():
    with pytest.raises(ShapeError):
        make_graph(3, [], labels=np.array([0, 1]))
    with pytest.raises(DataError):
        make_graph(3, [], labels=np.array([0, -2, 1]))
    with pytest.raises(MaskError):
        make_graph(3, [], train=[0, 1], test=[1, 2])
    with pytest.raises(MaskError):
        make_graph(3, [], train=[0, 5])
    with pytest.raises(ConfigError):
        build_graph(-1, [], np.zeros((0, 1)))


def test_mask_from_id_list_matches_bool_mask():
    a = make_graph(4, [], train=[1, 3], test=[0])
    b = make_graph(4, [], train=np.array([False, True, False, True]),
                   test=np.array([True, False, False, False]))
    assert np.array_equal(a.train_mask, b.train_mask)
    assert np.array_equal(a.test_mask, b.test_mask)
    assert list(a.train_nodes()) == [1, 3]
    assert list(a.test_nodes()) == [0]


def test_graph_arrays_are_immutable(path3):
    with pytest.raises(ValueError):
        path3.features[0, 0] = 9.0
    with pytest.raises(ValueError):
        path3.indices[0] = 2


# ------------------------------------------------------- normalized adjacency

def test_isolated_node_operator_is_identity():
    g = make_graph(2, [])
    s = normalized_adjacency(g, r=0.5).matrix.toarray()
    assert np.allclose(s, np.eye(2))


def test_row_normalization_rows_sum_to_one():
    rng = np.random.default_rng(7)
    for n in (2, 5, 9):
        g = make_graph(n, random_connected_graph(rng, n), num_features=2)
        s = normalized_adjacency(g, r=1.0).matrix
        sums = np.asarray(s.sum(axis=1)).ravel()
        assert np.max(np.abs(sums - 1.0)) < 1e-12


def test_path3_symmetric_normalization_row():
    g = make_graph(3, [(0, 1), (1, 2)])
    s = normalized_adjacency(g, r=0.5).matrix.toarray()
    # hat degrees are [2, 3, 2]; middle row couples via 1/sqrt(6)
    expected = np.array([1.0 / np.sqrt(6), 1.0 / 3.0, 1.0 / np.sqrt(6)])
    assert np.allclose(s[1], expected, atol=1e-15)


def test_operator_matches_dense_reference_across_r():
    rng = np.random.default_rng(3)
    for n in (3, 6, 8):
        g = make_graph(n, random_connected_graph(rng, n), num_features=2)
        for r in (0.0, 0.25, 0.5, 0.75, 1.0):
            s = normalized_adjacency(g, r=r).matrix.toarray()
            assert np.allclose(s, dense_operator(g, r), atol=1e-12)


def test_operator_rejects_bad_exponent(path3):
    with pytest.raises(ConfigError):
        normalized_adjacency(path3, r=-0.1)
    with pytest.raises(ConfigError):
        normalized_adjacency(path3, r=1.5)


# ----------------------------------------------------------- weighting schemes

def test_sgc_weights():
    cfg = PropagationConfig.sgc(3)
    assert cfg.weights == (0.0, 0.0, 0.0, 1.0)


def test_s2gc_weights():
    cfg = PropagationConfig.s2gc(3)
    assert cfg.weights == (0.25, 0.25, 0.25, 0.25)


def test_gbp_weights():
    cfg = PropagationConfig.gbp(2, beta=0.5)
    assert np.allclose(cfg.weights, (0.5, 0.25, 0.125))
    with pytest.raises(ConfigError):
        PropagationConfig.gbp(2, beta=0.0)
    with pytest.raises(ConfigError):
        PropagationConfig.gbp(2, beta=1.5)


def test_custom_weights_and_validation():
    cfg = PropagationConfig.custom([0.5, 0.5])
    assert cfg.k == 1
    with pytest.raises(ConfigError):
        PropagationConfig(k=2, scheme="custom", weights=(1.0,))
    with pytest.raises(ConfigError):
        PropagationConfig(k=1, scheme="magic", weights=(0.5, 0.5))
    with pytest.raises(ConfigError):
        PropagationConfig(k=-1, scheme="custom", weights=())
    with pytest.raises(ConfigError):
        PropagationConfig.custom([1.0, np.inf])


# -------------------------------------------------------------------- propagate

def test_propagate_identity_weights(path3):
    op = normalized_adjacency(path3, r=1.0)
    cfg = PropagationConfig.custom([1.0])
    out = propagate(op, path3.features, cfg)
    assert np.allclose(out, path3.features)


def test_propagate_matches_dense_power():
    rng = np.random.default_rng(11)
    g = make_graph(6, random_connected_graph(rng, 6), num_features=4)
    x = rng.standard_normal((6, 4))
    for r in (0.5, 1.0):
        op = normalized_adjacency(g, r=r)
        s = dense_operator(g, r)
        out = propagate(op, x, PropagationConfig.sgc(2))
        assert np.allclose(out, s @ s @ x, atol=1e-12)


def test_propagate_s2gc_is_mean_of_powers():
    rng = np.random.default_rng(13)
    g = make_graph(5, random_connected_graph(rng, 5), num_features=3)
    x = rng.standard_normal((5, 3))
    op = normalized_adjacency(g, r=0.5)
    s = dense_operator(g, 0.5)
    expect = (x + s @ x + s @ s @ x) / 3.0
    out = propagate(op, x, PropagationConfig.s2gc(2))
    assert np.allclose(out, expect, atol=1e-12)


def test_propagate_rejects_wrong_rows(path3):
    op = normalized_adjacency(path3, r=1.0)
    with pytest.raises(ShapeError):
        propagate(op, np.zeros((4, 2)), PropagationConfig.sgc(1))


def test_propagate_is_linear():
    rng = np.random.default_rng(17)
    g = make_graph(7, random_connected_graph(rng, 7), num_features=3)
    op = normalized_adjacency(g, r=0.5)
    cfg = PropagationConfig.gbp(3, beta=0.3)
    x = rng.standard_normal((7, 3))
    y = rng.standard_normal((7, 3))
    a, b = 2.5, -1.25
    lhs = propagate(op, a * x + b * y, cfg)
    rhs = a * propagate(op, x, cfg) + b * propagate(op, y, cfg)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_row_stochastic_propagation_preserves_ones():
    rng = np.random.default_rng(19)
    g = make_graph(8, random_connected_graph(rng, 8), num_features=2)
    op = normalized_adjacency(g, r=1.0)
    ones = np.ones((8, 1))
    for cfg in (PropagationConfig.sgc(3), PropagationConfig.s2gc(4)):
        out = propagate(op, ones, cfg)
        assert np.max(np.abs(out - 1.0)) < 1e-12


# ----------------------------------------------------------- propagation column

def test_path3_column_one_step():
    g = make_graph(3, [(0, 1), (1, 2)])
    op = normalized_adjacency(g, r=1.0)
    col = propagation_column(op, PropagationConfig.sgc(1), 0)
    assert np.allclose(col, [0.5, 1.0 / 3.0, 0.0], atol=1e-15)


def test_path3_column_two_steps():
    g = make_graph(3, [(0, 1), (1, 2)])
    op = normalized_adjacency(g, r=1.0)
    col = propagation_column(op, PropagationConfig.sgc(2), 0)
    assert np.allclose(col, [5.0 / 12.0, 5.0 / 18.0, 1.0 / 6.0], atol=1e-15)


def test_path5_center_column_two_steps():
    g = make_graph(5, [(0, 1), (1, 2), (2, 3), (3, 4)])
    op = normalized_adjacency(g, r=1.0)
    col = propagation_column(op, PropagationConfig.sgc(2), 2)
    expected = np.array([1.0 / 6.0, 2.0 / 9.0, 1.0 / 3.0, 2.0 / 9.0, 1.0 / 6.0])
    assert np.allclose(col, expected, atol=1e-15)


def test_column_equals_dense_pi_column():
    rng = np.random.default_rng(23)
    g = make_graph(6, random_connected_graph(rng, 6), num_features=2)
    cfg = PropagationConfig.s2gc(3)
    op = normalized_adjacency(g, r=1.0)
    pi = dense_pi(g, 1.0, cfg.weights)
    for u in range(6):
        assert np.allclose(propagation_column(op, cfg, u), pi[:, u], atol=1e-12)


def test_column_rejects_bad_node(path3):
    op = normalized_adjacency(path3, r=1.0)
    with pytest.raises(IndexError):
        propagation_column(op, PropagationConfig.sgc(1), 3)
    with pytest.raises(IndexError):
        propagation_column(op, PropagationConfig.sgc(1), -1)
