import numpy as np
import pytest

from spatialmsm.exceptions import DataError
from spatialmsm.graph import SpatialGraph, grid_graph, is_connected, load_adjacency


def test_path_graph_from_edge_list():
    g = load_adjacency("1 2\n2 3", n_regions=3)
    assert g.n_regions == 3
    assert g.edges == ((0, 1), (1, 2))
    assert g.degrees.tolist() == [1, 2, 1]


def test_duplicate_edges_collapse():
    g = load_adjacency("1 2\n2 1", n_regions=2)
    assert g.edges == ((0, 1),)
    assert g.degrees.tolist() == [1, 1]


def test_index_out_of_range_reports_line():
    with pytest.raises(DataError, match=r"line 1.*out of range"):
        load_adjacency("1 4", n_regions=3)


def test_self_loop_rejected():
    with pytest.raises(DataError, match=r"line 2.*self-loop"):
        load_adjacency("1 2\n3 3", n_regions=3)


def test_malformed_line_reports_number():
    with pytest.raises(DataError, match="line 2"):
        load_adjacency("1 2\n1 2 3", n_regions=3)
    with pytest.raises(DataError, match="non-integer"):
        load_adjacency("1 x", n_regions=3)


def test_comments_and_blank_lines():
    text = "# a comment\n\n1 2  # trailing\n 2 3 \n"
    g = load_adjacency(text, n_regions=3)
    assert g.degrees.tolist() == [1, 2, 1]


def test_isolated_region_warns():
    with pytest.warns(UserWarning, match="no neighbours"):
        load_adjacency("1 2", n_regions=3)


def test_connectivity():
    assert is_connected(load_adjacency("1 2\n2 3", n_regions=3))
    with pytest.warns(UserWarning):
        g = SpatialGraph(n_regions=2, edges=())
    assert not is_connected(g)
    assert is_connected(grid_graph(5, 5))


def test_grid_graph_structure():
    g = grid_graph(5, 5)
    assert g.n_regions == 25
    # corner, edge and interior degrees
    assert g.degrees[0] == 2
    assert g.degrees[1] == 3
    assert g.degrees[6] == 4
    assert g.degrees.sum() == 2 * len(g.edges)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_adjacency_symmetry_and_degree_consistency(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(4, 12))
    possible = [(a, b) for a in range(k) for b in range(a + 1, k)]
    take = rng.random(len(possible)) < 0.4
    edges = tuple(e for e, keep in zip(possible, take) if keep)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g = SpatialGraph(n_regions=k, edges=edges)
    w = g.adjacency().toarray()
    assert np.array_equal(w, w.T)
    assert np.all(np.diag(w) == 0)
    assert np.array_equal(w.sum(axis=1), g.degrees)
    lap = g.laplacian().toarray()
    assert np.allclose(lap, np.diag(g.degrees) - w)


def test_invalid_graphs():
    with pytest.raises(DataError):
        SpatialGraph(n_regions=0, edges=())
    with pytest.raises(DataError):
        SpatialGraph(n_regions=3, edges=((0, 3),))
    with pytest.raises(DataError):
        load_adjacency("1 2", n_regions=0)
