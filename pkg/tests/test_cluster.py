import networkx as nx
import numpy as np
import pytest
from hypothesis import given, strategies as st
from sklearn.base import clone

from tierpart.cluster import (Clustering, HierarchicalGeometric, ManhattanKMeans, NoClustering,
                              ProgressiveWireLength, UnionFind, cluster_hg, cluster_kmeans, cluster_none,
                              cluster_pwl, default_pwl_threshold, kmeans_converged, make_clusterer,
                              manhattan_assign, pwl_feasibility, regular_seeds, require_pwl_feasible)
from tierpart.core import Cell, Design, Floorplan
from tierpart.exceptions import DomainError, InfeasibleError

from conftest import designs, make_design


def groups(clustering):
    return sorted(sorted(int(c) for c in m) for m in clustering.members())


def check_clustering(c, design):
    assert len(c.assignment) == design.n_cells
    if design.n_cells:
        assert set(np.unique(c.assignment)) == set(range(c.n_clusters))
        assert np.isclose(c.cluster_areas.sum(), design.total_area, rtol=1e-9)
        assert (c.cluster_areas > 0).all()


# ---------------------------------------------------------------- NC

def test_none_singletons():
    d = make_design([(i, 0) for i in range(5)])
    c = cluster_none(d)
    assert c.n_clusters == 5 and c.method_tag == "NC"
    check_clustering(c, d)


def test_none_empty_design():
    d = Design([], [], Floorplan(0, 0, 1, 1))
    assert cluster_none(d).n_clusters == 0


# ---------------------------------------------------------------- HG

def test_hg_four_corners():
    d = make_design([(0.5, 0.5), (10.5, 0.5), (0.5, 10.5), (10.5, 10.5)])
    c = cluster_hg(d, 4)
    assert groups(c) == [[0], [1], [2], [3]]
    # DFS order: left-bottom, left-top, right-bottom, right-top
    assert list(c.assignment) == [0, 2, 1, 3]


def test_hg_single_cluster():
    d = make_design([(i, i) for i in range(6)])
    assert cluster_hg(d, 1).n_clusters == 1


def test_hg_area_weighted_median():
    # areas 3,1,1,1 along x: half the area (3) is reached after the first cell
    cells = [Cell(0, "a", (0, 0), 3, 1)] + [Cell(i, f"c{i}", (i + 3, 0), 1, 1) for i in (1, 2, 3)]
    d = Design(cells, [], Floorplan(0, 0, 10, 2))
    assert groups(cluster_hg(d, 2)) == [[0], [1, 2, 3]]


def test_hg_origin_rule():
    # cell 1 straddles x=10 but its origin is left of the median cut
    cells = [Cell(0, "a", (0, 0), 1, 1), Cell(1, "b", (9.5, 0), 2, 1),
             Cell(2, "c", (12, 0), 1, 1), Cell(3, "d", (15, 0), 1, 1)]
    d = Design(cells, [], Floorplan(0, 0, 20, 2))
    assert groups(cluster_hg(d, 2)) == [[0, 1], [2, 3]]


def test_hg_rounds_up_to_power_of_two():
    d = make_design([(i, j) for i in range(8) for j in range(8)])
    c = cluster_hg(d, 5)
    assert c.n_clusters == 8
    assert c.params["leaves"] == 8


def test_hg_rejects_bad_k():
    d = make_design([(0, 0)])
    with pytest.raises(DomainError):
        cluster_hg(d, 0)


@given(designs(max_nets=0), st.integers(0, 5))
def test_hg_nesting(d, depth):
    fine = cluster_hg(d, 2 ** (depth + 1))
    coarse = cluster_hg(d, 2 ** depth)
    check_clustering(fine, d)
    for members in fine.members():
        assert len(set(coarse.assignment[members])) == 1


@given(designs(max_nets=0), st.integers(1, 40))
def test_hg_deterministic(d, k):
    a, b = cluster_hg(d, k), cluster_hg(d, k)
    assert np.array_equal(a.assignment, b.assignment)


def test_hg_on_array():
    X = np.array([[0, 0], [10, 0], [0, 10], [10, 10]], dtype=float)
    labels = HierarchicalGeometric(n_clusters=4).fit_predict(X)
    assert sorted(labels) == [0, 1, 2, 3]


# ---------------------------------------------------------------- K-means

def test_manhattan_assignment_example():
    assert list(manhattan_assign(np.array([[4.0, 0.0]]), np.array([[0.0, 0.0], [10.0, 0.0]]))) == [0]


def test_manhattan_tie_goes_to_lowest_index():
    seeds = np.array([[10.0, 0.0], [0.0, 0.0]])
    assert list(manhattan_assign(np.array([[5.0, 0.0]]), seeds)) == [0]


def test_seed_update_is_centroid():
    X = np.array([[0.0, 0.0], [2.0, 2.0]])
    km = ManhattanKMeans(n_clusters=1, tol=0.1).fit(X)
    assert np.allclose(km.cluster_centers_, [[1.0, 1.0]])


def test_p95_criterion():
    assert kmeans_converged(np.full(100, 0.5), 1.0)
    deltas = np.zeros(100)
    deltas[:6] = 5.0
    assert not kmeans_converged(deltas, 1.0)
    deltas[:6] = 0.0
    deltas[:4] = 5.0
    assert kmeans_converged(deltas, 1.0)


def test_regular_seeds_grid():
    s = regular_seeds(Floorplan(0, 0, 30, 20), 5)
    # ceil(sqrt 5) = 3 columns, 2 rows, row-major, first 5
    assert np.allclose(s, [[5, 5], [15, 5], [25, 5], [5, 15], [15, 15]])


def test_kmeans_errors():
    d = make_design([(0, 0), (1, 1)])
    with pytest.raises(DomainError):
        cluster_kmeans(d, 3)
    with pytest.raises(DomainError):
        cluster_kmeans(d, 0)
    with pytest.raises(DomainError):
        ManhattanKMeans(n_clusters=1).fit(np.zeros((2, 2)))


def test_kmeans_two_blobs():
    pts = [(x, y) for x in (0, 1, 2) for y in (0, 1, 2)] + [(x + 50, y + 50) for x in (0, 1, 2) for y in (0, 1, 2)]
    d = make_design(pts)
    c = cluster_kmeans(d, 2)
    assert groups(c) == [list(range(9)), list(range(9, 18))]


@given(designs(min_cells=2, max_nets=0), st.integers(1, 12), st.integers(1, 30))
def test_kmeans_terminates_and_covers(d, k, max_iter):
    k = min(k, d.n_cells)
    est = ManhattanKMeans(n_clusters=k, max_iter=max_iter).fit(d)
    assert 1 <= est.n_iter_ <= max_iter
    assert est.state_.seeds.shape == (k, 2)
    assert (est.state_.last_deltas >= 0).all()
    c = est.clustering_
    check_clustering(c, d)
    assert c.params["dropped_empty"] == k - c.n_clusters
    if est.converged_ and not est.state_.last_deltas.any():
        again = manhattan_assign(d.centers, est.state_.seeds)
        assert np.array_equal(np.unique(again, return_inverse=True)[1], c.assignment)


def test_kmeans_estimator_api():
    est = ManhattanKMeans(n_clusters=3, max_iter=5)
    assert est.get_params()["n_clusters"] == 3
    twin = clone(est).set_params(n_clusters=2)
    assert twin.n_clusters == 2 and est.n_clusters == 3


# ---------------------------------------------------------------- P-WL

def test_pwl_examples():
    d = make_design([(0, 0), (1, 0), (6, 0)], [(0, 1), (1, 2)])
    assert groups(cluster_pwl(d, 3)) == [[0, 1], [2]]
    assert cluster_pwl(d, 0).n_clusters == 3
    star = make_design([(0, 0), (1, 0), (0, 1)], [(0, 1, 2)])
    assert groups(cluster_pwl(star, 3)) == [[0, 1, 2]]


def test_pwl_strict_threshold():
    d = make_design([(0, 0), (3, 0)], [(0, 1)])
    assert cluster_pwl(d, 3).n_clusters == 2
    assert cluster_pwl(d, 3.0001).n_clusters == 1


def test_default_threshold():
    cells = [Cell(i, f"c{i}", (i, 0), 0.2, 1) for i in range(3)]
    d = Design(cells, [], Floorplan(0, 0, 5, 2))
    assert default_pwl_threshold(d) == pytest.approx(20.0)
    assert default_pwl_threshold(make_design([(0, 0), (5, 5)])) == pytest.approx(100.0)
    with pytest.raises(DomainError):
        default_pwl_threshold(Design([], [], Floorplan(0, 0, 1, 1)))


def bfs_components(design, threshold):
    g = nx.Graph()
    g.add_nodes_from(range(design.n_cells))
    for net in design.nets:
        if net.length < threshold:
            for p in net.pins[1:]:
                g.add_edge(net.pins[0], p)
    return sorted(sorted(c) for c in nx.connected_components(g))


@given(designs(max_cells=25, max_nets=25, span=40), st.floats(0, 60))
def test_pwl_matches_bfs_components(d, t):
    c = cluster_pwl(d, t)
    check_clustering(c, d)
    assert groups(c) == bfs_components(d, t)
    for net in d.nets:
        if net.length < t:
            assert len(set(c.assignment[list(net.pins)])) == 1


def test_pwl_rejects_arrays_and_bad_threshold():
    with pytest.raises(DomainError):
        ProgressiveWireLength().fit(np.zeros((3, 2)))
    with pytest.raises(DomainError):
        ProgressiveWireLength(threshold=-1).fit(make_design([(0, 0)]))
    with pytest.raises(DomainError):
        ProgressiveWireLength(threshold="big").fit(make_design([(0, 0)]))


@pytest.mark.parametrize("areas, feasible", [
    ([0.60, 0.40], False),
    ([0.30, 0.30, 0.40], True),
    ([0.51, 0.49], True),
])
def test_pwl_feasibility(areas, feasible):
    c = Clustering(np.arange(len(areas)), np.array(areas), np.zeros((len(areas), 2)), "PWL")
    f = pwl_feasibility(c, 0.51)
    assert f.feasible is feasible
    assert f.area_fraction == pytest.approx(max(areas))
    if not feasible:
        assert f.cluster_id == 0
        with pytest.raises(InfeasibleError):
            require_pwl_feasible(c, 0.51)


# ---------------------------------------------------------------- shared

@given(designs(), st.sampled_from(["nc", "hg", "km", "pwl"]), st.integers(1, 10))
def test_coverage(d, method, k):
    est = make_clusterer(method, n_clusters=min(k, d.n_cells), threshold=5.0, max_iter=20)
    c = est.fit(d).clustering_
    check_clustering(c, d)
    assert c.method_tag == method.upper()


def test_make_clusterer_unknown():
    with pytest.raises(DomainError):
        make_clusterer("spectral")


def test_union_find():
    uf = UnionFind(5)
    uf.union(0, 3)
    uf.union(3, 4)
    labels = uf.labels()
    assert labels[0] == labels[3] == labels[4]
    assert len(set(labels)) == 3


def test_clustering_csv(tmp_path):
    d = make_design([(0, 0), (1, 0), (6, 0)], [(0, 1)])
    path = cluster_pwl(d, 3).to_csv(d, tmp_path / "c.csv")
    assert path.read_text() == "cell_name,cluster\nc0,0\nc1,0\nc2,1\n"


def test_no_clustering_sample_weight():
    est = NoClustering().fit(np.zeros((3, 2)), sample_weight=[1, 2, 3])
    assert list(est.clustering_.cluster_areas) == [1, 2, 3]
