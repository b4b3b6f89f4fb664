import itertools

import numpy as np
import pytest

from dendromle.core import Dendrogram, Dissimilarity, Structure, Ultrametric, compose, pair_list
from dendromle.trees import (
    ConeSpec,
    KMaxExceededError,
    SpanningTree,
    cone_contains,
    is_mst_of,
    merge_events,
    mst,
    mst_set,
    path_bound,
    slhc,
    slhc_max,
    slhc_values,
    tree_path_sums,
)
from oracles import (
    brute_mst_set,
    chain_slhc,
    merge_product,
    pruefer_trees,
    random_dendrogram,
    random_dissimilarity,
    tree_weight,
)


def as_matrix(n, values):
    return Dissimilarity(n, values).as_matrix()


def test_spanning_tree_validation():
    SpanningTree(3, ((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        SpanningTree(3, ((0, 1),))
    with pytest.raises(ValueError):
        SpanningTree(4, ((0, 1), (1, 0), (2, 3)))  # cycle via duplicate


def test_mst_three_points():
    d = Dissimilarity(3, [1.0, 2.0, 3.0])
    assert mst(d).edges == ((0, 1), (0, 2))


def test_mst_matches_brute_force_minimum():
    rng = np.random.default_rng(2)
    for _ in range(60):
        n = int(rng.integers(3, 7))
        d = Dissimilarity(n, random_dissimilarity(n, rng))
        m = as_matrix(n, d.values)
        got = mst(d)
        best = min(tree_weight(t, m) for t in pruefer_trees(n))
        assert tree_weight(got.edges, m) == pytest.approx(best, rel=1e-12)


def test_mst_tie_break_is_lexicographic_star():
    d = Dissimilarity(4, [1.0] * 6)
    assert mst(d).edges == ((0, 1), (0, 2), (0, 3))


def test_slhc_three_point_example_matches_chain_oracle():
    d = Dissimilarity(3, [1.0, 2.0, 3.0])
    u = slhc(d)
    assert np.array_equal(u.values, [1.0, 2.0, 2.0])
    m = chain_slhc(as_matrix(3, d.values))
    assert np.array_equal(u.as_matrix(), m)


def test_slhc_matches_chain_oracle_randomly():
    rng = np.random.default_rng(9)
    for _ in range(200):
        n = int(rng.integers(2, 8))
        d = Dissimilarity(n, random_dissimilarity(n, rng))
        u = slhc(d)
        assert np.allclose(u.as_matrix(), chain_slhc(d.as_matrix()), rtol=1e-12, atol=0)
        assert np.all(u.values <= d.values)


def test_slhc_idempotent_and_identity_on_ultrametrics():
    rng = np.random.default_rng(13)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        u = compose(random_dendrogram(n, rng))
        assert np.array_equal(slhc(u).values, u.values)
        d = Dissimilarity(n, random_dissimilarity(n, rng))
        once = slhc(d)
        assert np.array_equal(slhc(once).values, once.values)


def test_slhc_max_is_heaviest_merge():
    rng = np.random.default_rng(17)
    for _ in range(50):
        n = int(rng.integers(2, 7))
        vals = random_dissimilarity(n, rng)
        assert slhc_max(n, vals) == slhc_values(n, vals).max()


def test_merge_events_sequence():
    events, heights = merge_events(3, np.array([0.3, 0.7, 0.7]))
    assert events == [((0,), (1,)), ((0, 1), (2,))]
    assert heights == [0.3, 0.7]


def test_mst_set_three_points():
    u = Ultrametric(3, [0.3, 0.7, 0.7])
    trees = mst_set(u)
    assert [t.edges for t in trees] == [((0, 1), (0, 2)), ((0, 1), (1, 2))]
    got = {t.edges for t in trees}
    assert got == brute_mst_set(u.as_matrix())


def test_mst_set_caterpillar_product():
    tau = Structure(
        (((0,), (1,)), ((0, 1), (2,)), ((0, 1, 2), (3,)), ((0, 1, 2, 3), (4,)))
    )
    u = compose(Dendrogram(tau, (0.1, 0.3, 0.6, 0.9)))
    trees = mst_set(u)
    assert len(trees) == 24  # 1*2*3*4 bipartite choices, brute-forced below
    assert {t.edges for t in trees} == brute_mst_set(u.as_matrix())


def test_mst_set_two_points():
    assert len(mst_set(Ultrametric(2, [0.4]))) == 1


def test_mst_set_matches_brute_force_and_product():
    rng = np.random.default_rng(23)
    for _ in range(200):
        n = int(rng.integers(2, 6))
        dend = random_dendrogram(n, rng)
        u = compose(dend)
        trees = mst_set(u)
        assert len(trees) == merge_product(dend.structure)
        assert {t.edges for t in trees} == brute_mst_set(u.as_matrix())
        assert all(is_mst_of(t, u) for t in trees)


def test_mst_set_degenerate_constant_counts_all_trees():
    u = Ultrametric(4, [1.0] * 6)
    trees = mst_set(u)
    assert len(trees) == 16  # 4^2 labeled trees, all minimum
    assert {t.edges for t in trees} == set(pruefer_trees(4))


def test_mst_set_k_max_guard():
    u = Ultrametric(7, [1.0] * 21)  # 7^5 = 16807 spanning trees
    with pytest.raises(KMaxExceededError):
        mst_set(u)
    assert len(mst_set(u, k_max=20000)) == 16807


def test_path_bound_examples():
    u = Ultrametric(3, [0.3, 0.7, 0.7])
    spec = ConeSpec(SpanningTree(3, ((0, 1), (1, 2))), u)
    assert path_bound(spec, 0, 2) == pytest.approx(1.0)  # 0.3 + 0.7 along the path
    assert path_bound(spec, 0, 1) == pytest.approx(0.3)  # single edge equals u
    with pytest.raises(ValueError):
        path_bound(spec, 1, 1)


def test_path_sums_dominate_ultrametric():
    rng = np.random.default_rng(29)
    for _ in range(100):
        n = int(rng.integers(2, 7))
        u = compose(random_dendrogram(n, rng))
        for tree in mst_set(u):
            sums = tree_path_sums(tree, u)
            assert np.all(sums >= u.values - 1e-12)


def test_cone_spec_rejects_non_mst():
    u = Ultrametric(3, [0.3, 0.7, 0.7])
    with pytest.raises(ValueError):
        ConeSpec(SpanningTree(3, ((0, 2), (1, 2))), u)  # misses the light edge


def test_cone_contains_u_itself():
    rng = np.random.default_rng(31)
    for _ in range(50):
        n = int(rng.integers(2, 6))
        u = compose(random_dendrogram(n, rng))
        for tree in mst_set(u):
            assert cone_contains(ConeSpec(tree, u), u)


def test_cone_contains_rejects_sub_u_entry():
    u = Ultrametric(3, [0.3, 0.7, 0.7])
    spec = ConeSpec(SpanningTree(3, ((0, 1), (0, 2))), u)
    theta = Dissimilarity(3, [0.3, 0.7, 0.6])  # non-tree coordinate below u
    assert not cone_contains(spec, theta)


def test_cone_membership_agrees_with_slhc_oracle():
    # a metric lies in some cone of u exactly when single linkage maps it to u
    from dendromle.core import triangle_ok

    rng = np.random.default_rng(37)
    inside = outside = 0
    for _ in range(1000):
        n = int(rng.integers(3, 6))
        u = compose(random_dendrogram(n, rng))
        specs = [ConeSpec(t, u) for t in mst_set(u)]
        base = specs[int(rng.integers(len(specs)))]
        theta_vals = u.values.copy()
        free = base.free_indices
        # spread draws around the feasible slice so both outcomes occur
        theta_vals[free] = rng.uniform(
            0.8 * u.values[free], base.path_sums[free] + 0.2
        )
        in_some_cone = any(
            cone_contains(s, Dissimilarity(n, theta_vals)) for s in specs
        )
        is_metric = bool(triangle_ok(theta_vals, n))
        in_fiber = is_metric and np.allclose(
            slhc_values(n, theta_vals), u.values, rtol=1e-9, atol=1e-12
        )
        assert in_some_cone == in_fiber
        inside += in_some_cone
        outside += not in_some_cone
    assert inside > 100 and outside > 100
