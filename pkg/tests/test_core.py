import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dendromle.core import (
    DegenerateStructureWarning,
    Dendrogram,
    Dissimilarity,
    HeightVector,
    Partition,
    SizeLimitError,
    Structure,
    TriangleViolation,
    Ultrametric,
    UltrametricViolation,
    compose,
    count_structures,
    cut,
    decompose,
    enumerate_structures,
    pair_index,
    pair_list,
    structure_at,
    structure_index,
    validate_metric,
    validate_ultrametric,
)
from oracles import random_dendrogram, random_metric_values


def test_pair_index_is_condensed_order():
    for n in range(2, 8):
        for idx, (i, j) in enumerate(pair_list(n)):
            assert pair_index(n, i, j) == idx
            assert pair_index(n, j, i) == idx


def test_dissimilarity_rejects_bad_input():
    with pytest.raises(ValueError):
        Dissimilarity(3, [1.0, 2.0])
    with pytest.raises(ValueError):
        Dissimilarity(3, [1.0, -2.0, 3.0])
    with pytest.raises(ValueError):
        Dissimilarity(3, [1.0, 0.0, 3.0])
    with pytest.raises(ValueError):
        Dissimilarity(1, [])


def test_dissimilarity_immutable_and_hashable():
    d = Dissimilarity(3, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        d.values[0] = 5.0
    assert d == Dissimilarity(3, [1.0, 2.0, 3.0])
    assert hash(d) == hash(Dissimilarity(3, [1.0, 2.0, 3.0]))
    assert d.get(1, 0) == 1.0 and d.get(2, 2) == 0.0


def test_validate_metric_boundary_case_passes():
    # equality d23 = d12 + d13 sits exactly on the triangle boundary
    m = validate_metric(Dissimilarity(3, [1.0, 2.0, 3.0]))
    assert isinstance(m, type(m)) and m.values[2] == 3.0


def test_validate_metric_reports_first_violation():
    with pytest.raises(TriangleViolation) as err:
        validate_metric(Dissimilarity(3, [1.0, 1.0, 3.0]))
    exc = err.value
    assert (exc.i, exc.j, exc.k) == (1, 2, 0)
    assert exc.slack == pytest.approx(1.0)


def test_random_ultrametrics_are_metrics():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(3, 8))
        u = compose(random_dendrogram(n, rng))
        validate_metric(Dissimilarity(n, u.values))


def test_validate_ultrametric():
    u = validate_ultrametric(Dissimilarity(3, [0.3, 0.7, 0.7]))
    assert isinstance(u, Ultrametric)
    with pytest.raises(UltrametricViolation) as err:
        validate_ultrametric(Dissimilarity(3, [1.0, 2.0, 3.0]))
    assert (err.value.i, err.value.j, err.value.k) == (1, 2, 0)


def test_cut_examples():
    u = Ultrametric(3, [0.3, 0.7, 0.7])
    assert cut(u, 0.5).blocks == ((0, 1), (2,))
    assert cut(u, 0.7).blocks == ((0, 1, 2),)
    assert cut(u, 5.0).blocks == ((0, 1, 2),)
    assert cut(u, 0.0).blocks == ((0,), (1,), (2,))


def test_cut_refinement_chain():
    rng = np.random.default_rng(5)
    for _ in range(50):
        u = compose(random_dendrogram(5, rng))
        grid = np.sort(rng.uniform(0, 1.1, size=6))
        parts = [cut(u, r) for r in grid]
        for finer, coarser in zip(parts, parts[1:]):
            assert finer.refines(coarser)


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition(((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        Partition(((0, 1), (3,)))
    p = Partition(((2, 0), (1,)))
    assert p.blocks == ((0, 2), (1,))
    assert p.block_of(2) == (0, 2)


def test_decompose_example():
    u = Ultrametric(3, [0.3, 0.7, 0.7])
    d = decompose(u)
    assert d.structure.merges == (((0,), (1,)), ((0, 1), (2,)))
    assert d.heights == (0.3, 0.7)
    assert not d.is_degenerate


def test_compose_example():
    d = Dendrogram(Structure((((0,), (1,)), ((0, 1), (2,)))), (0.3, 0.7))
    assert np.array_equal(compose(d).values, [0.3, 0.7, 0.7])


def test_constant_ultrametric_is_single_degenerate_event():
    with pytest.warns(DegenerateStructureWarning):
        d = decompose(Ultrametric(4, [0.5] * 6))
    assert d.structure.merges == (((0,), (1,), (2,), (3,)),)
    assert d.heights == (0.5,)
    assert d.is_degenerate and not d.structure.is_binary


def test_equal_heights_round_trip_through_constant():
    d = Dendrogram(Structure((((0,), (1,)), ((0, 1), (2,)))), (0.4, 0.4))
    u = compose(d)
    assert np.array_equal(u.values, [0.4, 0.4, 0.4])


def test_compose_decompose_round_trip():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(2, 8))
        dend = random_dendrogram(n, rng)
        u = compose(dend)
        back = decompose(u)
        assert back.structure == dend.structure
        assert np.array_equal(compose(back).values, u.values)
        assert back.heights == tuple(dend.heights)


def test_structure_canonicalization_and_validation():
    # cluster order within an event does not matter
    s1 = Structure((((1,), (0,)), ((2,), (0, 1))))
    s2 = Structure((((0,), (1,)), ((0, 1), (2,))))
    assert s1 == s2 and hash(s1) == hash(s2)
    with pytest.raises(ValueError):
        Structure((((0,), (2,)),))  # leaves must be 0..n-1
    with pytest.raises(ValueError):
        Structure((((0,), (1,)),) * 2)  # second event reuses consumed clusters
    with pytest.raises(ValueError):
        Structure((((0,), (1,)), ((2,), (3,))))  # two clusters left standing


def test_count_structures_matches_closed_form():
    assert count_structures(2) == 1
    assert count_structures(3) == 3
    assert count_structures(4) == 18  # n!(n-1)!/2^(n-1) evaluated by hand
    assert count_structures(5) == 180
    assert count_structures(20) > 2**63  # big integers, no overflow


def test_enumerate_structures_small():
    threes = enumerate_structures(3)
    assert len(threes) == 3
    first_merges = {t.merges[0] for t in threes}
    assert first_merges == {((0,), (1,)), ((0,), (2,)), ((1,), (2,))}


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_enumeration_lengths_unique_and_canonical(n):
    structures = enumerate_structures(n)
    assert len(structures) == count_structures(n)
    assert len(set(structures)) == len(structures)
    assert structures == sorted(structures)
    assert all(t.is_binary and t.n == n for t in structures)


def test_enumeration_size_limit():
    with pytest.raises(SizeLimitError):
        enumerate_structures(8)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_index_round_trip(n):
    for idx, tau in enumerate(enumerate_structures(n)):
        assert structure_index(tau) == idx
        assert structure_at(n, idx) == tau


def test_decompose_recovers_every_structure():
    rng = np.random.default_rng(3)
    for n in (3, 4, 5):
        for tau in enumerate_structures(n):
            a = np.sort(rng.uniform(0.05, 1.0, size=n - 1))
            while len(set(a)) < n - 1:
                a = np.sort(rng.uniform(0.05, 1.0, size=n - 1))
            u = compose(Dendrogram(tau, tuple(a)))
            assert decompose(u).structure == tau


def test_height_vector_validation():
    HeightVector([0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        HeightVector([0.5, 0.4])
    with pytest.raises(ValueError):
        HeightVector([0.5, 1.2])
    with pytest.raises(ValueError):
        HeightVector([-0.1, 0.5])


def test_dendrogram_validation():
    tau = Structure((((0,), (1,)), ((0, 1), (2,))))
    with pytest.raises(ValueError):
        Dendrogram(tau, (0.5,))
    with pytest.raises(ValueError):
        Dendrogram(tau, (0.7, 0.3))
    d = Dendrogram(tau, HeightVector([0.3, 0.7]))
    assert d.heights == (0.3, 0.7)


@given(st.integers(min_value=0, max_value=179))
@settings(max_examples=40, deadline=None)
def test_structure_rank_bijection_hypothesis(idx):
    tau = structure_at(5, idx)
    assert structure_index(tau) == idx


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_metric_from_bounded_values_hypothesis(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 7))
    validate_metric(Dissimilarity(n, random_metric_values(n, rng)))
