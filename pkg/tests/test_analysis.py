import itertools

import numpy as np
import pytest

from agglab import analysis as A


SUM = A.BasicAggregator("SUM")
MEAN = A.BasicAggregator("MEAN")
MAX = A.BasicAggregator("MAX")
GRID = [-1.0, 0.0, 1.0, 2.0]


def test_numerical_rank_basics():
    assert A.numerical_rank(np.ones((1, 5))) == 1
    assert A.numerical_rank(np.eye(3)) == 3
    assert A.numerical_rank(np.array([[1.0, 2.0], [2.0, 4.0]])) == 1
    assert A.numerical_rank(np.zeros((2, 3))) == 0


def test_apply_agg_examples():
    out = A.apply_agg(np.array([[1.0, 1.0, 1.0]]), A.MultisetSample([1.0, 2.0, 3.0]), [2, 0, 1])
    assert out.tolist() == [6.0]
    out = A.apply_agg(np.full((1, 3), 1 / 3), A.MultisetSample([3.0, 6.0, 9.0]), [0, 1, 2])
    assert abs(out[0] - 6.0) < 1e-15


def test_apply_agg_permutation_invariance_exact():
    rng = np.random.default_rng(0)
    for n in range(1, 5):  # exhaustive over all n! orderings
        M = rng.standard_normal((2, n))
        x = A.MultisetSample(rng.standard_normal((n, 3)))
        outs = [A.apply_agg(M, x, list(p)) for p in itertools.permutations(range(n))]
        for o in outs[1:]:
            assert np.array_equal(o, outs[0])  # bitwise, max abs diff 0


def test_apply_agg_validation():
    M = np.ones((1, 3))
    with pytest.raises(ValueError, match="permutation"):
        A.apply_agg(M, A.MultisetSample([1.0, 2.0, 3.0]), [0, 0, 1])
    with pytest.raises(ValueError, match="size"):
        A.apply_agg(M, A.MultisetSample([1.0, 2.0]), [0, 1])


def test_strictly_stronger_by_stack():
    assert A.strictly_stronger_by_stack([[1.0, 1.0]], [[1.0, -1.0]])
    assert not A.strictly_stronger_by_stack([[1.0, 1.0]], [[2.0, 2.0]])
    with pytest.raises(ValueError, match="column"):
        A.strictly_stronger_by_stack(np.ones((1, 2)), np.ones((1, 3)))


def test_stack_no_rank_growth_means_no_new_separations():
    # whenever the stack does not raise rank, the oracle finds no pair
    # separated by the stack but merged by the base
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = int(rng.integers(2, 4))
        M = rng.standard_normal((2, n))
        L = rng.standard_normal((1, 2))
        M_extra = L @ M  # dependent row
        assert not A.strictly_stronger_by_stack(M, M_extra)
        base = A.MatrixAggregator(M)
        stack = A.MatrixAggregator(np.vstack([M, M_extra]))
        multisets = list(A.enumerate_multisets(GRID, n))
        extra = A.separation_set(stack, multisets) - A.separation_set(base, multisets)
        assert extra == set()


def test_is_injective_examples():
    assert A.is_injective_for_size(np.eye(3))
    ones = np.ones((1, 2))
    assert not A.is_injective_for_size(ones)
    f = A.MatrixAggregator(ones)
    w = A.collision_oracle(f, f, [0.0, 1.0, 2.0], max_size=2)
    assert w == (A.MultisetSample([0.0, 2.0]), A.MultisetSample([1.0, 1.0]))


def test_vandermonde_is_injective():
    # rows 1, a_i, a_i^2, ...: the power-sum style coefficient matrix
    nodes = np.array([0.5, 1.5, -2.0, 3.0])
    V = np.vander(nodes, 4, increasing=True).T
    assert A.is_injective_for_size(V)


def test_ranges_disjoint_examples():
    M1 = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    M2 = np.array([[0.0], [0.0], [1.0]])
    assert A.ranges_disjoint_certificate(M1, M2)
    assert not A.ranges_disjoint_certificate(np.eye(2), np.eye(2))
    with pytest.raises(ValueError, match="row"):
        A.ranges_disjoint_certificate(np.eye(2), np.eye(3))


def test_ranges_disjoint_blocks_have_no_cross_collision():
    M1 = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    M2 = np.array([[0.0], [0.0], [1.0]])
    f1, f2 = A.MatrixAggregator(M1), A.MatrixAggregator(M2)
    assert A.collision_oracle(f1, f2, GRID, max_size=2) is None


def test_random_gaussian_pairs_generically_disjoint():
    rng = np.random.default_rng(3)
    hits = 0
    for _ in range(20):
        M1, M2 = rng.standard_normal((4, 2)), rng.standard_normal((4, 2))
        if A.ranges_disjoint_certificate(M1, M2):
            hits += 1
            f1, f2 = A.MatrixAggregator(M1), A.MatrixAggregator(M2)
            grid9 = np.linspace(-2, 2, 9)
            assert A.collision_oracle(f1, f2, grid9, max_size=2) is None
    assert hits == 20  # full rank almost surely


def test_collision_oracle_injective_matrix_finds_nothing():
    f = A.MatrixAggregator(np.eye(2))
    assert A.collision_oracle(f, f, GRID, max_size=2) is None


def test_collision_oracle_guard():
    with pytest.raises(ValueError, match="explosion"):
        A.collision_oracle(SUM, SUM, GRID, max_size=6)
    with pytest.raises(ValueError, match="nonempty"):
        A.collision_oracle(SUM, SUM, [], max_size=2)


def test_compare_strength_sum_vs_mean():
    res = A.compare_strength(SUM, MEAN, [1.0, 2.0], max_size=4)
    assert res["verdict"] == "incomparable"
    assert res["only_first"] is not None and res["only_second"] is not None
    # the stated witnesses demonstrate both directions
    m1, m2 = A.MultisetSample([1.0, 1.0]), A.MultisetSample([2.0])
    assert A.multiset_distance_under(SUM, m1, m2) < 1e-9
    assert A.multiset_distance_under(MEAN, m1, m2) > 1e-9
    m3, m4 = A.MultisetSample([1.0, 2.0]), A.MultisetSample([1.0, 1.0, 2.0, 2.0])
    assert A.multiset_distance_under(SUM, m3, m4) > 1e-9
    assert A.multiset_distance_under(MEAN, m3, m4) < 1e-9


def test_compare_strength_combined_beats_parts():
    both = A.combined(SUM, MEAN)
    assert A.compare_strength(both, SUM, [1.0, 2.0], max_size=4)["verdict"] == "stronger"
    assert A.compare_strength(both, MEAN, [1.0, 2.0], max_size=4)["verdict"] == "stronger"


def test_compare_strength_injective_postcomposition_is_equal():
    g = A.compose(lambda y: 2.0 * y + 1.0, SUM, name="affine∘SUM")
    assert A.compare_strength(g, SUM, GRID, max_size=3)["verdict"] == "equal"


def test_postcomposition_never_enlarges_separations():
    # projection to the first coordinate is not injective on R^2 outputs
    proj = A.compose(lambda y: y[:1], A.combined(SUM, MEAN), name="proj")
    multisets = [m for k in (1, 2, 3) for m in A.enumerate_multisets(GRID, k)]
    full = A.separation_set(A.combined(SUM, MEAN), multisets)
    reduced = A.separation_set(proj, multisets)
    assert reduced <= full


def test_check_equivariance():
    rng = np.random.default_rng(5)
    x = A.MultisetSample(rng.standard_normal((3, 2)))
    for _ in range(5):
        T = rng.standard_normal((4, 2))
        assert A.check_equivariance(SUM, T, x)
        assert A.check_equivariance(MEAN, T, x)
    assert not A.check_equivariance(MAX, np.array([[-1.0]]), A.MultisetSample([1.0, 2.0]))


def test_premap_never_enlarges_separations_for_equivariant():
    rng = np.random.default_rng(7)
    multisets = [m for k in (1, 2) for m in A.enumerate_multisets([-1.0, 0.0, 1.0], k, width=2)]
    for agg in (SUM, MEAN):
        base = A.separation_set(agg, multisets)
        for _ in range(5):
            T = np.outer(rng.standard_normal(2), rng.standard_normal(2))  # rank 1
            mapped = A.separation_set(A.premap(agg, T), multisets)
            assert mapped <= base


def test_rank_preservation_report():
    rng = np.random.default_rng(9)
    H = rng.standard_normal((3, 3))
    assert A.rank_preservation_report(np.ones((1, 3)), H) == (1, 3, 1)
    H2 = np.vstack([H[:2], H[0] + H[1]])  # rank 2
    assert A.rank_preservation_report(np.eye(3), H2) == (3, 2, 2)
    M = rng.standard_normal((8, 5))
    H3 = rng.standard_normal((5, 5))
    assert A.rank_preservation_report(M, H3) == (5, 5, 5)


def test_rank_product_bounded_by_min():
    rng = np.random.default_rng(11)
    for _ in range(20):
        M = rng.standard_normal((rng.integers(1, 5), 4))
        H = rng.standard_normal((4, rng.integers(1, 5)))
        rm, rh, rp = A.rank_preservation_report(M, H)
        assert rp <= min(rm, rh)


def test_multiset_distance_under():
    m = A.MultisetSample([1.0, 2.0])
    assert A.multiset_distance_under(SUM, m, A.MultisetSample([2.0, 1.0])) == 0.0
    assert A.multiset_distance_under(SUM, A.MultisetSample([0.0, 2.0]),
                                     A.MultisetSample([1.0, 1.0])) == 0.0
    assert A.multiset_distance_under(MEAN, A.MultisetSample([1.0, 1.0]),
                                     A.MultisetSample([2.0])) == 1.0


def test_kernel_collision_construction():
    rng = np.random.default_rng(13)
    for _ in range(30):
        n = int(rng.integers(2, 4))
        M = rng.standard_normal((n, n))
        M[:, 0] = M[:, -1]  # force deficiency
        pair = A.kernel_collision(M)
        assert pair is not None
        x1, x2 = pair
        assert x1 != x2
        assert A.multiset_distance_under(A.MatrixAggregator(M), x1, x2) < 1e-9
    assert A.kernel_collision(np.eye(3)) is None


def test_cross_kernel_collision_trivial_kernel_is_none():
    M1 = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    M2 = np.array([[0.0], [0.0], [1.0]])
    assert A.cross_kernel_collision(M1, M2) is None


def test_multiset_sample_canonical_order():
    a = A.MultisetSample([3.0, 1.0, 2.0])
    b = A.MultisetSample([2.0, 3.0, 1.0])
    assert a == b
    assert a.elements[:, 0].tolist() == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError, match="nonempty"):
        A.MultisetSample(np.empty((0, 2)))


def test_nmean_and_std_definitions():
    nmean = A.BasicAggregator("NMEAN")
    x = A.MultisetSample([3.0, 6.0, 9.0])
    assert abs(nmean(x)[0] - 6.0) < 1e-12  # uniform weights reduce to the mean
    std = A.BasicAggregator("STD")
    assert abs(std(A.MultisetSample([1.0, 3.0]))[0] - 1.0) < 1e-15  # population
    vec = A.MultisetSample([[1.0, 5.0], [2.0, -1.0]])
    assert A.BasicAggregator("MAX")(vec).tolist() == [2.0, 5.0]
    assert A.BasicAggregator("MIN")(vec).tolist() == [1.0, -1.0]
    with pytest.raises(ValueError, match="unknown aggregator"):
        A.BasicAggregator("MEDIAN")


def test_constant_row_extension_strictly_stronger_than_sum():
    # appending an all-ones row keeps every SUM separation and adds more
    rng = np.random.default_rng(17)
    n = 2
    for _ in range(10):
        M = np.tanh(rng.standard_normal((2, n)))
        ext = A.MatrixAggregator(np.vstack([M, np.ones((1, n))]))
        multisets = list(A.enumerate_multisets(GRID, n))
        sum_sep = A.separation_set(SUM, multisets)
        ext_sep = A.separation_set(ext, multisets)
        assert sum_sep <= ext_sep
        assert len(ext_sep - sum_sep) > 0  # e.g. {0,2} vs {1,1}
