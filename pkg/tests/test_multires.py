import math

import numpy as np
import pytest

from mrkernel.base_kernels import BaseKernelSpec, eval_count, eval_count_reset, eval_kernel
from mrkernel.exceptions import EnumerationTooLarge, NotAPartition, TreeMismatch
from mrkernel.hier_measure import from_leaves
from mrkernel.hierarchy import Partition, build_uniform_tree
from mrkernel.measures import new_submeasure
from mrkernel.multires import (
    MultiresSpec,
    k_multires_bruteforce,
    k_multires_factorized,
    k_partition,
    node_kernel_values,
    partition_distance,
)
from mrkernel.oracle import ORACLE_KERNELS, random_nested, random_tree, run_oracle


@pytest.fixture
def pair(tree_2_1):
    mu = from_leaves(tree_2_1, [new_submeasure(4, [(0, 0.5)]), new_submeasure(4, [(1, 0.5)])])
    mu2 = from_leaves(tree_2_1, [new_submeasure(4, [(1, 0.5)]), new_submeasure(4, [(0, 0.25), (2, 0.25)])])
    return mu, mu2


class TestPartitionKernel:
    def test_coarsest_is_global_kernel(self, tree_2_1, rbf, pair):
        mu, mu2 = pair
        spec = MultiresSpec(tree_2_1, rbf)
        assert k_partition(spec, Partition((0,)), mu, mu2) == eval_kernel(rbf, mu.root_measure, mu2.root_measure)

    def test_leaves_l1(self, tree_2_1, pair):
        mu, mu2 = pair
        spec = MultiresSpec(tree_2_1, BaseKernelSpec.rbf(1.0, 1.0, 0.1))
        # leaf 0: |0.5| + |0.5| = 1, leaf 1: 0.25 + 0.25 + 0.5 = 1
        assert k_partition(spec, Partition((1, 2)), mu, mu2) == pytest.approx(math.exp(-0.2), rel=1e-12)
        assert partition_distance(spec, Partition((1, 2)), mu, mu2) == pytest.approx(0.2, rel=1e-12)

    def test_self_is_one(self, tree_2_1, rbf, pair):
        mu, _ = pair
        spec = MultiresSpec(tree_2_1, rbf)
        assert k_partition(spec, Partition((1, 2)), mu, mu) == 1.0

    def test_not_a_partition(self, tree_2_1, rbf, pair):
        with pytest.raises(NotAPartition):
            k_partition(MultiresSpec(tree_2_1, rbf), Partition((0, 2)), *pair)

    def test_tree_mismatch(self, tree_2_2, rbf, pair):
        with pytest.raises(TreeMismatch):
            k_partition(MultiresSpec(tree_2_2, rbf), Partition((0,)), *pair)


class TestBruteforce:
    def test_two_partition_example(self, tree_2_1, rbf, pair):
        mu, mu2 = pair
        spec = MultiresSpec(tree_2_1, rbf)
        v = node_kernel_values(spec, mu, mu2)
        expected = 0.5 * v[0] + 0.5 * v[1] * v[2]
        assert k_multires_bruteforce(spec, mu, mu2) == pytest.approx(expected, abs=1e-15)

    def test_endpoints(self, tree_2_2, rbf, rng):
        mu, mu2 = random_nested(tree_2_2, rng), random_nested(tree_2_2, rng)
        coarse = MultiresSpec(tree_2_2.with_epsilon(0.0), rbf)
        fine = MultiresSpec(tree_2_2.with_epsilon(1.0), rbf)
        v = node_kernel_values(coarse, mu, mu2)
        assert k_multires_bruteforce(coarse, mu, mu2) == v[0]
        assert k_multires_bruteforce(fine, mu, mu2) == pytest.approx(np.prod(v[list(tree_2_2.leaves)]), abs=1e-15)

    def test_cap(self, rbf, rng):
        tree = build_uniform_tree(4, 4, 0.5)
        mu = random_nested(tree, rng)
        with pytest.raises(EnumerationTooLarge):
            k_multires_bruteforce(MultiresSpec(tree, rbf), mu, mu)


class TestFactorized:
    @pytest.mark.parametrize("base", ORACLE_KERNELS, ids=str)
    def test_matches_bruteforce(self, base, rng):
        for _ in range(10):
            tree = random_tree(3, 2, rng)
            spec = MultiresSpec(tree, base)
            mu, mu2 = random_nested(tree, rng), random_nested(tree, rng)
            assert abs(k_multires_factorized(spec, mu, mu2) - k_multires_bruteforce(spec, mu, mu2)) <= 1e-10

    def test_direct_and_log_domain_agree(self, rng):
        for _ in range(20):
            tree = random_tree(2, 3, rng)
            spec = MultiresSpec(tree, ORACLE_KERNELS[0])
            mu, mu2 = random_nested(tree, rng), random_nested(tree, rng)
            log_value = k_multires_factorized(spec, mu, mu2)
            direct = k_multires_factorized(spec, mu, mu2, log_domain=False)
            assert log_value == pytest.approx(direct, abs=1e-12)

    def test_self_is_one(self, rng):
        tree = random_tree(3, 2, rng)
        mu = random_nested(tree, rng)
        for base in ORACLE_KERNELS:
            assert k_multires_factorized(MultiresSpec(tree, base), mu, mu) == pytest.approx(1.0, abs=1e-12)

    def test_zero_epsilon_is_exact_global_kernel(self, rbf, rng):
        tree = build_uniform_tree(3, 2, 0.0)
        spec = MultiresSpec(tree, rbf)
        mu, mu2 = random_nested(tree, rng), random_nested(tree, rng)
        assert k_multires_factorized(spec, mu, mu2) == k_partition(spec, tree.coarsest(), mu, mu2)

    def test_symmetric(self, rng):
        tree = random_tree(2, 2, rng)
        mu, mu2 = random_nested(tree, rng), random_nested(tree, rng)
        for base in ORACLE_KERNELS:
            spec = MultiresSpec(tree, base)
            assert k_multires_factorized(spec, mu, mu2) == k_multires_factorized(spec, mu2, mu)

    @pytest.mark.parametrize("alpha,depth", [(4, 1), (4, 2), (9, 1), (9, 2)])
    def test_one_eval_per_node(self, alpha, depth, rng):
        tree = build_uniform_tree(alpha, depth, 1.0 / alpha)
        spec = MultiresSpec(tree, BaseKernelSpec.rbf(0.25, 1.0, 0.01))
        mu, mu2 = random_nested(tree, rng, 64), random_nested(tree, rng, 64)
        eval_count_reset()
        k_multires_factorized(spec, mu, mu2)
        assert eval_count() == (alpha ** (depth + 1) - 1) // (alpha - 1)

    def test_deep_tree_does_not_underflow(self, rng):
        tree = build_uniform_tree(2, 12, 1.0)
        spec = MultiresSpec(tree, BaseKernelSpec.rbf(1.0, 1.0, 400.0))
        mu, mu2 = random_nested(tree, rng, 8, 1.0), random_nested(tree, rng, 8, 1.0)
        assert k_multires_factorized(spec, mu, mu2) >= 0.0
        assert np.isfinite(k_multires_factorized(spec, mu, mu2))


class TestOracle:
    @pytest.mark.parametrize("alpha,depth,trials", [(2, 1, 100), (3, 3, 50)])
    def test_passes(self, alpha, depth, trials):
        assert run_oracle(alpha, depth, trials, seed=0).passed

    def test_degenerate_single_node(self):
        result = run_oracle(2, 0, 10, seed=0)
        assert result.max_diff == 0.0

    def test_randomized_grid(self):
        diffs = []
        for alpha in (2, 3):
            for depth in (1, 2, 3):
                diffs.extend(run_oracle(alpha, depth, 40, seed=alpha * 10 + depth).diffs)
        assert len(diffs) >= 200
        assert max(diffs) <= 1e-10

    def test_too_large(self):
        with pytest.raises(EnumerationTooLarge):
            run_oracle(5, 3, 1, seed=0)
