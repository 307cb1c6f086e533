import pytest

from mrkernel.exceptions import LeafCountMismatch, MassExceedsOne, SpaceMismatch, UnknownNode
from mrkernel.hier_measure import from_leaves, node_measure
from mrkernel.measures import add, empty, mass, new_submeasure
from mrkernel.oracle import random_nested


class TestFromLeaves:
    def test_disjoint_sum(self, tree_2_1):
        nm = from_leaves(tree_2_1, [new_submeasure(4, [(0, 0.5)]), new_submeasure(4, [(1, 0.5)])])
        assert nm.root_measure.entries == [(0, 0.5), (1, 0.5)]
        assert nm.total_mass == 1.0

    def test_empty_leaves(self, tree_2_1):
        nm = from_leaves(tree_2_1, [empty(4), empty(4)])
        assert all(m.is_empty for m in nm.node_measures)

    def test_mass_additivity(self, tree_2_2, rng):
        nm = random_nested(tree_2_2, rng)
        assert nm.total_mass == pytest.approx(sum(mass(leaf) for leaf in nm.leaf_measures), abs=1e-12)

    def test_leaf_count_mismatch(self, tree_2_1):
        with pytest.raises(LeafCountMismatch):
            from_leaves(tree_2_1, [empty(4)])

    def test_space_mismatch(self, tree_2_1):
        with pytest.raises(SpaceMismatch):
            from_leaves(tree_2_1, [empty(4), empty(8)])

    def test_total_exceeds_one(self, tree_2_1):
        leaf = new_submeasure(4, [(0, 0.6)])
        with pytest.raises(MassExceedsOne):
            from_leaves(tree_2_1, [leaf, leaf])


class TestNodeMeasure:
    def test_consistency(self, tree_2_2, rng):
        nm = random_nested(tree_2_2, rng)
        assert node_measure(nm, 0) == nm.root_measure
        for pos, leaf_node in enumerate(tree_2_2.leaves):
            assert node_measure(nm, leaf_node) == nm.leaf_measures[pos]
        for node, kids in enumerate(tree_2_2.children):
            if kids:
                expected = add(node_measure(nm, kids[0]), node_measure(nm, kids[1]))
                assert node_measure(nm, node).indices.tolist() == expected.indices.tolist()
                assert node_measure(nm, node).masses == pytest.approx(expected.masses, abs=1e-15)

    def test_unknown_node(self, tree_2_1):
        nm = from_leaves(tree_2_1, [empty(4), empty(4)])
        with pytest.raises(UnknownNode):
            node_measure(nm, 3)
