"""
M_𝒯(𝒳)의 원소: tree leaf마다 하나의 sub-measure.

내부 노드의 measure μ_T = Σ_{t∈T} μ_t는 생성 시점에 아래에서 위로 한 번 계산해
캐시합니다. Gram 계산은 모든 쌍에서 모든 노드의 base kernel을 평가하므로
쌍마다 다시 더하지 않도록 미리 만들어 둡니다.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

from .config import MASS_TOLERANCE
from .exceptions import LeafCountMismatch, MassExceedsOne, SpaceMismatch
from .hierarchy import IndexTree
from .measures import SubMeasure, mass, sum_measures


@dataclass(frozen=True, eq=False)
class NestedMeasure:
    """
    Attributes:
        tree: 이 객체가 정렬된 tree (ε은 무시하고 구조만 의미 있음)
        space_size: 성분 공간 크기
        leaf_measures: leaf 순서대로의 SubMeasure
        node_measures: 노드 id 순서대로의 집계 SubMeasure
    """
    tree: IndexTree
    space_size: int
    leaf_measures: Tuple[SubMeasure, ...]
    node_measures: Tuple[SubMeasure, ...]

    @property
    def root_measure(self) -> SubMeasure:
        """전역 히스토그램 μ_𝒯"""
        return self.node_measures[self.tree.root]

    @property
    def total_mass(self) -> float:
        return mass(self.root_measure)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NestedMeasure):
            return NotImplemented
        return (
            self.tree.same_shape(other.tree)
            and self.space_size == other.space_size
            and self.leaf_measures == other.leaf_measures
        )

    def __hash__(self) -> int:
        return hash((self.tree.children, self.space_size, self.leaf_measures))


def from_leaves(
    tree: IndexTree,
    leaves: Sequence[SubMeasure],
    space_size: Optional[int] = None,
) -> NestedMeasure:
    """
    leaf measure들로 NestedMeasure 생성 후 모든 노드 집계를 계산.

    Raises:
        LeafCountMismatch, SpaceMismatch, MassExceedsOne
    """
    leaves = tuple(leaves)
    if len(leaves) != tree.leaf_count:
        raise LeafCountMismatch(len(leaves), tree.leaf_count)

    if space_size is None:
        space_size = leaves[0].space_size
    for leaf in leaves:
        if leaf.space_size != space_size:
            raise SpaceMismatch(space_size, leaf.space_size)

    total = sum(mass(leaf) for leaf in leaves)
    if total > 1.0 + MASS_TOLERANCE:
        raise MassExceedsOne(total)

    nodes = [None] * tree.n_nodes
    for node in reversed(range(tree.n_nodes)):
        kids = tree.children[node]
        if kids:
            nodes[node] = sum_measures(space_size, (nodes[c] for c in kids))
        else:
            nodes[node] = leaves[tree.leaf_position[node]]

    return NestedMeasure(tree, int(space_size), leaves, tuple(nodes))


def node_measure(nm: NestedMeasure, node: int) -> SubMeasure:
    """μ_T (캐시된 집계)

    Raises:
        UnknownNode
    """
    return nm.node_measures[nm.tree.check_node(node)]
