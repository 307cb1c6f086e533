"""
Index set 𝒯의 계층 구조 (P_d)_{d=0..D}와 branching process prior.

계층은 rooted tree로 표현합니다.
- 노드 = P₀ᴰ의 집합 하나, leaf = P_D의 singleton {t}
- children = siblings s(T)
- 각 내부 노드는 분할 확률 ε_T를 가지며 leaf의 ε는 항상 0

노드 id는 0..n-1 연속이며 자식 id는 부모 id보다 큽니다(위상 정렬).
multires의 재귀 계산은 이 순서를 거꾸로 한 번 훑는 것으로 끝납니다.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from .config import DEFAULT_ENUMERATION_CAP
from .exceptions import (
    BranchingTooSmall,
    EnumerationTooLarge,
    InvalidEpsilon,
    LeafDepthMismatch,
    LeafEpsilonNonzero,
    NodeOrderViolated,
    NotAPartition,
    StrictRefinementViolated,
    UnknownNode,
)


ROOT = 0


@dataclass(frozen=True, eq=False)
class IndexTree:
    """
    계층 (P_d)를 인코딩하는 rooted tree.

    Attributes:
        children: 노드별 자식 id 튜플 (leaf는 빈 튜플)
        epsilon: 노드별 분할 확률 ε_T
    """
    children: Tuple[Tuple[int, ...], ...]
    epsilon: Tuple[float, ...]

    @classmethod
    def from_children(
        cls,
        children: Sequence[Sequence[int]],
        epsilon: Sequence[float],
        check: bool = True,
    ) -> "IndexTree":
        """자식 목록과 노드별 ε으로 tree 생성 (기본적으로 validate 수행)"""
        tree = cls(
            tuple(tuple(int(c) for c in kids) for kids in children),
            tuple(float(e) for e in epsilon),
        )
        if check:
            validate(tree)
        return tree

    # ------------------------------------------------------------------
    # 구조 조회
    # ------------------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.children)

    @property
    def root(self) -> int:
        return ROOT

    @cached_property
    def parent(self) -> Tuple[int, ...]:
        parents = [-1] * self.n_nodes
        for node, kids in enumerate(self.children):
            for child in kids:
                parents[child] = node
        return tuple(parents)

    @cached_property
    def depths(self) -> Tuple[int, ...]:
        depth = [0] * self.n_nodes
        for node, kids in enumerate(self.children):
            for child in kids:
                depth[child] = depth[node] + 1
        return tuple(depth)

    @property
    def depth(self) -> int:
        """D: leaf의 깊이"""
        return max(self.depths) if self.n_nodes else 0

    def is_leaf(self, node: int) -> bool:
        return not self.children[node]

    @cached_property
    def leaves(self) -> Tuple[int, ...]:
        """leaf 노드 id (id 순서 = leaf 순서)"""
        return tuple(n for n in range(self.n_nodes) if not self.children[n])

    @property
    def leaf_count(self) -> int:
        return len(self.leaves)

    @cached_property
    def leaf_position(self) -> Dict[int, int]:
        return {node: pos for pos, node in enumerate(self.leaves)}

    @cached_property
    def leaf_sets(self) -> Tuple[FrozenSet[int], ...]:
        """노드별로 덮는 leaf 위치 집합"""
        sets: List[FrozenSet[int]] = [frozenset()] * self.n_nodes
        for node in reversed(range(self.n_nodes)):
            kids = self.children[node]
            if kids:
                sets[node] = frozenset().union(*(sets[c] for c in kids))
            else:
                sets[node] = frozenset((self.leaf_position[node],))
        return tuple(sets)

    @cached_property
    def epsilon_array(self) -> np.ndarray:
        values = np.asarray(self.epsilon, dtype=np.float64)
        values.flags.writeable = False
        return values

    @cached_property
    def branching(self) -> Optional[int]:
        """모든 내부 노드의 자식 수가 같으면 그 값 α, 아니면 None"""
        sizes = {len(kids) for kids in self.children if kids}
        if len(sizes) == 1:
            return sizes.pop()
        return None

    @cached_property
    def graph(self) -> nx.DiGraph:
        """부모 -> 자식 방향의 networkx 그래프 (노드 속성: epsilon, depth)"""
        g = nx.DiGraph()
        for node in range(self.n_nodes):
            g.add_node(node, epsilon=self.epsilon[node])
        for node, kids in enumerate(self.children):
            g.add_edges_from((node, child) for child in kids)
        return g

    def check_node(self, node: int) -> int:
        if not 0 <= int(node) < self.n_nodes:
            raise UnknownNode(node)
        return int(node)

    def siblings(self, node: int) -> Tuple[int, ...]:
        """s(T): 다음 해상도에서 T를 분할하는 집합들"""
        return self.children[self.check_node(node)]

    def ancestors(self, node: int) -> FrozenSet[int]:
        """P₀ᴰ 안에서 node의 엄격한 조상들"""
        return frozenset(nx.ancestors(self.graph, self.check_node(node)))

    # ------------------------------------------------------------------
    # 비교 / 변형
    # ------------------------------------------------------------------

    def same_shape(self, other: "IndexTree") -> bool:
        """ε을 무시한 구조 비교"""
        return self is other or self.children == other.children

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IndexTree):
            return NotImplemented
        return self.children == other.children and self.epsilon == other.epsilon

    def __hash__(self) -> int:
        return hash((self.children, self.epsilon))

    def with_epsilons(self, epsilon: Sequence[float]) -> "IndexTree":
        """노드별 ε을 바꾼 tree (leaf는 0으로 강제)"""
        epsilon = list(epsilon)
        if len(epsilon) != self.n_nodes:
            raise NodeOrderViolated(f"epsilon 개수 {len(epsilon)} != 노드 수 {self.n_nodes}")
        values = [0.0 if not kids else float(e) for kids, e in zip(self.children, epsilon)]
        return IndexTree.from_children(self.children, values)

    def with_epsilon(self, epsilon: float) -> "IndexTree":
        """모든 내부 노드에 같은 ε"""
        return self.with_epsilons([epsilon] * self.n_nodes)

    def coarsest(self) -> "Partition":
        """P₀ = {𝒯}"""
        return Partition((self.root,))

    def finest(self) -> "Partition":
        """P_D = leaf singleton들"""
        return Partition(self.leaves)

    def describe(self) -> str:
        eps = sorted({e for kids, e in zip(self.children, self.epsilon) if kids})
        eps_text = ",".join(f"{e:g}" for e in eps) or "-"
        return (
            f"IndexTree(nodes={self.n_nodes}, leaves={self.leaf_count}, "
            f"depth={self.depth}, branching={self.branching}, epsilon={eps_text})"
        )


@dataclass(frozen=True)
class Partition:
    """leaf 집합을 서로소로 덮는 노드 id들 (정렬됨)"""
    node_ids: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "node_ids", tuple(sorted(int(n) for n in self.node_ids)))

    def __iter__(self):
        return iter(self.node_ids)

    def __len__(self) -> int:
        return len(self.node_ids)


@dataclass(frozen=True)
class WeightedPartition:
    partition: Partition
    weight: float


# ----------------------------------------------------------------------
# 생성 / 검증
# ----------------------------------------------------------------------

def build_uniform_tree(branching: int, depth: int, epsilon: float) -> IndexTree:
    """
    깊이 D의 완전 α-ary tree (BFS 번호).

    내부 노드는 모두 같은 ε을 가지며 leaf는 0입니다.
    노드 수 = (α^{D+1} − 1)/(α − 1).
    """
    branching, depth, epsilon = int(branching), int(depth), float(epsilon)
    if not 0.0 <= epsilon <= 1.0:
        raise InvalidEpsilon(epsilon)
    if depth < 0:
        raise LeafDepthMismatch(ROOT, depth, 0)
    if depth >= 1 and branching < 2:
        raise BranchingTooSmall(branching)

    children: List[Tuple[int, ...]] = []
    epsilons: List[float] = []
    level = [ROOT]
    next_id = 1
    for _ in range(depth):
        next_level = []
        for _node in level:
            kids = tuple(range(next_id, next_id + branching))
            next_id += branching
            children.append(kids)
            epsilons.append(epsilon)
            next_level.extend(kids)
        level = next_level
    for _node in level:
        children.append(())
        epsilons.append(0.0)

    return IndexTree.from_children(children, epsilons)


def validate(tree: IndexTree) -> None:
    """
    IndexTree 불변식 검사. 위반 항목마다 다른 예외를 발생시킵니다.

    Raises:
        NodeOrderViolated, InvalidEpsilon, StrictRefinementViolated,
        LeafEpsilonNonzero, LeafDepthMismatch
    """
    n = tree.n_nodes
    if n == 0:
        raise NodeOrderViolated("노드가 없습니다")
    if len(tree.epsilon) != n:
        raise NodeOrderViolated(f"epsilon 개수 {len(tree.epsilon)} != 노드 수 {n}")

    for node, kids in enumerate(tree.children):
        for child in kids:
            if not 0 <= child < n:
                raise NodeOrderViolated(f"범위 밖 자식 id {child}", node)
            if child <= node:
                raise NodeOrderViolated(f"자식 id {child}가 부모 id {node}보다 크지 않습니다", node)

    g = nx.DiGraph()
    g.add_nodes_from(range(n))
    g.add_edges_from((node, c) for node, kids in enumerate(tree.children) for c in kids)
    if not nx.is_arborescence(g):
        raise NodeOrderViolated("root 0에서 시작하는 tree가 아닙니다")

    for node, e in enumerate(tree.epsilon):
        if not (0.0 <= e <= 1.0):
            raise InvalidEpsilon(e, node)

    for node, kids in enumerate(tree.children):
        if len(kids) == 1:
            raise StrictRefinementViolated(node, 1)

    for node, kids in enumerate(tree.children):
        if not kids and tree.epsilon[node] != 0.0:
            raise LeafEpsilonNonzero(node, tree.epsilon[node])

    depth = tree.depth
    for node in tree.leaves:
        if tree.depths[node] != depth:
            raise LeafDepthMismatch(node, tree.depths[node], depth)


def check_partition(tree: IndexTree, partition: Partition) -> None:
    """partition이 leaf 집합을 서로소로 덮는지 검사"""
    ids = partition.node_ids
    if not ids:
        raise NotAPartition("빈 partition")
    if len(set(ids)) != len(ids):
        raise NotAPartition(f"중복 노드 {ids}")
    for node in ids:
        if not 0 <= node < tree.n_nodes:
            raise NotAPartition(f"존재하지 않는 노드 {node}")
    sets = [tree.leaf_sets[node] for node in ids]
    covered = frozenset().union(*sets)
    if sum(len(s) for s in sets) != len(covered):
        raise NotAPartition(f"겹치는 집합 {ids}")
    if len(covered) != tree.leaf_count:
        raise NotAPartition(f"leaf {tree.leaf_count - len(covered)}개를 덮지 않습니다")


# ----------------------------------------------------------------------
# branching process prior
# ----------------------------------------------------------------------

def _keeps(tree: IndexTree, node: int, include_zero_weight: bool) -> bool:
    # 규칙 1 (그대로 둠)의 확률 1 − ε_T, leaf는 항상 1
    return include_zero_weight or tree.is_leaf(node) or tree.epsilon[node] < 1.0


def _splits(tree: IndexTree, node: int, include_zero_weight: bool) -> bool:
    # 규칙 2 (siblings로 교체)의 확률 ε_T
    if tree.is_leaf(node):
        return False
    return include_zero_weight or tree.epsilon[node] > 0.0


def count_partitions(tree: IndexTree, include_zero_weight: bool = True) -> int:
    """
    𝒫_D의 크기. c(leaf)=1, c(T)=1+Π_{U∈s(T)} c(U).

    include_zero_weight=False이면 prior 가중치가 0인 partition은 세지 않습니다.
    """
    counts = [0] * tree.n_nodes
    for node in reversed(range(tree.n_nodes)):
        total = 1 if _keeps(tree, node, include_zero_weight) else 0
        if _splits(tree, node, include_zero_weight):
            total += math.prod(counts[c] for c in tree.children[node])
        counts[node] = total
    return counts[tree.root]


def _prior(tree: IndexTree, partition: Partition) -> float:
    eps = tree.epsilon
    ancestors = set()
    for node in partition.node_ids:
        parent = tree.parent[node]
        while parent >= 0 and parent not in ancestors:
            ancestors.add(parent)
            parent = tree.parent[parent]
    weight = 1.0
    for node in partition.node_ids:
        weight *= 1.0 - eps[node]
    for node in sorted(ancestors):
        weight *= eps[node]
    return weight


def prior_weight(tree: IndexTree, partition: Partition) -> float:
    """
    π(P) = Π_{T∈P}(1 − ε_T) · Π_{T∈P̊} ε_T

    P̊는 P에 속한 집합들의 엄격한 조상 전체입니다.

    Raises:
        NotAPartition
    """
    check_partition(tree, partition)
    return _prior(tree, partition)


def enumerate_partitions(
    tree: IndexTree,
    cap: int = DEFAULT_ENUMERATION_CAP,
    include_zero_weight: bool = False,
) -> List[WeightedPartition]:
    """
    𝒫_D의 모든 partition과 prior 가중치.

    생성 규칙을 그대로 따릅니다: 각 집합을 그대로 두거나 siblings로 바꾸고
    siblings에 같은 규칙을 다시 적용. oracle 용도이며 개수는 Bell 수처럼
    초지수적으로 늘어나므로 cap을 넘으면 열거하지 않고 에러를 냅니다.

    Raises:
        EnumerationTooLarge
    """
    total = count_partitions(tree, include_zero_weight)
    if total > cap:
        raise EnumerationTooLarge(total, cap)

    options: List[List[Tuple[int, ...]]] = [[] for _ in range(tree.n_nodes)]
    for node in reversed(range(tree.n_nodes)):
        choices: List[Tuple[int, ...]] = []
        if _keeps(tree, node, include_zero_weight):
            choices.append((node,))
        if _splits(tree, node, include_zero_weight):
            for combo in itertools.product(*(options[c] for c in tree.children[node])):
                choices.append(tuple(itertools.chain.from_iterable(combo)))
        options[node] = choices
        # 자식 목록은 더 이상 필요 없음
        for child in tree.children[node]:
            options[child] = []

    result = []
    for ids in options[tree.root]:
        partition = Partition(ids)
        result.append(WeightedPartition(partition, _prior(tree, partition)))
    return result
