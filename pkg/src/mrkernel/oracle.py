"""
무작위 인스턴스 생성과 factorized/brute-force 대조 검사.

check-oracle 명령과 테스트가 같은 생성기를 씁니다.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .base_kernels import BaseKernelSpec
from .config import DEFAULT_ENUMERATION_CAP
from .hier_measure import NestedMeasure, from_leaves
from .hierarchy import IndexTree, build_uniform_tree, count_partitions
from .exceptions import EnumerationTooLarge
from .measures import SubMeasure, new_submeasure
from .multires import MultiresSpec, k_multires_bruteforce, k_multires_factorized


ORACLE_TOLERANCE = 1e-10
RANDOM_SPACE_SIZE = 16

ORACLE_KERNELS = (
    BaseKernelSpec.rbf(0.25, 1.0, 0.01),
    BaseKernelSpec.rbf(0.5, 1.0, 0.01),
    BaseKernelSpec.rbf(1.0, 1.0, 0.01),
    BaseKernelSpec.rbf(0.5, 2.0, 0.5),
    BaseKernelSpec.jensen(),
)


def random_tree(branching: int, depth: int, rng: np.random.Generator) -> IndexTree:
    """균일 구조 + 노드별 무작위 ε"""
    tree = build_uniform_tree(branching, depth, 0.0)
    return tree.with_epsilons(rng.random(tree.n_nodes))


def random_submeasure(
    rng: np.random.Generator,
    space_size: int = RANDOM_SPACE_SIZE,
    total: float = 1.0,
    density: float = 0.3,
) -> SubMeasure:
    """support 크기가 무작위인 희소 measure (총 질량 ≈ total)"""
    support = rng.random(space_size) < density
    indices = np.flatnonzero(support)
    if indices.size == 0:
        return new_submeasure(space_size, [])
    weights = rng.random(indices.size)
    masses = weights / weights.sum() * total
    return new_submeasure(space_size, (indices, masses))


def random_nested(
    tree: IndexTree,
    rng: np.random.Generator,
    space_size: int = RANDOM_SPACE_SIZE,
    total: Optional[float] = None,
) -> NestedMeasure:
    """leaf 사이에 질량을 무작위로 나눈 NestedMeasure (일부 leaf는 비어 있을 수 있음)"""
    total = float(rng.uniform(0.5, 1.0)) if total is None else total
    shares = rng.dirichlet(np.ones(tree.leaf_count)) * total
    # 반올림으로 총합이 1을 넘지 않도록 살짝 줄임
    shares *= (1.0 - 1e-12)
    leaves = [random_submeasure(rng, space_size, share) for share in shares]
    return from_leaves(tree, leaves, space_size)


@dataclass
class OracleResult:
    trials: int
    max_diff: float
    diffs: List[float]

    @property
    def passed(self) -> bool:
        return self.max_diff <= ORACLE_TOLERANCE


def run_oracle(
    alpha: int,
    depth: int,
    trials: int,
    seed: int,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> OracleResult:
    """
    무작위 tree/measure 쌍마다 |factorized − bruteforce|. base kernel은 번갈아 사용.

    Raises:
        EnumerationTooLarge
    """
    structure = build_uniform_tree(alpha, depth, 0.0)
    count = count_partitions(structure)
    if count > cap:
        raise EnumerationTooLarge(count, cap)

    rng = np.random.default_rng(seed)
    diffs = []
    for trial in range(trials):
        tree = random_tree(alpha, depth, rng)
        spec = MultiresSpec(tree, ORACLE_KERNELS[trial % len(ORACLE_KERNELS)])
        mu, mu2 = random_nested(tree, rng), random_nested(tree, rng)
        fast = k_multires_factorized(spec, mu, mu2)
        slow = k_multires_bruteforce(spec, mu, mu2, cap=cap)
        diffs.append(abs(fast - slow))
    return OracleResult(trials, max(diffs, default=0.0), diffs)
