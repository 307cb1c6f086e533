"""
Multiresolution kernel.

- k_partition: 고정 partition P에 대한 k_P = Π_{T∈P} k(μ_T, μ′_T)
- k_multires_bruteforce: k_π = Σ_P π(P) k_P (모든 partition 열거, oracle)
- k_multires_factorized: K_T = (1−ε_T) k_T + ε_T Π_{U∈s(T)} K_U, 결과는 K_root

factorized 계산은 노드당 base kernel을 정확히 한 번 평가하고,
자식이 부모보다 큰 id를 가지므로 id 역순으로 한 번 훑으면 끝납니다.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base_kernels import BaseKernelSpec, eval_kernel
from .config import DEFAULT_ENUMERATION_CAP
from .exceptions import SpaceMismatch, TreeMismatch
from .hier_measure import NestedMeasure
from .hierarchy import (
    IndexTree,
    Partition,
    check_partition,
    enumerate_partitions,
    validate,
)


@dataclass(frozen=True)
class MultiresSpec:
    """k_π의 설정: 계층(tree, ε 포함)과 base kernel"""
    tree: IndexTree
    base: BaseKernelSpec

    def __post_init__(self):
        validate(self.tree)


def _check_pair(spec: MultiresSpec, mu: NestedMeasure, mu2: NestedMeasure) -> None:
    for nm in (mu, mu2):
        if not spec.tree.same_shape(nm.tree):
            raise TreeMismatch()
    if mu.space_size != mu2.space_size:
        raise SpaceMismatch(mu.space_size, mu2.space_size)


def node_kernel_values(spec: MultiresSpec, mu: NestedMeasure, mu2: NestedMeasure) -> np.ndarray:
    """노드별 k_T(μ, μ′) (노드당 eval 한 번)"""
    _check_pair(spec, mu, mu2)
    base = spec.base
    return np.array(
        [eval_kernel(base, a, b) for a, b in zip(mu.node_measures, mu2.node_measures)],
        dtype=np.float64,
    )


def k_partition(
    spec: MultiresSpec,
    partition: Partition,
    mu: NestedMeasure,
    mu2: NestedMeasure,
) -> float:
    """
    k_P(μ, μ′) = Π_{T∈P} k(μ_T, μ′_T)

    Raises:
        NotAPartition, TreeMismatch
    """
    _check_pair(spec, mu, mu2)
    check_partition(spec.tree, partition)
    value = 1.0
    for node in partition:
        value *= eval_kernel(spec.base, mu.node_measures[node], mu2.node_measures[node])
    return value


def partition_distance(
    spec: MultiresSpec,
    partition: Partition,
    mu: NestedMeasure,
    mu2: NestedMeasure,
) -> float:
    """d²_P = −ln k_P (base kernel이 e^{−d²} 꼴일 때의 해석)"""
    value = k_partition(spec, partition, mu, mu2)
    return math.inf if value <= 0.0 else -math.log(value)


def k_multires_bruteforce(
    spec: MultiresSpec,
    mu: NestedMeasure,
    mu2: NestedMeasure,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """
    k_π(μ, μ′) = Σ_P π(P) k_P(μ, μ′), 모든 partition을 명시적으로 열거.

    노드별 base kernel 값은 한 번만 계산해 모든 partition이 공유합니다.

    Raises:
        EnumerationTooLarge, TreeMismatch
    """
    _check_pair(spec, mu, mu2)
    weighted = enumerate_partitions(spec.tree, cap=cap)
    values = node_kernel_values(spec, mu, mu2)
    total = 0.0
    for wp in weighted:
        product = 1.0
        for node in wp.partition:
            product *= values[node]
        total += wp.weight * product
    return float(total)


def _sweep_log(tree: IndexTree, values: np.ndarray) -> float:
    eps = tree.epsilon_array
    if eps[tree.root] == 0.0:
        # K_root = k_root, 자식 값과 무관
        return float(values[tree.root])
    with np.errstate(divide="ignore"):
        log_k = np.log(values)
        log_keep = np.log1p(-eps)
        log_split = np.log(eps)

    log_big_k = np.empty(tree.n_nodes, dtype=np.float64)
    for node in reversed(range(tree.n_nodes)):
        children_sum = 0.0
        for child in tree.children[node]:
            children_sum += log_big_k[child]
        log_big_k[node] = np.logaddexp(log_keep[node] + log_k[node], log_split[node] + children_sum)
    return float(np.exp(log_big_k[tree.root]))


def _sweep_direct(tree: IndexTree, values: np.ndarray) -> float:
    eps = tree.epsilon
    big_k = [0.0] * tree.n_nodes
    for node in reversed(range(tree.n_nodes)):
        product = 1.0
        for child in tree.children[node]:
            product *= big_k[child]
        big_k[node] = (1.0 - eps[node]) * values[node] + eps[node] * product
    return float(big_k[tree.root])


def k_multires_factorized(
    spec: MultiresSpec,
    mu: NestedMeasure,
    mu2: NestedMeasure,
    log_domain: bool = True,
) -> float:
    """
    branching process prior 아래에서의 k_π를 재귀식으로 계산.

    leaf는 ε=0이므로 같은 식이 K_leaf = k_leaf가 됩니다. 큰 tree에서 1보다 작은 값의
    곱이 underflow하지 않도록 기본적으로 log 영역에서 누적하고 root에서 한 번만 exp합니다.

    Raises:
        TreeMismatch
    """
    values = node_kernel_values(spec, mu, mu2)
    if log_domain:
        return _sweep_log(spec.tree, values)
    return _sweep_direct(spec.tree, values)
