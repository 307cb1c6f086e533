"""
Sparse sub-probability measure.

유한 성분 공간 [0, space_size) 위의 음이 아닌 히스토그램으로, 총 질량이 1 이하입니다.
정렬된 인덱스 배열과 질량 배열 두 개로 저장하며 질량 0인 항목은 저장하지 않습니다.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Tuple, Union

import numpy as np

from .config import MASS_TOLERANCE
from .exceptions import (
    IndexOutOfRange,
    MassExceedsOne,
    MeasureError,
    NegativeMass,
    SpaceMismatch,
)


Entries = Union[Iterable[Tuple[int, float]], Tuple[np.ndarray, np.ndarray]]


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class SubMeasure:
    """
    M₊ˢ(𝒳)의 원소.

    Attributes:
        space_size: 성분 공간 크기
        indices: 엄격히 증가하는 성분 인덱스 (uint32)
        masses: 각 인덱스의 양의 질량 (float64)
    """
    space_size: int
    indices: np.ndarray
    masses: np.ndarray

    @property
    def entries(self) -> List[Tuple[int, float]]:
        return [(int(i), float(m)) for i, m in zip(self.indices, self.masses)]

    @property
    def is_empty(self) -> bool:
        return self.indices.size == 0

    def __len__(self) -> int:
        return int(self.indices.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SubMeasure):
            return NotImplemented
        return (
            self.space_size == other.space_size
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.masses, other.masses)
        )

    def __hash__(self) -> int:
        return hash((self.space_size, self.indices.tobytes(), self.masses.tobytes()))

    def __repr__(self) -> str:
        return f"SubMeasure(space_size={self.space_size}, entries={self.entries})"


def _canonical(space_size: int, indices: np.ndarray, masses: np.ndarray) -> SubMeasure:
    """중복 병합, 0 제거, 정렬 후 질량 상한 검사"""
    if indices.size == 0:
        return empty(space_size)

    unique, inverse = np.unique(indices, return_inverse=True)
    summed = np.bincount(inverse.ravel(), weights=masses, minlength=unique.size)
    keep = summed > 0.0
    unique, summed = unique[keep], summed[keep]

    total = float(np.sum(summed))
    if total > 1.0 + MASS_TOLERANCE:
        raise MassExceedsOne(total)

    return SubMeasure(
        space_size,
        _frozen(unique.astype(np.uint32)),
        _frozen(summed.astype(np.float64)),
    )


def empty(space_size: int) -> SubMeasure:
    """질량 0인 measure"""
    return SubMeasure(
        int(space_size),
        _frozen(np.empty(0, dtype=np.uint32)),
        _frozen(np.empty(0, dtype=np.float64)),
    )


def new_submeasure(space_size: int, entries: Entries) -> SubMeasure:
    """
    (index, mass) 목록에서 정규형 SubMeasure 생성.

    Args:
        space_size: 성분 공간 크기
        entries: (index, mass) 쌍의 iterable 또는 (indices, masses) 배열 튜플

    Raises:
        IndexOutOfRange, NegativeMass, MassExceedsOne
    """
    space_size = int(space_size)
    if (
        isinstance(entries, tuple)
        and len(entries) == 2
        and all(isinstance(part, np.ndarray) for part in entries)
    ):
        indices = np.asarray(entries[0], dtype=np.int64).ravel()
        masses = np.asarray(entries[1], dtype=np.float64).ravel()
    else:
        pairs = list(entries)
        indices = np.array([int(i) for i, _ in pairs], dtype=np.int64)
        masses = np.array([float(m) for _, m in pairs], dtype=np.float64)

    if indices.shape != masses.shape:
        raise MeasureError("indices와 masses의 길이가 다릅니다")
    if not np.all(np.isfinite(masses)):
        raise MeasureError("유한하지 않은 질량이 있습니다")

    bad = np.flatnonzero((indices < 0) | (indices >= space_size))
    if bad.size:
        raise IndexOutOfRange(int(indices[bad[0]]), space_size)
    negative = np.flatnonzero(masses < 0.0)
    if negative.size:
        k = negative[0]
        raise NegativeMass(int(indices[k]), float(masses[k]))

    return _canonical(space_size, indices, masses)


def _check_space(a: SubMeasure, b: SubMeasure) -> None:
    if a.space_size != b.space_size:
        raise SpaceMismatch(a.space_size, b.space_size)


def add(a: SubMeasure, b: SubMeasure) -> SubMeasure:
    """
    점별 합. 결과의 총 질량이 1을 넘으면 MassExceedsOne.
    """
    _check_space(a, b)
    if b.is_empty:
        return a
    if a.is_empty:
        return b
    return _canonical(
        a.space_size,
        np.concatenate([a.indices, b.indices]).astype(np.int64),
        np.concatenate([a.masses, b.masses]),
    )


def sum_measures(space_size: int, measures: Iterable[SubMeasure]) -> SubMeasure:
    """여러 measure의 합 (한 번의 병합으로 계산)"""
    parts = list(measures)
    for m in parts:
        if m.space_size != space_size:
            raise SpaceMismatch(space_size, m.space_size)
    parts = [m for m in parts if not m.is_empty]
    if not parts:
        return empty(space_size)
    if len(parts) == 1:
        return parts[0]
    return _canonical(
        space_size,
        np.concatenate([m.indices for m in parts]).astype(np.int64),
        np.concatenate([m.masses for m in parts]),
    )


def mass(m: SubMeasure) -> float:
    """총 질량 |m|"""
    return float(np.sum(m.masses))


def entropy(m: SubMeasure) -> float:
    """h(θ) = −Σ θ_i ln θ_i (0·ln 0 = 0)"""
    if m.is_empty:
        return 0.0
    return float(-np.sum(m.masses * np.log(m.masses)))


def align(a: SubMeasure, b: SubMeasure) -> Tuple[np.ndarray, np.ndarray]:
    """
    두 measure를 support 합집합 위의 dense 벡터로 정렬.

    합집합은 정렬되어 있으므로 인자 순서를 바꾸면 두 벡터만 서로 바뀝니다.
    """
    _check_space(a, b)
    union = np.union1d(a.indices, b.indices)
    va = np.zeros(union.size, dtype=np.float64)
    vb = np.zeros(union.size, dtype=np.float64)
    va[np.searchsorted(union, a.indices)] = a.masses
    vb[np.searchsorted(union, b.indices)] = b.masses
    return va, vb
