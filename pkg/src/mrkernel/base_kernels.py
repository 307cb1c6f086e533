"""
Sub-probability measure 위의 base kernel.

- RBF:  k_{a,b,ρ}(θ,θ′) = exp(−ρ Σ_i |θ_i^a − θ′_i^a|^b)
- JD:   k_h(θ,θ′) = exp(−h((θ+θ′)/2) + ½(h(θ)+h(θ′)))

두 kernel 모두 support 합집합 위에서만 계산하며 질량이 1보다 작은 measure에도
재정규화 없이 그대로 적용합니다. 양쪽 모두에 없는 성분은 0을 기여합니다.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import ConfigError
from .measures import SubMeasure, align, entropy


class KernelKind(str, Enum):
    RBF = "rbf"
    JD = "jd"


@dataclass(frozen=True)
class BaseKernelSpec:
    """
    닫힌 열거형 base kernel 설정.

    RBF는 a ∈ (0,1], b ∈ (0,2], ρ > 0. b > 2이면 exp(−ρ d^b)의 양의 정부호성이 깨집니다.
    """
    kind: KernelKind
    a: float = 1.0
    b: float = 1.0
    rho: float = 0.01

    def __post_init__(self):
        if self.kind is KernelKind.RBF:
            if not 0.0 < self.a <= 1.0:
                raise ConfigError(f"RBF a는 (0, 1] 범위여야 합니다: {self.a!r}", "a")
            if not 0.0 < self.b <= 2.0:
                raise ConfigError(f"RBF b는 (0, 2] 범위여야 합니다: {self.b!r}", "b")
            if not self.rho > 0.0:
                raise ConfigError(f"RBF rho는 양수여야 합니다: {self.rho!r}", "rho")

    @classmethod
    def rbf(cls, a: float = 1.0, b: float = 1.0, rho: float = 0.01) -> "BaseKernelSpec":
        return cls(KernelKind.RBF, float(a), float(b), float(rho))

    @classmethod
    def jensen(cls) -> "BaseKernelSpec":
        return cls(KernelKind.JD)

    @property
    def is_rbf(self) -> bool:
        return self.kind is KernelKind.RBF

    def __str__(self) -> str:
        if self.is_rbf:
            return f"rbf(a={self.a:g}, b={self.b:g}, rho={self.rho:g})"
        return "jd"


class EvalCounter:
    """
    base kernel 평가 횟수 카운터.

    Gram worker 스레드가 동시에 증가시키므로 lock으로 보호합니다.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._count += n

    def reset(self) -> None:
        with self._lock:
            self._count = 0

    @property
    def value(self) -> int:
        with self._lock:
            return self._count


_counter = EvalCounter()


def eval_count_reset() -> None:
    _counter.reset()


def eval_count() -> int:
    """마지막 reset 이후 eval 호출 횟수"""
    return _counter.value


def _power(values: np.ndarray, a: float) -> np.ndarray:
    # θ^a = exp(a·ln θ), θ = 0 -> 0
    if a == 1.0:
        return values
    out = np.zeros_like(values)
    positive = values > 0.0
    out[positive] = np.exp(a * np.log(values[positive]))
    return out


def _rbf(spec: BaseKernelSpec, theta: SubMeasure, theta2: SubMeasure) -> float:
    va, vb = align(theta, theta2)
    diff = np.abs(_power(va, spec.a) - _power(vb, spec.a))
    if spec.b != 1.0:
        diff = diff ** spec.b
    return float(np.exp(-spec.rho * np.sum(diff)))


def _jensen(theta: SubMeasure, theta2: SubMeasure) -> float:
    va, vb = align(theta, theta2)
    mid = (va + vb) / 2.0
    mid = mid[mid > 0.0]
    h_mid = float(-np.sum(mid * np.log(mid))) if mid.size else 0.0
    exponent = -h_mid + 0.5 * (entropy(theta) + entropy(theta2))
    # 오목성으로 exponent ≤ 0; 반올림 오차로 1을 넘지 않게 자름
    return float(np.exp(min(exponent, 0.0)))


def eval_kernel(spec: BaseKernelSpec, theta: SubMeasure, theta2: SubMeasure) -> float:
    """
    k(θ, θ′). 값은 (0, 1]이며 인자 순서에 대해 정확히 대칭입니다.

    Raises:
        SpaceMismatch
    """
    _counter.add()
    if spec.kind is KernelKind.RBF:
        return _rbf(spec, theta, theta2)
    return _jensen(theta, theta2)
