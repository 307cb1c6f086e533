"""
실행 설정: tree 설정, base kernel 문자열, epsilon 토큰, RunConfig.

모든 출력 파일은 RunConfig.to_json()을 헤더에 포함합니다.
to_json()은 정렬된 키만 사용하고 타임스탬프를 넣지 않으므로
같은 플래그로 다시 실행하면 바이트 단위로 같은 파일이 나옵니다.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, Union

from .exceptions import ConfigError


MASS_TOLERANCE = 1e-9
DEFAULT_ENUMERATION_CAP = 10 ** 6
DEFAULT_C = 10.0
DEFAULT_TOL = 1e-3
DEFAULT_MAX_UPDATES = 10 ** 6
DEFAULT_THREADS = os.cpu_count() or 1

EPSILON_ONE_OVER_ALPHA = "1/alpha"


def parse_epsilon(text: Union[str, float], branching: int) -> float:
    """
    epsilon 값 해석.

    실수 리터럴 또는 `1/alpha` 토큰을 받습니다. `1/alpha`는 1/branching이 됩니다.
    """
    if isinstance(text, (int, float)):
        value = float(text)
    else:
        token = text.strip().lower()
        if token == EPSILON_ONE_OVER_ALPHA:
            if branching < 1:
                raise ConfigError(f"1/alpha에는 양의 branching이 필요합니다: {branching}", "epsilon")
            return 1.0 / branching
        try:
            value = float(token)
        except ValueError:
            raise ConfigError(f"epsilon 해석 실패: {text!r}", "epsilon") from None
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"epsilon은 [0, 1] 범위여야 합니다: {value!r}", "epsilon")
    return value


@dataclass(frozen=True)
class TreeConfig:
    """균일 tree 설정 (`branching=<α> depth=<D> epsilon=<real|1/alpha>`)"""
    branching: int
    depth: int
    epsilon: str = "0"

    @property
    def epsilon_value(self) -> float:
        return parse_epsilon(self.epsilon, self.branching)

    def to_text(self) -> str:
        return f"branching={self.branching} depth={self.depth} epsilon={self.epsilon}"

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TreeConfig":
        return cls(int(data["branching"]), int(data["depth"]), str(data.get("epsilon", "0")))

    @classmethod
    def parse(cls, text: str) -> "TreeConfig":
        """`key=value` 쌍을 공백으로 구분한 블록을 해석"""
        values: Dict[str, str] = {}
        for item in text.split():
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"key=value 형식이 아닙니다: {item!r}", "tree")
            values[key.strip().lower()] = value.strip()
        missing = {"branching", "depth"} - values.keys()
        if missing:
            raise ConfigError(f"필수 키 누락: {sorted(missing)}", "tree")
        try:
            branching = int(values["branching"])
            depth = int(values["depth"])
        except ValueError:
            raise ConfigError(f"정수가 아닌 tree 설정: {text!r}", "tree") from None
        config = cls(branching, depth, values.get("epsilon", "0"))
        config.epsilon_value  # 검증
        return config


def parse_kernel_spec(text: str):
    """
    base kernel 문자열 해석.

    - `jd`
    - `rbf:a=<f>,b=<f>,rho=<f>` (생략된 키는 a=1, b=1, rho=0.01)
    """
    from .base_kernels import BaseKernelSpec

    token = text.strip().lower()
    if token == "jd":
        return BaseKernelSpec.jensen()
    kind, _, params = token.partition(":")
    if kind != "rbf":
        raise ConfigError(f"알 수 없는 kernel: {text!r}", "kernel")
    values = {"a": 1.0, "b": 1.0, "rho": 0.01}
    for item in filter(None, params.split(",")):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in values:
            raise ConfigError(f"잘못된 RBF 파라미터: {item!r}", "kernel")
        try:
            values[key] = float(value)
        except ValueError:
            raise ConfigError(f"RBF 파라미터가 실수가 아닙니다: {item!r}", "kernel") from None
    return BaseKernelSpec.rbf(values["a"], values["b"], values["rho"])


def format_kernel_spec(spec) -> str:
    """parse_kernel_spec의 역변환"""
    if spec.is_rbf:
        return f"rbf:a={spec.a!r},b={spec.b!r},rho={spec.rho!r}"
    return "jd"


@dataclass(frozen=True)
class RunConfig:
    """한 번의 CLI 실행에 대한 해석 완료된 설정"""
    command: str
    options: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"command": self.command, "options": dict(self.options)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        return cls(str(data["command"]), dict(data.get("options", {})))
