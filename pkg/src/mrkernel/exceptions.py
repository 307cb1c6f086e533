"""
mrkernel 커스텀 예외 클래스.

모든 mrkernel 관련 에러를 일관되게 처리합니다.
CLI는 to_dict() 결과를 한 줄 JSON으로 출력합니다.
"""

from typing import Optional


class MultiresError(Exception):
    """mrkernel 기본 예외 클래스"""

    def __init__(self, message: str, details: Optional[dict] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)

    def to_dict(self) -> dict:
        return {
            "error": self.__class__.__name__,
            "message": self.message,
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# measures / hier_measure
# ---------------------------------------------------------------------------

class MeasureError(MultiresError):
    """Sub-probability measure 관련 에러"""


class IndexOutOfRange(MeasureError):
    def __init__(self, index: int, space_size: int):
        super().__init__(
            f"성분 인덱스 범위 초과: {index} (space size {space_size})",
            {"index": int(index), "space_size": int(space_size)},
        )


class NegativeMass(MeasureError):
    def __init__(self, index: int, mass: float):
        super().__init__(
            f"음수 질량: index {index} -> {mass}",
            {"index": int(index), "mass": float(mass)},
        )


class MassExceedsOne(MeasureError):
    def __init__(self, total: float):
        super().__init__(
            f"총 질량이 1을 초과합니다: {total!r}",
            {"total": float(total)},
        )


class SpaceMismatch(MeasureError):
    def __init__(self, left: int, right: int):
        super().__init__(
            f"성분 공간 크기 불일치: {left} != {right}",
            {"left": int(left), "right": int(right)},
        )


# ---------------------------------------------------------------------------
# hierarchy / multires
# ---------------------------------------------------------------------------

class HierarchyError(MultiresError):
    """Index tree / partition 관련 에러"""

    def __init__(self, message: str, node: Optional[int] = None, **extra):
        details = dict(extra)
        if node is not None:
            details["node"] = int(node)
        super().__init__(message, details)


class InvalidEpsilon(HierarchyError):
    def __init__(self, epsilon: float, node: Optional[int] = None):
        super().__init__(f"epsilon은 [0, 1] 범위여야 합니다: {epsilon!r}", node, epsilon=float(epsilon))


class BranchingTooSmall(HierarchyError):
    def __init__(self, branching: int):
        super().__init__(f"branching은 2 이상이어야 합니다: {branching}", branching=int(branching))


class StrictRefinementViolated(HierarchyError):
    def __init__(self, node: int, n_children: int):
        super().__init__(
            f"내부 노드는 자식이 2개 이상이어야 합니다 (node {node}: {n_children})",
            node,
            children=int(n_children),
        )


class LeafDepthMismatch(HierarchyError):
    def __init__(self, node: int, depth: int, expected: int):
        super().__init__(
            f"모든 leaf는 depth {expected}에 있어야 합니다 (node {node}: depth {depth})",
            node,
            depth=int(depth),
            expected=int(expected),
        )


class LeafEpsilonNonzero(HierarchyError):
    def __init__(self, node: int, epsilon: float):
        super().__init__(f"leaf의 epsilon은 0이어야 합니다 (node {node}: {epsilon!r})", node, epsilon=float(epsilon))


class NodeOrderViolated(HierarchyError):
    def __init__(self, message: str, node: Optional[int] = None):
        super().__init__(f"노드 id 순서 위반: {message}", node)


class UnknownNode(HierarchyError):
    def __init__(self, node: int):
        super().__init__(f"존재하지 않는 노드: {node}", node)


class NotAPartition(HierarchyError):
    def __init__(self, message: str):
        super().__init__(f"유효한 partition이 아닙니다: {message}")


class EnumerationTooLarge(HierarchyError):
    def __init__(self, count: int, cap: int):
        super().__init__(
            f"partition 개수 {count}가 상한 {cap}을 초과합니다",
            count=int(count),
            cap=int(cap),
        )


class LeafCountMismatch(HierarchyError):
    def __init__(self, given: int, expected: int):
        super().__init__(f"leaf 개수 불일치: {given} != {expected}", given=int(given), expected=int(expected))


class TreeMismatch(HierarchyError):
    def __init__(self, message: str = "서로 다른 tree 위에서 만들어진 객체입니다"):
        super().__init__(message)


class TreeShapeMismatch(HierarchyError):
    def __init__(self, branching: int, splits: int):
        super().__init__(
            f"tree branching {branching} != splits^2 ({splits}^2)",
            branching=int(branching),
            splits=int(splits),
        )


# ---------------------------------------------------------------------------
# imaging
# ---------------------------------------------------------------------------

class ImageError(MultiresError):
    """이미지 디코딩 / 데이터셋 생성 관련 에러"""


class MalformedHeader(ImageError):
    def __init__(self, message: str):
        super().__init__(f"PPM 헤더 오류: {message}")


class UnsupportedMaxval(ImageError):
    def __init__(self, maxval: int):
        super().__init__(f"지원하지 않는 maxval: {maxval} (255만 지원)", {"maxval": int(maxval)})


class TruncatedPixelData(ImageError):
    def __init__(self, expected: int, got: int):
        super().__init__(
            f"픽셀 데이터가 잘렸습니다: {got}/{expected} bytes",
            {"expected": int(expected), "got": int(got)},
        )


class ManifestError(ImageError):
    def __init__(self, line: int, path: str, message: str):
        super().__init__(
            f"manifest {line}번째 줄 [{path}]: {message}",
            {"line": int(line), "path": path},
        )


# ---------------------------------------------------------------------------
# storage
# ---------------------------------------------------------------------------

class StorageError(MultiresError):
    """파일 입출력 관련 에러"""

    def __init__(self, message: str, path: Optional[str] = None):
        details = {}
        if path:
            details["path"] = str(path)
        super().__init__(message, details)


class IoFailure(StorageError):
    def __init__(self, path: str, message: str):
        super().__init__(f"입출력 실패 [{path}]: {message}", path)


class CorruptFile(StorageError):
    def __init__(self, path: str, message: str):
        super().__init__(f"손상된 파일 [{path}]: {message}", path)


# ---------------------------------------------------------------------------
# svm / evaluation
# ---------------------------------------------------------------------------

class SvmError(MultiresError):
    """SVM 학습 / 평가 관련 에러"""


class SingleClassInput(SvmError):
    def __init__(self, message: str = "두 클래스(+1/-1)가 모두 필요합니다"):
        super().__init__(message)


class NoConvergence(SvmError):
    def __init__(self, iterations: int, violation: float):
        super().__init__(
            f"SMO가 {iterations}회 갱신 안에 수렴하지 않았습니다 (violation {violation:.3e})",
            {"iterations": int(iterations), "violation": float(violation)},
        )


class LengthMismatch(SvmError):
    def __init__(self, given: int, expected: int):
        super().__init__(f"길이 불일치: {given} != {expected}", {"given": int(given), "expected": int(expected)})


class TooFewRecords(SvmError):
    def __init__(self, message: str, label: Optional[int] = None):
        details = {}
        if label is not None:
            details["label"] = int(label)
        super().__init__(f"레코드가 부족합니다: {message}", details)


class EmptyDataset(SvmError):
    def __init__(self):
        super().__init__("데이터셋이 비어 있습니다")


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

class ConfigError(MultiresError):
    """설정 관련 에러"""

    def __init__(self, message: str, config_key: Optional[str] = None):
        details = {}
        if config_key:
            details["key"] = config_key
        super().__init__(f"설정 오류: {message}", details)


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------

class OracleMismatch(MultiresError):
    def __init__(self, max_diff: float, tolerance: float, trials: int):
        super().__init__(
            f"factorized 결과가 전수 열거와 다릅니다 (max diff {max_diff!r} > {tolerance:g})",
            {"max_diff": float(max_diff), "tolerance": float(tolerance), "trials": int(trials)},
        )
