"""
Precomputed Gram 행렬 위의 soft-margin SVM.

- smo_train: 이진 SVM dual을 SMO(최대 위반 쌍 선택)로 푼다
- ova_train / ova_predict: one-vs-all + winner-takes-all
- evaluate_splits / cross_validate: 클래스 균형 무작위 분할 평가

dual 문제: min ½ αᵀQα − eᵀα, Q_ij = y_i y_j K_ij, 0 ≤ α_i ≤ C, yᵀα = 0.
결정 함수: f(x) = Σ_i α_i y_i K(x_i, x) + bias
"""

from __future__ import annotations

import concurrent.futures
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import DEFAULT_C, DEFAULT_MAX_UPDATES, DEFAULT_THREADS, DEFAULT_TOL
from .exceptions import (
    ConfigError,
    CorruptFile,
    IoFailure,
    LengthMismatch,
    NoConvergence,
    SingleClassInput,
    TooFewRecords,
)
from .gram import GramMatrix, compute_gram
from .logger import get_logger


TAU = 1e-12

MatrixLike = Union[GramMatrix, np.ndarray]


def _matrix(g: MatrixLike) -> np.ndarray:
    values = g.values if isinstance(g, GramMatrix) else g
    return np.asarray(values, dtype=np.float64)


@dataclass
class BinarySvmModel:
    """
    Attributes:
        dual_coef: 학습 인덱스별 α_i·y_i
        bias: 결정 함수 상수항 (= −ρ)
        C: box 상한
        iterations: 쌍 갱신 횟수
        degenerate_steps: 곡률이 0 이하라 TAU로 대체한 갱신 수
        objective_trace: track_objective=True일 때 갱신마다의 dual 목적값
    """
    dual_coef: np.ndarray
    bias: float
    C: float
    tol: float = DEFAULT_TOL
    iterations: int = 0
    degenerate_steps: int = 0
    objective_trace: List[float] = field(default_factory=list)

    @property
    def alpha(self) -> np.ndarray:
        return np.abs(self.dual_coef)

    @property
    def labels(self) -> np.ndarray:
        return np.where(self.dual_coef < 0, -1.0, 1.0)

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.dual_coef != 0.0)


@dataclass
class OvaModel:
    class_ids: Tuple[int, ...]
    models: Tuple[BinarySvmModel, ...]
    C: float = DEFAULT_C
    tol: float = DEFAULT_TOL


def _check_binary(values: np.ndarray, y: np.ndarray) -> None:
    n = values.shape[0]
    if values.shape != (n, n):
        raise LengthMismatch(values.shape[1] if values.ndim == 2 else 0, n)
    if y.shape[0] != n:
        raise LengthMismatch(y.shape[0], n)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ConfigError("이진 라벨은 +1/-1이어야 합니다", "labels")
    if n < 2 or not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassInput()


def _select_pair(y: np.ndarray, alpha: np.ndarray, grad: np.ndarray, C: float) -> Tuple[int, int, float]:
    """최대 위반 쌍 (i ∈ I_up 최대, j ∈ I_low 최소)과 위반량"""
    score = -y * grad
    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    if not up.any() or not low.any():
        return -1, -1, 0.0
    up_scores = np.where(up, score, -np.inf)
    low_scores = np.where(low, score, np.inf)
    i = int(np.argmax(up_scores))
    j = int(np.argmin(low_scores))
    return i, j, float(up_scores[i] - low_scores[j])


def _dual_objective(alpha: np.ndarray, grad: np.ndarray) -> float:
    # G = Qα − e 이므로 eᵀα − ½αᵀQα = −½ αᵀ(G − e)
    return float(-0.5 * np.dot(alpha, grad - 1.0))


def dual_objective(model: BinarySvmModel, g: MatrixLike) -> float:
    """eᵀα − ½ αᵀQα"""
    values = _matrix(g)
    alpha, y = model.alpha, model.labels
    q = (y[:, None] * y[None, :]) * values
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def _compute_bias(y: np.ndarray, alpha: np.ndarray, grad: np.ndarray, C: float) -> float:
    """자유 SV 평균으로 ρ, 자유 SV가 없으면 가능한 구간의 중점"""
    y_grad = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(np.mean(y_grad[free]))
    else:
        at_upper = alpha >= C
        ub_mask = (at_upper & (y < 0)) | (~at_upper & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (~at_upper & (y < 0))
        ub = float(np.min(y_grad[ub_mask])) if ub_mask.any() else np.inf
        lb = float(np.max(y_grad[lb_mask])) if lb_mask.any() else -np.inf
        if np.isfinite(ub) and np.isfinite(lb):
            rho = (ub + lb) / 2.0
        else:
            rho = ub if np.isfinite(ub) else lb
    return -rho


def smo_train(
    g: MatrixLike,
    y: Sequence[float],
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    max_updates: int = DEFAULT_MAX_UPDATES,
    track_objective: bool = False,
) -> BinarySvmModel:
    """
    이진 SVM 학습.

    작업 쌍은 항상 최대 위반 쌍이라 결과는 결정적입니다.
    위반량 m(α) − M(α)가 tol 미만이면 KKT 조건을 만족한 것으로 보고 종료합니다.

    Raises:
        SingleClassInput, NoConvergence, LengthMismatch
    """
    if not C > 0:
        raise ConfigError(f"C는 양수여야 합니다: {C!r}", "C")
    values = _matrix(g)
    y = np.asarray(y, dtype=np.float64)
    _check_binary(values, y)

    logger = get_logger()
    n = y.shape[0]
    q = (y[:, None] * y[None, :]) * values
    q_diag = np.diag(q).copy()
    alpha = np.zeros(n, dtype=np.float64)
    grad = -np.ones(n, dtype=np.float64)
    trace: List[float] = []

    updates = 0
    degenerate = 0
    while True:
        i, j, gap = _select_pair(y, alpha, grad, C)
        if i < 0 or gap < tol:
            break
        if updates >= max_updates:
            raise NoConvergence(updates, gap)

        old_i, old_j = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = q_diag[i] + q_diag[j] + 2.0 * q[i, j]
            if quad <= 0:
                degenerate += 1
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = old_i - old_j
            a_i, a_j = old_i + delta, old_j + delta
            if diff > 0:
                if a_j < 0:
                    a_j, a_i = 0.0, diff
            else:
                if a_i < 0:
                    a_i, a_j = 0.0, -diff
            if diff > 0:
                if a_i > C:
                    a_i, a_j = C, C - diff
            else:
                if a_j > C:
                    a_j, a_i = C, C + diff
        else:
            quad = q_diag[i] + q_diag[j] - 2.0 * q[i, j]
            if quad <= 0:
                degenerate += 1
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            total = old_i + old_j
            a_i, a_j = old_i - delta, old_j + delta
            if total > C:
                if a_i > C:
                    a_i, a_j = C, total - C
            else:
                if a_j < 0:
                    a_j, a_i = 0.0, total
            if total > C:
                if a_j > C:
                    a_j, a_i = C, total - C
            else:
                if a_i < 0:
                    a_i, a_j = 0.0, total

        alpha[i], alpha[j] = a_i, a_j
        grad += q[:, i] * (a_i - old_i) + q[:, j] * (a_j - old_j)
        updates += 1
        if track_objective:
            trace.append(_dual_objective(alpha, grad))

    if degenerate:
        logger.warning(f"SMO: 비양정 곡률 {degenerate}회, TAU로 대체")
    bias = _compute_bias(y, alpha, grad, C)
    logger.debug(f"SMO converged: n={n}, updates={updates}, support={int(np.count_nonzero(alpha))}")
    return BinarySvmModel(alpha * y, bias, float(C), float(tol), updates, degenerate, trace)


def kkt_violation(model: BinarySvmModel, g: MatrixLike, y: Sequence[float]) -> float:
    """최대 위반 쌍의 위반량 m(α) − M(α) (0 이하이면 정확한 최적)"""
    values = _matrix(g)
    y = np.asarray(y, dtype=np.float64)
    alpha = model.alpha
    grad = ((y[:, None] * y[None, :]) * values) @ alpha - 1.0
    return _select_pair(y, alpha, grad, model.C)[2]


def decision(model: BinarySvmModel, gram_row: Sequence[float]) -> float:
    """
    Σ_i dual_i · K(x_i, x) + bias

    Raises:
        LengthMismatch
    """
    row = np.asarray(gram_row, dtype=np.float64)
    if row.shape != model.dual_coef.shape:
        raise LengthMismatch(row.shape[0] if row.ndim else 0, model.dual_coef.shape[0])
    return float(np.dot(model.dual_coef, row) + model.bias)


def decision_rows(model: BinarySvmModel, gram_rows: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(gram_rows, dtype=np.float64))
    if rows.shape[1] != model.dual_coef.shape[0]:
        raise LengthMismatch(rows.shape[1], model.dual_coef.shape[0])
    return rows @ model.dual_coef + model.bias


# ----------------------------------------------------------------------
# one-vs-all
# ----------------------------------------------------------------------

def ova_train(
    g: MatrixLike,
    labels: Sequence[int],
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    threads: int = DEFAULT_THREADS,
) -> OvaModel:
    """
    클래스마다 이진 SVM 하나 (해당 클래스 +1, 나머지 −1). 클래스별 학습은 병렬.

    Raises:
        SingleClassInput
    """
    values = _matrix(g)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != values.shape[0]:
        raise LengthMismatch(labels.shape[0], values.shape[0])
    class_ids = tuple(int(c) for c in np.unique(labels))
    if len(class_ids) < 2:
        raise SingleClassInput("one-vs-all에는 2개 이상의 클래스가 필요합니다")

    def _train(class_id: int) -> BinarySvmModel:
        return smo_train(values, np.where(labels == class_id, 1.0, -1.0), C, tol)

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, min(threads, len(class_ids)))) as executor:
        models = tuple(executor.map(_train, class_ids))
    return OvaModel(class_ids, models, float(C), float(tol))


def ova_scores(model: OvaModel, gram_rows: np.ndarray) -> np.ndarray:
    """(테스트 수, 클래스 수) 결정값 행렬"""
    return np.column_stack([decision_rows(m, gram_rows) for m in model.models])


def ova_predict(model: OvaModel, gram_rows: np.ndarray) -> np.ndarray:
    """
    winner-takes-all. 동점이면 가장 작은 class id.

    gram_rows: (테스트 수, 학습 수) 또는 한 행
    """
    scores = ova_scores(model, gram_rows)
    # class_ids는 정렬되어 있으므로 argmax의 첫 최댓값이 가장 작은 id
    return np.asarray(model.class_ids, dtype=np.int64)[np.argmax(scores, axis=1)]


def training_error(model: OvaModel, g: MatrixLike, labels: Sequence[int]) -> float:
    values = _matrix(g)
    predicted = ova_predict(model, values)
    return float(np.mean(predicted != np.asarray(labels, dtype=np.int64)))


# ----------------------------------------------------------------------
# 평가
# ----------------------------------------------------------------------

@dataclass
class EvalReport:
    error_rates: List[float]
    C: float
    seed: int
    train_frac: float

    @property
    def mean(self) -> float:
        return float(np.mean(self.error_rates)) if self.error_rates else 0.0

    def to_csv(self, run_config: Optional[Dict[str, Any]] = None) -> str:
        lines = []
        if run_config is not None:
            lines.append("# " + json.dumps(run_config, sort_keys=True, separators=(",", ":")))
        lines.append("split,error_rate")
        lines.extend(f"{k},{rate!r}" for k, rate in enumerate(self.error_rates))
        lines.append(f"mean,{self.mean!r}")
        return "\n".join(lines) + "\n"


def balanced_split(
    labels: np.ndarray,
    train_frac: float,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """클래스별로 같은 비율의 학습/테스트 분할 (정렬된 인덱스)"""
    train, test = [], []
    for class_id in np.unique(labels):
        members = np.flatnonzero(labels == class_id)
        if members.size < 2:
            raise TooFewRecords(f"클래스 {class_id}의 레코드가 {members.size}개입니다", int(class_id))
        n_train = int(round(train_frac * members.size))
        n_train = min(max(n_train, 1), members.size - 1)
        perm = rng.permutation(members)
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def evaluate_splits(
    g: GramMatrix,
    C: float = DEFAULT_C,
    n_splits: int = 4,
    train_frac: float = 0.75,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    threads: int = DEFAULT_THREADS,
) -> EvalReport:
    """
    분할마다 학습 Gram으로 OVA 학습 후 테스트 행으로 winner-takes-all 오류율 계산.

    Raises:
        TooFewRecords, SingleClassInput
    """
    if n_splits < 1:
        raise ConfigError(f"splits는 1 이상이어야 합니다: {n_splits}", "splits")
    if not 0.0 < train_frac < 1.0:
        raise ConfigError(f"train_frac은 (0, 1) 범위여야 합니다: {train_frac}", "train_frac")
    labels = np.asarray(g.labels, dtype=np.int64)
    if labels.size < 2:
        raise TooFewRecords(f"레코드 {labels.size}개")
    if np.unique(labels).size < 2:
        raise SingleClassInput("평가에는 2개 이상의 클래스가 필요합니다")

    logger = get_logger()
    rng = np.random.default_rng(seed)
    rates = []
    for split in range(n_splits):
        train, test = balanced_split(labels, train_frac, rng)
        model = ova_train(g.values[np.ix_(train, train)], labels[train], C, tol, threads)
        predicted = ova_predict(model, g.values[np.ix_(test, train)])
        rate = float(np.mean(predicted != labels[test]))
        logger.debug(f"split {split}: train={train.size}, test={test.size}, error={rate:.4f}")
        rates.append(rate)
    return EvalReport(rates, float(C), int(seed), float(train_frac))


def cross_validate(
    records,
    spec,
    C: float = DEFAULT_C,
    n_splits: int = 4,
    train_frac: float = 0.75,
    seed: int = 0,
    threads: int = DEFAULT_THREADS,
) -> EvalReport:
    """Gram을 계산한 뒤 evaluate_splits"""
    labels = [r.label for r in records]
    if len(records) < 2:
        raise TooFewRecords(f"레코드 {len(records)}개")
    if len(set(labels)) < 2:
        raise SingleClassInput("평가에는 2개 이상의 클래스가 필요합니다")
    g = compute_gram(records, spec, threads=threads)
    return evaluate_splits(g, C, n_splits, train_frac, seed, threads=threads)


# ----------------------------------------------------------------------
# 모델 파일
# ----------------------------------------------------------------------

def model_text(model: OvaModel, run_config: Optional[Dict[str, Any]] = None) -> str:
    lines = []
    if run_config is not None:
        lines.append("# " + json.dumps(run_config, sort_keys=True, separators=(",", ":")))
    lines.append(f"C={model.C!r} tol={model.tol!r} classes={','.join(str(c) for c in model.class_ids)}")
    for class_id, m in zip(model.class_ids, model.models):
        lines.append(f"class={class_id} bias={m.bias!r}")
        lines.append("duals=" + " ".join(repr(float(v)) for v in m.dual_coef))
    return "\n".join(lines) + "\n"


def save_model(model: OvaModel, path: Path, run_config: Optional[Dict[str, Any]] = None) -> None:
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(model_text(model, run_config), encoding="utf-8")
    except OSError as e:
        raise IoFailure(str(path), str(e)) from e


def load_model(path: Path) -> OvaModel:
    """
    Raises:
        IoFailure, CorruptFile
    """
    try:
        lines = [l for l in Path(path).read_text(encoding="utf-8").splitlines() if l and not l.startswith("#")]
    except OSError as e:
        raise IoFailure(str(path), str(e)) from e
    try:
        header = dict(item.split("=", 1) for item in lines[0].split())
        C, tol = float(header["C"]), float(header["tol"])
        class_ids = tuple(int(c) for c in header["classes"].split(","))
        models = []
        for k, class_id in enumerate(class_ids):
            head = dict(item.split("=", 1) for item in lines[1 + 2 * k].split())
            if int(head["class"]) != class_id:
                raise ValueError(f"class {head['class']} != {class_id}")
            duals_line = lines[2 + 2 * k]
            if not duals_line.startswith("duals="):
                raise ValueError("duals 줄이 없습니다")
            duals = np.array([float(v) for v in duals_line[len("duals="):].split()], dtype=np.float64)
            models.append(BinarySvmModel(duals, float(head["bias"]), C, tol))
    except (IndexError, KeyError, ValueError) as e:
        raise CorruptFile(str(path), f"모델 파일 해석 실패: {e}") from e
    return OvaModel(class_ids, tuple(models), C, tol)
