"""
데이터셋 위의 k_π Gram 행렬.

상삼각만 계산하고 행 블록 단위로 스레드에 나눕니다. 각 원소는 한 worker만
계산해서 대칭 위치에 같은 값을 쓰므로 스레드 수와 상관없이 결과가 비트 단위로 같습니다.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn

from .base_kernels import BaseKernelSpec, eval_kernel
from .config import DEFAULT_THREADS
from .exceptions import CorruptFile, EmptyDataset, IoFailure, TreeMismatch
from .imaging import DatasetRecord
from .logger import get_logger
from .multires import MultiresSpec, k_multires_factorized


GRAM_MAGIC = b"MRKG1"
_U32 = struct.Struct("<I")

console = Console(stderr=True)


@dataclass(eq=False)
class GramMatrix:
    """
    Attributes:
        values: 대칭 n×n 행렬
        labels: 레코드별 클래스 id
        provenance: tree 설정, base kernel, dataset hash, 실행 설정
    """
    values: np.ndarray
    labels: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GramMatrix):
            return NotImplemented
        return (
            np.array_equal(self.values, other.values)
            and np.array_equal(self.labels, other.labels)
            and self.provenance == other.provenance
        )


def dataset_hash(records: Sequence[DatasetRecord]) -> str:
    """라벨과 leaf 항목 전체에 대한 sha256"""
    hasher = hashlib.sha256()
    for record in records:
        hasher.update(_U32.pack(record.label))
        for leaf in record.nested.leaf_measures:
            hasher.update(_U32.pack(len(leaf)))
            hasher.update(leaf.indices.astype("<u4").tobytes())
            hasher.update(leaf.masses.astype("<f8").tobytes())
    return hasher.hexdigest()


def _row_blocks(n: int, n_blocks: int) -> List[range]:
    """상삼각 원소 수가 비슷하도록 행을 연속 블록으로 나눔 (뒤쪽 행이 짧음)"""
    total = n * (n + 1) // 2
    target = max(1, total // max(1, n_blocks))
    blocks, start, acc = [], 0, 0
    for row in range(n):
        acc += n - row
        if acc >= target:
            blocks.append(range(start, row + 1))
            start, acc = row + 1, 0
    if start < n:
        blocks.append(range(start, n))
    return blocks


def compute_gram(
    records: Sequence[DatasetRecord],
    spec: MultiresSpec,
    threads: int = DEFAULT_THREADS,
    show_progress: bool = False,
    provenance: Optional[Dict[str, Any]] = None,
) -> GramMatrix:
    """
    values[i][j] = k_multires_factorized(spec, nested_i, nested_j)

    Raises:
        EmptyDataset, TreeMismatch
    """
    if not records:
        raise EmptyDataset()
    for record in records:
        if not spec.tree.same_shape(record.nested.tree):
            raise TreeMismatch(f"레코드 tree가 설정과 다릅니다 (label {record.label})")

    logger = get_logger()
    n = len(records)
    values = np.zeros((n, n), dtype=np.float64)
    nested = [r.nested for r in records]
    threads = max(1, int(threads))
    blocks = _row_blocks(n, threads * 4)
    logger.debug(f"compute_gram: n={n}, threads={threads}, blocks={len(blocks)}")

    def _work(rows: range) -> int:
        done = 0
        for i in rows:
            for j in range(i, n):
                value = k_multires_factorized(spec, nested[i], nested[j])
                values[i, j] = value
                values[j, i] = value
                done += 1
        return done

    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as executor:
        futures = [executor.submit(_work, rows) for rows in blocks]
        if show_progress:
            with Progress(
                SpinnerColumn(),
                TextColumn("[progress.description]{task.description}"),
                BarColumn(),
                TaskProgressColumn(),
                console=console,
            ) as progress:
                task = progress.add_task("Gram 계산 중...", total=n * (n + 1) // 2)
                for future in concurrent.futures.as_completed(futures):
                    progress.advance(task, future.result())
        else:
            for future in futures:
                future.result()

    meta = {
        "tree": spec.tree.describe(),
        "kernel": str(spec.base),
        "dataset_hash": dataset_hash(records),
    }
    meta.update(provenance or {})
    return GramMatrix(values, np.array([r.label for r in records], dtype=np.int64), meta)


def base_gram(
    records: Sequence[DatasetRecord],
    base: BaseKernelSpec,
    node: Optional[int] = None,
) -> np.ndarray:
    """한 노드 집계(기본값: root = 전역 히스토그램)에 대한 base kernel Gram"""
    if not records:
        raise EmptyDataset()
    tree = records[0].nested.tree
    node = tree.root if node is None else tree.check_node(node)
    measures = [r.nested.node_measures[node] for r in records]
    n = len(measures)
    out = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        for j in range(i, n):
            out[i, j] = out[j, i] = eval_kernel(base, measures[i], measures[j])
    return out


def min_eigenvalue(g: GramMatrix) -> float:
    """대칭 고유값 solver로 구한 최소 고유값 (PSD 진단)"""
    return float(np.linalg.eigvalsh(np.asarray(g.values, dtype=np.float64))[0])


# ----------------------------------------------------------------------
# 저장 / 로드
# ----------------------------------------------------------------------

def gram_bytes(g: GramMatrix) -> bytes:
    """MRKG1: magic, provenance JSON(길이 접두), n, labels(u32), 상삼각 f64 행 우선. little-endian"""
    header = json.dumps(g.provenance, sort_keys=True, separators=(",", ":")).encode("utf-8")
    upper = g.values[np.triu_indices(g.n)]
    return b"".join([
        GRAM_MAGIC,
        _U32.pack(len(header)),
        header,
        _U32.pack(g.n),
        np.asarray(g.labels, dtype="<u4").tobytes(),
        np.asarray(upper, dtype="<f8").tobytes(),
    ])


def save(g: GramMatrix, path: Path) -> None:
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(gram_bytes(g))
    except OSError as e:
        raise IoFailure(str(path), str(e)) from e


def parse_gram(data: bytes, path: str = "<bytes>") -> GramMatrix:
    if data[:len(GRAM_MAGIC)] != GRAM_MAGIC:
        raise CorruptFile(path, "MRKG1 magic이 아닙니다")
    pos = len(GRAM_MAGIC)

    def _take(size: int) -> bytes:
        nonlocal pos
        if pos + size > len(data):
            raise CorruptFile(path, f"{pos} 위치에서 데이터가 끝났습니다")
        chunk = data[pos:pos + size]
        pos += size
        return chunk

    header_len = _U32.unpack(_take(4))[0]
    try:
        provenance = json.loads(_take(header_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptFile(path, f"provenance 해석 실패: {e}") from e
    n = _U32.unpack(_take(4))[0]
    labels = np.frombuffer(_take(4 * n), dtype="<u4").astype(np.int64)
    n_upper = n * (n + 1) // 2
    upper = np.frombuffer(_take(8 * n_upper), dtype="<f8")
    if pos != len(data):
        raise CorruptFile(path, f"shape 불일치: 끝에 {len(data) - pos} bytes가 남았습니다")

    values = np.zeros((n, n), dtype=np.float64)
    rows, cols = np.triu_indices(n)
    values[rows, cols] = upper
    values[cols, rows] = upper
    return GramMatrix(values, labels, provenance)


def load(path: Path) -> GramMatrix:
    """
    Raises:
        IoFailure, CorruptFile
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(str(path), str(e)) from e
    return parse_gram(data, str(path))


def export_csv(g: GramMatrix, path: Path, dense: bool = False) -> None:
    """
    CSV 내보내기. 첫 줄은 `# ` 뒤에 provenance JSON.

    - 기본: `i,j,value` 상삼각 triple
    - dense: `row,label,c0,...,c{n-1}` 전체 행렬
    """
    lines = ["# " + json.dumps(g.provenance, sort_keys=True, separators=(",", ":"))]
    if dense:
        lines.append(",".join(["row", "label"] + [f"c{j}" for j in range(g.n)]))
        for i in range(g.n):
            lines.append(",".join([str(i), str(int(g.labels[i]))] + [repr(float(v)) for v in g.values[i]]))
    else:
        lines.append("i,j,value")
        for i in range(g.n):
            for j in range(i, g.n):
                lines.append(f"{i},{j},{float(g.values[i, j])!r}")
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoFailure(str(path), str(e)) from e
