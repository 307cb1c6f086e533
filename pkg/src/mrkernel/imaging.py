"""
이미지 수집 파이프라인.

1. 바이너리 PPM (P6, maxval 255) 디코딩
2. 채널당 상위 3비트로 9비트 색 양자화 (공간 크기 8³ = 512)
3. 픽셀을 깊이 D 격자 셀(= tree leaf)에 배정, 픽셀당 질량 1/(W·H)
4. MRKD1 바이너리 데이터셋 저장/로드와 합성 데이터셋 생성
"""

from __future__ import annotations

import concurrent.futures
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    ConfigError,
    CorruptFile,
    IoFailure,
    MalformedHeader,
    ManifestError,
    MultiresError,
    TreeShapeMismatch,
    TruncatedPixelData,
    UnsupportedMaxval,
)
from .hier_measure import NestedMeasure, from_leaves
from .hierarchy import IndexTree, build_uniform_tree
from .logger import get_logger
from .measures import SubMeasure, new_submeasure


COLOR_BITS = 3
SPACE_SIZE = 1 << (3 * COLOR_BITS)  # 512

DATASET_MAGIC = b"MRKD1"
_U32 = struct.Struct("<I")
_ENTRY = np.dtype([("index", "<u4"), ("mass", "<f8")])

WHITESPACE = b" \t\r\n\x0b\x0c"


@dataclass(frozen=True, eq=False)
class RawImage:
    """행 우선 RGB 이미지. pixels.shape == (height, width, 3), uint8"""
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.pixels.shape != (self.height, self.width, 3):
            raise MalformedHeader(
                f"픽셀 배열 shape {self.pixels.shape} != ({self.height}, {self.width}, 3)"
            )


@dataclass(frozen=True)
class DatasetRecord:
    label: int
    nested: NestedMeasure


@dataclass
class Dataset:
    """공유 tree 위의 레코드 묶음 + 헤더 메타데이터"""
    records: List[DatasetRecord]
    tree: IndexTree
    splits: int
    space_size: int = SPACE_SIZE
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def labels(self) -> List[int]:
        return [r.label for r in self.records]

    def tree_config(self) -> Dict[str, int]:
        return {"branching": self.tree.branching or 1, "depth": self.tree.depth, "splits": self.splits}


# ----------------------------------------------------------------------
# PPM
# ----------------------------------------------------------------------

def _next_token(data: bytes, pos: int) -> Tuple[bytes, int]:
    """공백과 주석(# ~ 줄끝)을 건너뛰고 다음 헤더 토큰 반환"""
    n = len(data)
    while pos < n:
        ch = data[pos:pos + 1]
        if ch in WHITESPACE and ch:
            pos += 1
        elif ch == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos:pos + 1] not in WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedHeader("헤더가 일찍 끝났습니다")
    return data[start:pos], pos


def load_ppm(data: bytes) -> RawImage:
    """
    바이너리 PPM 디코딩.

    Raises:
        MalformedHeader, UnsupportedMaxval, TruncatedPixelData
    """
    if data[:2] != b"P6":
        raise MalformedHeader(f"magic이 P6가 아닙니다: {data[:2]!r}")
    pos = 2
    if pos >= len(data) or (data[pos:pos + 1] not in WHITESPACE and data[pos:pos + 1] != b"#"):
        raise MalformedHeader("magic 뒤에 공백이 필요합니다")

    fields = []
    for _ in range(3):
        token, pos = _next_token(data, pos)
        if not token.isdigit():
            raise MalformedHeader(f"정수가 아닌 헤더 값: {token!r}")
        fields.append(int(token))
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise MalformedHeader(f"잘못된 크기 {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(maxval)
    if pos >= len(data) or data[pos:pos + 1] not in WHITESPACE:
        raise MalformedHeader("maxval 뒤에 공백 한 개가 필요합니다")
    pos += 1

    expected = width * height * 3
    raw = data[pos:pos + expected]
    if len(raw) < expected:
        raise TruncatedPixelData(expected, len(raw))
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3).copy()
    pixels.flags.writeable = False
    return RawImage(width, height, pixels)


def dump_ppm(img: RawImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img.pixels, dtype=np.uint8).tobytes()


def read_ppm(path: Path) -> RawImage:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(str(path), str(e)) from e
    return load_ppm(data)


# ----------------------------------------------------------------------
# 양자화 / 격자 배정
# ----------------------------------------------------------------------

def quantize(r: int, g: int, b: int) -> int:
    """(r≫5)·64 + (g≫5)·8 + (b≫5)"""
    shift = 8 - COLOR_BITS
    return ((r >> shift) << (2 * COLOR_BITS)) + ((g >> shift) << COLOR_BITS) + (b >> shift)


def quantize_pixels(pixels: np.ndarray) -> np.ndarray:
    """(..., 3) uint8 배열을 같은 shape[:-1]의 색 인덱스로"""
    p = (np.asarray(pixels, dtype=np.uint8) >> (8 - COLOR_BITS)).astype(np.int64)
    return (p[..., 0] << (2 * COLOR_BITS)) + (p[..., 1] << COLOR_BITS) + p[..., 2]


def grid_leaf_map(tree: IndexTree, splits: int) -> np.ndarray:
    """
    (s^D, s^D) 격자 셀 -> leaf 위치.

    각 단계에서 자식 순서는 행 우선(child = row_digit·s + col_digit)이어서
    tree의 중첩이 격자 세분화와 일치합니다.
    """
    depth = tree.depth
    if depth > 0 and tree.branching != splits * splits:
        raise TreeShapeMismatch(tree.branching or 0, splits)
    side = splits ** depth
    cells = np.empty((side, side), dtype=np.int64)
    for row in range(side):
        for col in range(side):
            node = tree.root
            for level in range(1, depth + 1):
                unit = splits ** (depth - level)
                child = ((row // unit) % splits) * splits + ((col // unit) % splits)
                node = tree.children[node][child]
            cells[row, col] = tree.leaf_position[node]
    return cells


def image_to_nested(img: RawImage, tree: IndexTree, splits: int) -> NestedMeasure:
    """
    이미지를 leaf별 색 히스토그램으로 분해.

    픽셀 (x, y)의 셀은 col = ⌊x·s^D/W⌋, row = ⌊y·s^D/H⌋ 이며
    W, H가 s^D로 나누어떨어지지 않아도 모든 픽셀을 덮습니다.

    Raises:
        TreeShapeMismatch
    """
    if splits < 1:
        raise ConfigError(f"splits는 1 이상이어야 합니다: {splits}", "splits")
    leaf_map = grid_leaf_map(tree, splits)
    side = leaf_map.shape[0]

    cols = (np.arange(img.width, dtype=np.int64) * side) // img.width
    rows = (np.arange(img.height, dtype=np.int64) * side) // img.height
    leaf_of_pixel = leaf_map[rows[:, None], cols[None, :]]
    colors = quantize_pixels(img.pixels)

    n_leaves = tree.leaf_count
    keys = (leaf_of_pixel * SPACE_SIZE + colors).ravel()
    counts = np.bincount(keys, minlength=n_leaves * SPACE_SIZE).reshape(n_leaves, SPACE_SIZE)
    total = img.width * img.height
    # 정수 개수의 합은 정확히 W·H
    assert int(counts.sum()) == total

    leaves: List[SubMeasure] = []
    for row in counts:
        nz = np.flatnonzero(row)
        leaves.append(new_submeasure(SPACE_SIZE, (nz, row[nz] / total)))
    return from_leaves(tree, leaves, SPACE_SIZE)


# ----------------------------------------------------------------------
# 합성 데이터셋
# ----------------------------------------------------------------------

BACKGROUND_RGB = (40, 110, 200)
FOREGROUND_RGB = (230, 180, 20)
CELL_PIXELS = 8
# RGB 큐브 꼭짓점 8색 (배경/전경과 다른 bin)
NOISE_PALETTE = np.array(
    [(r, g, b) for r in (0, 255) for g in (0, 255) for b in (0, 255)], dtype=np.uint8
)


def synth_image(side: int, rng: np.random.Generator, noise_rate: float) -> np.ndarray:
    """class A 이미지: 좌상단 사분면 전경 + 배경 + 팔레트 색 노이즈"""
    pixels = np.empty((side, side, 3), dtype=np.uint8)
    pixels[:, :] = BACKGROUND_RGB
    half = side // 2
    pixels[:half, :half] = FOREGROUND_RGB
    if noise_rate > 0.0:
        mask = rng.random((side, side)) < noise_rate
        pixels[mask] = NOISE_PALETTE[rng.integers(0, len(NOISE_PALETTE), size=int(mask.sum()))]
    return pixels


def synth_dataset(
    classes: int,
    per_class: int,
    splits: int,
    seed: int,
    depth: int = 1,
    noise_rate: float = 0.05,
) -> Dataset:
    """
    전역 색 히스토그램의 분포는 같고 공간 배치만 다른 2-클래스 데이터셋.

    class B 이미지는 같은 배치를 180° 회전한 것(전경이 우하단 사분면)이며 노이즈는
    class A와 독립적으로 뽑습니다. 노이즈가 0이면 두 클래스의 전역 bag이 정확히 같고,
    노이즈가 있으면 분포가 같습니다. D=0 표현으로는 구별할 수 없고 D≥1이면 구별됩니다.
    """
    if classes != 2:
        raise ConfigError(f"합성 데이터셋은 2 클래스만 지원합니다: {classes}", "classes")
    if per_class < 1:
        raise ConfigError(f"per_class는 1 이상이어야 합니다: {per_class}", "per_class")
    if not 0.0 <= noise_rate <= 1.0:
        raise ConfigError(f"noise_rate는 [0, 1] 범위여야 합니다: {noise_rate}", "noise_rate")

    tree = build_uniform_tree(splits * splits, depth, 0.0) if depth else build_uniform_tree(2, 0, 0.0)
    side = (splits ** depth) * CELL_PIXELS
    rng = np.random.default_rng(seed)

    class_a, class_b = [], []
    for _ in range(per_class):
        pixels = synth_image(side, rng, noise_rate)
        rotated = np.ascontiguousarray(synth_image(side, rng, noise_rate)[::-1, ::-1])
        class_a.append(DatasetRecord(0, image_to_nested(RawImage(side, side, pixels), tree, splits)))
        class_b.append(DatasetRecord(1, image_to_nested(RawImage(side, side, rotated), tree, splits)))

    get_logger().debug(f"synthetic dataset: {2 * per_class} records, side={side}, seed={seed}")
    return Dataset(class_a + class_b, tree, splits)


# ----------------------------------------------------------------------
# manifest 수집
# ----------------------------------------------------------------------

def read_manifest(path: Path) -> List[Tuple[int, Path, int]]:
    """
    `<ppm 경로>,<정수 라벨>` 줄 목록. 상대 경로는 manifest 위치 기준.

    Returns:
        (줄 번호, 경로, 라벨) 목록
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IoFailure(str(path), str(e)) from e

    entries = []
    for number, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        image_path, sep, label = text.rpartition(",")
        if not sep or not image_path.strip():
            raise ManifestError(number, text, "`<path>,<label>` 형식이 아닙니다")
        try:
            label_value = int(label.strip())
        except ValueError:
            raise ManifestError(number, image_path.strip(), f"정수가 아닌 라벨 {label.strip()!r}") from None
        if label_value < 0:
            raise ManifestError(number, image_path.strip(), "라벨은 0 이상이어야 합니다")
        resolved = Path(image_path.strip())
        if not resolved.is_absolute():
            resolved = path.parent / resolved
        entries.append((number, resolved, label_value))
    return entries


def ingest_manifest(
    manifest: Path,
    splits: int,
    depth: int,
    threads: int = 1,
) -> Dataset:
    """
    manifest의 이미지를 읽어 Dataset 생성.

    Raises:
        ManifestError: 실패한 파일의 줄 번호 포함
    """
    logger = get_logger()
    entries = read_manifest(manifest)
    tree = build_uniform_tree(splits * splits, depth, 0.0) if depth else build_uniform_tree(2, 0, 0.0)

    def _one(entry: Tuple[int, Path, int]) -> DatasetRecord:
        number, image_path, label = entry
        try:
            nested = image_to_nested(read_ppm(image_path), tree, splits)
        except MultiresError as e:
            raise ManifestError(number, str(image_path), e.message) from e
        logger.debug(f"ingested line {number}: {image_path}")
        return DatasetRecord(label, nested)

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        records = list(executor.map(_one, entries))
    return Dataset(records, tree, splits)


# ----------------------------------------------------------------------
# MRKD1 직렬화
# ----------------------------------------------------------------------

def dataset_bytes(dataset: Dataset, run_config: Optional[Dict[str, Any]] = None) -> bytes:
    """
    MRKD1: magic, 헤더 JSON(길이 접두), spaceSize, 레코드 수, 레코드들.
    레코드: label, leaf 수, leaf마다 항목 수와 (u32 index, f64 mass) 쌍. little-endian.
    """
    header = {"tree": dataset.tree_config()}
    if run_config is not None:
        header["run"] = run_config
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    parts = [DATASET_MAGIC, _U32.pack(len(header_bytes)), header_bytes]
    parts.append(_U32.pack(dataset.space_size))
    parts.append(_U32.pack(len(dataset.records)))
    for record in dataset.records:
        leaves = record.nested.leaf_measures
        parts.append(_U32.pack(record.label))
        parts.append(_U32.pack(len(leaves)))
        for leaf in leaves:
            entries = np.empty(len(leaf), dtype=_ENTRY)
            entries["index"] = leaf.indices
            entries["mass"] = leaf.masses
            parts.append(_U32.pack(len(leaf)))
            parts.append(entries.tobytes())
    return b"".join(parts)


def save_dataset(path: Path, dataset: Dataset, run_config: Optional[Dict[str, Any]] = None) -> None:
    if dataset.tree.depth > 0 and dataset.tree.branching is None:
        raise ConfigError("균일하지 않은 tree는 저장할 수 없습니다", "tree")
    data = dataset_bytes(dataset, run_config)
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise IoFailure(str(path), str(e)) from e


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptFile(self.path, f"{self.pos} 위치에서 데이터가 끝났습니다")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]


def parse_dataset(data: bytes, path: str = "<bytes>") -> Dataset:
    reader = _Reader(data, path)
    if reader.take(len(DATASET_MAGIC)) != DATASET_MAGIC:
        raise CorruptFile(path, "MRKD1 magic이 아닙니다")
    try:
        header = json.loads(reader.take(reader.u32()).decode("utf-8"))
        tree_cfg = header["tree"]
        depth, splits = int(tree_cfg["depth"]), int(tree_cfg["splits"])
        branching = int(tree_cfg["branching"])
    except (ValueError, KeyError, TypeError) as e:
        raise CorruptFile(path, f"헤더 해석 실패: {e}") from e

    try:
        tree = build_uniform_tree(branching if depth else 2, depth, 0.0)
    except MultiresError as e:
        raise CorruptFile(path, f"tree 설정 오류: {e.message}") from e

    space_size = reader.u32()
    n_records = reader.u32()
    records = []
    for _ in range(n_records):
        label = reader.u32()
        n_leaves = reader.u32()
        if n_leaves != tree.leaf_count:
            raise CorruptFile(path, f"leaf 수 {n_leaves} != {tree.leaf_count}")
        leaves = []
        for _ in range(n_leaves):
            count = reader.u32()
            entries = np.frombuffer(reader.take(count * _ENTRY.itemsize), dtype=_ENTRY)
            try:
                leaves.append(new_submeasure(space_size, (entries["index"].astype(np.int64), entries["mass"].copy())))
            except MultiresError as e:
                raise CorruptFile(path, e.message) from e
        try:
            nested = from_leaves(tree, leaves, space_size)
        except MultiresError as e:
            raise CorruptFile(path, e.message) from e
        records.append(DatasetRecord(label, nested))
    if reader.pos != len(data):
        raise CorruptFile(path, f"끝에 {len(data) - reader.pos} bytes가 남았습니다")
    return Dataset(records, tree, splits, space_size, meta=header)


def load_dataset(path: Path) -> Dataset:
    """
    Raises:
        IoFailure, CorruptFile
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IoFailure(str(path), str(e)) from e
    return parse_dataset(data, str(path))
