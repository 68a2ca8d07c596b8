"""
产物写出: JSON 报告, CSV 表格与 OBJ 网格

所有写操作的 OSError 都包装为 ExportError, 这是唯一会中止一次运行的错误。
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Sequence, Tuple

import numpy as np
import trimesh

logger = logging.getLogger(__name__)

CSV_FORMAT = "%.17g"
OBJ_DIGITS = 17


class ExportError(Exception):
    """产物无法写入磁盘"""


def _plain(value: Any) -> Any:
    """转换为可 JSON 序列化的值; 非有限浮点数写为 null"""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def ensure_dir(path: Path) -> Path:
    try:
        Path(path).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExportError(f"cannot create output directory {path}: {e}") from e
    return Path(path)


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ExportError(f"cannot write {path}: {e}") from e
    return path


def write_json(path: Path, data: Any) -> Path:
    """键排序, 缩进两格, 末尾换行"""
    return write_text(path, json.dumps(_plain(data), indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def write_csv(path: Path, header: Sequence[str], rows: np.ndarray) -> Path:
    """
    写出数值表

    Args:
        path: 目标文件
        header: 列名
        rows: (n, len(header)) 数组

    Raises:
        ExportError: 写文件失败或列数不符
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(header):
        raise ExportError(f"{path}: {rows.shape[1]} columns but {len(header)} names")
    try:
        np.savetxt(path, rows.reshape(-1, len(header)), delimiter=",", header=",".join(header),
                   comments="", fmt=CSV_FORMAT)
    except OSError as e:
        raise ExportError(f"cannot write {path}: {e}") from e
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return Path(path)


def mesh_arrays(points: np.ndarray, valid: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    网格点 -> (顶点, 三角形)

    顶点按网格顺序只取有效点; 每个四角都有效的格子拆成两个三角形,
    碰到无效点的格子整个丢弃。

    Args:
        points: (n1, n2, 3)
        valid: (n1, n2) 布尔数组

    Returns:
        (vertices, faces): faces 为从 0 开始的顶点下标
    """
    points = np.asarray(points, dtype=float)
    valid = np.asarray(valid, dtype=bool) & np.all(np.isfinite(points), axis=-1)
    index = np.full(valid.shape, -1, dtype=int)
    index[valid] = np.arange(int(valid.sum()))
    a = index[:-1, :-1]
    b = index[1:, :-1]
    c = index[1:, 1:]
    d = index[:-1, 1:]
    complete = (a >= 0) & (b >= 0) & (c >= 0) & (d >= 0)
    first = np.stack([a[complete], b[complete], c[complete]], axis=-1)
    second = np.stack([a[complete], c[complete], d[complete]], axis=-1)
    # 每个格子的两个三角形相邻存放
    faces = np.stack([first, second], axis=1).reshape(-1, 3)
    return points[valid], faces


def emit_mesh(points: np.ndarray, valid: np.ndarray, path: Path) -> Tuple[int, int]:
    """
    用 trimesh 写出 OBJ 网格

    Returns:
        (顶点数, 三角形数)

    Raises:
        ExportError: 写文件失败
    """
    vertices, faces = mesh_arrays(points, valid)
    mesh = trimesh.Trimesh(vertices=vertices, faces=faces, process=False)
    try:
        text = mesh.export(file_type="obj", digits=OBJ_DIGITS, include_normals=False)
    except ValueError as e:
        raise ExportError(f"cannot encode mesh for {path}: {e}") from e
    write_text(path, text)
    logger.info(f"Wrote mesh {path}: {len(vertices)} vertices, {len(faces)} triangles")
    return len(vertices), len(faces)
