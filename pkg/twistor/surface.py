"""
曲率球 U, V 的构造, 两族曲率球关系的差分检查, 六球坐标与球的互换, 以及包络重建
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from twistor.algebra import EPS_REAL, HEX_SIGNS, conj6, lie_form
from twistor.errors import PlaneAtInfinity, StencilOutOfDomain, UmbilicDegeneracy
from twistor.frame import FrameGrid, FrameState, frame_to_lie6
from twistor.numerics import central_diff, crop, stencil_margin

logger = logging.getLogger(__name__)

EPS_PLANE = 1e-10
EPS_UMBILIC = 1e-8
TOL_QUADRIC = 1e-8
TOL_THM = 1e-5


@dataclass
class HexSphere:
    """实六球坐标 (y⁰..y⁵)"""
    y: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)

    @property
    def quadric_residual(self) -> float:
        return lie_quadric_residual(self.y)

    def normalize(self) -> Tuple[np.ndarray, float]:
        return hex_normalize(self.y)


@dataclass
class SurfaceSample:
    """曲面上一点的欧氏数据"""
    r: np.ndarray
    n: np.ndarray
    w1: float
    w2: float
    point: Tuple[float, float] = (0.0, 0.0)


@dataclass
class SurfaceGrid:
    """网格上的重建曲面; valid 为 False 的点记录在 degenerate 中"""
    r1: np.ndarray
    r2: np.ndarray
    r: np.ndarray
    n: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    valid: np.ndarray
    degenerate: List[Dict] = field(default_factory=list)

    @property
    def normal_residual(self) -> float:
        """有效点上 ||n| − 1| 的最大值"""
        if not np.any(self.valid):
            return 0.0
        return float(np.max(np.abs(np.linalg.norm(self.n[self.valid], axis=-1) - 1.0)))


def lie_quadric_residual(y) -> float:
    """|−y₀² + y₁² + y₂² + y₃² + y₄² − y₅²| 的最大值"""
    y = np.asarray(y, dtype=float)
    return float(np.max(np.abs(np.sum(HEX_SIGNS * y * y, axis=-1))))


def curvature_spheres(F) -> Tuple[np.ndarray, np.ndarray]:
    """U = 𝒰 + conj(𝒰), V = 𝒱 + conj(𝒱)

    Args:
        F: FrameState, FrameGrid 或 (..., 4, 4) 标架数组

    Returns:
        (U, V): (..., 6) 实数组
    """
    lie = frame_to_lie6(F)
    U = lie["U"] + conj6(lie["U"])
    V = lie["V"] + conj6(lie["V"])
    imag = max(float(np.max(np.abs(U.imag))), float(np.max(np.abs(V.imag))))
    if imag > EPS_REAL:
        logger.warning(f"Curvature sphere vectors carry imaginary part {imag:.2e}")
    return U.real, V.real


def theorem1_check(grid: FrameGrid) -> Dict[str, float]:
    """(U,U), (V,V) 以及 {U, ∂₂U, ∂₂²U} × {V, ∂₁V, ∂₁²V} 九个乘积的最大残差

    Raises:
        StencilOutOfDomain: 网格放不下四阶模板
    """
    m = stencil_margin(2)
    if len(grid.r1) <= 2 * m or len(grid.r2) <= 2 * m:
        raise StencilOutOfDomain(f"grid {len(grid.r1)}x{len(grid.r2)} too small for theorem checks")
    U, V = curvature_spheres(grid)
    left = {
        "U": U,
        "d2U": central_diff(U, grid.h2, 1, axis=1),
        "d22U": central_diff(U, grid.h2, 2, axis=1),
    }
    right = {
        "V": V,
        "d1V": central_diff(V, grid.h1, 1, axis=0),
        "d11V": central_diff(V, grid.h1, 2, axis=0),
    }
    report = {
        "(U,U)": float(np.max(np.abs(crop(lie_form(U, U), m)))),
        "(V,V)": float(np.max(np.abs(crop(lie_form(V, V), m)))),
    }
    for lname, lval in left.items():
        for rname, rval in right.items():
            report[f"({lname},{rname})"] = float(np.max(np.abs(crop(lie_form(lval, rval), m))))
    logger.info(f"Curvature sphere relations worst residual: {max(report.values()):.3e}")
    return report


def theorem2_check(grid: FrameGrid) -> float:
    """管道面: 曲率球 V 沿 R² 不变, 返回 max |∂₂V|"""
    m = stencil_margin(1)
    _, V = curvature_spheres(grid)
    return float(np.max(np.abs(crop(central_diff(V, grid.h2, 1, axis=1), m))))


def hex_normalize(y) -> Tuple[np.ndarray, np.ndarray]:
    """除以 y⁰+y¹ 得到球心 (y²,y³,y⁴)/(y⁰+y¹) 与有向半径 y⁵/(y⁰+y¹)

    Raises:
        PlaneAtInfinity: |y⁰+y¹| ≤ EPS_PLANE
    """
    y = np.asarray(y, dtype=float)
    scale = y[..., 0] + y[..., 1]
    if np.any(np.abs(scale) <= EPS_PLANE):
        raise PlaneAtInfinity("y0 + y1 vanishes: the sphere is a plane")
    center = y[..., 2:5] / scale[..., None]
    radius = y[..., 5] / scale
    return center, radius


def hex_embed(center, radius) -> np.ndarray:
    """球 (c, R) 的六球坐标 ((1+c²−R²)/2, (1−c²+R²)/2, c, R)"""
    center = np.asarray(center, dtype=float)
    radius = np.asarray(radius, dtype=float)
    c2 = np.sum(center * center, axis=-1)
    return np.concatenate(
        [((1 + c2 - radius ** 2) / 2)[..., None], ((1 - c2 + radius ** 2) / 2)[..., None],
         center, radius[..., None]],
        axis=-1,
    )


def envelope_reconstruct(U, V) -> SurfaceSample:
    """由两个曲率球求曲面点: n = (c_U − c_V)/(w² − w¹), r = c_U + w¹n

    Raises:
        UmbilicDegeneracy: |w¹ − w²| ≤ EPS_UMBILIC
        PlaneAtInfinity: 任一球退化为平面
    """
    c_u, w1 = hex_normalize(U)
    c_v, w2 = hex_normalize(V)
    if abs(float(w1) - float(w2)) <= EPS_UMBILIC:
        raise UmbilicDegeneracy(f"curvature radii coincide: {float(w1)} vs {float(w2)}")
    n = (c_u - c_v) / (w2 - w1)
    r = c_u + w1 * n
    return SurfaceSample(r=r, n=n, w1=float(w1), w2=float(w2))


def surface_grid(grid: FrameGrid) -> SurfaceGrid:
    """在整张标架网格上重建曲面, 退化点记录而不跳过"""
    U, V = curvature_spheres(grid)
    su = U[..., 0] + U[..., 1]
    sv = V[..., 0] + V[..., 1]
    plane = (np.abs(su) <= EPS_PLANE) | (np.abs(sv) <= EPS_PLANE)
    su = np.where(plane, 1.0, su)
    sv = np.where(plane, 1.0, sv)
    c_u, w1 = U[..., 2:5] / su[..., None], U[..., 5] / su
    c_v, w2 = V[..., 2:5] / sv[..., None], V[..., 5] / sv
    umbilic = ~plane & (np.abs(w1 - w2) <= EPS_UMBILIC)
    valid = ~(plane | umbilic)
    gap = np.where(valid, w2 - w1, 1.0)
    n = (c_u - c_v) / gap[..., None]
    r = c_u + w1[..., None] * n
    degenerate = []
    for (i, j) in zip(*np.nonzero(~valid)):
        reason = "PlaneAtInfinity" if plane[i, j] else "UmbilicDegeneracy"
        degenerate.append({"index": [int(i), int(j)], "point": [float(grid.r1[i]), float(grid.r2[j])],
                           "reason": reason})
    nan = np.nan
    result = SurfaceGrid(grid.r1, grid.r2, np.where(valid[..., None], r, nan), np.where(valid[..., None], n, nan),
                         np.where(valid, w1, nan), np.where(valid, w2, nan), valid, degenerate)
    if degenerate:
        logger.warning(f"{len(degenerate)} degenerate grid points excluded from the surface")
    return result


def surface_table(surf: SurfaceGrid) -> np.ndarray:
    """CSV 行: R¹, R², r, n, w¹, w² (只含有效点)"""
    g1, g2 = np.meshgrid(surf.r1, surf.r2, indexing="ij")
    mask = surf.valid
    return np.column_stack([g1[mask], g2[mask], surf.r[mask], surf.n[mask], surf.w1[mask], surf.w2[mask]])


def sample_spheres(sample: SurfaceSample) -> Tuple[np.ndarray, np.ndarray]:
    """曲面点的两个曲率球 (w¹, r − w¹n), (w², r − w²n) 的六球坐标"""
    r = np.asarray(sample.r, dtype=float)
    n = np.asarray(sample.n, dtype=float)
    return hex_embed(r - sample.w1 * n, sample.w1), hex_embed(r - sample.w2 * n, sample.w2)


def frame_spheres(state: FrameState) -> Tuple[HexSphere, HexSphere]:
    U, V = curvature_spheres(state)
    return HexSphere(U), HexSphere(V)
