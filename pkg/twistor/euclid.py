"""
欧氏曲面 (曲率线坐标) 到 Lie 球标架

    weingarten_data -> lie_lift -> normalize_uv -> complete_frame -> extract_potentials

解析曲面的 r 用 sympy 表达, 位置与一、二阶导数精确; 之后的 ∂w, ∂p 等
一律在网格上用四阶中心差分, 无效边缘为 NaN。
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from twistor.algebra import lie_form
from twistor.errors import (DegenerateParametrization, DegenerateThirdForm, UmbilicPoint,
                            ZeroPotential)
from twistor.frame import LIE6_TABLE, assemble_lie6
from twistor.numerics import central_diff
from twistor.potentials import R1, R2, Rect, SampledField
from twistor.surface import EPS_UMBILIC, hex_embed

logger = logging.getLogger(__name__)

TOL_DIRAC_ANALYTIC = 1e-5
TOL_DIRAC_SAMPLED = 1e-3
# |∂ᵢn|² 低于此值视为该方向的主曲率为零 (半径无穷)
EPS_FLAT = 1e-14
# 相对于最大值, 判定 p 或 q 处处为零
ZERO_REL = 1e-8


class EuclidSurface:
    """曲率线坐标下的参数曲面 r(R¹, R²)

    Args:
        name: 名称
        coords: 三个分量的 sympy 表达式 (自变量 R1, R2)
        domain: 参数矩形
    """

    def __init__(self, name: str, coords: Sequence[sp.Expr], domain: Rect):
        self.name = name
        self.coords = tuple(sp.sympify(c) for c in coords)
        self.domain = domain
        self._cache: Dict[Tuple[int, int], object] = {}

    def derivative(self, r1, r2, n1: int = 0, n2: int = 0) -> np.ndarray:
        """∂₁^n1 ∂₂^n2 r, 形状 (..., 3)"""
        key = (n1, n2)
        if key not in self._cache:
            spec = [(R1, n1)] * bool(n1) + [(R2, n2)] * bool(n2)
            exprs = [sp.diff(c, *spec) if spec else c for c in self.coords]
            self._cache[key] = sp.lambdify((R1, R2), exprs, "numpy")
        r1, r2 = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))
        values = self._cache[key](r1, r2)
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), r1.shape) for v in values], axis=-1)

    def substitute(self, mapping: Dict[sp.Symbol, sp.Expr], domain: Rect, name: Optional[str] = None) -> "EuclidSurface":
        return EuclidSurface(name or self.name, [c.subs(mapping) for c in self.coords], domain)


@dataclass
class WeingartenData:
    """n, w¹, w², G₁₁, G₂₂ 以及 Weingarten 残差; canal 标记某个半径为无穷"""
    n: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    G11: np.ndarray
    G22: np.ndarray
    residual: float
    canal: Tuple[bool, bool] = (False, False)


@dataclass
class SurfaceData:
    """网格上的 (r, n, w¹, w², G₁₁, G₂₂)"""
    r1: np.ndarray
    r2: np.ndarray
    r: np.ndarray
    n: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    G11: np.ndarray
    G22: np.ndarray
    sampled: bool = False

    @property
    def h1(self) -> float:
        return float(self.r1[1] - self.r1[0])

    @property
    def h2(self) -> float:
        return float(self.r2[1] - self.r2[0])


@dataclass
class NormalizedUV:
    """归一化的 𝒰, 𝒱 与 Lie 不变量 p, q"""
    data: SurfaceData
    U: np.ndarray
    V: np.ndarray
    p: np.ndarray
    q: np.ndarray

    @property
    def tol(self) -> float:
        return TOL_DIRAC_SAMPLED if self.data.sampled else TOL_DIRAC_ANALYTIC


@dataclass
class CompleteFrame:
    """(𝒰, 𝒜, 𝒫, 𝒱, ℬ, 𝒬) 网格以及系数 p, q, a, b"""
    r1: np.ndarray
    r2: np.ndarray
    vectors: np.ndarray
    p: np.ndarray
    q: np.ndarray
    a: np.ndarray
    b: np.ndarray


def weingarten_data(S: EuclidSurface, r1, r2) -> WeingartenData:
    """单位法向 n ∥ ∂₁r × ∂₂r 与主曲率半径 wⁱ = (∂ᵢr·∂ᵢn)/|∂ᵢn|²

    Raises:
        DegenerateParametrization: ∂₁r × ∂₂r = 0
        UmbilicPoint: |w¹ − w²| ≤ EPS_UMBILIC
    """
    d1, d2 = S.derivative(r1, r2, 1, 0), S.derivative(r1, r2, 0, 1)
    N = np.cross(d1, d2)
    norm = np.linalg.norm(N, axis=-1)
    if np.any(norm < 1e-12):
        raise DegenerateParametrization(f"{S.name}: r_1 x r_2 vanishes")
    n = N / norm[..., None]
    radii, forms, flat, residual = [], [], [], 0.0
    for di, (e1, e2) in ((d1, ((2, 0), (1, 1))), (d2, ((1, 1), (0, 2)))):
        dN = np.cross(S.derivative(r1, r2, *e1), d2) + np.cross(d1, S.derivative(r1, r2, *e2))
        dn = (dN - n * np.sum(n * dN, axis=-1)[..., None]) / norm[..., None]
        G = np.sum(dn * dn, axis=-1)
        is_flat = G < EPS_FLAT
        safe = np.where(is_flat, 1.0, G)
        w = np.where(is_flat, np.inf, np.sum(di * dn, axis=-1) / safe)
        fit = np.where(is_flat[..., None], 0.0, di - np.where(is_flat, 0.0, w)[..., None] * dn)
        residual = max(residual, float(np.max(np.abs(fit))))
        radii.append(w)
        forms.append(G)
        flat.append(bool(np.all(is_flat)))
    w1, w2 = radii
    finite = np.isfinite(w1) & np.isfinite(w2)
    if np.any(np.abs(w1[finite] - w2[finite]) <= EPS_UMBILIC):
        raise UmbilicPoint(f"{S.name}: umbilic point in the sample")
    return WeingartenData(n=n, w1=w1, w2=w2, G11=forms[0], G22=forms[1], residual=residual,
                          canal=(flat[0], flat[1]))


def lie_lift(S: EuclidSurface, r1, r2) -> Tuple[np.ndarray, np.ndarray]:
    """曲率球的六球坐标 U = {(1+r²−2w¹(r,n))/2, (1−r²+2w¹(r,n))/2, r−w¹n, w¹}, V 同理

    Raises:
        DegenerateThirdForm: 某个主曲率半径为无穷 (管道面型输入)
    """
    wd = weingarten_data(S, r1, r2)
    return lift_spheres(S.derivative(r1, r2), wd.n, wd.w1, wd.w2)


def lift_spheres(r, n, w1, w2) -> Tuple[np.ndarray, np.ndarray]:
    if np.any(np.isinf(w1)) or np.any(np.isinf(w2)):
        raise DegenerateThirdForm("infinite curvature radius: canal-type input")
    return hex_embed(r - w1[..., None] * n, w1), hex_embed(r - w2[..., None] * n, w2)


def surface_grid_data(S: EuclidSurface, r1: np.ndarray, r2: np.ndarray) -> SurfaceData:
    """解析曲面在张量网格上的数据"""
    g1, g2 = np.meshgrid(r1, r2, indexing="ij")
    wd = weingarten_data(S, g1, g2)
    logger.info(f"{S.name}: Weingarten residual {wd.residual:.2e} on {len(r1)}x{len(r2)} grid")
    return SurfaceData(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float), S.derivative(g1, g2),
                       wd.n, wd.w1, wd.w2, wd.G11, wd.G22)


def sampled_surface(r1, r2, r, n, w1, w2) -> SurfaceData:
    """只有网格值的曲面 (例如重建结果); G₁₁, G₂₂ 由 ∂n 的差分得到"""
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    h1, h2 = r1[1] - r1[0], r2[1] - r2[0]
    n = np.asarray(n, dtype=float)
    dn1 = central_diff(n, h1, 1, axis=0)
    dn2 = central_diff(n, h2, 1, axis=1)
    return SurfaceData(r1, r2, np.asarray(r, dtype=float), n, np.asarray(w1, dtype=float),
                       np.asarray(w2, dtype=float), np.sum(dn1 * dn1, axis=-1), np.sum(dn2 * dn2, axis=-1),
                       sampled=True)


def normalize_uv(data: SurfaceData) -> NormalizedUV:
    """𝒰 = U/(√G₂₂(w²−w¹)), 𝒱 = V/(√G₁₁(w¹−w²)) 与

    p = (∂₁w¹/(w¹−w²))√(G₁₁/G₂₂), q = (∂₂w²/(w²−w¹))√(G₂₂/G₁₁)

    Raises:
        UmbilicPoint: w¹ = w²
        DegenerateThirdForm: G₁₁ 或 G₂₂ 数值上不为正
    """
    gap = data.w1 - data.w2
    if np.nanmin(np.abs(gap)) <= EPS_UMBILIC:
        raise UmbilicPoint("curvature radii coincide on the grid")
    if np.nanmin(data.G11) <= EPS_FLAT or np.nanmin(data.G22) <= EPS_FLAT:
        raise DegenerateThirdForm("third fundamental form is degenerate on the grid")
    U, V = lift_spheres(data.r, data.n, data.w1, data.w2)
    s11, s22 = np.sqrt(data.G11), np.sqrt(data.G22)
    calU = U / (s22 * -gap)[..., None]
    calV = V / (s11 * gap)[..., None]
    dw1 = central_diff(data.w1, data.h1, 1, axis=0)
    dw2 = central_diff(data.w2, data.h2, 1, axis=1)
    p = dw1 / gap * s11 / s22
    q = dw2 / -gap * s22 / s11
    return NormalizedUV(data, calU, calV, p, q)


def dirac_residual(norm: NormalizedUV) -> float:
    """max |∂₁𝒰 − p𝒱|, |∂₂𝒱 − q𝒰|"""
    d = norm.data
    r1 = central_diff(norm.U, d.h1, 1, axis=0) - norm.p[..., None] * norm.V
    r2 = central_diff(norm.V, d.h2, 1, axis=1) - norm.q[..., None] * norm.U
    return float(max(np.nanmax(np.abs(r1)), np.nanmax(np.abs(r2))))


def normalized_products(norm: NormalizedUV) -> Dict[str, float]:
    """{𝒰, 𝒱, ∂𝒰, ∂𝒱} 之间的乘积: 只有 (∂₂𝒰,∂₂𝒰) = (∂₁𝒱,∂₁𝒱) = 1 不为零"""
    d = norm.data
    U2 = central_diff(norm.U, d.h2, 1, axis=1)
    V1 = central_diff(norm.V, d.h1, 1, axis=0)
    U1 = central_diff(norm.U, d.h1, 1, axis=0)
    V2 = central_diff(norm.V, d.h2, 1, axis=1)
    checks = {
        "(U,U)": lie_form(norm.U, norm.U),
        "(V,V)": lie_form(norm.V, norm.V),
        "(U,V)": lie_form(norm.U, norm.V),
        "(d2U,d2U)-1": lie_form(U2, U2) - 1.0,
        "(d1V,d1V)-1": lie_form(V1, V1) - 1.0,
        "(d1U,d1U)": lie_form(U1, U1),
        "(d2V,d2V)": lie_form(V2, V2),
        "(d2U,d1V)": lie_form(U2, V1),
    }
    return {name: float(np.nanmax(np.abs(value))) for name, value in checks.items()}


def _check_nonzero(values: np.ndarray, name: str) -> None:
    scale = np.nanmax(np.abs(values))
    if not np.isfinite(scale) or scale < ZERO_REL or np.nanmin(np.abs(values)) <= ZERO_REL * max(scale, 1.0):
        raise ZeroPotential(f"{name} vanishes on the grid (canal-type surface)")


def complete_frame(norm: NormalizedUV) -> CompleteFrame:
    """𝒜 = ∂₂𝒰 − (∂₂p/p)𝒰, a = −½(∂₂𝒜,∂₂𝒜), 𝒫 = ∂₂𝒜 − a𝒰; ℬ, b, 𝒬 对称

    Raises:
        ZeroPotential: p 或 q 为零
    """
    _check_nonzero(norm.p, "p")
    _check_nonzero(norm.q, "q")
    h1, h2 = norm.data.h1, norm.data.h2
    lp2 = central_diff(norm.p, h2, 1, axis=1) / norm.p
    lq1 = central_diff(norm.q, h1, 1, axis=0) / norm.q
    A = central_diff(norm.U, h2, 1, axis=1) - lp2[..., None] * norm.U
    B = central_diff(norm.V, h1, 1, axis=0) - lq1[..., None] * norm.V
    dA = central_diff(A, h2, 1, axis=1)
    dB = central_diff(B, h1, 1, axis=0)
    a = -0.5 * lie_form(dA, dA)
    b = -0.5 * lie_form(dB, dB)
    P = dA - a[..., None] * norm.U
    Q = dB - b[..., None] * norm.V
    vectors = np.stack([norm.U, A, P, norm.V, B, Q], axis=-2)
    return CompleteFrame(norm.data.r1, norm.data.r2, vectors, norm.p, norm.q, a, b)


def frame_table_residual(frame: CompleteFrame) -> float:
    """标量乘积表的偏差"""
    v = frame.vectors
    products = lie_form(v[..., :, None, :], v[..., None, :, :])
    return float(np.nanmax(np.abs(products - LIE6_TABLE)))


def frame_motion_residual(frame: CompleteFrame) -> float:
    """重建的六维标架对六维运动方程的差分残差"""
    h1 = float(frame.r1[1] - frame.r1[0])
    h2 = float(frame.r2[1] - frame.r2[0])
    p, q = frame.p, frame.q
    lp2 = central_diff(p, h2, 1, axis=1) / p
    lq1 = central_diff(q, h1, 1, axis=0) / q
    k = p * q - central_diff(lp2, h1, 1, axis=0)
    l = p * q - central_diff(lq1, h2, 1, axis=1)
    L1, L2 = assemble_lie6(p, q, k, l, frame.a, frame.b, lp2, lq1)
    phi = frame.vectors
    res1 = central_diff(phi, h1, 1, axis=0) - L1 @ phi
    res2 = central_diff(phi, h2, 1, axis=1) - L2 @ phi
    return float(max(np.nanmax(np.abs(res1)), np.nanmax(np.abs(res2))))


def _finite_block(*arrays) -> Tuple[slice, slice]:
    """所有数组都有限的最大矩形子块 (NaN 只出现在边缘带中)"""
    ok = np.ones(arrays[0].shape[:2], dtype=bool)
    for arr in arrays:
        ok &= np.all(np.isfinite(arr.reshape(arr.shape[:2] + (-1,))), axis=-1)
    rows = np.nonzero(np.any(ok, axis=1))[0]
    cols = np.nonzero(np.any(ok, axis=0))[0]
    if len(rows) == 0 or len(cols) == 0:
        raise ZeroPotential("no finite region left after differencing")
    s1, s2 = slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1)
    if not np.all(ok[s1, s2]):
        raise ZeroPotential("non-finite values inside the differenced region")
    return s1, s2


def extract_potentials(frame: CompleteFrame) -> SampledField:
    """V = b + ∂₁²ln q + ½(∂₁ln q)², W = a + ∂₂²ln p + ½(∂₂ln p)²

    结果裁剪到所有量都有限的子网格, 返回采样场。

    Raises:
        ZeroPotential: p 或 q 为零
    """
    _check_nonzero(frame.p, "p")
    _check_nonzero(frame.q, "q")
    h1 = float(frame.r1[1] - frame.r1[0])
    h2 = float(frame.r2[1] - frame.r2[0])
    log_p = np.log(np.abs(frame.p))
    log_q = np.log(np.abs(frame.q))
    V = frame.b + central_diff(log_q, h1, 2, axis=0) + 0.5 * central_diff(log_q, h1, 1, axis=0) ** 2
    W = frame.a + central_diff(log_p, h2, 2, axis=1) + 0.5 * central_diff(log_p, h2, 1, axis=1) ** 2
    s1, s2 = _finite_block(frame.p, frame.q, V, W)
    logger.info(f"Extracted potentials on {s1.stop - s1.start}x{s2.stop - s2.start} sub-grid")
    return SampledField(frame.r1[s1], frame.r2[s2],
                        {"p": frame.p[s1, s2], "q": frame.q[s1, s2], "V": V[s1, s2], "W": W[s1, s2]})


def invariant_metric(norm: NormalizedUV) -> np.ndarray:
    """不变度量的系数 −pq"""
    return -norm.p * norm.q


def metric_from_curvature(data: SurfaceData) -> np.ndarray:
    """直接由 w, G 计算 −pq = ∂₁w¹∂₂w²/(w¹−w²)²"""
    dw1 = central_diff(data.w1, data.h1, 1, axis=0)
    dw2 = central_diff(data.w2, data.h2, 1, axis=1)
    return dw1 * dw2 / (data.w1 - data.w2) ** 2


def rigid_motion(S: EuclidSurface, rotation, translation) -> EuclidSurface:
    """r ↦ R r + t (R 为正交矩阵, det = 1)"""
    R = sp.Matrix(np.asarray(rotation, dtype=float).tolist())
    t = sp.Matrix(np.asarray(translation, dtype=float).tolist())
    moved = R * sp.Matrix(S.coords) + t
    return EuclidSurface(f"{S.name}-moved", list(moved), S.domain)
