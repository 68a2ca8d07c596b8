"""
零标架 (ψ, ψ₁, ψ₂, η) 的联络, 积分与六维 Lie 球标架

标架以 4×4 复矩阵存储, 行依次为 ψ, ψ₁, ψ₂, η, 满足 ∂ᵢF = Mᵢ F。
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from twistor.algebra import GRAM_TARGET, complex_product6, gram4, herm_product4, herm_product6, wedge_to_hex
from twistor.errors import InvalidFrame, StencilOutOfDomain
from twistor.numerics import central_diff, crop, rk4_linear, stencil_margin, steps_for
from twistor.potentials import PotentialField, Rect, derived_coeffs, log_jet

logger = logging.getLogger(__name__)

# 每单位路径长度允许的 Gram / 行列式漂移
TOL_DRIFT = 1e-8
DEFAULT_STEP = 1e-3

LIE6_NAMES = ("U", "A", "P", "V", "B", "Q")


@dataclass
class FrameState:
    """某点处的标架, matrix 的行为 ψ, ψ₁, ψ₂, η"""
    point: Tuple[float, float]
    matrix: np.ndarray
    error_estimate: Optional[float] = None

    @property
    def psi(self) -> np.ndarray:
        return self.matrix[0]

    @property
    def psi1(self) -> np.ndarray:
        return self.matrix[1]

    @property
    def psi2(self) -> np.ndarray:
        return self.matrix[2]

    @property
    def eta(self) -> np.ndarray:
        return self.matrix[3]

    def gram(self) -> np.ndarray:
        return gram4(self.matrix)

    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))


@dataclass
class ConnectionPair:
    """∂₁ 与 ∂₂ 的系数矩阵, 形状 (..., 4, 4)"""
    m1: np.ndarray
    m2: np.ndarray


@dataclass
class LieFrame6:
    """六维标架, vectors 的倒数第二维按 (𝒰, 𝒜, 𝒫, 𝒱, ℬ, 𝒬) 排列"""
    vectors: np.ndarray

    def __getitem__(self, name: str) -> np.ndarray:
        return self.vectors[..., LIE6_NAMES.index(name), :]


@dataclass
class FrameGrid:
    """张量网格上的标架, frames 形状 (n1, n2, 4, 4)"""
    r1: np.ndarray
    r2: np.ndarray
    frames: np.ndarray
    canal: bool = False
    base_index: Tuple[int, int] = (0, 0)
    meta: Dict[str, float] = field(default_factory=dict)

    @property
    def h1(self) -> float:
        return float(self.r1[1] - self.r1[0])

    @property
    def h2(self) -> float:
        return float(self.r2[1] - self.r2[0])

    @property
    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.r1, self.r2, indexing="ij")

    def state(self, i: int, j: int) -> FrameState:
        return FrameState((float(self.r1[i]), float(self.r2[j])), self.frames[i, j])

    def row(self, index: int) -> np.ndarray:
        """某一标架向量 (0: ψ, 1: ψ₁, 2: ψ₂, 3: η) 的网格"""
        return self.frames[:, :, index, :]


def connection_matrices(P: PotentialField, r1, r2) -> ConnectionPair:
    """标架方程的 M₁, M₂; 管道面场使用其退化形式

    Raises:
        ZeroPotential: p 或 (非管道面时) q 为零
    """
    r1, r2 = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))
    p_name, q_name = P.names[0], P.names[1]
    c = derived_coeffs(P, r1, r2)
    p = P.jet(p_name, r1, r2)
    beta = 0.5 * log_jet(P, p_name, r1, r2, 0, 1)
    if P.canal:
        q = np.zeros_like(p)
        alpha = np.zeros_like(p)
        l = np.zeros_like(p)
    else:
        q = P.jet(q_name, r1, r2)
        alpha = 0.5 * log_jet(P, q_name, r1, r2, 1, 0)
        l = c.l
    k, a, b = c.k, c.a, c.b
    m1 = np.zeros(r1.shape + (4, 4), dtype=complex)
    m2 = np.zeros(r1.shape + (4, 4), dtype=complex)
    m1[..., 0, 0], m1[..., 0, 1] = alpha, 1
    m1[..., 1, 0], m1[..., 1, 1], m1[..., 1, 2] = b / 2, -alpha, -1j * p
    m1[..., 2, 0], m1[..., 2, 2], m1[..., 2, 3] = k / 2, alpha, 1
    m1[..., 3, 0], m1[..., 3, 1], m1[..., 3, 2], m1[..., 3, 3] = -0.5j * p * a, k / 2, b / 2, -alpha
    m2[..., 0, 0], m2[..., 0, 2] = beta, 1
    m2[..., 1, 0], m2[..., 1, 1], m2[..., 1, 3] = l / 2, beta, 1
    m2[..., 2, 0], m2[..., 2, 1], m2[..., 2, 2] = a / 2, 1j * q, -beta
    m2[..., 3, 0], m2[..., 3, 1], m2[..., 3, 2], m2[..., 3, 3] = 0.5j * q * b, a / 2, l / 2, -beta
    return ConnectionPair(m1, m2)


def isometry_defect(M: np.ndarray) -> float:
    """‖J M + M^H J‖∞, 即 M 偏离 su(2,2) 的程度"""
    M = np.asarray(M, dtype=complex)
    return float(np.max(np.abs(GRAM_TARGET @ M + np.conj(np.swapaxes(M, -1, -2)) @ GRAM_TARGET)))


def standard_null_tetrad(point: Tuple[float, float] = (0.0, 0.0)) -> FrameState:
    """(e₀, e₁, e₂, e₃): Gram 恰为 J, 行列式为 1"""
    return FrameState(tuple(point), np.eye(4, dtype=complex))


# 默认倾斜生成元: 实对称, S₀₃ = S₁₂ = 0 保证 tr(JS) = 0
DEFAULT_TILT = np.array(
    [
        [0.1, 0.3, 0.0, 0.0],
        [0.3, 0.2, 0.0, 0.0],
        [0.0, 0.0, 0.4, 0.1],
        [0.0, 0.0, 0.1, 0.0],
    ]
)


def su22_tetrad(point: Tuple[float, float] = (0.0, 0.0), generator=None) -> FrameState:
    """expm(iJS) 给出的初始标架; 标准零标架的 U 是平面, 曲面管道用这个

    Raises:
        InvalidFrame: 生成元不是实对称矩阵或 tr(JS) ≠ 0
    """
    S = DEFAULT_TILT if generator is None else np.asarray(generator, dtype=float)
    if S.shape != (4, 4) or not np.allclose(S, S.T):
        raise InvalidFrame("tilt generator must be a real symmetric 4x4 matrix")
    if abs(np.trace(GRAM_TARGET.real @ S)) > 1e-14:
        raise InvalidFrame("tilt generator must satisfy tr(JS) = 0")
    return frame_from_matrix(point, expm(1j * GRAM_TARGET @ S))


def frame_from_matrix(point: Tuple[float, float], matrix, tol: float = 1e-10) -> FrameState:
    """用调用方给出的 SU(2,2) 矩阵作为初始标架

    Raises:
        InvalidFrame: Gram 不等于 J 或行列式不为 1
    """
    F = np.asarray(matrix, dtype=complex)
    if F.shape != (4, 4):
        raise InvalidFrame(f"initial frame must be 4x4, got {F.shape}")
    gram_err = float(np.max(np.abs(gram4(F) - GRAM_TARGET)))
    det_err = abs(np.linalg.det(F) - 1.0)
    if gram_err > tol or det_err > tol:
        raise InvalidFrame(f"initial frame violates normalization: gram {gram_err:.2e}, det {det_err:.2e}")
    return FrameState(tuple(point), F)


def frame_drift(F) -> Tuple[float, float]:
    """(Gram 漂移, 行列式漂移), F 可以是 FrameState, FrameGrid 或 (..., 4, 4) 数组"""
    if isinstance(F, FrameState):
        matrix = F.matrix
    elif isinstance(F, FrameGrid):
        matrix = F.frames
    else:
        matrix = np.asarray(F, dtype=complex)
    gram = float(np.max(np.abs(gram4(matrix) - GRAM_TARGET)))
    det = float(np.max(np.abs(np.linalg.det(matrix) - 1.0)))
    return gram, det


def _segment_coeffs(P: PotentialField, start, end, n_steps: int, connection: Optional[Callable] = None) -> np.ndarray:
    """线段参数 t∈[0,1] 上 2n+1 个半步节点处的 M₁dR¹ + M₂dR²"""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    d = end - start
    s = np.linspace(0.0, 1.0, 2 * n_steps + 1)
    r1 = start[..., 0, None] + s * d[..., 0, None]
    r2 = start[..., 1, None] + s * d[..., 1, None]
    conn = (connection or connection_matrices)(P, r1, r2)
    coeffs = conn.m1 * d[..., 0, None, None, None] + conn.m2 * d[..., 1, None, None, None]
    # 把节点轴移到最前: (2n+1, ..., 4, 4)
    return np.moveaxis(coeffs, -3, 0)


def _march(P: PotentialField, start, end, y0: np.ndarray, step: float,
           connection: Optional[Callable] = None) -> np.ndarray:
    """沿一条 (或一批平行的) 线段用 RK4 推进"""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    length = float(np.max(np.hypot(*(end - start).T))) if start.ndim > 1 else float(np.hypot(*(end - start)))
    n = steps_for(length, step)
    if n == 0:
        return np.array(y0)
    table = _segment_coeffs(P, start, end, n, connection)

    def coeff(t):
        return table[int(round(t * 2 * n))]

    out = rk4_linear(coeff, y0, 0.0, 1.0, n)
    return out if np.iscomplexobj(y0) else out.real


def integrate_frame(P: PotentialField, init: FrameState, path: Sequence[Tuple[float, float]],
                    step: float = DEFAULT_STEP, estimate_error: bool = True) -> FrameState:
    """沿折线积分 dF/dt = (M₁ dR¹/dt + M₂ dR²/dt) F

    Args:
        P: 势函数
        init: path[0] 处的初始标架
        path: 折线顶点
        step: RK4 步长
        estimate_error: 再用半步长积分一次, 给出 Richardson 误差估计

    Returns:
        FrameState: 终点处的标架, error_estimate 为半步长比较的误差

    Raises:
        StencilOutOfDomain: 路径离开定义域
        StepFailure: 积分出现非有限值
    """
    path = [tuple(map(float, point)) for point in path]
    if not path:
        return init
    if not P.domain.contains([pt[0] for pt in path], [pt[1] for pt in path]):
        raise StencilOutOfDomain(f"integration path leaves domain {P.domain}")
    F = np.array(init.matrix, dtype=complex)
    fine = F.copy() if estimate_error else None
    for start, end in zip(path[:-1], path[1:]):
        F = _march(P, start, end, F, step)
        if estimate_error:
            fine = _march(P, start, end, fine, step / 2)
    error = None
    if estimate_error:
        error = float(np.max(np.abs(fine - F))) / 15.0
        F = fine
    logger.debug(f"Integrated frame along {len(path) - 1} segments; Richardson estimate {error}")
    return FrameState(path[-1], F, error_estimate=error)


def holonomy_defect(P: PotentialField, rect: Rect, init: Optional[FrameState] = None,
                    step: float = DEFAULT_STEP) -> float:
    """沿矩形边界绕一圈后标架的变化 (最大范数)"""
    corners = rect.corners()
    start = init if init is not None else standard_null_tetrad(corners[0])
    loop = corners + [corners[0]]
    end = integrate_frame(P, FrameState(corners[0], start.matrix), loop, step=step, estimate_error=False)
    defect = float(np.max(np.abs(end.matrix - start.matrix)))
    logger.info(f"Holonomy defect around {rect}: {defect:.3e}")
    return defect


def integrate_grid(P: PotentialField, r1: np.ndarray, r2: np.ndarray, init: Optional[FrameState] = None,
                   step: float = DEFAULT_STEP, base_index: Optional[Tuple[int, int]] = None,
                   connection: Optional[Callable] = None) -> FrameGrid:
    """在张量网格的每个节点上求标架

    先沿基点所在行 (R¹ 方向) 积分, 再对所有列同时沿 R² 方向积分。
    init 默认为基点处的标准零标架。connection 替换标架方程的系数矩阵时
    (例如实射影标架), 只记录行列式漂移。
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    n1, n2 = len(r1), len(r2)
    i0, j0 = base_index if base_index is not None else (n1 // 2, n2 // 2)
    dtype = complex if connection is None else float
    F0 = np.eye(4, dtype=dtype) if init is None else np.array(init.matrix, dtype=dtype)
    if not P.domain.contains(r1, np.full_like(r1, r2[j0])) or not P.domain.contains(np.full_like(r2, r1[i0]), r2):
        raise StencilOutOfDomain(f"grid leaves domain {P.domain}")
    frames = np.zeros((n1, n2, 4, 4), dtype=dtype)
    frames[i0, j0] = F0
    for order in (range(i0 + 1, n1), range(i0 - 1, -1, -1)):
        prev = i0
        for i in order:
            frames[i, j0] = _march(P, (r1[prev], r2[j0]), (r1[i], r2[j0]), frames[prev, j0], step, connection)
            prev = i
    for order in (range(j0 + 1, n2), range(j0 - 1, -1, -1)):
        prev = j0
        for j in order:
            start = np.column_stack([r1, np.full(n1, r2[prev])])
            end = np.column_stack([r1, np.full(n1, r2[j])])
            frames[:, j] = _march(P, start, end, frames[:, prev], step, connection)
            prev = j
    if connection is None:
        gram, det = frame_drift(frames)
        meta = {"gram_drift": gram, "det_drift": det, "step": step}
    else:
        det = float(np.max(np.abs(np.linalg.det(frames) - np.linalg.det(F0))))
        meta = {"det_drift": det, "step": step}
    logger.info(f"Integrated {n1}x{n2} frame grid; drift {meta}")
    return FrameGrid(r1, r2, frames, canal=P.canal, base_index=(i0, j0), meta=meta)


def frame_to_lie6(F) -> LieFrame6:
    """Λ² 中的六维标架 (𝒰, 𝒜, 𝒫, 𝒱, ℬ, 𝒬)

    𝒰 = iψ∧ψ₁, 𝒜 = iψ₂∧ψ₁ + iψ∧η, 𝒫 = 2iψ₂∧η,
    𝒱 = ψ∧ψ₂,  ℬ = ψ₁∧ψ₂ + ψ∧η,   𝒬 = 2ψ₁∧η
    """
    matrix = F.matrix if isinstance(F, FrameState) else (F.frames if isinstance(F, FrameGrid) else np.asarray(F))
    psi, psi1, psi2, eta = (matrix[..., i, :] for i in range(4))
    vectors = np.stack([
        1j * wedge_to_hex(psi, psi1),
        1j * wedge_to_hex(psi2, psi1) + 1j * wedge_to_hex(psi, eta),
        2j * wedge_to_hex(psi2, eta),
        wedge_to_hex(psi, psi2),
        wedge_to_hex(psi1, psi2) + wedge_to_hex(psi, eta),
        2 * wedge_to_hex(psi1, eta),
    ], axis=-2)
    return LieFrame6(vectors)


# 六维标架的目标乘积表, 埃尔米特与复双线性两种都相同
LIE6_TABLE = np.zeros((6, 6))
LIE6_TABLE[0, 2] = LIE6_TABLE[2, 0] = -1.0
LIE6_TABLE[3, 5] = LIE6_TABLE[5, 3] = -1.0
LIE6_TABLE[1, 1] = LIE6_TABLE[4, 4] = 1.0


def lie6_table_residual(L: LieFrame6) -> Tuple[float, float]:
    """乘积表的偏差: (埃尔米特, 复双线性)"""
    v = L.vectors
    herm = herm_product6(v[..., :, None, :], v[..., None, :, :])
    cplx = complex_product6(v[..., :, None, :], v[..., None, :, :])
    return float(np.max(np.abs(herm - LIE6_TABLE))), float(np.max(np.abs(cplx - LIE6_TABLE)))


def assemble_lie6(p, q, k, l, a, b, lp2, lq1, canal: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """由系数数组拼出六维运动方程的两个 6×6 矩阵; canal 时为退化形式

    lp2 = ∂₂p/p, lq1 = ∂₁q/q; 管道面分支忽略 q, l, lq1。
    """
    p, k, a, b, lp2 = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (p, k, a, b, lp2)))
    L1 = np.zeros(p.shape + (6, 6))
    L2 = np.zeros(p.shape + (6, 6))
    L1[..., 0, 3] = p
    L1[..., 1, 0] = k
    L1[..., 2, 1], L1[..., 2, 3] = k, -p * a
    L1[..., 3, 4] = 1
    L1[..., 4, 3], L1[..., 4, 5] = b, 1
    L1[..., 5, 0], L1[..., 5, 2], L1[..., 5, 4] = p * a, -p, b
    L2[..., 0, 0], L2[..., 0, 1] = lp2, 1
    L2[..., 1, 0], L2[..., 1, 2] = a, 1
    L2[..., 2, 1], L2[..., 2, 2] = a, -lp2
    if not canal:
        L1[..., 3, 3] = lq1
        L1[..., 5, 5] = -lq1
        L2[..., 2, 3], L2[..., 2, 5] = q * b, -q
        L2[..., 3, 0] = q
        L2[..., 4, 3] = l
        L2[..., 5, 0], L2[..., 5, 4] = -q * b, l
    return L1, L2


def lie6_matrices(P: PotentialField, r1, r2) -> Tuple[np.ndarray, np.ndarray]:
    """六维运动方程的 6×6 系数矩阵, 管道面场使用退化形式; 行列顺序 (𝒰, 𝒜, 𝒫, 𝒱, ℬ, 𝒬)"""
    r1, r2 = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))
    p_name, q_name = P.names[0], P.names[1]
    c = derived_coeffs(P, r1, r2)
    p = P.jet(p_name, r1, r2)
    lp2 = log_jet(P, p_name, r1, r2, 0, 1)
    if P.canal:
        return assemble_lie6(p, 0.0, c.k, 0.0, c.a, c.b, lp2, 0.0, canal=True)
    q = P.jet(q_name, r1, r2)
    lq1 = log_jet(P, q_name, r1, r2, 1, 0)
    return assemble_lie6(p, q, c.k, c.l, c.a, c.b, lp2, lq1)


def lie6_residual(P: PotentialField, grid: FrameGrid) -> float:
    """Λ² 标架的差分导数与六维运动方程右端之差的最大值

    Raises:
        StencilOutOfDomain: 网格太小, 四阶模板放不下
    """
    m = stencil_margin(1)
    if len(grid.r1) <= 2 * m or len(grid.r2) <= 2 * m:
        raise StencilOutOfDomain(f"grid {len(grid.r1)}x{len(grid.r2)} too small for 4th-order stencils")
    phi = frame_to_lie6(grid).vectors
    d1 = central_diff(phi, grid.h1, 1, axis=0)
    d2 = central_diff(phi, grid.h2, 1, axis=1)
    g1, g2 = grid.mesh
    L1, L2 = lie6_matrices(P, g1, g2)
    res1 = crop(d1 - L1 @ phi, m)
    res2 = crop(d2 - L2 @ phi, m)
    residual = float(max(np.max(np.abs(res1)), np.max(np.abs(res2))))
    logger.info(f"6-frame residual on {len(grid.r1)}x{len(grid.r2)} grid: {residual:.3e}")
    return residual


def norm_relations(grid: FrameGrid, P: PotentialField) -> Dict[str, float]:
    """二次积分关系的差分检查

    (ψ,ψ) = (ψ,∂ᵢψ) = 0, (∂₁ψ,∂₂ψ) = 1, (∂₁∂₂ψ,∂₁∂₂ψ) = −pq
    """
    m = stencil_margin(1)
    psi = grid.row(0)
    d1 = central_diff(psi, grid.h1, 1, axis=0)
    d2 = central_diff(psi, grid.h2, 1, axis=1)
    d12 = central_diff(d1, grid.h2, 1, axis=1)
    g1, g2 = grid.mesh
    pq = P.jet(P.names[0], g1, g2) * (0.0 if P.canal else P.jet(P.names[1], g1, g2))
    checks = {
        "psi_psi": herm_product4(psi, psi),
        "psi_d1psi": herm_product4(psi, d1),
        "psi_d2psi": herm_product4(psi, d2),
        "d1psi_d2psi": herm_product4(d1, d2) - 1.0,
        "d12psi_d12psi": herm_product4(d12, d12) + pq,
    }
    return {name: float(np.max(np.abs(crop(value, m)))) for name, value in checks.items()}


def frame_table(grid: FrameGrid) -> np.ndarray:
    """CSV 行: R¹, R², 然后 ψ, ψ₁, ψ₂, η 的 16 个复分量 (实部/虚部交错)"""
    g1, g2 = grid.mesh
    flat = grid.frames.reshape(g1.size, 16)
    interleaved = np.empty((g1.size, 32))
    interleaved[:, 0::2] = flat.real
    interleaved[:, 1::2] = flat.imag
    return np.column_stack([g1.ravel(), g2.ravel(), interleaved])
