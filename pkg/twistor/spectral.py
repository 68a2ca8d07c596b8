"""
带磁项的 Schrödinger 算子

    c = 0   交换算子对 H, F (单位度量)
    c = 1   Stäckel 度量上的 Laplace–Beltrami 算子, 磁势 A, B, 标量势 h
    管道面  均匀磁场中的 Landau 算子及其 n = 0 旋转曲面

算子一律用四阶中心差分在网格上作用, 结果边缘为 NaN。
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.special import dawsn

from twistor.algebra import herm_product4
from twistor.errors import DomainViolation, MetricDegenerate, PoleOnGrid
from twistor.numerics import OdeJet, central_diff
from twistor.potentials import C0Params, C1Params, R1, R2, T, c0_jets, c1_functions, check_c1_domain
from twistor.surface import hex_normalize, lie_quadric_residual

logger = logging.getLogger(__name__)

# 剖面分母的极点阈值
POLE_THRESHOLD = 1e8
# 高斯曲率差分步长
CURVATURE_STEP = 1e-3
# 交换子测试函数的宽度, 占各方向边长的比例
BUMP_WIDTH = 0.2

GridFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _expand(coeff: np.ndarray, u: np.ndarray) -> np.ndarray:
    """系数 (n1, n2) 补上 u 的尾部维度"""
    coeff = np.asarray(coeff)
    return coeff.reshape(coeff.shape + (1,) * (u.ndim - coeff.ndim))


class GridOperator(ABC):
    """在张量网格上作用的线性微分算子"""

    name: str = "operator"
    eigenvalue: complex = 0.0

    @abstractmethod
    def apply(self, u: np.ndarray, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
        """u 的形状为 (n1, n2) 或 (n1, n2, k)"""

    def eigen_residual(self, u: np.ndarray, r1: np.ndarray, r2: np.ndarray) -> float:
        """max |Lu − λu|"""
        res = self.apply(u, r1, r2) - self.eigenvalue * u
        return float(np.nanmax(np.abs(res)))


class MagneticOperator(GridOperator):
    """Hu = Σᵢ σᵢ m (∂ᵢ + iaᵢ)[cᵢ (∂ᵢ + iaᵢ) u] + h u

    Args:
        sigma: 两个方向的常系数 σ₁, σ₂
        vector_potential: (a₁, a₂), (r1, r2) 网格上的函数
        potential: 标量势 h
        weight: 外层权 m, 默认为 1
        metric: 内层系数 (c₁, c₂), 默认为 1
        eigenvalue: 期望的本征值
    """

    def __init__(self, sigma: Tuple[float, float], vector_potential: Tuple[GridFunction, GridFunction],
                 potential: GridFunction, weight: Optional[GridFunction] = None,
                 metric: Optional[Tuple[GridFunction, GridFunction]] = None,
                 eigenvalue: complex = 0.0, name: str = "H"):
        self.sigma = sigma
        self.vector_potential = vector_potential
        self.potential = potential
        self.weight = weight
        self.metric = metric
        self.eigenvalue = eigenvalue
        self.name = name

    def covariant(self, u: np.ndarray, a: np.ndarray, h: float, axis: int) -> np.ndarray:
        return central_diff(u, h, 1, axis=axis) + 1j * _expand(a, u) * u

    def apply(self, u: np.ndarray, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=complex)
        g1, g2 = np.meshgrid(r1, r2, indexing="ij")
        steps = (float(r1[1] - r1[0]), float(r2[1] - r2[0]))
        m = 1.0 if self.weight is None else _expand(self.weight(g1, g2), u)
        out = _expand(self.potential(g1, g2), u) * u
        for axis in (0, 1):
            if self.sigma[axis] == 0:
                continue
            a = np.broadcast_to(self.vector_potential[axis](g1, g2), g1.shape)
            inner = self.covariant(u, a, steps[axis], axis)
            if self.metric is not None:
                inner = _expand(self.metric[axis](g1, g2), u) * inner
            out = out + self.sigma[axis] * m * self.covariant(inner, a, steps[axis], axis)
        return out


def _zero(r1, r2):
    return np.zeros(np.broadcast(r1, r2).shape)


def commutator_residual(H: GridOperator, F: GridOperator, u: np.ndarray, r1, r2) -> float:
    """‖[H, F]u‖∞ / ‖HFu‖∞"""
    hf = H.apply(F.apply(u, r1, r2), r1, r2)
    fh = F.apply(H.apply(u, r1, r2), r1, r2)
    scale = float(np.nanmax(np.abs(hf)))
    return float(np.nanmax(np.abs(hf - fh))) / max(scale, 1e-300)


def bump(r1: np.ndarray, r2: np.ndarray, center: Tuple[float, float], width: Tuple[float, float]) -> np.ndarray:
    """光滑测试函数 exp(−ρ²/2), ρ² = Σ ((Rⁱ − cⁱ)/wⁱ)²"""
    g1, g2 = np.meshgrid(r1, r2, indexing="ij")
    rho2 = ((g1 - center[0]) / width[0]) ** 2 + ((g2 - center[1]) / width[1]) ** 2
    return np.exp(-0.5 * rho2)


# ---------------------------------------------------------------------------
# c = 0


def c0_operators(params: C0Params) -> Tuple[MagneticOperator, MagneticOperator, float, float]:
    """H = (∂₁ + (i/2)ψ₂′)² + (∂₂ + (i/2)ψ₁′)² + V_H,  F = (∂₁ − (i/2)ψ₂′)² − (∂₂ − (i/2)ψ₁′)² + V_F

    Returns:
        (H, F, λ, μ): λ = (ε₁+ε₂)/2, μ = (ε₁−ε₂)/2
    """
    jet1, jet2 = c0_jets(params)
    e0 = params.eps0

    def parts(r1, r2):
        y1, d1, dd1 = jet1(r1), jet1(r1, 1), jet1(r1, 2)
        y2, d2, dd2 = jet2(r2), jet2(r2, 1), jet2(r2, 2)
        return y1, d1, dd1, y2, d2, dd2

    def v_h(r1, r2):
        y1, d1, dd1, y2, d2, dd2 = parts(r1, r2)
        return 0.25 * (2 * y2 * dd1 + 2 * y1 * dd2 + params.rho2 * y1 ** 2 + params.rho1 * y2 ** 2
                       + d2 ** 2 + d1 ** 2 - 2 * e0 * (y1 + y2))

    def v_f(r1, r2):
        y1, d1, dd1, y2, d2, dd2 = parts(r1, r2)
        return 0.25 * (2 * y2 * dd1 - 2 * y1 * dd2 + params.rho2 * y1 ** 2 - params.rho1 * y2 ** 2
                       + d2 ** 2 - d1 ** 2 - 2 * e0 * (y1 - y2))

    a1 = lambda r1, r2: 0.5 * jet2(r2, 1) + 0.0 * r1  # noqa: E731
    a2 = lambda r1, r2: 0.5 * jet1(r1, 1) + 0.0 * r2  # noqa: E731
    lam = (params.eps1 + params.eps2) / 2
    mu = (params.eps1 - params.eps2) / 2
    H = MagneticOperator((1.0, 1.0), (a1, a2), v_h, eigenvalue=lam, name="H")
    F = MagneticOperator((1.0, -1.0), (lambda r1, r2: -a1(r1, r2), lambda r1, r2: -a2(r1, r2)), v_f,
                         eigenvalue=mu, name="F")
    return H, F, lam, mu


# ---------------------------------------------------------------------------
# c = 1


class StackelData:
    """f₁(R¹), f₂(R²) 及其导数, 度量 g¹¹ = f₁/(R²−R¹), g²² = f₂/(R²−R¹)"""

    def __init__(self, params: C1Params):
        check_c1_domain(params)
        self.params = params
        f1, f2 = c1_functions(params)
        D = R2 - R1
        self.exprs = {
            "f1": f1, "f2": f2, "df1": sp.diff(f1, R1), "df2": sp.diff(f2, R2),
            "A": -sp.sqrt(f2 / f1) / (2 * D), "B": -sp.sqrt(f1 / f2) / (2 * D),
        }
        self.exprs["dA2"] = sp.diff(self.exprs["A"], R2)
        self.exprs["dB1"] = sp.diff(self.exprs["B"], R1)
        self._fns = {name: sp.lambdify((R1, R2), expr, "numpy") for name, expr in self.exprs.items()}

    def __call__(self, name: str, r1, r2) -> np.ndarray:
        r1, r2 = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))
        return np.broadcast_to(np.asarray(self._fns[name](r1, r2), dtype=float), r1.shape).copy()

    def g11(self, r1, r2):
        return self("f1", r1, r2) / (r2 - r1)

    def g22(self, r1, r2):
        return self("f2", r1, r2) / (r2 - r1)

    def curvature_closed_form(self, r1, r2) -> np.ndarray:
        """(f₁′−f₂′)/(4D²) + (f₁+f₂)/(2D³)"""
        D = r2 - r1
        return ((self("df1", r1, r2) - self("df2", r1, r2)) / (4 * D ** 2)
                + (self("f1", r1, r2) + self("f2", r1, r2)) / (2 * D ** 3))

    def scalar_potential(self, r1, r2) -> np.ndarray:
        """h = K + (ε₂/2)(R¹+R²), K 取闭式"""
        return self.curvature_closed_form(r1, r2) + 0.5 * self.params.eps2 * (r1 + r2)

    def area_factor(self, r1, r2) -> np.ndarray:
        """dσ = (R²−R¹)/√(f₁f₂) dR¹∧dR²"""
        return (r2 - r1) / np.sqrt(self("f1", r1, r2) * self("f2", r1, r2))


def c1_operator(params: C1Params) -> MagneticOperator:
    """Laplace–Beltrami 型算子, HR + (ε₁/2)R = 0, R = ψ/(f₁f₂)^{1/4}

    Raises:
        DomainViolation: f₁ ≤ 0, f₂ ≤ 0 或 R² ≤ R¹
    """
    st = StackelData(params)

    def weight(r1, r2):
        return np.sqrt(st.g11(r1, r2) * st.g22(r1, r2))

    metric = (lambda r1, r2: st.g11(r1, r2) / weight(r1, r2),
              lambda r1, r2: st.g22(r1, r2) / weight(r1, r2))
    # (i∂ + A) = i(∂ − iA), 所以 σ = −1, a = −A
    vector = (lambda r1, r2: -st("A", r1, r2), lambda r1, r2: -st("B", r1, r2))
    return MagneticOperator((-1.0, -1.0), vector, st.scalar_potential, weight=weight, metric=metric,
                            eigenvalue=-params.eps1 / 2, name="H")


class StackelSymmetry(GridOperator):
    """c = 1 的第二个算子 F = (R²L₁ + R¹L₂)/(R²−R¹) − (ε₂/2)R¹R², FR + (ε₀/2)R = 0"""

    def __init__(self, params: C1Params):
        self.st = StackelData(params)
        self.params = params
        self.eigenvalue = -params.eps0 / 2
        self.name = "F"

    def apply(self, u: np.ndarray, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
        st = self.st
        u = np.asarray(u, dtype=complex)
        g1, g2 = np.meshgrid(r1, r2, indexing="ij")
        h1, h2 = float(r1[1] - r1[0]), float(r2[1] - r2[0])
        D = g2 - g1
        f1, f2 = st("f1", g1, g2), st("f2", g1, g2)
        df1, df2 = st("df1", g1, g2), st("df2", g1, g2)
        root = np.sqrt(f1 * f2)
        c1 = 3 * f1 / (4 * D ** 2) + df1 / (4 * D) - 0.5j * root / D ** 2
        c2 = 3 * f2 / (4 * D ** 2) - df2 / (4 * D) + 0.5j * root / D ** 2
        u1, u2 = central_diff(u, h1, 1, axis=0), central_diff(u, h2, 1, axis=1)
        u11, u22 = central_diff(u, h1, 2, axis=0), central_diff(u, h2, 2, axis=1)
        e = lambda c: _expand(c, u)  # noqa: E731
        L1 = e(f1) * u11 + e(0.5 * df1) * u1 + e(1j * root / D) * u2 - e(c1) * u
        L2 = e(f2) * u22 + e(0.5 * df2) * u2 + e(1j * root / D) * u1 - e(c2) * u
        return (e(g2) * L1 + e(g1) * L2) / e(D) - e(0.5 * self.params.eps2 * g1 * g2) * u


def rescale_frame_solution(params: C1Params, psi: np.ndarray, r1, r2) -> np.ndarray:
    """R = ψ/(f₁f₂)^{1/4}"""
    st = StackelData(params)
    g1, g2 = np.meshgrid(r1, r2, indexing="ij")
    scale = (st("f1", g1, g2) * st("f2", g1, g2)) ** 0.25
    return psi / _expand(scale, np.asarray(psi))


def gaussian_curvature(g11: GridFunction, g22: GridFunction, r1, r2, step: float = CURVATURE_STEP) -> np.ndarray:
    """对角度量 E = 1/g¹¹, G = 1/g²² 的高斯曲率, 导数用四阶差分

    Raises:
        MetricDegenerate: 度量在某点不为正
    """
    r1, r2 = np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))
    E = lambda a, b: 1.0 / g11(a, b)  # noqa: E731
    G = lambda a, b: 1.0 / g22(a, b)  # noqa: E731
    e0, g0 = E(r1, r2), G(r1, r2)
    if np.any(~(e0 > 0)) or np.any(~(g0 > 0)):
        raise MetricDegenerate("metric is not positive definite at the evaluation point")
    h = step

    def d1(fn, a, b):
        return (fn(a - 2 * h, b) - 8 * fn(a - h, b) + 8 * fn(a + h, b) - fn(a + 2 * h, b)) / (12 * h)

    def d2(fn, a, b):
        return (fn(a, b - 2 * h) - 8 * fn(a, b - h) + 8 * fn(a, b + h) - fn(a, b + 2 * h)) / (12 * h)

    def d11(fn, a, b):
        return (-fn(a - 2 * h, b) + 16 * fn(a - h, b) - 30 * fn(a, b) + 16 * fn(a + h, b)
                - fn(a + 2 * h, b)) / (12 * h * h)

    def d22(fn, a, b):
        return (-fn(a, b - 2 * h) + 16 * fn(a, b - h) - 30 * fn(a, b) + 16 * fn(a, b + h)
                - fn(a, b + 2 * h)) / (12 * h * h)

    E1, E2, G1, G2 = d1(E, r1, r2), d2(E, r1, r2), d1(G, r1, r2), d2(G, r1, r2)
    EG = e0 * g0
    return (-(d11(G, r1, r2) + d22(E, r1, r2)) / (2 * EG)
            + (G1 * (E1 * g0 + e0 * G1) + E2 * (E2 * g0 + e0 * G2)) / (4 * EG ** 2))


def stackel_curvature(params: C1Params, r1, r2) -> np.ndarray:
    st = StackelData(params)
    return gaussian_curvature(st.g11, st.g22, r1, r2)


def magnetic_identity_check(params: C1Params, r1, r2) -> float:
    """max |(∂₁B − ∂₂A) + K(R²−R¹)/√(f₁f₂)|

    Raises:
        DomainViolation: 参数不满足 c = 1 的定义域条件
    """
    st = StackelData(params)
    g1, g2 = np.meshgrid(r1, r2, indexing="ij")
    K = gaussian_curvature(st.g11, st.g22, g1, g2)
    residual = st("dB1", g1, g2) - st("dA2", g1, g2) + K * st.area_factor(g1, g2)
    value = float(np.max(np.abs(residual)))
    logger.info(f"Magnetic identity residual: {value:.3e}")
    return value


# ---------------------------------------------------------------------------
# Landau


def hermite_reduction(lam: float, max_order: int = 6) -> Callable:
    """ψ″ = (t² − 2λ)ψ 的高阶导数"""
    y, dy = sp.symbols("y dy")
    rhs = (T ** 2 - 2 * lam) * y
    chain = {2: rhs}
    for order in range(3, max_order + 1):
        prev = chain[order - 1]
        chain[order] = sp.expand(sp.diff(prev, T) + sp.diff(prev, y) * dy + sp.diff(prev, dy) * rhs)
    compiled = {order: sp.lambdify((y, dy, T), expr, "numpy") for order, expr in chain.items()}

    def reduce(order, values, slopes, t):
        if order not in compiled:
            raise ValueError(f"derivative order {order} exceeds {max_order}")
        out = np.asarray(compiled[order](values, slopes, t), dtype=float)
        return np.broadcast_to(out, np.broadcast(values, t).shape).copy()

    return reduce


@dataclass
class LandauBasis:
    """Hermite 方程 ψ″ = (y² − 2λ)ψ 的基本解组, ψ₁(0)=1, ψ₁′(0)=0, ψ₂(0)=0, ψ₂′(0)=1"""
    lam: float
    closed_form: bool
    M: float = 1.0
    span: float = 6.0
    jets: Tuple[Optional[OdeJet], Optional[OdeJet]] = (None, None)
    wronskian: float = 1.0

    def psi1(self, y, order: int = 0) -> np.ndarray:
        return self._eval(0, y, order)

    def psi2(self, y, order: int = 0) -> np.ndarray:
        return self._eval(1, y, order)

    def _eval(self, which: int, y, order: int) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if not self.closed_form:
            return self.jets[which](y, order)
        g = np.exp(-0.5 * y ** 2)
        if which == 0:
            values = [g, -y * g]
        else:
            v = np.exp(0.5 * y ** 2) * dawsn(y)
            values = [v, -y * v + np.exp(0.5 * y ** 2)]
        if order < 2:
            return values[order]
        # 更高阶导数用方程降阶
        y0, y1 = values
        d = [y0, y1, (y ** 2 - 2 * self.lam) * y0]
        for n in range(3, order + 1):
            # (y²−2λ)ψ 的 n−2 阶导数, Leibniz
            k = n - 2
            term = (y ** 2 - 2 * self.lam) * d[k] + 2 * k * y * d[k - 1]
            if k >= 2:
                term = term + k * (k - 1) * d[k - 2]
            d.append(term)
        return d[order]

    def wronskian_at(self, y) -> np.ndarray:
        return self.psi1(y) * self.psi2(y, 1) - self.psi2(y) * self.psi1(y, 1)


def landau_basis(lam: float, closed_form: bool = False, M: float = 1.0, span: float = 6.0,
                 step: float = 1e-3) -> LandauBasis:
    """Landau 基本解组; M ≠ 1 时在 λ/M 处求解, 由 landau_twistor 负责坐标缩放

    Raises:
        DomainViolation: closed_form 只对 λ/M = 1/2 成立
        OdeBlowUp: 数值解超出界限
    """
    if M <= 0:
        raise DomainViolation(f"magnetic strength must be positive, got {M}")
    reduced = lam / M
    if closed_form:
        if abs(reduced - 0.5) > 1e-14:
            raise DomainViolation("closed-form Landau basis exists only for the lowest level")
        return LandauBasis(lam=lam, closed_form=True, M=M, span=span)
    rhs = lambda y, dy, t: (t ** 2 - 2 * reduced) * y  # noqa: E731
    reduce = hermite_reduction(reduced)
    jets = (OdeJet(rhs, 0.0, 1.0, 0.0, -span, span, step=step, reduce=reduce, name="landau_psi1"),
            OdeJet(rhs, 0.0, 0.0, 1.0, -span, span, step=step, reduce=reduce, name="landau_psi2"))
    basis = LandauBasis(lam=lam, closed_form=False, M=M, span=span, jets=jets)
    basis.wronskian = float(basis.wronskian_at(0.0))
    return basis


def landau_twistor(basis: LandauBasis, k: float, x, y) -> np.ndarray:
    """复四维向量 ψ = (e^{ikx}ψ₁(y+k), e^{−ikx}ψ₁(y−k), e^{−ikx}ψ₂(y−k)/(2ikW), e^{ikx}ψ₂(y+k)/(2ikW))

    Returns:
        np.ndarray: (..., 4, 4), 行依次为 ψ, ψ_y, ψ_x, ψ_xy (管道面零标架的顺序)
    """
    if k == 0:
        raise DomainViolation("wavenumber k must be nonzero")
    s = math.sqrt(basis.M)
    X = s * np.asarray(x, dtype=float)
    Y = s * np.asarray(y, dtype=float)
    kk = k / s
    W = basis.wronskian
    ep, em = np.exp(1j * kk * X), np.exp(-1j * kk * X)
    c = 1.0 / (2j * kk * W)

    def comps(dy: int):
        return [ep * basis.psi1(Y + kk, dy), em * basis.psi1(Y - kk, dy),
                c * em * basis.psi2(Y - kk, dy), c * ep * basis.psi2(Y + kk, dy)]

    x_factor = np.array([1j * kk, -1j * kk, -1j * kk, 1j * kk])
    psi = np.stack(np.broadcast_arrays(*comps(0)), axis=-1)
    psi_y = np.stack(np.broadcast_arrays(*comps(1)), axis=-1)
    # 回到原坐标: ∂_y = √M ∂_Y, ∂_x = √M ∂_X, 整体除以 √M
    rows = [psi / s, psi_y, psi * x_factor, s * psi_y * x_factor]
    return np.stack(rows, axis=-2)


def landau_gram_check(frame: np.ndarray) -> Dict[str, float]:
    """(ψ_x,ψ_y) = 1, (ψ,ψ_xy) = −1, 其余为零, det(ψ,ψ_x,ψ_y,ψ_xy) = −1"""
    psi, psi_y, psi_x, psi_xy = (frame[..., i, :] for i in range(4))
    order = np.stack([psi, psi_x, psi_y, psi_xy], axis=-2)
    return {
        "(psi_x,psi_y)-1": float(np.max(np.abs(herm_product4(psi_x, psi_y) - 1.0))),
        "(psi,psi_xy)+1": float(np.max(np.abs(herm_product4(psi, psi_xy) + 1.0))),
        "others": float(max(np.max(np.abs(herm_product4(a, b)))
                            for a, b in ((psi, psi), (psi, psi_x), (psi, psi_y), (psi_x, psi_x),
                                         (psi_y, psi_y), (psi_x, psi_xy), (psi_y, psi_xy), (psi_xy, psi_xy)))),
        "det+1": float(np.max(np.abs(np.linalg.det(order) + 1.0))),
    }


def _rescaled(basis: LandauBasis, k: float, y) -> Tuple[np.ndarray, float, float]:
    """M ≠ 1 时换到 Y = √M y, k → k/√M"""
    if k == 0:
        raise DomainViolation("wavenumber k must be nonzero")
    s = math.sqrt(basis.M)
    return s * np.asarray(y, dtype=float), k / s, s


def landau_hex(basis: LandauBasis, k: float, y) -> np.ndarray:
    """V = ψ∧ψ_x + conj 的六球坐标 (差一个正因子)

    y⁰ = (a₋b₊ − a₊b₋)/W, y¹ = −(a₊b₋ + a₋b₊)/W, y² = y³ = 0,
    y⁴ = −2ka₊a₋ + b₋b₊/(2kW²), y⁵ = −2ka₊a₋ − b₋b₊/(2kW²),
    a± = ψ₁(y±k), b± = ψ₂(y±k)
    """
    y, k, _ = _rescaled(basis, k, y)
    W = basis.wronskian
    ap, am = basis.psi1(y + k), basis.psi1(y - k)
    bp, bm = basis.psi2(y + k), basis.psi2(y - k)
    zero = np.zeros_like(y)
    return np.stack([
        (am * bp - ap * bm) / W,
        -(ap * bm + am * bp) / W,
        zero,
        zero,
        -2 * k * ap * am + bm * bp / (2 * k * W ** 2),
        -2 * k * ap * am - bm * bp / (2 * k * W ** 2),
    ], axis=-1)


@dataclass
class LandauProfile:
    """球族中心 (0, 0, z(y)) 与半径 R(y); poles 记录分母为零或过大的点"""
    y: np.ndarray
    z: np.ndarray
    R: np.ndarray
    dz: np.ndarray
    dR: np.ndarray
    valid: np.ndarray
    poles: List[Dict] = field(default_factory=list)


def landau_surface(basis: LandauBasis, k: float, ys: Sequence[float]) -> LandauProfile:
    """z = kWψ₁(y−k)/ψ₂(y−k) − ψ₂(y+k)/(4kWψ₁(y+k)), R 同式取加号

    分母为零的点记录在 poles 中并标记为无效, 不抛出。
    """
    Y, kk, s = _rescaled(basis, k, ys)
    ys = np.asarray(ys, dtype=float)
    W = basis.wronskian
    a_m, b_m = basis.psi1(Y - kk), basis.psi2(Y - kk)
    a_p, b_p = basis.psi1(Y + kk), basis.psi2(Y + kk)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = kk * W * a_m / b_m
        second = b_p / (4 * kk * W * a_p)
        z = first - second
        R = first + second
        # z′ = −(P+Q), R′ = Q − P, 对 y 求导带因子 √M
        P = s * kk * W ** 2 / b_m ** 2
        Q = s / (4 * kk * a_p ** 2)
    valid = np.isfinite(z) & np.isfinite(R) & (np.abs(z) < POLE_THRESHOLD) & (np.abs(R) < POLE_THRESHOLD)
    poles = []
    for i in np.nonzero(~valid)[0]:
        err = PoleOnGrid(f"profile denominator vanishes near y={ys[i]:.6g}", index=int(i))
        poles.append({"index": err.index, "y": float(ys[i]), "message": str(err)})
    for denom, label in ((b_m, "psi2(y-k)"), (a_p, "psi1(y+k)")):
        flips = np.nonzero(np.sign(denom[:-1]) * np.sign(denom[1:]) < 0)[0]
        for i in flips:
            j = int(i if abs(denom[i]) <= abs(denom[i + 1]) else i + 1)
            if valid[j]:
                poles.append({"index": j, "y": float(ys[j]), "message": f"{label} changes sign between samples"})
    if poles:
        logger.warning(f"Landau profile has {len(poles)} pole samples")
    return LandauProfile(ys, np.where(valid, z, np.nan), np.where(valid, R, np.nan),
                         np.where(valid, -(P + Q), np.nan), np.where(valid, -P + Q, np.nan), valid, poles)


def landau_revolution(profile: LandauProfile, n_theta: int = 48) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """球族包络的子午线 Z = z − RR′/z′, ρ = R√(1 − R′²/z′²) 与旋转网格

    Returns:
        (Z, rho, mesh): mesh 形状 (len(y), n_theta, 3), 无效点为 NaN
    """
    ratio = profile.dR / profile.dz
    Z = profile.z - profile.R * ratio
    rho = np.abs(profile.R) * np.sqrt(np.clip(1.0 - ratio ** 2, 0.0, None))
    theta = np.linspace(0.0, 2 * np.pi, n_theta)
    mesh = np.stack(np.broadcast_arrays(rho[:, None] * np.cos(theta), rho[:, None] * np.sin(theta),
                                        Z[:, None] + 0.0 * theta), axis=-1)
    return Z, rho, mesh


def landau_profile_hex_check(basis: LandauBasis, k: float, ys) -> Dict[str, float]:
    """显式六球向量的 Lie 二次型残差, 以及归一化后与 (z, R) 的一致性"""
    hexv = landau_hex(basis, k, ys)
    profile = landau_surface(basis, k, ys)
    mask = profile.valid
    center, radius = hex_normalize(hexv[mask])
    return {
        "quadric": lie_quadric_residual(hexv),
        "axis": float(np.max(np.abs(hexv[..., 2:4]))),
        "z": float(np.max(np.abs(center[:, 2] - profile.z[mask]))),
        "R": float(np.max(np.abs(radius - profile.R[mask]))),
    }


def landau_operators(M: float, lam: float, k: float) -> Tuple[MagneticOperator, MagneticOperator]:
    """H = ½(i∂_x − My)² + ½(i∂_y)², F = −∂_x²; 网格轴为 (x, y)"""
    H = MagneticOperator((-0.5, -0.5), (lambda x, y: M * y + 0.0 * x, _zero), _zero, eigenvalue=lam, name="H")
    F = MagneticOperator((-1.0, 0.0), (_zero, _zero), _zero, eigenvalue=k ** 2, name="F")
    return H, F


def landau_operator_check(M: float, k: float, lam: float, xs: np.ndarray, ys: np.ndarray,
                          closed_form: Optional[bool] = None, n_bumps: int = 10,
                          seed: int = 0) -> Dict[str, float]:
    """H, F 作用在扭量分量上的本征残差, 以及 bump 函数上的交换子"""
    if closed_form is None:
        closed_form = abs(lam / M - 0.5) < 1e-14
    basis = landau_basis(lam, closed_form=closed_form, M=M)
    H, F = landau_operators(M, lam, k)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    psi = landau_twistor(basis, k, gx, gy)[..., 0, :]
    worst = max(commutator_residual(H, F, u, xs, ys) for u in random_bumps(xs, ys, n_bumps, seed))
    result = {
        "H_eigen": H.eigen_residual(psi, xs, ys),
        "F_eigen": F.eigen_residual(psi, xs, ys),
        "commutator": worst,
    }
    logger.info(f"Landau operator check M={M} k={k} lam={lam}: {result}")
    return result


def random_bumps(r1: np.ndarray, r2: np.ndarray, count: int = 10, seed: int = 0,
                 fraction: float = BUMP_WIDTH) -> List[np.ndarray]:
    """中心随机的测试函数; 每个方向的宽度为该方向边长的 fraction 倍, 中心离边界至少两倍宽度"""
    rng = np.random.default_rng(seed)
    width = (fraction * float(r1[-1] - r1[0]), fraction * float(r2[-1] - r2[0]))
    out = []
    for _ in range(count):
        center = (rng.uniform(r1[0] + 2 * width[0], r1[-1] - 2 * width[0]),
                  rng.uniform(r2[0] + 2 * width[1], r2[-1] - 2 * width[1]))
        out.append(bump(r1, r2, center, width))
    return out
