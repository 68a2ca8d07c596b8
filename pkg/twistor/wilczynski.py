"""
实射影对应物: 渐近坐标下的线性系统

    r_xx = β r_y + ½(V − β_y) r
    r_yy = γ r_x + ½(W − γ_x) r

及其相容条件, Wilczynski 四面体标架 (r, r₁, r₂, η), Plücker 嵌入, 以及签名 (3, 3)
的六维标架 (𝒰, 𝒜, 𝒫, 𝒱, ℬ, 𝒬)。

x, y 分别存放在 R¹, R² 两个坐标轴上, 场的实现复用 potentials.AnalyticField。
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from twistor.errors import DependentVectors, StencilOutOfDomain
from twistor.frame import DEFAULT_STEP, ConnectionPair, FrameGrid, FrameState, integrate_grid
from twistor.numerics import central_diff, crop, stencil_margin
from twistor.potentials import (R1, R2, T, AnalyticField, C0Params, DerivedCoeffs, GaugeMap, PotentialField, Rect,
                                apply_gauge, c0_jets, log_jet)

logger = logging.getLogger(__name__)

PROJ_NAMES = ("beta", "gamma", "V", "W")
PROJ6_NAMES = ("U", "A", "P", "V", "B", "Q")

# det = −1 的初始标架使乘积表取 (−1, 1, 1, −1)
DEFAULT_PROJ_FRAME = np.diag([1.0, 1.0, 1.0, -1.0])

# 签名 (3, 3) 的乘积表
PROJ6_TABLE = np.zeros((6, 6))
PROJ6_TABLE[0, 2] = PROJ6_TABLE[2, 0] = -1.0
PROJ6_TABLE[3, 5] = PROJ6_TABLE[5, 3] = 1.0
PROJ6_TABLE[1, 1] = 1.0
PROJ6_TABLE[4, 4] = -1.0

EPS_DEPENDENT = 1e-12


@dataclass
class ProjectiveParams(C0Params):
    """实射影族: β = φ₁′(x), γ = φ₂′(y), φᵢ″ = αφᵢ² + ρᵢφᵢ + sᵢ"""


def projective_field(beta, gamma, V, W, domain: Rect) -> AnalyticField:
    """由表达式 (或字符串, 变量写作 R1, R2) 构造射影势"""
    local = {"R1": R1, "R2": R2, "x": R1, "y": R2}
    raw = {"beta": beta, "gamma": gamma, "V": V, "W": W}
    exprs = {k: sp.sympify(v, locals=local) if isinstance(v, str) else sp.sympify(v) for k, v in raw.items()}
    return AnalyticField(exprs, domain, names=PROJ_NAMES)


def make_projective_family(params: ProjectiveParams) -> AnalyticField:
    """V = ε₁ + ε₀φ₁ + φ₂φ₁″ + ½ρ₂φ₁², W = ε₂ + ε₀φ₂ + φ₁φ₂″ + ½ρ₁φ₂², 满足射影相容方程

    Raises:
        OdeBlowUp: φᵢ 超出设定界限
    """
    jet1, jet2 = c0_jets(params)
    phi1 = sp.Function("phi1")(R1)
    phi2 = sp.Function("phi2")(R2)
    half = sp.Rational(1, 2)
    exprs = {
        "beta": sp.diff(phi1, R1),
        "gamma": sp.diff(phi2, R2),
        "V": params.eps1 + params.eps0 * phi1 + phi2 * sp.diff(phi1, R1, 2) + half * params.rho2 * phi1 ** 2,
        "W": params.eps2 + params.eps0 * phi2 + phi1 * sp.diff(phi2, R2, 2) + half * params.rho1 * phi2 ** 2,
    }
    logger.info(f"Built projective family on {params.domain}")
    return AnalyticField(exprs, params.domain, aux={"phi1": (R1, jet1), "phi2": (R2, jet2)}, names=PROJ_NAMES)


def proj_gc_residual(P: PotentialField, x, y) -> np.ndarray:
    """射影相容方程三个方程的残差, 形状 (3, ...)

    β_yyy − 2β_yW − βW_y − (γ_xxx − 2γ_xV − γV_x),
    W_x − 2γβ_y − βγ_y,  V_y − 2βγ_x − γβ_x
    """
    b, g, V, W = P.names
    j = lambda name, n1=0, n2=0: P.jet(name, x, y, n1, n2)  # noqa: E731
    res1 = (j(b, 0, 3) - 2 * j(b, 0, 1) * j(W) - j(b) * j(W, 0, 1)
            - (j(g, 3, 0) - 2 * j(g, 1, 0) * j(V) - j(g) * j(V, 1, 0)))
    res2 = j(W, 1, 0) - 2 * j(g) * j(b, 0, 1) - j(b) * j(g, 0, 1)
    res3 = j(V, 0, 1) - 2 * j(b) * j(g, 1, 0) - j(g) * j(b, 1, 0)
    return np.stack(np.broadcast_arrays(res1, res2, res3))


def proj_derived(P: PotentialField, x, y) -> DerivedCoeffs:
    """k = βγ − (ln β)_xy, l = βγ − (ln γ)_xy, a = W − (ln β)_yy − ½(ln β)_y², b = V − (ln γ)_xx − ½(ln γ)_x²

    Raises:
        ZeroPotential: β 或 γ 为零
    """
    b, g, V, W = P.names
    bg = P.jet(b, x, y) * P.jet(g, x, y)
    lb = lambda n1, n2: log_jet(P, b, x, y, n1, n2)  # noqa: E731
    lg = lambda n1, n2: log_jet(P, g, x, y, n1, n2)  # noqa: E731
    return DerivedCoeffs(
        k=np.asarray(bg - lb(1, 1)),
        l=np.asarray(bg - lg(1, 1)),
        a=np.asarray(P.jet(W, x, y) - lb(0, 2) - 0.5 * lb(0, 1) ** 2),
        b=np.asarray(P.jet(V, x, y) - lg(2, 0) - 0.5 * lg(1, 0) ** 2),
    )


def proj_gc2_residual(P: PotentialField, x, y) -> np.ndarray:
    """(k, l, a, b) 形式的相容条件残差, 形状 (3, ...)

    a_x − k_y − (β_y/β)k,  b_y − l_x − (γ_x/γ)l,  βa_y + 2aβ_y − γb_x − 2bγ_x
    """
    b, g, V, W = P.names
    j = lambda name, n1=0, n2=0: P.jet(name, x, y, n1, n2)  # noqa: E731
    lb = lambda n1, n2: log_jet(P, b, x, y, n1, n2)  # noqa: E731
    lg = lambda n1, n2: log_jet(P, g, x, y, n1, n2)  # noqa: E731
    c = proj_derived(P, x, y)
    a_x = j(W, 1, 0) - lb(1, 2) - lb(0, 1) * lb(1, 1)
    a_y = j(W, 0, 1) - lb(0, 3) - lb(0, 1) * lb(0, 2)
    b_x = j(V, 1, 0) - lg(3, 0) - lg(1, 0) * lg(2, 0)
    b_y = j(V, 0, 1) - lg(2, 1) - lg(1, 0) * lg(1, 1)
    k_y = j(b, 0, 1) * j(g) + j(b) * j(g, 0, 1) - lb(1, 2)
    l_x = j(b, 1, 0) * j(g) + j(b) * j(g, 1, 0) - lg(2, 1)
    res = [
        a_x - k_y - lb(0, 1) * c.k,
        b_y - l_x - lg(1, 0) * c.l,
        j(b) * a_y + 2 * c.a * j(b, 0, 1) - j(g) * b_x - 2 * c.b * j(g, 1, 0),
    ]
    return np.stack(np.broadcast_arrays(*res))


def proj_frame_connection(P: PotentialField, x, y) -> ConnectionPair:
    """Wilczynski 标架 (r, r₁, r₂, η) 的两个实 4×4 系数矩阵, 均无迹

    Raises:
        ZeroPotential: β 或 γ 为零
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    b_name, g_name = P.names[0], P.names[1]
    beta, gamma = P.jet(b_name, x, y), P.jet(g_name, x, y)
    hb = 0.5 * log_jet(P, b_name, x, y, 0, 1)
    hg = 0.5 * log_jet(P, g_name, x, y, 1, 0)
    c = proj_derived(P, x, y)
    k, l, a, b = c.k, c.l, c.a, c.b
    m1 = np.zeros(x.shape + (4, 4))
    m2 = np.zeros(x.shape + (4, 4))
    m1[..., 0, 0], m1[..., 0, 1] = hg, 1
    m1[..., 1, 0], m1[..., 1, 1], m1[..., 1, 2] = b / 2, -hg, beta
    m1[..., 2, 0], m1[..., 2, 2], m1[..., 2, 3] = k / 2, hg, 1
    m1[..., 3, 0], m1[..., 3, 1], m1[..., 3, 2], m1[..., 3, 3] = beta * a / 2, k / 2, b / 2, -hg
    m2[..., 0, 0], m2[..., 0, 2] = hb, 1
    m2[..., 1, 0], m2[..., 1, 1], m2[..., 1, 3] = l / 2, hb, 1
    m2[..., 2, 0], m2[..., 2, 1], m2[..., 2, 2] = a / 2, gamma, -hb
    m2[..., 3, 0], m2[..., 3, 1], m2[..., 3, 2], m2[..., 3, 3] = gamma * b / 2, a / 2, l / 2, -hb
    return ConnectionPair(m1, m2)


def integrate_proj_grid(P: PotentialField, x: np.ndarray, y: np.ndarray, init: Optional[np.ndarray] = None,
                        step: float = DEFAULT_STEP, base_index: Optional[Tuple[int, int]] = None) -> FrameGrid:
    """网格上的实射影标架, 默认初始标架 diag(1, 1, 1, −1)"""
    matrix = DEFAULT_PROJ_FRAME if init is None else np.asarray(init, dtype=float)
    if abs(np.linalg.det(matrix)) < EPS_DEPENDENT:
        raise DependentVectors("initial projective frame is singular")
    state = FrameState((float(x[0]), float(y[0])), matrix)
    return integrate_grid(P, x, y, init=state, step=step, base_index=base_index, connection=proj_frame_connection)


# ---------------------------------------------------------------------------
# Plücker 坐标 (p₀₁, p₀₂, p₀₃, p₂₃, p₃₁, p₁₂)


def plucker_embed(a, b, check: bool = True) -> np.ndarray:
    """直线 ab 的 Plücker 坐标

    Raises:
        DependentVectors: a, b 线性相关
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    p = lambda i, j: a[..., i] * b[..., j] - a[..., j] * b[..., i]  # noqa: E731
    out = np.stack(np.broadcast_arrays(p(0, 1), p(0, 2), p(0, 3), p(2, 3), p(3, 1), p(1, 2)), axis=-1)
    if check:
        scale = np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)
        if np.any(np.linalg.norm(out, axis=-1) <= EPS_DEPENDENT * np.maximum(scale, 1.0)):
            raise DependentVectors("points coincide: the line through them is undefined")
    return out


def plucker_product(X, Y) -> np.ndarray:
    """½(X₀₁Y₂₃ + X₂₃Y₀₁ + X₀₂Y₃₁ + X₃₁Y₀₂ + X₀₃Y₁₂ + X₁₂Y₀₃); (a∧b, c∧d) = ½det(a, b, c, d)"""
    X = np.asarray(X)
    Y = np.asarray(Y)
    return 0.5 * (X[..., 0] * Y[..., 3] + X[..., 3] * Y[..., 0] + X[..., 1] * Y[..., 4]
                  + X[..., 4] * Y[..., 1] + X[..., 2] * Y[..., 5] + X[..., 5] * Y[..., 2])


def plucker_quadric(X) -> np.ndarray:
    """p₀₁p₂₃ + p₀₂p₃₁ + p₀₃p₁₂"""
    return plucker_product(X, X)


def proj_lie6(grid) -> np.ndarray:
    """(𝒰, 𝒜, 𝒫, 𝒱, ℬ, 𝒬), 形状 (..., 6, 6)

    𝒰 = r∧r₁, 𝒜 = r₂∧r₁ + r∧η, 𝒫 = 2r₂∧η, 𝒱 = r∧r₂, ℬ = r₁∧r₂ + r∧η, 𝒬 = 2r₁∧η
    """
    frames = grid.frames if isinstance(grid, FrameGrid) else np.asarray(grid)
    r, r1, r2, eta = (frames[..., i, :] for i in range(4))
    w = lambda u, v: plucker_embed(u, v, check=False)  # noqa: E731
    return np.stack([
        w(r, r1),
        w(r2, r1) + w(r, eta),
        2 * w(r2, eta),
        w(r, r2),
        w(r1, r2) + w(r, eta),
        2 * w(r1, eta),
    ], axis=-2)


def proj_table_residual(vectors: np.ndarray) -> float:
    """六维标架的乘积与签名 (3, 3) 乘积表之差"""
    gram = plucker_product(vectors[..., :, None, :], vectors[..., None, :, :])
    return float(np.max(np.abs(gram - PROJ6_TABLE)))


def proj_table(vectors: np.ndarray) -> Dict[str, float]:
    """乘积表的四个非零项 (取网格上的平均值)"""
    index = {name: i for i, name in enumerate(PROJ6_NAMES)}
    out = {}
    for left, right in (("U", "P"), ("A", "A"), ("V", "Q"), ("B", "B")):
        value = plucker_product(vectors[..., index[left], :], vectors[..., index[right], :])
        out[f"({left},{right})"] = float(np.mean(value))
    return out


def uapvbq_matrices(P: PotentialField, x, y) -> Tuple[np.ndarray, np.ndarray]:
    """(𝒰, 𝒜, 𝒫, 𝒱, ℬ, 𝒬) 满足的两个 6×6 系统"""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    b_name, g_name = P.names[0], P.names[1]
    beta, gamma = P.jet(b_name, x, y), P.jet(g_name, x, y)
    lb = log_jet(P, b_name, x, y, 0, 1)
    lg = log_jet(P, g_name, x, y, 1, 0)
    c = proj_derived(P, x, y)
    k, l, a, b = c.k, c.l, c.a, c.b
    L1 = np.zeros(x.shape + (6, 6))
    L2 = np.zeros(x.shape + (6, 6))
    L1[..., 0, 3] = beta
    L1[..., 1, 0] = k
    L1[..., 2, 1], L1[..., 2, 3] = k, -beta * a
    L1[..., 3, 3], L1[..., 3, 4] = lg, 1
    L1[..., 4, 3], L1[..., 4, 5] = b, 1
    L1[..., 5, 0], L1[..., 5, 2], L1[..., 5, 4], L1[..., 5, 5] = -beta * a, beta, b, -lg
    L2[..., 0, 0], L2[..., 0, 1] = lb, 1
    L2[..., 1, 0], L2[..., 1, 2] = a, 1
    L2[..., 2, 1], L2[..., 2, 2], L2[..., 2, 3], L2[..., 2, 5] = a, -lb, -gamma * b, gamma
    L2[..., 3, 0] = gamma
    L2[..., 4, 3] = l
    L2[..., 5, 0], L2[..., 5, 4] = -gamma * b, l
    return L1, L2


def _check_margin(grid: FrameGrid, order: int) -> int:
    m = stencil_margin(order)
    if len(grid.r1) <= 2 * m or len(grid.r2) <= 2 * m:
        raise StencilOutOfDomain(f"grid {len(grid.r1)}x{len(grid.r2)} too small for 4th-order stencils")
    return m


def uapvbq_connection(P: PotentialField, grid: FrameGrid) -> Dict[str, float]:
    """六维系统的差分残差与乘积表偏差

    Raises:
        StencilOutOfDomain: 网格太小
    """
    m = _check_margin(grid, 1)
    phi = proj_lie6(grid)
    d1 = central_diff(phi, grid.h1, 1, axis=0)
    d2 = central_diff(phi, grid.h2, 1, axis=1)
    g1, g2 = grid.mesh
    L1, L2 = uapvbq_matrices(P, g1, g2)
    residual = float(max(np.max(np.abs(crop(d1 - L1 @ phi, m))), np.max(np.abs(crop(d2 - L2 @ phi, m)))))
    table = proj_table_residual(phi)
    logger.info(f"Projective 6-frame residual {residual:.3e}, table residual {table:.3e}")
    return {"system": residual, "table": table}


def laplace_relations(P: PotentialField, grid: FrameGrid) -> Dict[str, float]:
    """𝒰_x = β𝒱 与 𝒱_y = γ𝒰 的差分残差"""
    m = _check_margin(grid, 1)
    phi = proj_lie6(grid)
    U, V = phi[..., 0, :], phi[..., 3, :]
    g1, g2 = grid.mesh
    beta = P.jet(P.names[0], g1, g2)[..., None]
    gamma = P.jet(P.names[1], g1, g2)[..., None]
    return {
        "U_x-beta*V": float(np.max(np.abs(crop(central_diff(U, grid.h1, 1, axis=0) - beta * V, m)))),
        "V_y-gamma*U": float(np.max(np.abs(crop(central_diff(V, grid.h2, 1, axis=1) - gamma * U, m)))),
    }


def proj_focal_check(grid: FrameGrid) -> Dict[str, float]:
    """(𝒰,𝒰) = (𝒱,𝒱) = 0, 以及 {𝒰, 𝒰_y, 𝒰_yy} 与 {𝒱, 𝒱_x, 𝒱_xx} 两两正交"""
    m = _check_margin(grid, 2)
    phi = proj_lie6(grid)
    U, V = phi[..., 0, :], phi[..., 3, :]
    left = {"U": U, "U_y": central_diff(U, grid.h2, 1, axis=1), "U_yy": central_diff(U, grid.h2, 2, axis=1)}
    right = {"V": V, "V_x": central_diff(V, grid.h1, 1, axis=0), "V_xx": central_diff(V, grid.h1, 2, axis=0)}
    report = {
        "(U,U)": float(np.max(np.abs(crop(plucker_product(U, U), m)))),
        "(V,V)": float(np.max(np.abs(crop(plucker_product(V, V), m)))),
    }
    for lname, lval in left.items():
        for rname, rval in right.items():
            report[f"({lname},{rname})"] = float(np.max(np.abs(crop(plucker_product(lval, rval), m))))
    return report


def proj_invariant_forms(P: PotentialField, point: Sequence[float], direction: Sequence[float]) -> Tuple[float, float]:
    """射影度量 2βγ dxdy 与 Darboux 三次形式 βdx³ + γdy³ 在给定方向上的值"""
    x, y = point
    dx, dy = direction
    beta = float(P.jet(P.names[0], x, y))
    gamma = float(P.jet(P.names[1], x, y))
    return 2 * beta * gamma * dx * dy, beta * dx ** 3 + gamma * dy ** 3


def gauge_frame_factors(G: GaugeMap, x, y) -> np.ndarray:
    """x* = f(x), y* = g(y) 下 r, r₁, r₂, η 获得的因子

    λ = √(f′g′): (λ, λ/f′, λ/g′, λ/(f′g′))
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    fp = np.broadcast_to(np.asarray(sp.lambdify(T, sp.diff(G.f, T), "numpy")(x), dtype=float), x.shape)
    gp = np.broadcast_to(np.asarray(sp.lambdify(T, sp.diff(G.g, T), "numpy")(y), dtype=float), y.shape)
    lam = np.sqrt(fp * gp)
    return np.stack([lam, lam / fp, lam / gp, lam / (fp * gp)], axis=-1)


def proj_gauge_check(P: AnalyticField, G: GaugeMap, x: np.ndarray, y: np.ndarray,
                     step: float = DEFAULT_STEP) -> float:
    """规范变换后的标架与原标架乘以顶点因子之差 (相对最大范数)

    两张网格共享基点; 变换后的网格节点为 (f(x), g(y))。P 须使用恒等坐标。
    """
    base = integrate_proj_grid(P, x, y, step=step)
    Q = apply_gauge(P, G)
    fx = np.array([Q.charts[0].image(float(v)) for v in x])
    gy = np.array([Q.charts[1].image(float(v)) for v in y])
    i0, j0 = base.base_index
    factors = gauge_frame_factors(G, *np.meshgrid(x, y, indexing="ij"))
    expected = factors[..., :, None] * base.frames
    moved = integrate_proj_grid(Q, fx, gy, init=expected[i0, j0], step=step, base_index=(i0, j0))
    scale = float(np.max(np.abs(expected)))
    return float(np.max(np.abs(moved.frames - expected))) / scale
