"""
势函数 (p, q, V, W): 相容性检查, 规范变换, 以及三族显式解

两种表示:
    AnalyticField  sympy 闭式表达式, 导数精确 (可引用 ODE 表格函数 ψ₁, ψ₂)
    SampledField   网格采样, 导数用四阶中心差分

同一套代码也服务于射影势 (β, γ, V, W), 见 twistor.wilczynski。
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import sympy as sp
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import brentq

from twistor.errors import DegenerateJet, DomainViolation, IncompatibleField, StencilOutOfDomain, ZeroPotential
from twistor.numerics import OdeJet, central_diff, stencil_margin

logger = logging.getLogger(__name__)

R1, R2 = sp.symbols("R1 R2", real=True)
T = sp.Symbol("t", real=True)

LIE_NAMES = ("p", "q", "V", "W")

# 判定 p, q 为零的绝对阈值
ZERO_TOL = 1e-12
# 解析场 / 采样场的相容性容差
TOL_GC_ANALYTIC = 1e-8
TOL_GC_SAMPLED = 1e-4


@dataclass(frozen=True)
class Rect:
    """(R¹, R²) 平面上的轴对齐矩形"""
    r1min: float
    r1max: float
    r2min: float
    r2max: float

    def __post_init__(self):
        if not (self.r1max >= self.r1min and self.r2max >= self.r2min):
            raise DomainViolation(f"empty rectangle {self}")

    def contains(self, r1, r2, tol: float = 1e-9) -> bool:
        r1 = np.asarray(r1, dtype=float)
        r2 = np.asarray(r2, dtype=float)
        return bool(
            np.all(r1 >= self.r1min - tol) and np.all(r1 <= self.r1max + tol)
            and np.all(r2 >= self.r2min - tol) and np.all(r2 <= self.r2max + tol)
        )

    def inset(self, fraction: float) -> "Rect":
        """向内收缩, 每边去掉 fraction 倍边长"""
        d1 = (self.r1max - self.r1min) * fraction
        d2 = (self.r2max - self.r2min) * fraction
        return Rect(self.r1min + d1, self.r1max - d1, self.r2min + d2, self.r2max - d2)

    def grid(self, n1: int, n2: int) -> Tuple[np.ndarray, np.ndarray]:
        return np.linspace(self.r1min, self.r1max, n1), np.linspace(self.r2min, self.r2max, n2)

    def swapped(self) -> "Rect":
        return Rect(self.r2min, self.r2max, self.r1min, self.r1max)

    def corners(self):
        return [(self.r1min, self.r2min), (self.r1max, self.r2min),
                (self.r1max, self.r2max), (self.r1min, self.r2max)]


@dataclass
class DerivedCoeffs:
    """k, l, a, b (可以是数组); 管道面分支中 l 为 NaN"""
    k: np.ndarray
    l: np.ndarray
    a: np.ndarray
    b: np.ndarray


class PotentialField(ABC):
    """(R¹, R²) 矩形上的四个势函数

    names 给出四个分量的名字, 第一个按 g′/(f′)² 变换, 第二个按 f′/(g′)² 变换。
    """

    names: Tuple[str, str, str, str] = LIE_NAMES
    canal: bool = False
    domain: Rect

    @property
    @abstractmethod
    def sampled(self) -> bool:
        """采样场返回 True"""

    @abstractmethod
    def jet(self, name: str, r1, r2, n1: int = 0, n2: int = 0) -> np.ndarray:
        """∂₁^n1 ∂₂^n2 name 在 (r1, r2) 处的值"""

    def __call__(self, name: str, r1, r2) -> np.ndarray:
        return self.jet(name, r1, r2)

    @property
    def tol_gc(self) -> float:
        return TOL_GC_SAMPLED if self.sampled else TOL_GC_ANALYTIC


def _broadcast(r1, r2):
    return np.broadcast_arrays(np.asarray(r1, dtype=float), np.asarray(r2, dtype=float))


class _Chart:
    """新坐标作为基坐标的单调函数, 以及它的数值反函数"""

    def __init__(self, expr: sp.Expr, var: sp.Symbol, lo: float, hi: float):
        self.expr = sp.sympify(expr)
        self.var = var
        self.lo = lo
        self.hi = hi
        self.identity = self.expr == var
        self.slope = sp.diff(self.expr, var)
        self._inverse = None if self.identity else self._build_inverse()

    def _build_inverse(self) -> Callable:
        mid = 0.5 * (self.lo + self.hi)
        target = float(self.expr.subs(self.var, mid))
        try:
            solutions = sp.solve(sp.Eq(self.expr, T), self.var)
        except (NotImplementedError, ValueError):
            solutions = []
        for sol in solutions:
            fn = sp.lambdify(T, sol, "numpy")
            try:
                val = complex(fn(target))
            except (TypeError, ValueError, ZeroDivisionError):
                continue
            if abs(val.imag) < 1e-12 and abs(val.real - mid) <= 1e-9 * (1.0 + abs(mid)):
                return lambda x, fn=fn: np.real(np.asarray(fn(np.asarray(x, dtype=float)), dtype=complex))
        forward = sp.lambdify(self.var, self.expr, "numpy")
        pad = 0.5 * (self.hi - self.lo) + 1e-6

        def invert(x):
            x = np.asarray(x, dtype=float)
            out = np.empty_like(x)
            for idx, value in np.ndenumerate(x):
                out[idx] = brentq(lambda s: forward(s) - value, self.lo - pad, self.hi + pad, xtol=1e-15)
            return out

        logger.debug(f"No closed-form inverse for chart {self.expr}; using brentq")
        return invert

    def to_base(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) if self.identity else self._inverse(x)

    def image(self, value: float) -> float:
        return float(self.expr.subs(self.var, value))


class AnalyticField(PotentialField):
    """sympy 闭式势函数

    Args:
        exprs: 名字 -> R1, R2 的 sympy 表达式
        domain: 基坐标矩形
        canal: 管道面标志 (q ≡ 0)
        aux: 辅助函数名 -> (sympy 自变量, OdeJet), 例如 ψ₁(R1)
        charts: 可选的坐标变换 (新 R¹ 作为 R1 的函数, 新 R² 作为 R2 的函数)
        names: 四个分量的名字
    """

    def __init__(self, exprs: Dict[str, sp.Expr], domain: Rect, canal: bool = False,
                 aux: Optional[Dict[str, Tuple[sp.Symbol, OdeJet]]] = None,
                 charts: Optional[Tuple[sp.Expr, sp.Expr]] = None,
                 names: Tuple[str, str, str, str] = LIE_NAMES):
        self.names = names
        self.exprs = {name: sp.sympify(exprs[name]) for name in names}
        self.base_domain = domain
        self.canal = canal
        self.aux = dict(aux or {})
        c1, c2 = charts if charts is not None else (R1, R2)
        self.charts = (_Chart(c1, R1, domain.r1min, domain.r1max),
                       _Chart(c2, R2, domain.r2min, domain.r2max))
        self.domain = Rect(self.charts[0].image(domain.r1min), self.charts[0].image(domain.r1max),
                           self.charts[1].image(domain.r2min), self.charts[1].image(domain.r2max))
        self._cache: Dict[Tuple[str, int, int], Tuple[Callable, list]] = {}

    @property
    def sampled(self) -> bool:
        return False

    def derivative_expr(self, name: str, n1: int = 0, n2: int = 0) -> sp.Expr:
        """在新坐标下对 name 求导的 sympy 表达式 (以基坐标表示)"""
        expr = self.exprs[name]
        for chart, n in zip(self.charts, (n1, n2)):
            for _ in range(n):
                expr = sp.diff(expr, chart.var) if chart.identity else sp.diff(expr, chart.var) / chart.slope
        return expr

    def _compile(self, name: str, n1: int, n2: int):
        key = (name, n1, n2)
        if key in self._cache:
            return self._cache[key]
        expr = self.derivative_expr(name, n1, n2)
        replace = {}
        slots = []
        functions = {fname: sp.Function(fname) for fname in self.aux}
        for d in expr.atoms(sp.Derivative):
            fname = str(d.expr.func)
            if fname in functions:
                sym = sp.Symbol(f"_{fname}_{d.derivative_count}")
                replace[d] = sym
                slots.append((sym, fname, d.derivative_count))
        for app in expr.atoms(sp.core.function.AppliedUndef):
            fname = str(app.func)
            if fname in functions:
                sym = sp.Symbol(f"_{fname}_0")
                replace[app] = sym
                slots.append((sym, fname, 0))
        expr = expr.xreplace(replace)
        slots = sorted(set(slots), key=lambda s: s[0].name)
        fn = sp.lambdify([R1, R2] + [s[0] for s in slots], expr, "numpy")
        self._cache[key] = (fn, slots)
        return fn, slots

    def jet(self, name: str, r1, r2, n1: int = 0, n2: int = 0) -> np.ndarray:
        r1, r2 = _broadcast(r1, r2)
        if not self.domain.contains(r1, r2):
            raise StencilOutOfDomain(f"point outside field domain {self.domain}")
        b1 = self.charts[0].to_base(r1)
        b2 = self.charts[1].to_base(r2)
        fn, slots = self._compile(name, n1, n2)
        args = []
        for _, fname, order in slots:
            var, jet = self.aux[fname]
            args.append(jet(b1 if var == R1 else b2, order))
        value = fn(b1, b2, *args)
        return np.broadcast_to(np.asarray(value, dtype=float), r1.shape).copy()


class SampledField(PotentialField):
    """网格采样的势函数

    ∂₁^n1 ∂₂^n2 先在网格上做四阶中心差分, 裁掉无效边缘后用双三次样条插值。
    """

    def __init__(self, r1: np.ndarray, r2: np.ndarray, values: Dict[str, np.ndarray],
                 canal: bool = False, names: Tuple[str, str, str, str] = LIE_NAMES):
        self.names = names
        self.r1 = np.asarray(r1, dtype=float)
        self.r2 = np.asarray(r2, dtype=float)
        self.h1 = float(self.r1[1] - self.r1[0])
        self.h2 = float(self.r2[1] - self.r2[0])
        self.values = {name: np.asarray(values[name], dtype=float) for name in names}
        self.canal = canal
        self.domain = Rect(self.r1[0], self.r1[-1], self.r2[0], self.r2[-1])
        self._splines: Dict[Tuple[str, int, int], Tuple[RectBivariateSpline, Rect]] = {}

    @property
    def sampled(self) -> bool:
        return True

    def grid_derivative(self, name: str, n1: int = 0, n2: int = 0) -> np.ndarray:
        """网格上的差分导数, 无效边缘为 NaN"""
        out = central_diff(self.values[name], self.h1, n1, axis=0)
        return central_diff(out, self.h2, n2, axis=1)

    def _spline(self, name: str, n1: int, n2: int):
        key = (name, n1, n2)
        if key not in self._splines:
            m1 = stencil_margin(n1) if n1 else 0
            m2 = stencil_margin(n2) if n2 else 0
            data = self.grid_derivative(name, n1, n2)
            x = self.r1[m1:len(self.r1) - m1]
            y = self.r2[m2:len(self.r2) - m2]
            if len(x) < 4 or len(y) < 4:
                raise StencilOutOfDomain(f"grid too small for d{n1},{n2} {name}")
            z = data[m1:len(self.r1) - m1, m2:len(self.r2) - m2]
            self._splines[key] = (RectBivariateSpline(x, y, z, kx=3, ky=3, s=0),
                                  Rect(x[0], x[-1], y[0], y[-1]))
        return self._splines[key]

    def jet(self, name: str, r1, r2, n1: int = 0, n2: int = 0) -> np.ndarray:
        r1, r2 = _broadcast(r1, r2)
        spline, valid = self._spline(name, n1, n2)
        if not valid.contains(r1, r2, tol=1e-9 * max(self.h1, self.h2)):
            raise StencilOutOfDomain(
                f"d{n1},{n2} {name} requested outside valid stencil region {valid}")
        return spline.ev(r1, r2)


def analytic_field(p, q, V, W, domain: Rect, canal: bool = False) -> AnalyticField:
    """从表达式 (或字符串) 构造解析场"""
    exprs = {"p": p, "q": q, "V": V, "W": W}
    local = {"R1": R1, "R2": R2}
    exprs = {k: sp.sympify(v, locals=local) if isinstance(v, str) else sp.sympify(v) for k, v in exprs.items()}
    return AnalyticField(exprs, domain, canal=canal)


def sampled_field(r1, r2, p, q, V, W, canal: bool = False) -> SampledField:
    return SampledField(r1, r2, {"p": p, "q": q, "V": V, "W": W}, canal=canal)


def swap_axes(P: PotentialField) -> PotentialField:
    """R¹↔R², p↔q, V↔W (处理 p ≡ 0 的对偶管道面)"""
    first, second, third, fourth = P.names
    if isinstance(P, SampledField):
        values = {first: P.values[second].T, second: P.values[first].T,
                  third: P.values[fourth].T, fourth: P.values[third].T}
        return SampledField(P.r2, P.r1, values, canal=P.canal, names=P.names)
    if not isinstance(P, AnalyticField):
        raise TypeError(f"cannot swap {type(P).__name__}")
    flip = {R1: R2, R2: R1}
    exprs = {first: P.exprs[second].xreplace(flip), second: P.exprs[first].xreplace(flip),
             third: P.exprs[fourth].xreplace(flip), fourth: P.exprs[third].xreplace(flip)}
    aux = {name: (R2 if var == R1 else R1, jet) for name, (var, jet) in P.aux.items()}
    charts = (P.charts[1].expr.xreplace(flip), P.charts[0].expr.xreplace(flip))
    return AnalyticField(exprs, P.base_domain.swapped(), canal=P.canal, aux=aux,
                         charts=charts, names=P.names)


def log_jet(P: PotentialField, name: str, r1, r2, n1: int, n2: int) -> np.ndarray:
    """∂₁^n1 ∂₂^n2 ln|f|, 总阶数 ≤ 3

    Raises:
        ZeroPotential: f 在某个点为零
    """
    f = P.jet(name, r1, r2)
    if np.any(np.abs(f) < ZERO_TOL):
        raise ZeroPotential(f"{name} vanishes at the evaluation point")

    def d(i, j):
        return P.jet(name, r1, r2, i, j) / f

    order = (n1, n2)
    if order == (0, 0):
        return np.log(np.abs(f))
    if order in ((1, 0), (0, 1)):
        return d(*order)
    if order == (2, 0):
        return d(2, 0) - d(1, 0) ** 2
    if order == (0, 2):
        return d(0, 2) - d(0, 1) ** 2
    if order == (1, 1):
        return d(1, 1) - d(1, 0) * d(0, 1)
    if order == (3, 0):
        return d(3, 0) - 3 * d(1, 0) * d(2, 0) + 2 * d(1, 0) ** 3
    if order == (0, 3):
        return d(0, 3) - 3 * d(0, 1) * d(0, 2) + 2 * d(0, 1) ** 3
    if order == (2, 1):
        return d(2, 1) - d(2, 0) * d(0, 1) - 2 * d(1, 0) * d(1, 1) + 2 * d(1, 0) ** 2 * d(0, 1)
    if order == (1, 2):
        return d(1, 2) - d(0, 2) * d(1, 0) - 2 * d(0, 1) * d(1, 1) + 2 * d(0, 1) ** 2 * d(1, 0)
    raise ValueError(f"log derivative of order {order} not supported")


def gauss_codazzi_residual(P: PotentialField, r1, r2) -> np.ndarray:
    """Gauss–Codazzi 三个方程左减右的残差, 形状 (3, ...)"""
    p, q, V, W = P.names
    j = P.jet
    res1 = (j(p, r1, r2, 0, 3) - 2 * j(W, r1, r2) * j(p, r1, r2, 0, 1) - j(p, r1, r2) * j(W, r1, r2, 0, 1)
            + j(q, r1, r2, 3, 0) - 2 * j(V, r1, r2) * j(q, r1, r2, 1, 0) - j(q, r1, r2) * j(V, r1, r2, 1, 0))
    res2 = j(W, r1, r2, 1, 0) - 2 * j(q, r1, r2) * j(p, r1, r2, 0, 1) - j(p, r1, r2) * j(q, r1, r2, 0, 1)
    res3 = j(V, r1, r2, 0, 1) - 2 * j(p, r1, r2) * j(q, r1, r2, 1, 0) - j(q, r1, r2) * j(p, r1, r2, 1, 0)
    return np.stack(np.broadcast_arrays(res1, res2, res3))


def derived_coeffs(P: PotentialField, r1, r2) -> DerivedCoeffs:
    """k, l, a, b

    Raises:
        ZeroPotential: p 为零, 或非管道面分支中 q 为零
    """
    p_name, q_name, v_name, w_name = P.names
    p = P.jet(p_name, r1, r2)
    q = P.jet(q_name, r1, r2)
    lp12 = log_jet(P, p_name, r1, r2, 1, 1)
    a = P.jet(w_name, r1, r2) - log_jet(P, p_name, r1, r2, 0, 2) - 0.5 * log_jet(P, p_name, r1, r2, 0, 1) ** 2
    if P.canal:
        k = -lp12
        l = np.full_like(k, np.nan)
        b = P.jet(v_name, r1, r2)
    else:
        k = p * q - lp12
        l = p * q - log_jet(P, q_name, r1, r2, 1, 1)
        b = P.jet(v_name, r1, r2) - log_jet(P, q_name, r1, r2, 2, 0) - 0.5 * log_jet(P, q_name, r1, r2, 1, 0) ** 2
    return DerivedCoeffs(k=np.asarray(k), l=np.asarray(l), a=np.asarray(a), b=np.asarray(b))


def lie_gc_residual(P: PotentialField, r1, r2) -> np.ndarray:
    """Lie 相容方程五个关系的残差, 形状 (5, ...)"""
    p_name, q_name, v_name, w_name = P.names
    j = P.jet
    p, q = j(p_name, r1, r2), j(q_name, r1, r2)
    c = derived_coeffs(P, r1, r2)
    lp = lambda n1, n2: log_jet(P, p_name, r1, r2, n1, n2)  # noqa: E731
    lq = lambda n1, n2: log_jet(P, q_name, r1, r2, n1, n2)  # noqa: E731
    # 系数的一阶导数
    da_1 = j(w_name, r1, r2, 1, 0) - lp(1, 2) - lp(0, 1) * lp(1, 1)
    da_2 = j(w_name, r1, r2, 0, 1) - lp(0, 3) - lp(0, 1) * lp(0, 2)
    dk_2 = j(p_name, r1, r2, 0, 1) * q + p * j(q_name, r1, r2, 0, 1) - lp(1, 2)
    g1 = lp(1, 1) - (p * q - c.k)
    res = [g1]
    if P.canal:
        res += [np.zeros_like(g1), da_1 - dk_2 - lp(0, 1) * c.k, np.zeros_like(g1),
                p * da_2 + 2 * c.a * j(p_name, r1, r2, 0, 1)]
    else:
        db_1 = j(v_name, r1, r2, 1, 0) - lq(3, 0) - lq(1, 0) * lq(2, 0)
        db_2 = j(v_name, r1, r2, 0, 1) - lq(2, 1) - lq(1, 0) * lq(1, 1)
        dl_1 = j(p_name, r1, r2, 1, 0) * q + p * j(q_name, r1, r2, 1, 0) - lq(2, 1)
        res += [
            lq(1, 1) - (p * q - c.l),
            da_1 - dk_2 - lp(0, 1) * c.k,
            db_2 - dl_1 - lq(1, 0) * c.l,
            p * da_2 + 2 * c.a * j(p_name, r1, r2, 0, 1) + q * db_1 + 2 * c.b * j(q_name, r1, r2, 1, 0),
        ]
    return np.stack(np.broadcast_arrays(*res))


def validate_field(P: PotentialField, n1: int = 21, n2: int = 21, tol: Optional[float] = None) -> float:
    """在验证网格上计算 Gauss–Codazzi 最大残差; 采样场自动避开差分边缘

    Returns:
        float: 最大绝对残差
    """
    if isinstance(P, SampledField):
        m = stencil_margin(3)
        r1 = P.r1[m:len(P.r1) - m]
        r2 = P.r2[m:len(P.r2) - m]
        g1, g2 = np.meshgrid(np.linspace(r1[0], r1[-1], n1), np.linspace(r2[0], r2[-1], n2), indexing="ij")
    else:
        g1, g2 = np.meshgrid(*P.domain.grid(n1, n2), indexing="ij")
    residual = float(np.max(np.abs(gauss_codazzi_residual(P, g1, g2))))
    tol = P.tol_gc if tol is None else tol
    logger.info(f"Gauss-Codazzi residual on {n1}x{n2} validation grid: {residual:.3e} (tol {tol:.1e})")
    return residual


def require_compatible(P: PotentialField, n1: int = 21, n2: int = 21, tol: Optional[float] = None) -> float:
    """
    积分标架之前的相容性门槛

    Returns:
        float: 验证网格上的最大残差

    Raises:
        IncompatibleField: 残差超过 tol (缺省按解析 / 采样场取 tol_gc)
    """
    tol = P.tol_gc if tol is None else tol
    residual = validate_field(P, n1, n2, tol)
    if not residual <= tol:
        raise IncompatibleField(f"Gauss-Codazzi residual {residual:.3e} exceeds {tol:.1e}; "
                                f"frames cannot be integrated")
    return residual


def field_table(P: PotentialField, r1: np.ndarray, r2: np.ndarray) -> np.ndarray:
    """CSV 行: R¹, R², 以及四个势函数"""
    g1, g2 = np.meshgrid(r1, r2, indexing="ij")
    columns = [g1.ravel(), g2.ravel()] + [P.jet(name, g1, g2).ravel() for name in P.names]
    return np.column_stack(columns)


def _parse(expr: Union[str, sp.Expr]) -> sp.Expr:
    return sp.sympify(expr, locals={"t": T}) if isinstance(expr, str) else sp.sympify(expr)


def schwarzian(h: Union[str, sp.Expr], t: float) -> float:
    """S(h) = h‴/h′ − (3/2)(h″/h′)²

    Args:
        h: 关于符号 t 的表达式
        t: 求值点

    Raises:
        DegenerateJet: h′(t) = 0
    """
    h = _parse(h)
    d1, d2, d3 = (float(sp.diff(h, T, n).subs(T, t)) for n in (1, 2, 3))
    if abs(d1) < ZERO_TOL:
        raise DegenerateJet(f"h'({t}) = 0, Schwarzian undefined")
    return d3 / d1 - 1.5 * (d2 / d1) ** 2


def schwarzian_expr(h: sp.Expr, var: sp.Symbol = T) -> sp.Expr:
    d1, d2, d3 = (sp.diff(h, var, n) for n in (1, 2, 3))
    return d3 / d1 - sp.Rational(3, 2) * (d2 / d1) ** 2


@dataclass(frozen=True)
class GaugeMap:
    """R¹* = f(R¹), R²* = g(R²); f, g 是关于 t 的 sympy 表达式"""
    f: sp.Expr = T
    g: sp.Expr = T

    def __post_init__(self):
        object.__setattr__(self, "f", _parse(self.f))
        object.__setattr__(self, "g", _parse(self.g))

    @classmethod
    def identity(cls) -> "GaugeMap":
        return cls(T, T)

    def compose(self, inner: "GaugeMap") -> "GaugeMap":
        """self ∘ inner"""
        return GaugeMap(self.f.subs(T, inner.f), self.g.subs(T, inner.g))

    def __matmul__(self, inner: "GaugeMap") -> "GaugeMap":
        return self.compose(inner)

    def check(self, domain: Rect, samples: int = 101) -> None:
        """f′ > 0 与 g′ > 0 在矩形上逐点检查"""
        for expr, lo, hi, label in ((self.f, domain.r1min, domain.r1max, "f"),
                                    (self.g, domain.r2min, domain.r2max, "g")):
            slope = sp.lambdify(T, sp.diff(expr, T), "numpy")
            values = np.broadcast_to(np.asarray(slope(np.linspace(lo, hi, samples)), dtype=float), (samples,))
            if np.any(values <= ZERO_TOL):
                raise DegenerateJet(f"{label}' is not positive on [{lo}, {hi}]")


def apply_gauge(P: PotentialField, G: GaugeMap) -> AnalyticField:
    """规范变换 p* = p g′/(f′)², q* = q f′/(g′)², V*(f′)² = V + S(f), W*(g′)² = W + S(g)

    Raises:
        DegenerateJet: f′ 或 g′ 在定义域上不为正
    """
    if not isinstance(P, AnalyticField):
        raise TypeError("gauge transformations need a closed-form field")
    G.check(P.domain)
    c1, c2 = P.charts[0].expr, P.charts[1].expr
    f1 = sp.diff(G.f, T).subs(T, c1)
    g1 = sp.diff(G.g, T).subs(T, c2)
    sf = schwarzian_expr(G.f).subs(T, c1)
    sg = schwarzian_expr(G.g).subs(T, c2)
    first, second, third, fourth = P.names
    exprs = {
        first: P.exprs[first] * g1 / f1 ** 2,
        second: P.exprs[second] * f1 / g1 ** 2,
        third: (P.exprs[third] + sf) / f1 ** 2,
        fourth: (P.exprs[fourth] + sg) / g1 ** 2,
    }
    charts = (G.f.subs(T, c1), G.g.subs(T, c2))
    logger.debug(f"Applied gauge f={G.f}, g={G.g}")
    return AnalyticField(exprs, P.base_domain, canal=P.canal, aux=P.aux, charts=charts, names=P.names)


def invariant_forms(P: PotentialField, point: Sequence[float], direction: Sequence[float]) -> Tuple[float, float]:
    """不变度量 −pq dR¹dR² 与三次形式 p(dR¹)³ − q(dR²)³ 在给定方向上的值"""
    r1, r2 = point
    d1, d2 = direction
    first, second = P.names[0], P.names[1]
    p = float(P.jet(first, r1, r2))
    q = float(P.jet(second, r1, r2))
    return -p * q * d1 * d2, p * d1 ** 3 - q * d2 ** 3


def pullback_direction(G: GaugeMap, point: Sequence[float], direction: Sequence[float]) -> Tuple[float, float]:
    """方向 (dR¹, dR²) 在 R* = (f, g) 下的像"""
    r1, r2 = point
    f1 = float(sp.diff(G.f, T).subs(T, r1))
    g1 = float(sp.diff(G.g, T).subs(T, r2))
    return f1 * direction[0], g1 * direction[1]


# ---------------------------------------------------------------------------
# 显式族


@dataclass
class C0Params:
    """c = 0 族: ψᵢ″ = αψᵢ² + ρᵢψᵢ + sᵢ"""
    eps0: float = 0.3
    eps1: float = 0.2
    eps2: float = -0.1
    alpha: float = 1.0
    rho1: float = 0.0
    rho2: float = 0.0
    s1: float = 0.5
    s2: float = -0.3
    psi1_init: Tuple[float, float] = (0.0, 1.0)
    psi2_init: Tuple[float, float] = (0.0, 1.0)
    domain: Rect = field(default_factory=lambda: Rect(0.0, 1.0, 0.0, 1.0))
    step: float = 1e-3
    bound: float = 1e6


@dataclass
class C1Params:
    """c = 1 族: f₁(R¹), f₂(R²) 为关于 t 的表达式"""
    f1: Union[str, sp.Expr] = "4*t**3 - 4*t"
    f2: Union[str, sp.Expr] = "-(4*t**3 - 4*t)"
    eps0: float = 0.1
    eps1: float = 0.2
    eps2: float = 0.3
    domain: Rect = field(default_factory=lambda: Rect(-0.8, -0.4, 0.4, 0.8))


@dataclass
class CanalParams:
    """均匀磁场中的 Landau 管道面: p = 2MR¹, q = 0"""
    M: float = 1.0
    lam: float = 0.5
    k: float = 1.0
    domain: Rect = field(default_factory=lambda: Rect(0.5, 1.5, 0.0, 1.0))


FamilyParams = Union[C0Params, C1Params, CanalParams]


def ode_reduction(alpha: float, rho: float, s: float, max_order: int = 8) -> Callable:
    """ψ″ = αψ² + ρψ + s 的高阶导数, 用 (ψ, ψ′) 表示"""
    y, dy = sp.symbols("y dy", real=True)
    rhs = alpha * y ** 2 + rho * y + s
    chain = {2: rhs}
    for order in range(3, max_order + 1):
        prev = chain[order - 1]
        chain[order] = sp.expand(sp.diff(prev, y) * dy + sp.diff(prev, dy) * rhs)
    compiled = {order: sp.lambdify((y, dy), expr, "numpy") for order, expr in chain.items()}

    def reduce(order, values, slopes, t):
        if order not in compiled:
            raise ValueError(f"derivative order {order} exceeds {max_order}")
        return np.broadcast_to(np.asarray(compiled[order](values, slopes), dtype=float), np.shape(values)).copy()

    return reduce


def c0_jets(params: C0Params, pad: float = 0.1) -> Tuple[OdeJet, OdeJet]:
    """c = 0 族的 ψ₁(R¹), ψ₂(R²) 表格解"""
    d = params.domain
    jets = []
    for index, (rho, s, init, lo, hi) in enumerate(
            ((params.rho1, params.s1, params.psi1_init, d.r1min, d.r1max),
             (params.rho2, params.s2, params.psi2_init, d.r2min, d.r2max)), start=1):
        rhs = (lambda y, dy, t, rho=rho, s=s: params.alpha * y ** 2 + rho * y + s)
        jets.append(OdeJet(rhs, 0.0, init[0], init[1], lo - pad, hi + pad, step=params.step,
                           bound=params.bound, reduce=ode_reduction(params.alpha, rho, s),
                           name=f"psi{index}"))
    return jets[0], jets[1]


def make_c0_family(params: C0Params) -> AnalyticField:
    """c = 0 族: p = ψ₁′(R¹), q = −ψ₂′(R²)

    V = ε₁ + ε₀ψ₁ − ψ₂ψ₁″ − ½ρ₂ψ₁², W = ε₂ + ε₀ψ₂ − ψ₁ψ₂″ − ½ρ₁ψ₂²

    Raises:
        OdeBlowUp: ψᵢ 超出设定界限
    """
    jet1, jet2 = c0_jets(params)
    psi1 = sp.Function("psi1")(R1)
    psi2 = sp.Function("psi2")(R2)
    exprs = {
        "p": sp.diff(psi1, R1),
        "q": -sp.diff(psi2, R2),
        "V": params.eps1 + params.eps0 * psi1 - psi2 * sp.diff(psi1, R1, 2) - sp.Rational(1, 2) * params.rho2 * psi1 ** 2,
        "W": params.eps2 + params.eps0 * psi2 - psi1 * sp.diff(psi2, R2, 2) - sp.Rational(1, 2) * params.rho1 * psi2 ** 2,
    }
    logger.info(f"Built c=0 family on {params.domain}")
    return AnalyticField(exprs, params.domain, aux={"psi1": (R1, jet1), "psi2": (R2, jet2)})


def c1_functions(params: C1Params) -> Tuple[sp.Expr, sp.Expr]:
    """f₁(R1), f₂(R2) 的 sympy 表达式"""
    return _parse(params.f1).subs(T, R1), _parse(params.f2).subs(T, R2)


def check_c1_domain(params: C1Params, samples: int = 21) -> None:
    """f₁ > 0, f₂ > 0, R² > R¹ 在网格上逐点检查

    Raises:
        DomainViolation: 任意条件不满足
    """
    f1, f2 = c1_functions(params)
    g1, g2 = np.meshgrid(*params.domain.grid(samples, samples), indexing="ij")
    v1 = np.broadcast_to(np.asarray(sp.lambdify(R1, f1, "numpy")(g1), dtype=float), g1.shape)
    v2 = np.broadcast_to(np.asarray(sp.lambdify(R2, f2, "numpy")(g2), dtype=float), g2.shape)
    if np.any(v1 <= 0):
        raise DomainViolation(f"f1 <= 0 somewhere on {params.domain}")
    if np.any(v2 <= 0):
        raise DomainViolation(f"f2 <= 0 somewhere on {params.domain}")
    if np.any(g2 - g1 <= 0):
        raise DomainViolation(f"R2 <= R1 somewhere on {params.domain}")


def make_c1_family(params: C1Params) -> AnalyticField:
    """c = 1 族: p = √(f₂/f₁)/(R²−R¹), q = √(f₁/f₂)/(R¹−R²)

    Raises:
        DomainViolation: f₁ ≤ 0, f₂ ≤ 0 或 R² ≤ R¹
    """
    check_c1_domain(params)
    f1, f2 = c1_functions(params)
    D = R2 - R1
    p = sp.sqrt(f2 / f1) / D
    q = sp.sqrt(f1 / f2) / (R1 - R2)
    ln_p = sp.log(f2) / 2 - sp.log(f1) / 2 - sp.log(D)
    ln_q = sp.log(f1) / 2 - sp.log(f2) / 2 - sp.log(D)
    E = lambda s: params.eps0 + params.eps1 * s + params.eps2 * s ** 2  # noqa: E731
    V = sp.diff(ln_q, R1, 2) + sp.Rational(1, 2) * sp.diff(ln_q, R1) ** 2 - E(R1) / f1
    W = sp.diff(ln_p, R2, 2) + sp.Rational(1, 2) * sp.diff(ln_p, R2) ** 2 + E(R2) / f2
    logger.info(f"Built c=1 family f1={f1}, f2={f2} on {params.domain}")
    return AnalyticField({"p": p, "q": q, "V": V, "W": W}, params.domain)


def make_canal_landau(params: CanalParams) -> AnalyticField:
    """p = 2MR¹, q = 0, V = 2M²(R¹)² + 2k² − 4λ, W = −2k²"""
    if params.M <= 0:
        raise DomainViolation(f"magnetic strength must be positive, got {params.M}")
    M, k, lam = params.M, params.k, params.lam
    exprs = {
        "p": 2 * M * R1,
        "q": sp.Integer(0),
        "V": 2 * M ** 2 * R1 ** 2 + 2 * k ** 2 - 4 * lam,
        "W": sp.Float(-2 * k ** 2),
    }
    return AnalyticField(exprs, params.domain, canal=True)


def make_family(params: FamilyParams) -> AnalyticField:
    if isinstance(params, C0Params):
        return make_c0_family(params)
    if isinstance(params, C1Params):
        return make_c1_family(params)
    if isinstance(params, CanalParams):
        return make_canal_landau(params)
    raise TypeError(f"unknown family parameters {type(params).__name__}")


def perturbed(P: AnalyticField, name: str, delta: Union[str, sp.Expr]) -> AnalyticField:
    """在某个分量上加一个表达式 (用于构造不相容的场)"""
    if isinstance(delta, str):
        delta = sp.sympify(delta, locals={"R1": R1, "R2": R2})
    exprs = dict(P.exprs)
    exprs[name] = exprs[name] + delta
    charts = (P.charts[0].expr, P.charts[1].expr)
    return AnalyticField(exprs, P.base_domain, canal=P.canal, aux=P.aux, charts=charts, names=P.names)
