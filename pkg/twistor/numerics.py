"""
数值工具: 四阶中心差分, RK4 线性系统积分, 二阶 ODE 的插值解 (OdeJet)
"""
import logging
import math
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from twistor.errors import OdeBlowUp, StepFailure

logger = logging.getLogger(__name__)

# 四阶中心差分模板: 阶数 -> (系数, 半宽)
_STENCILS = {
    1: (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0, 2),
    2: (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0, 2),
    3: (np.array([1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0]) / 8.0, 3),
}


def _chunks(order: int) -> list:
    """把高阶导数拆成若干个 ≤3 阶的模板"""
    parts = []
    while order > 3:
        step = 2 if order == 4 else 3
        parts.append(step)
        order -= step
    if order:
        parts.append(order)
    return parts


def stencil_margin(order: int) -> int:
    """order 阶差分在每一侧丢失的节点数"""
    return sum(_STENCILS[o][1] for o in _chunks(order))


def _apply_stencil(values: np.ndarray, h: float, order: int, axis: int) -> np.ndarray:
    coeffs, half = _STENCILS[order]
    v = np.moveaxis(np.asarray(values), axis, 0)
    n = v.shape[0]
    out = np.full(v.shape, np.nan, dtype=np.result_type(v.dtype, float))
    if n > 2 * half:
        acc = sum(c * v[j:n - 2 * half + j] for j, c in enumerate(coeffs) if c != 0.0)
        out[half:n - half] = acc / h ** order
    return np.moveaxis(out, 0, axis)


def central_diff(values, h: float, order: int = 1, axis: int = 0) -> np.ndarray:
    """沿 axis 的四阶中心差分

    结果与输入同形状, 模板无法覆盖的边缘节点填充 NaN。

    Args:
        values: 网格上的数组 (实数或复数)
        h: 网格步长
        order: 导数阶数, 0 表示原样返回
        axis: 求导的轴

    Returns:
        np.ndarray: 导数数组
    """
    out = np.asarray(values)
    if order == 0:
        return out.astype(np.result_type(out.dtype, float))
    for part in _chunks(order):
        out = _apply_stencil(out, h, part, axis)
    return out


def crop(values: np.ndarray, margin: int, axes=(0, 1)) -> np.ndarray:
    """在指定轴两侧去掉 margin 个节点"""
    if margin == 0:
        return values
    index = [slice(None)] * np.ndim(values)
    for axis in axes:
        index[axis] = slice(margin, -margin)
    return values[tuple(index)]


def rk4_linear(coeff: Callable[[float], np.ndarray], y0: np.ndarray, t0: float, t1: float,
               n_steps: int) -> np.ndarray:
    """定步长 RK4 积分 dY/dt = A(t) Y

    Args:
        coeff: 返回 (..., n, n) 系数矩阵的函数
        y0: 初值 (..., n, m)
        t0: 起点
        t1: 终点
        n_steps: 步数

    Returns:
        np.ndarray: t1 处的解
    """
    y = np.array(y0, dtype=complex)
    if n_steps == 0 or t1 == t0:
        return y
    h = (t1 - t0) / n_steps
    for j in range(n_steps):
        t = t0 + j * h
        a_mid = coeff(t + h / 2)
        k1 = h * (coeff(t) @ y)
        k2 = h * (a_mid @ (y + k1 / 2))
        k3 = h * (a_mid @ (y + k2 / 2))
        k4 = h * (coeff(t + h) @ (y + k3))
        y = y + (k1 + 2 * k2 + 2 * k3 + k4) / 6
    if not np.all(np.isfinite(y)):
        raise StepFailure(f"non-finite state after {n_steps} RK4 steps on [{t0}, {t1}]")
    return y


def steps_for(length: float, h: float) -> int:
    """长度为 length 的区间用不超过 h 的步长所需的步数"""
    return int(math.ceil(abs(length) / h - 1e-9)) if length else 0


class OdeJet:
    """二阶 ODE ψ'' = rhs(ψ, ψ', t) 在区间上的 RK4 表格解

    值和一阶导数由三次 Hermite 样条给出, 更高阶导数通过 reduce
    用方程本身降阶计算 (例如 ψ''' = ∂rhs/∂ψ · ψ' + ...)。
    """

    def __init__(self, rhs: Callable, t0: float, y0: float, dy0: float, lo: float, hi: float,
                 step: float = 1e-3, bound: float = 1e12,
                 reduce: Optional[Callable[[int, np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None,
                 name: str = "psi"):
        self.name = name
        self.rhs = rhs
        self.reduce = reduce
        self.lo = min(lo, t0)
        self.hi = max(hi, t0)
        t_right, y_right, dy_right = self._march(t0, y0, dy0, self.hi, step, bound)
        t_left, y_left, dy_left = self._march(t0, y0, dy0, self.lo, -step, bound)
        self.t = np.concatenate([t_left[::-1], t_right[1:]])
        self.y = np.concatenate([y_left[::-1], y_right[1:]])
        self.dy = np.concatenate([dy_left[::-1], dy_right[1:]])
        self.ddy = np.asarray(rhs(self.y, self.dy, self.t), dtype=float)
        self._value = CubicHermiteSpline(self.t, self.y, self.dy)
        self._slope = CubicHermiteSpline(self.t, self.dy, self.ddy)
        logger.debug(f"Tabulated {name} on [{self.lo}, {self.hi}] with {len(self.t)} nodes")

    def _march(self, t0, y0, dy0, t_end, step, bound):
        n = steps_for(t_end - t0, abs(step))
        ts = [t0]
        ys = [y0]
        dys = [dy0]
        if n == 0:
            return np.array(ts), np.array(ys, dtype=float), np.array(dys, dtype=float)
        h = (t_end - t0) / n
        t, y, dy = t0, float(y0), float(dy0)

        def f(t_, y_, dy_):
            return dy_, float(self.rhs(y_, dy_, t_))

        for j in range(n):
            k1 = f(t, y, dy)
            k2 = f(t + h / 2, y + h * k1[0] / 2, dy + h * k1[1] / 2)
            k3 = f(t + h / 2, y + h * k2[0] / 2, dy + h * k2[1] / 2)
            k4 = f(t + h, y + h * k3[0], dy + h * k3[1])
            y = y + h * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
            dy = dy + h * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
            t = t0 + (j + 1) * h
            if not (abs(y) <= bound and abs(dy) <= bound):
                raise OdeBlowUp(f"{self.name} exceeded bound {bound:g} at t={t:.6g}")
            ts.append(t)
            ys.append(y)
            dys.append(dy)
        return np.array(ts), np.array(ys), np.array(dys)

    def __call__(self, t, order: int = 0) -> np.ndarray:
        """ψ 的 order 阶导数"""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.lo - 1e-12) or np.any(t > self.hi + 1e-12):
            raise OdeBlowUp(f"{self.name} evaluated outside tabulated range [{self.lo}, {self.hi}]")
        if order == 0:
            return self._value(t)
        if order == 1:
            return self._slope(t)
        y = self._value(t)
        dy = self._slope(t)
        if order == 2:
            return np.asarray(self.rhs(y, dy, t), dtype=float)
        if self.reduce is None:
            raise ValueError(f"{self.name}: no reduction rule for derivative order {order}")
        return self.reduce(order, y, dy, t)
