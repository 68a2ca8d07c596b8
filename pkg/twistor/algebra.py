"""
C⁴ 与 Λ²(C⁴) 上的伪埃尔米特线性代数

存储顺序固定为:
    C⁴ 向量      (a⁰, a¹, a², a³)
    Λ²(C⁴) 元素  六球坐标 (y⁰, y¹, y², y³, y⁴, y⁵)

所有函数都对前导维度向量化, 最后一维是分量, 因此既可以传单个向量,
也可以传整张网格 (..., 4) / (..., 6)。
"""
import numpy as np

# 判定 Bivector6 为实向量的绝对容差
EPS_REAL = 1e-10

# (a, b) = −a⁰b̄³ + a¹b̄² + a²b̄¹ − a³b̄⁰ 的 Gram 矩阵, 同时也是零标架的目标 Gram
GRAM_TARGET = np.array(
    [
        [0, 0, 0, -1],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [-1, 0, 0, 0],
    ],
    dtype=complex,
)

# Λ² 上的对角度量 diag(−1, 1, 1, 1, 1, −1), 签名 (4, 2)
HEX_SIGNS = np.array([-1.0, 1.0, 1.0, 1.0, 1.0, -1.0])

# y³, y⁴, y⁵ 带 1/(2i) 因子: conj(a∧b) = CONJ_FLIP · (ā∧b̄)
CONJ_FLIP = np.array([1.0, 1.0, 1.0, -1.0, -1.0, -1.0])


def herm_product4(a, b) -> np.ndarray:
    """C⁴ 上签名 (2, 2) 的伪埃尔米特内积

    Args:
        a: (..., 4) 复数组
        b: (..., 4) 复数组

    Returns:
        np.ndarray: 形状为 (...) 的复数
    """
    a = np.asarray(a, dtype=complex)
    b = np.conj(np.asarray(b, dtype=complex))
    return -a[..., 0] * b[..., 3] + a[..., 1] * b[..., 2] + a[..., 2] * b[..., 1] - a[..., 3] * b[..., 0]


def gram4(frame) -> np.ndarray:
    """以行向量给出的标架的 Gram 矩阵 G_ij = (F_i, F_j)"""
    F = np.asarray(frame, dtype=complex)
    return F @ GRAM_TARGET @ np.conj(np.swapaxes(F, -1, -2))


def det4(a, b, c, d) -> np.ndarray:
    """以 a, b, c, d 为行的 4×4 行列式"""
    return np.linalg.det(np.stack(np.broadcast_arrays(a, b, c, d), axis=-2).astype(complex))


def plucker_matrix(a, b) -> np.ndarray:
    """p_ij = aⁱbʲ − aʲbⁱ, 形状 (..., 4, 4)"""
    a = np.asarray(a)
    b = np.asarray(b)
    outer = a[..., :, None] * b[..., None, :]
    return outer - np.swapaxes(outer, -1, -2)


def wedge_to_hex(a, b) -> np.ndarray:
    """a∧b 的六球坐标

    Args:
        a: (..., 4) 复数组
        b: (..., 4) 复数组

    Returns:
        np.ndarray: (..., 6) 复数组 (y⁰..y⁵)
    """
    p = plucker_matrix(np.asarray(a, dtype=complex), np.asarray(b, dtype=complex))
    return np.stack(
        [
            (p[..., 0, 2] - p[..., 3, 1]) / 2,
            (p[..., 0, 2] + p[..., 3, 1]) / 2,
            (p[..., 0, 3] + p[..., 1, 2]) / 2,
            (p[..., 0, 3] - p[..., 1, 2]) / 2j,
            (p[..., 0, 1] - p[..., 2, 3]) / 2j,
            (p[..., 0, 1] + p[..., 2, 3]) / 2j,
        ],
        axis=-1,
    )


def herm_product6(x, y) -> np.ndarray:
    """Λ²(C⁴) 上的伪埃尔米特内积 −y⁰Ȳ⁰ + y¹Ȳ¹ + y²Ȳ² + y³Ȳ³ + y⁴Ȳ⁴ − y⁵Ȳ⁵"""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return np.sum(HEX_SIGNS * x * np.conj(y), axis=-1)


def complex_product6(x, y) -> np.ndarray:
    """Λ²(C⁴) 上的复双线性内积, 对可分解元素等于半个行列式"""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return np.sum(HEX_SIGNS * x * y, axis=-1)


def conj6(x) -> np.ndarray:
    """六球坐标的逐分量共轭"""
    return np.conj(np.asarray(x, dtype=complex))


def is_real(x, tol: float = EPS_REAL) -> bool:
    """所有虚部都不超过 tol 时返回 True"""
    return bool(np.all(np.abs(np.imag(x)) <= tol))


def lie_form(x, y) -> np.ndarray:
    """实六球向量上的 (4, 2) 型双线性形式"""
    return np.sum(HEX_SIGNS * np.asarray(x) * np.asarray(y), axis=-1)
