"""内置的曲率线参数曲面, 配置文件中按名字选用"""
import logging
from typing import Callable, Dict

import sympy as sp

from twistor.euclid import EuclidSurface
from twistor.potentials import R1, R2, Rect

logger = logging.getLogger(__name__)


def torus(A: float = 2.0, B: float = 0.5, domain: Rect = None) -> EuclidSurface:
    """(A + B cosθ)(cosφ, sinφ) + B sinθ e_z, R¹ = θ, R² = φ"""
    domain = domain or Rect(-1.0, 1.0, 0.0, 1.5)
    rho = A + B * sp.cos(R1)
    return EuclidSurface("torus", [rho * sp.cos(R2), rho * sp.sin(R2), B * sp.sin(R1)], domain)


def ellipsoid(a2: float = 9.0, b2: float = 4.0, c2: float = 1.0, domain: Rect = None) -> EuclidSurface:
    """三轴椭球在共焦坐标中的第一卦限片, c² < R¹ < b² < R² < a²"""
    domain = domain or Rect(1.5, 3.0, 5.0, 8.0)
    u, v = R1, R2
    x = sp.sqrt(a2 * (a2 - u) * (a2 - v) / ((a2 - b2) * (a2 - c2)))
    y = sp.sqrt(b2 * (b2 - u) * (v - b2) / ((a2 - b2) * (b2 - c2)))
    z = sp.sqrt(c2 * (u - c2) * (v - c2) / ((a2 - c2) * (b2 - c2)))
    return EuclidSurface("ellipsoid", [x, y, z], domain)


def dupin_cyclide(a: float = 2.0, b: float = 1.5, d: float = 0.8, domain: Rect = None) -> EuclidSurface:
    """c² = a² − b² 的 Dupin 环面, 两族曲率线都是圆"""
    domain = domain or Rect(-1.0, 1.0, -1.0, 1.0)
    c = sp.sqrt(sp.Float(a) ** 2 - sp.Float(b) ** 2)
    u, v = R1, R2
    den = a - c * sp.cos(u) * sp.cos(v)
    x = (d * (c - a * sp.cos(u) * sp.cos(v)) + b ** 2 * sp.cos(u)) / den
    y = b * sp.sin(u) * (a - d * sp.cos(v)) / den
    z = b * sp.sin(v) * (c * sp.cos(u) - d) / den
    return EuclidSurface("dupin_cyclide", [x, y, z], domain)


def cylinder(rho: float = 1.0, domain: Rect = None) -> EuclidSurface:
    """圆柱 (ρcosθ, ρsinθ, z), 第二个主曲率半径为无穷"""
    domain = domain or Rect(0.0, 1.5, -1.0, 1.0)
    return EuclidSurface("cylinder", [rho * sp.cos(R1), rho * sp.sin(R1), R2], domain)


CATALOG: Dict[str, Callable[..., EuclidSurface]] = {
    "torus": torus,
    "ellipsoid": ellipsoid,
    "dupin_cyclide": dupin_cyclide,
    "cylinder": cylinder,
}


def get_surface(name: str, **params) -> EuclidSurface:
    """按名字取曲面

    Raises:
        KeyError: 未知的曲面名
    """
    try:
        factory = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown surface '{name}'; available: {', '.join(sorted(CATALOG))}") from None
    logger.debug(f"Building catalog surface {name} with {params}")
    return factory(**params)
