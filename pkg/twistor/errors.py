"""twistor 包的异常定义"""


class TwistorError(Exception):
    """所有数值几何错误的基类"""


class StencilOutOfDomain(TwistorError):
    """差分模板或求值点超出定义域"""


class ZeroPotential(TwistorError, ValueError):
    """p (或需要时的 q, β, γ) 在求值点为零"""


class DegenerateJet(TwistorError, ValueError):
    """函数一阶导数为零 (Schwarzian 或规范变换无定义)"""


class OdeBlowUp(TwistorError):
    """ODE 解在到达区间端点之前超出设定界限"""


class DomainViolation(TwistorError, ValueError):
    """参数或网格违反了定义域约束"""


class StepFailure(TwistorError):
    """积分过程中出现非有限值"""


class InvalidFrame(TwistorError, ValueError):
    """初始标架不满足 Gram / 行列式约束"""


class PlaneAtInfinity(TwistorError):
    """y⁰+y¹ 为零, 球退化为平面"""


class UmbilicDegeneracy(TwistorError):
    """两个曲率球重合, 无法求包络"""


class UmbilicPoint(TwistorError):
    """曲面在该点为脐点"""


class DegenerateParametrization(TwistorError, ValueError):
    """∂₁r × ∂₂r 为零"""


class DegenerateThirdForm(TwistorError):
    """第三基本形式的 G₁₁ 或 G₂₂ 数值上不为正"""


class MetricDegenerate(TwistorError, ValueError):
    """度量在该点不为正"""


class PoleOnGrid(TwistorError):
    """剖面曲线的分母在网格点上为零"""

    def __init__(self, message: str, index: int = -1):
        super().__init__(message)
        self.index = index


class DependentVectors(TwistorError, ValueError):
    """Plücker 嵌入的两个向量线性相关"""


class IncompatibleField(TwistorError, ValueError):
    """势函数不满足 Gauss–Codazzi 相容方程, 不允许积分标架"""
