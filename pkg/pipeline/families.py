"""配置中的族描述 -> twistor 参数对象"""
import logging
from typing import Optional, Union

from pipeline.config import C0Family, C1Family, CanalFamily, DomainModel, RunConfig, SurfaceFamily
from twistor.catalog import get_surface
from twistor.euclid import EuclidSurface
from twistor.potentials import C0Params, C1Params, CanalParams, Rect
from twistor.wilczynski import ProjectiveParams

logger = logging.getLogger(__name__)

# 族缺省时每个流水线使用的描述
DEFAULT_FAMILY = {
    "check-gc": C0Family(kind="c0"),
    "integrate": C0Family(kind="c0"),
    "surface": C0Family(kind="c0"),
    "landau": CanalFamily(kind="canal"),
    "euclid-roundtrip": SurfaceFamily(kind="surface"),
    "wilczynski": C0Family(kind="projective"),
}

LieParams = Union[C0Params, C1Params, CanalParams, ProjectiveParams]


def family_model(config: RunConfig, pipeline: str):
    return config.family if config.family is not None else DEFAULT_FAMILY[pipeline]


def to_rect(domain: Optional[DomainModel]) -> Optional[Rect]:
    if domain is None:
        return None
    return Rect(domain.r1min, domain.r1max, domain.r2min, domain.r2max)


def family_params(config: RunConfig, pipeline: str) -> LieParams:
    """
    把族描述换成 twistor 的参数对象, 并应用配置中的定义域

    Raises:
        TypeError: 族描述不能用于势函数族 (例如目录曲面)
    """
    model = family_model(config, pipeline)
    domain = to_rect(config.domain)
    extra = {"domain": domain} if domain is not None else {}
    if isinstance(model, C0Family):
        fields = model.model_dump(exclude={"kind"})
        cls = ProjectiveParams if model.kind == "projective" else C0Params
        return cls(**fields, step=config.step, **extra)
    if isinstance(model, C1Family):
        return C1Params(**model.model_dump(exclude={"kind"}), **extra)
    if isinstance(model, CanalFamily):
        return CanalParams(**model.model_dump(exclude={"kind"}), **extra)
    raise TypeError(f"family kind '{model.kind}' has no potentials")


def catalog_surface(config: RunConfig, pipeline: str) -> EuclidSurface:
    model = family_model(config, pipeline)
    if not isinstance(model, SurfaceFamily):
        raise TypeError(f"family kind '{model.kind}' is not a catalog surface")
    domain = to_rect(config.domain)
    extra = {"domain": domain} if domain is not None else {}
    return get_surface(model.name, **model.params, **extra)
