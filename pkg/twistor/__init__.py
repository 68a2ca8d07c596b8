from .errors import TwistorError
from .potentials import (AnalyticField, C0Params, C1Params, CanalParams, GaugeMap, PotentialField, Rect,
                         SampledField, make_family)
from .frame import FrameGrid, FrameState, integrate_frame, integrate_grid
from .surface import SurfaceGrid, surface_grid
from .catalog import get_surface
from .wilczynski import ProjectiveParams, make_projective_family

__all__ = [
    "TwistorError",
    "AnalyticField",
    "C0Params",
    "C1Params",
    "CanalParams",
    "GaugeMap",
    "PotentialField",
    "Rect",
    "SampledField",
    "make_family",
    "FrameGrid",
    "FrameState",
    "integrate_frame",
    "integrate_grid",
    "SurfaceGrid",
    "surface_grid",
    "get_surface",
    "ProjectiveParams",
    "make_projective_family",
]
