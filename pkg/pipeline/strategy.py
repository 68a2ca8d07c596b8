"""
流水线策略: 每个流水线一个类, 由 create_pipeline_strategy 按名字创建

阶段 (stage) 内抛出的 TwistorError 被记录到报告中, 不会中止整个运行;
出错阶段之后依赖其结果的检查在 close_pipeline 时记为 error。
"""
import logging
import time
from abc import ABC, abstractmethod
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from scipy.integrate import quad

from pipeline.config import LOWER_BOUND_CHECKS, PIPELINE_CHECKS, RunConfig
from pipeline.export import emit_mesh, write_csv
from pipeline.families import catalog_surface, family_params, to_rect
from pipeline.report import InvariantReport
from twistor.errors import TwistorError
from twistor.euclid import (complete_frame, dirac_residual, extract_potentials, frame_motion_residual,
                            frame_table_residual, invariant_metric, normalize_uv, normalized_products,
                            sampled_surface, surface_grid_data)
from twistor.frame import (FrameGrid, frame_table, frame_to_lie6, holonomy_defect, integrate_grid, lie6_residual,
                           lie6_table_residual, norm_relations, su22_tetrad)
from twistor.numerics import stencil_margin
from twistor.potentials import (C0Params, C1Params, CanalParams, GaugeMap, PotentialField, Rect, apply_gauge,
                                field_table, lie_gc_residual, make_family, perturbed, pullback_direction,
                                require_compatible, validate_field)
from twistor.spectral import (StackelData, StackelSymmetry, c0_operators, c1_operator, commutator_residual,
                              landau_basis, landau_gram_check, landau_operator_check, landau_profile_hex_check,
                              landau_revolution, landau_surface, landau_twistor, magnetic_identity_check,
                              random_bumps, rescale_frame_solution, stackel_curvature)
from twistor.surface import (curvature_spheres, lie_quadric_residual, surface_grid, surface_table, theorem1_check,
                             theorem2_check)
from twistor.wilczynski import (integrate_proj_grid, laplace_relations, make_projective_family, proj_focal_check,
                                proj_gauge_check, proj_gc2_residual, proj_gc_residual, proj_invariant_forms,
                                proj_lie6, proj_table, uapvbq_connection)

logger = logging.getLogger(__name__)

FRAME_HEADER = ["R1", "R2"] + [f"{vec}_{i}_{part}" for vec in ("psi", "psi1", "psi2", "eta")
                                for i in range(4) for part in ("re", "im")]
SURFACE_HEADER = ["R1", "R2", "x", "y", "z", "nx", "ny", "nz", "w1", "w2"]
# 负对照: V 加上 0.1·(R²)² 后场不再相容
PERTURBATION = "0.1*R2**2"
# 往返比较只在每边收缩 30% 后的内部矩形上进行
ROUNDTRIP_INSET = 0.3


class PipelineStrategy(ABC):
    """流水线策略接口

    Args:
        config: 运行配置
        report: 共享的报告
        out_dir: 产物目录
        context: 流水线之间共享的中间结果 (例如同一族的标架网格)
    """

    name: str = ""

    def __init__(self, config: RunConfig, report: InvariantReport, out_dir: Path,
                 context: Optional[Dict[str, Any]] = None):
        self.config = config
        self.report = report
        self.out_dir = Path(out_dir)
        self.context = context if context is not None else {}
        self.checks = [c for c in PIPELINE_CHECKS[self.name] if config.wants(c)]
        self.failed = False

    def run(self) -> None:
        """运行全部阶段, 然后补齐没有结果的检查"""
        logger.info(f"Running pipeline {self.name}")
        start = time.perf_counter()
        self.execute()
        self.report.timings[self.name] = time.perf_counter() - start
        self.report.close_pipeline(self.name, self.checks, {c: self.config.tolerance(c) for c in self.checks})

    @abstractmethod
    def execute(self) -> None:
        """按顺序执行各阶段"""

    @contextmanager
    def stage(self, name: str):
        """计时; 把 TwistorError 记入报告并置 failed"""
        start = time.perf_counter()
        try:
            yield
        except TwistorError as e:
            logger.error(f"Stage {self.name}/{name} failed: {e}", exc_info=True)
            self.report.add_error(self.name, name, e)
            self.failed = True
        finally:
            self.report.timings[f"{self.name}/{name}"] = time.perf_counter() - start

    def wants(self, check: str) -> bool:
        return check in self.checks

    def check(self, name: str, stage: str, residual: float, details: Optional[Dict[str, float]] = None) -> None:
        if self.wants(name):
            self.report.record(name, residual, self.config.tolerance(name), self.name, stage, details,
                               at_least=name in LOWER_BOUND_CHECKS)

    def skip(self, name: str, stage: str, reason: str) -> None:
        if self.wants(name):
            self.report.skip(name, self.config.tolerance(name), self.name, stage, reason)

    def meta(self, **values) -> None:
        self.report.meta.setdefault(self.name, {}).update(values)

    def artifact(self, filename: str) -> Path:
        self.report.artifacts.append(filename)
        return self.out_dir / filename

    def grid_axes(self, domain: Rect):
        n1, n2 = self.config.grid
        return domain.grid(n1, n2)

    def lie_field(self):
        """族参数与对应的势函数场, 同一次运行内共享"""
        params = family_params(self.config, self.name)
        key = ("field", repr(params))
        if key not in self.context:
            self.context[key] = (params, make_family(params))
        return self.context[key]

    def frame_grid(self, P: PotentialField) -> FrameGrid:
        """以 SU(2,2) 倾斜标架为初值的网格标架; 场不相容时抛出 IncompatibleField"""
        key = ("frames", id(P), self.config.grid, self.config.step)
        if key not in self.context:
            require_compatible(P)
            r1, r2 = self.grid_axes(P.domain)
            n1, n2 = len(r1), len(r2)
            init = su22_tetrad((float(r1[n1 // 2]), float(r2[n2 // 2])))
            self.context[key] = integrate_grid(P, r1, r2, init=init, step=self.config.step)
        return self.context[key]


def _worst(values: Dict[str, float]) -> float:
    return float(max(values.values())) if values else 0.0


def roundtrip_interior(difference: np.ndarray, s1: np.ndarray, s2: np.ndarray, r1: np.ndarray,
                       r2: np.ndarray, inset: float = ROUNDTRIP_INSET):
    """
    重建度量与原度量之差在内部区域上的最大值

    只比较落在原网格 (r1, r2) 每边收缩 inset 倍边长之后的矩形内的有限点。

    Returns:
        (float, int): 最大差值 (没有可比较的点时为 NaN) 与比较的点数
    """
    inner = Rect(float(r1[0]), float(r1[-1]), float(r2[0]), float(r2[-1])).inset(inset)
    g1, g2 = np.meshgrid(s1, s2, indexing="ij")
    mask = ((g1 >= inner.r1min) & (g1 <= inner.r1max) & (g2 >= inner.r2min) & (g2 <= inner.r2max)
            & np.isfinite(difference))
    if not np.any(mask):
        return float("nan"), 0
    return float(np.max(difference[mask])), int(np.sum(mask))


class CheckGcStrategy(PipelineStrategy):
    """Gauss–Codazzi 残差, Lie 相容方程与和乐缺陷"""

    name = "check-gc"

    def execute(self) -> None:
        with self.stage("family"):
            params, P = self.lie_field()
            d = P.domain
            self.meta(family=type(params).__name__, domain=[d.r1min, d.r1max, d.r2min, d.r2max])
        if self.failed:
            return
        n1, n2 = self.config.grid
        with self.stage("gauss_codazzi"):
            if self.wants("gauss_codazzi"):
                self.check("gauss_codazzi", "gauss_codazzi", validate_field(P, n1, n2))
        with self.stage("lie_gc"):
            if self.wants("lie_gc"):
                g1, g2 = np.meshgrid(*P.domain.grid(n1, n2), indexing="ij")
                res = lie_gc_residual(P, g1, g2)
                per_equation = {f"eq{i + 1}": float(np.nanmax(np.abs(r))) for i, r in enumerate(res)}
                self.check("lie_gc", "lie_gc", _worst(per_equation), per_equation)
        with self.stage("holonomy"):
            rect = P.domain.inset(0.25)
            if self.wants("holonomy"):
                self.check("holonomy", "holonomy", holonomy_defect(P, rect, step=self.config.step))
            if self.wants("holonomy_control"):
                broken = holonomy_defect(perturbed(P, P.names[2], PERTURBATION), rect, step=self.config.step)
                self.check("holonomy_control", "holonomy", broken, {"perturbation": 0.1})
        if self.config.export.csv:
            r1, r2 = self.grid_axes(P.domain)
            write_csv(self.artifact("potentials.csv"), ["R1", "R2", *P.names], field_table(P, r1, r2))


class IntegrateStrategy(PipelineStrategy):
    """标架网格, 二次积分关系, 六维标架, 以及 c = 0 / c = 1 的交换算子"""

    name = "integrate"

    def execute(self) -> None:
        with self.stage("frames"):
            params, P = self.lie_field()
            grid = self.frame_grid(P)
            self.meta(family=type(params).__name__, base_index=list(grid.base_index))
            self.check("frame_drift", "frames", max(grid.meta["gram_drift"], grid.meta["det_drift"]),
                       {"gram": grid.meta["gram_drift"], "det": grid.meta["det_drift"]})
        if self.failed:
            return
        with self.stage("norm_relations"):
            if self.wants("norm_relations"):
                relations = norm_relations(grid, P)
                self.check("norm_relations", "norm_relations", _worst(relations), relations)
        with self.stage("lie6"):
            if self.wants("lie6"):
                self.check("lie6", "lie6", lie6_residual(P, grid))
            if self.wants("lie6_table"):
                herm, cplx = lie6_table_residual(frame_to_lie6(grid))
                self.check("lie6_table", "lie6", max(herm, cplx), {"hermitian": herm, "bilinear": cplx})
        with self.stage("operators"):
            self._operators(params, grid)
        with self.stage("stackel"):
            if isinstance(params, C1Params):
                r1, r2 = grid.r1, grid.r2
                if self.wants("magnetic_identity"):
                    self.check("magnetic_identity", "stackel", magnetic_identity_check(params, r1, r2))
                if self.wants("curvature"):
                    g1, g2 = grid.mesh
                    K = stackel_curvature(params, g1, g2)
                    closed = StackelData(params).curvature_closed_form(g1, g2)
                    self.check("curvature", "stackel", float(np.max(np.abs(K - closed))),
                               {"K_min": float(np.min(K)), "K_max": float(np.max(K))})
            else:
                for name in ("magnetic_identity", "curvature"):
                    self.skip(name, "stackel", "only defined for the c=1 family")
        if self.config.export.csv:
            write_csv(self.artifact("frames.csv"), FRAME_HEADER, frame_table(grid))

    def _operators(self, params, grid: FrameGrid) -> None:
        r1, r2 = grid.r1, grid.r2
        psi = grid.row(0)
        if isinstance(params, C0Params):
            H, F, _, _ = c0_operators(params)
            u = psi
        elif isinstance(params, C1Params):
            H, F = c1_operator(params), StackelSymmetry(params)
            u = rescale_frame_solution(params, psi, r1, r2)
        else:
            for name in ("eigen_H", "eigen_F", "commutator"):
                self.skip(name, "operators", "canal fields are checked by the landau pipeline")
            return
        self.check("eigen_H", "operators", H.eigen_residual(u, r1, r2), {"eigenvalue": float(np.real(H.eigenvalue))})
        self.check("eigen_F", "operators", F.eigen_residual(u, r1, r2), {"eigenvalue": float(np.real(F.eigenvalue))})
        if self.wants("commutator"):
            bumps = random_bumps(r1, r2, self.config.landau.n_bumps, self.config.landau.seed)
            self.check("commutator", "operators", max(commutator_residual(H, F, b, r1, r2) for b in bumps))


class SurfaceStrategy(PipelineStrategy):
    """曲率球, 曲率球关系检查与包络重建"""

    name = "surface"

    def execute(self) -> None:
        with self.stage("frames"):
            params, P = self.lie_field()
            grid = self.frame_grid(P)
        if self.failed:
            return
        with self.stage("theorems"):
            if self.wants("theorem1"):
                report = theorem1_check(grid)
                self.check("theorem1", "theorems", _worst(report), report)
            if P.canal:
                self.check("theorem2", "theorems", theorem2_check(grid))
            else:
                self.skip("theorem2", "theorems", "only defined for canal fields")
            if self.wants("quadric"):
                U, V = curvature_spheres(grid)
                self.check("quadric", "theorems", max(lie_quadric_residual(U), lie_quadric_residual(V)))
        with self.stage("reconstruct"):
            surf = surface_grid(grid)
            self.meta(degenerate=surf.degenerate, valid_points=int(np.sum(surf.valid)))
            self.check("normal", "reconstruct", surf.normal_residual, {"degenerate": len(surf.degenerate)})
            if self.config.export.obj:
                emit_mesh(surf.r, surf.valid, self.artifact("surface.obj"))
            if self.config.export.csv:
                write_csv(self.artifact("surface.csv"), SURFACE_HEADER, surface_table(surf))


class LandauStrategy(PipelineStrategy):
    """均匀磁场的 Landau 管道面: 基本解, 扭量标架, 剖面与旋转面"""

    name = "landau"

    def execute(self) -> None:
        params: CanalParams = family_params(self.config, self.name)
        settings = self.config.landau
        M, lam, k = params.M, params.lam, params.k
        lowest = abs(lam / M - 0.5) < 1e-14
        closed = lowest if settings.closed_form is None else settings.closed_form
        ys = np.linspace(settings.y_min, settings.y_max, settings.samples)
        self.meta(M=M, lam=lam, k=k, closed_form=closed)
        with self.stage("basis"):
            basis = landau_basis(lam, closed_form=closed, M=M, step=self.config.step)
            Y = np.sqrt(M) * ys
            self.check("wronskian", "basis", float(np.max(np.abs(basis.wronskian_at(Y) - 1.0))),
                       {"initial": basis.wronskian})
            if lowest and self.wants("closed_form"):
                exact = landau_basis(lam, closed_form=True, M=M)
                numeric = landau_basis(lam, closed_form=False, M=M, step=self.config.step)
                diff = max(float(np.max(np.abs(exact.psi1(Y) - numeric.psi1(Y)))),
                           float(np.max(np.abs(exact.psi2(Y) - numeric.psi2(Y)))))
                self.check("closed_form", "basis", diff)
            else:
                self.skip("closed_form", "basis", "closed form exists only for the lowest level")
        if self.failed:
            return
        with self.stage("twistor"):
            if self.wants("landau_gram"):
                xs, yg = self._plane()
                gx, gy = np.meshgrid(xs, yg, indexing="ij")
                gram = landau_gram_check(landau_twistor(basis, k, gx, gy))
                self.check("landau_gram", "twistor", _worst(gram), gram)
        with self.stage("profile"):
            profile = landau_surface(basis, k, ys)
            origin = landau_surface(basis, k, [0.0])
            z0, R0 = float(origin.z[0]), float(origin.R[0])
            self.meta(z0=z0, R0=R0, poles=profile.poles)
            if self.wants("landau_profile"):
                kk = k / np.sqrt(M)
                if lowest:
                    integral = quad(lambda s: np.exp(s * s), 0.0, kk, epsabs=1e-14, epsrel=1e-14)[0]
                else:
                    integral = float(basis.psi2(kk) / basis.psi1(kk))
                expected_z = -kk / integral - integral / (4 * kk)
                expected_R = -kk / integral + integral / (4 * kk)
                self.check("landau_profile", "profile", max(abs(z0 - expected_z), abs(R0 - expected_R)),
                           {"z0": z0, "R0": R0, "expected_z0": expected_z, "expected_R0": expected_R})
            if self.wants("landau_quadric"):
                hex_report = landau_profile_hex_check(basis, k, np.linspace(settings.y_min, settings.y_max, 100))
                self.check("landau_quadric", "profile", hex_report["quadric"], hex_report)
            if self.config.export.csv:
                rows = np.column_stack([profile.y, profile.z, profile.R, profile.dz, profile.dR,
                                        profile.valid.astype(float)])
                write_csv(self.artifact("profile.csv"), ["y", "z", "R", "dz", "dR", "valid"], rows)
            if self.config.export.obj:
                _, _, mesh = landau_revolution(profile, settings.n_theta)
                emit_mesh(mesh, np.repeat(profile.valid[:, None], settings.n_theta, axis=1),
                          self.artifact("revolution.obj"))
        with self.stage("operators"):
            if any(self.wants(name) for name in ("landau_H", "landau_F", "landau_commutator")):
                xs, yg = self._plane()
                ops = landau_operator_check(M, k, lam, xs, yg, closed_form=closed, n_bumps=settings.n_bumps,
                                            seed=settings.seed)
                self.check("landau_H", "operators", ops["H_eigen"])
                self.check("landau_F", "operators", ops["F_eigen"])
                self.check("landau_commutator", "operators", ops["commutator"])

    def _plane(self):
        """(x, y) 网格; 缺省 x ∈ [0, 1], y ∈ [−1, 1]"""
        domain = to_rect(self.config.domain) or Rect(0.0, 1.0, -1.0, 1.0)
        return self.grid_axes(domain)


class EuclidRoundtripStrategy(PipelineStrategy):
    """欧氏曲面 -> Lie 标架 -> 势函数 -> 积分 -> 重建, 比较不变度量 −pq"""

    name = "euclid-roundtrip"

    def execute(self) -> None:
        S = catalog_surface(self.config, self.name)
        r1, r2 = self.grid_axes(S.domain)
        self.meta(surface=S.name)
        with self.stage("lift"):
            data = surface_grid_data(S, r1, r2)
            norm = normalize_uv(data)
            self.check("dirac", "lift", dirac_residual(norm))
            if self.wants("products"):
                products = normalized_products(norm)
                self.check("products", "lift", _worst(products), products)
        if self.failed:
            return
        with self.stage("frame"):
            frame = complete_frame(norm)
            self.check("frame_table", "frame", frame_table_residual(frame))
            self.check("frame_motion", "frame", frame_motion_residual(frame))
        if self.failed:
            return
        with self.stage("extract"):
            field = extract_potentials(frame)
            self.check("extracted_gc", "extract", validate_field(field))
            if self.config.export.csv:
                write_csv(self.artifact("extracted.csv"), ["R1", "R2", *field.names],
                          field_table(field, field.r1, field.r2))
        if self.failed:
            return
        with self.stage("roundtrip"):
            self._roundtrip(field, norm)

    def _roundtrip(self, field, norm) -> None:
        require_compatible(field, tol=self.config.tolerance("extracted_gc"))
        m = stencil_margin(1)
        s1, s2 = field.r1[m:len(field.r1) - m], field.r2[m:len(field.r2) - m]
        n1, n2 = len(s1), len(s2)
        init = su22_tetrad((float(s1[n1 // 2]), float(s2[n2 // 2])))
        grid = integrate_grid(field, s1, s2, init=init, step=self.config.step)
        surf = surface_grid(grid)
        rebuilt = normalize_uv(sampled_surface(s1, s2, surf.r, surf.n, surf.w1, surf.w2))
        original = invariant_metric(norm)
        i1 = np.searchsorted(norm.data.r1, s1 - 1e-12)
        i2 = np.searchsorted(norm.data.r2, s2 - 1e-12)
        difference = np.abs(invariant_metric(rebuilt) - original[np.ix_(i1, i2)])
        residual, compared = roundtrip_interior(difference, s1, s2, norm.data.r1, norm.data.r2)
        finite = np.isfinite(difference)
        overall = float(np.max(difference[finite])) if np.any(finite) else float("nan")
        self.check("roundtrip_metric", "roundtrip", residual,
                   {"compared_points": compared, "whole_grid": overall, "degenerate": len(surf.degenerate)})
        if self.config.export.obj:
            emit_mesh(surf.r, surf.valid, self.artifact("roundtrip.obj"))
        if self.config.export.csv:
            write_csv(self.artifact("roundtrip.csv"), SURFACE_HEADER, surface_table(surf))


class WilczynskiStrategy(PipelineStrategy):
    """实射影对应物: 相容条件, Wilczynski 标架, (3, 3) 六维标架与 Laplace 关系"""

    name = "wilczynski"

    def execute(self) -> None:
        with self.stage("family"):
            params = family_params(self.config, self.name)
            P = make_projective_family(params)
            x, y = self.grid_axes(P.domain)
            gx, gy = np.meshgrid(x, y, indexing="ij")
            self.check("proj_gc", "family", float(np.max(np.abs(proj_gc_residual(P, gx, gy)))))
            self.check("proj_gc2", "family", float(np.nanmax(np.abs(proj_gc2_residual(P, gx, gy)))))
        if self.failed:
            return
        with self.stage("frames"):
            grid = integrate_proj_grid(P, x, y, step=self.config.step)
            self.meta(det_drift=grid.meta["det_drift"])
        if self.failed:
            return
        with self.stage("six_frame"):
            residuals = uapvbq_connection(P, grid)
            self.check("uapvbq", "six_frame", residuals["system"])
            self.check("proj_table", "six_frame", residuals["table"], proj_table(proj_lie6(grid)))
            if self.wants("laplace"):
                relations = laplace_relations(P, grid)
                self.check("laplace", "six_frame", _worst(relations), relations)
            if self.wants("proj_focal"):
                focal = proj_focal_check(grid)
                self.check("proj_focal", "six_frame", _worst(focal), focal)
        with self.stage("gauge"):
            if self.config.gauge is None:
                self.skip("proj_gauge", "gauge", "no gauge map configured")
            elif self.wants("proj_gauge"):
                G = GaugeMap(self.config.gauge.f, self.config.gauge.g)
                self.check("proj_gauge", "gauge", proj_gauge_check(P, G, x, y, step=self.config.step),
                           self._form_drift(P, G))
        if self.config.export.csv:
            write_csv(self.artifact("proj_frames.csv"), ["x", "y"] + [f"{vec}_{i}" for vec in ("r", "r1", "r2", "eta")
                                                                      for i in range(4)],
                      np.column_stack([grid.mesh[0].ravel(), grid.mesh[1].ravel(),
                                       grid.frames.reshape(-1, 16)]))

    @staticmethod
    def _form_drift(P, G: GaugeMap) -> Dict[str, float]:
        """定义域中心处 2βγdxdy 的变化, 以及 βdx³ + γdy³ 相对共形因子 f′g′ 的偏差"""
        Q = apply_gauge(P, G)
        d = P.domain
        point = (0.5 * (d.r1min + d.r1max), 0.5 * (d.r2min + d.r2max))
        direction = (0.3, 0.7)
        image = (Q.charts[0].image(point[0]), Q.charts[1].image(point[1]))
        fp, gp = pullback_direction(G, point, (1.0, 1.0))
        before = proj_invariant_forms(P, point, direction)
        after = proj_invariant_forms(Q, image, pullback_direction(G, point, direction))
        return {"metric": abs(before[0] - after[0]), "cubic": abs(after[1] - fp * gp * before[1])}


STRATEGIES = {
    cls.name: cls
    for cls in (CheckGcStrategy, IntegrateStrategy, SurfaceStrategy, LandauStrategy, EuclidRoundtripStrategy,
                WilczynskiStrategy)
}


def create_pipeline_strategy(name: str, config: RunConfig, report: InvariantReport, out_dir: Path,
                             context: Optional[Dict[str, Any]] = None) -> PipelineStrategy:
    """
    创建流水线策略

    Args:
        name: 流水线名
        config: 运行配置
        report: 共享报告
        out_dir: 产物目录
        context: 流水线间共享的缓存

    Returns:
        PipelineStrategy: 策略实例

    Raises:
        KeyError: 未知的流水线名
    """
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise KeyError(f"unknown pipeline '{name}'; available: {', '.join(STRATEGIES)}") from None
    return cls(config, report, out_dir, context)
