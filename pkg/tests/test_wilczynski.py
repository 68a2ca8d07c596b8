import numpy as np
import pytest

from twistor.errors import DependentVectors
from twistor.potentials import GaugeMap, Rect, apply_gauge, pullback_direction
from twistor.surface import TOL_THM
from twistor.wilczynski import (
    PROJ6_TABLE,
    ProjectiveParams,
    integrate_proj_grid,
    laplace_relations,
    make_projective_family,
    plucker_embed,
    plucker_product,
    plucker_quadric,
    proj_focal_check,
    proj_frame_connection,
    proj_gauge_check,
    proj_gc2_residual,
    proj_gc_residual,
    proj_invariant_forms,
    proj_lie6,
    proj_table,
    proj_table_residual,
    projective_field,
    uapvbq_connection,
)

UNIT = Rect(0.0, 1.0, 0.0, 1.0)


@pytest.fixture(scope="module")
def family():
    return make_projective_family(ProjectiveParams())


@pytest.fixture(scope="module")
def proj_grid(family):
    return integrate_proj_grid(family, *UNIT.grid(41, 41), step=1e-3)


@pytest.fixture(scope="module")
def mesh():
    return np.meshgrid(*UNIT.grid(11, 11), indexing="ij")


class TestPlucker:
    def test_product_is_half_determinant(self):
        rng = np.random.default_rng(11)
        a, b, c, d = rng.normal(size=(4, 50, 4))
        lhs = plucker_product(plucker_embed(a, b), plucker_embed(c, d))
        rhs = 0.5 * np.linalg.det(np.stack([a, b, c, d], axis=-2))
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_lines_lie_on_klein_quadric(self):
        rng = np.random.default_rng(12)
        a, b = rng.normal(size=(2, 100, 4))
        assert np.max(np.abs(plucker_quadric(plucker_embed(a, b)))) < 1e-12

    def test_basis_line(self):
        E = np.eye(4)
        assert plucker_embed(E[0], E[1]).tolist() == [1.0, 0.0, 0.0, 0.0, 0.0, 0.0]

    def test_dependent_points(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        with pytest.raises(DependentVectors):
            plucker_embed(a, 2 * a)


class TestCompatibility:
    def test_family(self, family, mesh):
        assert np.max(np.abs(proj_gc_residual(family, *mesh))) < 1e-8

    def test_family_derived_form(self, family, mesh):
        assert np.nanmax(np.abs(proj_gc2_residual(family, *mesh))) < 1e-6

    def test_constant_field(self, mesh):
        P = projective_field(1, 1, 0, 0, UNIT)
        assert np.max(np.abs(proj_gc_residual(P, *mesh))) == 0

    def test_violation_detected(self, mesh):
        P = projective_field(1, 1, "R2", 0, UNIT)
        res = proj_gc_residual(P, *mesh)
        assert np.allclose(res[2], 1.0), "V_y − 2βγ_x − γβ_x 应当等于 1"

    def test_connection_is_traceless(self, family, mesh):
        M = proj_frame_connection(family, *mesh)
        assert np.max(np.abs(np.trace(M.m1, axis1=-2, axis2=-1))) < 1e-14
        assert np.max(np.abs(np.trace(M.m2, axis1=-2, axis2=-1))) < 1e-14


class TestSixFrame:
    def test_determinant_is_conserved(self, proj_grid):
        assert proj_grid.meta["det_drift"] < 1e-9
        assert np.linalg.det(proj_grid.frames[20, 20]) == pytest.approx(-1.0)

    def test_table(self, proj_grid):
        phi = proj_lie6(proj_grid)
        assert proj_table_residual(phi) < 1e-8
        table = proj_table(phi)
        assert table == pytest.approx({"(U,P)": -1.0, "(A,A)": 1.0, "(V,Q)": 1.0, "(B,B)": -1.0}, abs=1e-8)
        assert np.count_nonzero(PROJ6_TABLE) == 6

    def test_system(self, family, proj_grid):
        residuals = uapvbq_connection(family, proj_grid)
        assert residuals["system"] < 1e-5, f"六维系统不成立: {residuals}"

    def test_constant_coefficient_reference(self):
        P = projective_field(1, 1, 0, 0, UNIT)
        grid = integrate_proj_grid(P, *UNIT.grid(81, 81), step=1e-3)
        assert uapvbq_connection(P, grid)["system"] < 1e-8

    def test_laplace_relations(self, family, proj_grid):
        relations = laplace_relations(family, proj_grid)
        assert max(relations.values()) < 1e-6

    def test_focal(self, proj_grid):
        focal = proj_focal_check(proj_grid)
        assert len(focal) == 11
        assert max(focal.values()) < TOL_THM


def test_gauge_moves_frame_by_vertex_factors():
    P = projective_field(1, 1, 0.5, 0.2, UNIT)
    x, y = Rect(0.1, 0.9, 0.1, 0.9).grid(9, 9)
    residual = proj_gauge_check(P, GaugeMap("t + 0.1*t**2", "2*t"), x, y, step=1e-3)
    assert residual < 1e-6


def test_invariant_forms_under_gauge(family):
    G = GaugeMap("t + 0.1*t**2", "2*t")
    Q = apply_gauge(family, G)
    point, direction = (0.4, 0.6), (0.3, 0.7)
    image = (Q.charts[0].image(point[0]), Q.charts[1].image(point[1]))
    fp, gp = pullback_direction(G, point, (1.0, 1.0))
    metric, cubic = proj_invariant_forms(family, point, direction)
    metric_q, cubic_q = proj_invariant_forms(Q, image, pullback_direction(G, point, direction))
    assert metric_q == pytest.approx(metric, abs=1e-9)
    assert cubic_q == pytest.approx(fp * gp * cubic, abs=1e-9), "三次形式应按 f′g′ 缩放"
