import numpy as np
import pytest

from twistor.errors import PlaneAtInfinity, UmbilicDegeneracy
from twistor.frame import integrate_grid, su22_tetrad
from twistor.potentials import C0Params, C1Params, CanalParams, Rect, make_c0_family, make_canal_landau, make_family
from twistor.surface import (
    TOL_THM,
    SurfaceSample,
    curvature_spheres,
    envelope_reconstruct,
    frame_spheres,
    hex_embed,
    hex_normalize,
    lie_quadric_residual,
    sample_spheres,
    surface_grid,
    surface_table,
    theorem1_check,
    theorem2_check,
)

UNIT = Rect(0.0, 1.0, 0.0, 1.0)


@pytest.fixture(scope="module")
def c0_grid():
    P = make_c0_family(C0Params())
    r1, r2 = UNIT.grid(41, 41)
    return integrate_grid(P, r1, r2, init=su22_tetrad((0.5, 0.5)), step=1e-3)


@pytest.fixture(scope="module")
def canal_grid():
    P = make_canal_landau(CanalParams())
    r1, r2 = P.domain.grid(41, 41)
    return integrate_grid(P, r1, r2, init=su22_tetrad((1.0, 0.5)), step=1e-3)


class TestHexCoordinates:
    def test_embed_is_on_quadric(self):
        y = hex_embed([1.0, -2.0, 0.5], 0.7)
        assert lie_quadric_residual(y) < 1e-14

    def test_normalize_inverts_embed(self):
        center, radius = hex_normalize(3.0 * hex_embed([1.0, -2.0, 0.5], -0.7))
        assert np.allclose(center, [1.0, -2.0, 0.5])
        assert radius == pytest.approx(-0.7)

    def test_plane_at_infinity(self):
        with pytest.raises(PlaneAtInfinity):
            hex_normalize([1.0, -1.0, 0.0, 0.0, 1.0, 0.0])


class TestEnvelope:
    def test_round_trip(self):
        sample = SurfaceSample(r=np.array([0.3, 0.1, -0.2]), n=np.array([0.0, 0.6, 0.8]), w1=0.5, w2=-1.5)
        U, V = sample_spheres(sample)
        out = envelope_reconstruct(U, V)
        assert np.allclose(out.r, sample.r)
        assert np.allclose(out.n, sample.n)
        assert (out.w1, out.w2) == pytest.approx((0.5, -1.5))

    def test_umbilic(self):
        sample = SurfaceSample(r=np.zeros(3), n=np.array([0.0, 0.0, 1.0]), w1=1.0, w2=1.0)
        with pytest.raises(UmbilicDegeneracy):
            envelope_reconstruct(*sample_spheres(sample))


class TestTheorems:
    def test_spheres_are_real_and_on_quadric(self, c0_grid):
        U, V = curvature_spheres(c0_grid)
        assert U.dtype == float and U.shape == (41, 41, 6)
        assert max(lie_quadric_residual(U), lie_quadric_residual(V)) < 1e-8

    def test_theorem1(self, c0_grid):
        report = theorem1_check(c0_grid)
        assert len(report) == 11
        worst = max(report.values())
        assert worst < TOL_THM, f"曲率球关系不成立: {report}"

    @pytest.mark.parametrize("params", [C1Params(), CanalParams()], ids=["c1", "canal"])
    def test_theorem1_other_families(self, params):
        P = make_family(params)
        r1, r2 = P.domain.grid(41, 41)
        center = (float(r1[20]), float(r2[20]))
        grid = integrate_grid(P, r1, r2, init=su22_tetrad(center), step=1e-3)
        assert max(theorem1_check(grid).values()) < TOL_THM

    def test_theorem2_on_canal(self, canal_grid):
        assert theorem2_check(canal_grid) < TOL_THM

    def test_theorem2_fails_off_canal(self, c0_grid):
        assert theorem2_check(c0_grid) > 1e-3

    def test_frame_spheres(self, c0_grid):
        U, V = frame_spheres(c0_grid.state(20, 20))
        assert U.quadric_residual < 1e-8 and V.quadric_residual < 1e-8


class TestSurfaceGrid:
    def test_normals(self, c0_grid):
        surf = surface_grid(c0_grid)
        assert surf.r.shape == (41, 41, 3)
        assert surf.normal_residual < 1e-6

    def test_table_skips_degenerate_points(self, c0_grid):
        surf = surface_grid(c0_grid)
        table = surface_table(surf)
        assert table.shape == (int(np.sum(surf.valid)), 10)
        assert len(surf.degenerate) == surf.valid.size - table.shape[0]
