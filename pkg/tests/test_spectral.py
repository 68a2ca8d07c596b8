import numpy as np
import pytest
from scipy.integrate import quad

from twistor.errors import DomainViolation, MetricDegenerate
from twistor.frame import integrate_grid, su22_tetrad
from twistor.potentials import C0Params, C1Params, Rect, make_c0_family, make_c1_family
from twistor.spectral import (
    MagneticOperator,
    StackelData,
    StackelSymmetry,
    bump,
    c0_operators,
    c1_operator,
    commutator_residual,
    gaussian_curvature,
    landau_basis,
    landau_gram_check,
    landau_hex,
    landau_operator_check,
    landau_profile_hex_check,
    landau_revolution,
    landau_surface,
    landau_twistor,
    magnetic_identity_check,
    random_bumps,
    rescale_frame_solution,
    stackel_curvature,
)

UNIT = Rect(0.0, 1.0, 0.0, 1.0)


def _zero(r1, r2):
    return np.zeros(np.broadcast(r1, r2).shape)


@pytest.fixture(scope="module")
def c0_setup():
    params = C0Params()
    P = make_c0_family(params)
    r1, r2 = UNIT.grid(41, 41)
    grid = integrate_grid(P, r1, r2, init=su22_tetrad((0.5, 0.5)), step=1e-3)
    return params, grid


@pytest.fixture(scope="module")
def c1_params():
    return C1Params()


class TestMagneticOperator:
    def test_free_laplacian(self):
        r1 = np.linspace(0, np.pi, 81)
        r2 = np.linspace(0, np.pi, 81)
        g1, g2 = np.meshgrid(r1, r2, indexing="ij")
        L = MagneticOperator((1.0, 1.0), (_zero, _zero), _zero, eigenvalue=-2.0)
        assert L.eigen_residual(np.sin(g1) * np.sin(g2), r1, r2) < 1e-6

    def test_edges_are_nan(self):
        r = np.linspace(0, 1, 11)
        L = MagneticOperator((1.0, 1.0), (_zero, _zero), _zero)
        out = L.apply(np.ones((11, 11)), r, r)
        assert np.isnan(out[0, 5]) and not np.isnan(out[5, 5])


class TestBumps:
    def test_peak_and_width(self):
        r = np.linspace(0, 1, 21)
        b = bump(r, r, (0.5, 0.5), (0.1, 0.2))
        assert b[10, 10] == pytest.approx(1.0)
        assert b[12, 10] == pytest.approx(np.exp(-0.5)) and b[10, 14] == pytest.approx(np.exp(-0.5))
        assert b[0, 10] < 1e-5

    def test_centers_stay_inside(self):
        r1, r2 = np.linspace(0, 1, 41), np.linspace(-1, 1, 41)
        for b in random_bumps(r1, r2, 20, seed=3):
            i, j = np.unravel_index(np.argmax(b), b.shape)
            assert 0.3 < r1[i] < 0.7 and -0.4 < r2[j] < 0.4

    def test_deterministic(self):
        r = np.linspace(0, 1, 21)
        a = random_bumps(r, r, 3, seed=7)
        b = random_bumps(r, r, 3, seed=7)
        assert len(a) == 3
        assert all(np.array_equal(x, y) for x, y in zip(a, b))


class TestC0Operators:
    def test_eigenvalues(self):
        _, _, lam, mu = c0_operators(C0Params(eps1=0.3, eps2=0.1))
        assert lam == pytest.approx(0.2) and mu == pytest.approx(0.1)

    def test_frame_components_are_eigenfunctions(self, c0_setup):
        params, grid = c0_setup
        H, F, _, _ = c0_operators(params)
        u = grid.row(0)
        assert H.eigen_residual(u, grid.r1, grid.r2) < 1e-4, "ψ 不是 H 的本征函数"
        assert F.eigen_residual(u, grid.r1, grid.r2) < 1e-4, "ψ 不是 F 的本征函数"

    def test_commutator(self, c0_setup):
        params, grid = c0_setup
        H, F, _, _ = c0_operators(params)
        worst = max(commutator_residual(H, F, b, grid.r1, grid.r2) for b in random_bumps(grid.r1, grid.r2, 5))
        assert worst < 1e-4


class TestStackel:
    @pytest.fixture(scope="class")
    def mesh(self, c1_params):
        return np.meshgrid(*c1_params.domain.inset(0.02).grid(9, 9), indexing="ij")

    def test_magnetic_identity(self, c1_params):
        r1, r2 = c1_params.domain.inset(0.02).grid(9, 9)
        assert magnetic_identity_check(c1_params, r1, r2) < 1e-5

    def test_cubic_data_has_unit_curvature(self, c1_params, mesh):
        K = stackel_curvature(c1_params, *mesh)
        assert np.max(np.abs(K - 1.0)) < 1e-6, "f = 4t³ − 4t 时度量应为单位曲率"

    def test_closed_form(self, c1_params, mesh):
        closed = StackelData(c1_params).curvature_closed_form(*mesh)
        assert np.allclose(closed, 1.0, atol=1e-10)

    def test_degenerate_metric(self):
        with pytest.raises(MetricDegenerate):
            gaussian_curvature(lambda a, b: -np.ones_like(a), lambda a, b: np.ones_like(a), 0.0, 0.0)


class TestC1Operators:
    @pytest.fixture(scope="class")
    def c1_grid(self, c1_params):
        P = make_c1_family(c1_params)
        r1, r2 = P.domain.grid(41, 41)
        return integrate_grid(P, r1, r2, init=su22_tetrad((float(r1[20]), float(r2[20]))), step=1e-3)

    def test_rescaled_components_are_eigenfunctions(self, c1_params, c1_grid):
        u = rescale_frame_solution(c1_params, c1_grid.row(0), c1_grid.r1, c1_grid.r2)
        H, F = c1_operator(c1_params), StackelSymmetry(c1_params)
        assert H.eigenvalue == pytest.approx(-0.1) and F.eigenvalue == pytest.approx(-0.05)
        assert H.eigen_residual(u, c1_grid.r1, c1_grid.r2) < 1e-4
        assert F.eigen_residual(u, c1_grid.r1, c1_grid.r2) < 1e-4

    def test_commutator(self, c1_params):
        r1, r2 = c1_params.domain.grid(101, 101)
        H, F = c1_operator(c1_params), StackelSymmetry(c1_params)
        worst = max(commutator_residual(H, F, b, r1, r2) for b in random_bumps(r1, r2, 10))
        assert worst < 1e-4, f"c = 1 的 H 与 F 不交换: {worst}"

    def test_domain_must_separate_coordinates(self):
        with pytest.raises(DomainViolation):
            c1_operator(C1Params(domain=Rect(0.4, 0.8, -0.8, -0.4)))


class TestLandauBasis:
    def test_closed_form_wronskian(self):
        basis = landau_basis(0.5, closed_form=True)
        y = np.linspace(-3, 3, 61)
        assert np.max(np.abs(basis.wronskian_at(y) - 1.0)) < 1e-12

    def test_numeric_matches_closed_form(self):
        exact = landau_basis(0.5, closed_form=True)
        numeric = landau_basis(0.5, step=1e-3)
        y = np.linspace(-3, 3, 61)
        assert np.max(np.abs(exact.psi1(y) - numeric.psi1(y))) < 1e-8
        assert np.max(np.abs(exact.psi2(y) - numeric.psi2(y))) < 1e-8
        assert np.max(np.abs(numeric.wronskian_at(y) - 1.0)) < 1e-9

    def test_closed_form_derivatives(self):
        basis = landau_basis(0.5, closed_form=True)
        y = np.linspace(-2, 2, 9)
        # ψ″ = (y² − 1)ψ
        assert np.allclose(basis.psi2(y, 2), (y ** 2 - 1) * basis.psi2(y))
        assert np.allclose(basis.psi1(y, 3), -y * (y ** 2 - 3) * np.exp(-y ** 2 / 2))

    def test_closed_form_only_at_lowest_level(self):
        with pytest.raises(DomainViolation):
            landau_basis(1.5, closed_form=True)

    def test_field_must_be_positive(self):
        with pytest.raises(DomainViolation):
            landau_basis(0.5, M=0.0)


class TestLandauTwistor:
    def test_gram(self):
        basis = landau_basis(0.5, closed_form=True)
        gx, gy = np.meshgrid(np.linspace(0, 1, 5), np.linspace(-1, 1, 5), indexing="ij")
        report = landau_gram_check(landau_twistor(basis, 1.0, gx, gy))
        assert max(report.values()) < 1e-10, f"Landau 扭量标架的乘积表不成立: {report}"

    def test_gram_rescaled(self):
        basis = landau_basis(1.0, M=2.0, step=1e-3)
        gx, gy = np.meshgrid(np.linspace(0, 1, 3), np.linspace(-1, 1, 3), indexing="ij")
        report = landau_gram_check(landau_twistor(basis, 1.5, gx, gy))
        assert max(report.values()) < 1e-8

    def test_zero_wavenumber(self):
        with pytest.raises(DomainViolation):
            landau_twistor(landau_basis(0.5, closed_form=True), 0.0, 0.0, 0.0)


class TestLandauProfile:
    def test_value_at_origin(self):
        basis = landau_basis(0.5, closed_form=True)
        profile = landau_surface(basis, 1.0, [0.0])
        integral = quad(lambda s: np.exp(s * s), 0.0, 1.0, epsabs=1e-14, epsrel=1e-14)[0]
        assert float(profile.z[0]) == pytest.approx(-1.0 / integral - integral / 4, abs=1e-8)
        assert float(profile.R[0]) == pytest.approx(-1.0 / integral + integral / 4, abs=1e-8)

    def test_hex_vector_on_quadric(self):
        basis = landau_basis(0.5, closed_form=True)
        report = landau_profile_hex_check(basis, 1.0, np.linspace(-2, 2, 100))
        assert report["quadric"] < 1e-10
        assert report["axis"] == 0

    def test_hex_vector_layout(self):
        hexv = landau_hex(landau_basis(0.5, closed_form=True), 1.0, np.linspace(-0.5, 0.5, 11))
        assert hexv.shape == (11, 6)
        assert np.all(hexv[:, 2:4] == 0), "球心应在旋转轴上"

    def test_poles_are_recorded(self):
        # ψ₂(0) = 0, 所以 y = k 处分母为零
        basis = landau_basis(0.5, closed_form=True)
        profile = landau_surface(basis, 1.0, np.array([0.5, 1.0, 1.5]))
        assert not profile.valid[1]
        assert profile.valid[0] and profile.valid[2]
        assert any(p["index"] == 1 for p in profile.poles)
        assert np.isnan(profile.z[1])

    def test_revolution_mesh(self):
        basis = landau_basis(0.5, closed_form=True)
        profile = landau_surface(basis, 1.0, np.linspace(-0.8, 0.8, 9))
        Z, rho, mesh = landau_revolution(profile, n_theta=12)
        assert mesh.shape == (9, 12, 3)
        assert np.all(rho[profile.valid] >= 0)
        assert np.allclose(mesh[:, 0, 2], Z, equal_nan=True)


def test_landau_operators():
    xs = np.linspace(0.0, 1.0, 41)
    ys = np.linspace(-1.0, 1.0, 41)
    report = landau_operator_check(1.0, 1.0, 0.5, xs, ys, n_bumps=4)
    assert report["H_eigen"] < 1e-4
    assert report["F_eigen"] < 1e-4
    assert report["commutator"] < 1e-4
