import numpy as np
import pytest

from twistor.errors import DegenerateJet, DomainViolation, IncompatibleField, StencilOutOfDomain, ZeroPotential
from twistor.potentials import (
    TOL_GC_ANALYTIC,
    TOL_GC_SAMPLED,
    C0Params,
    C1Params,
    CanalParams,
    GaugeMap,
    Rect,
    analytic_field,
    apply_gauge,
    derived_coeffs,
    field_table,
    gauss_codazzi_residual,
    invariant_forms,
    lie_gc_residual,
    log_jet,
    make_c0_family,
    make_canal_landau,
    make_family,
    perturbed,
    pullback_direction,
    require_compatible,
    sampled_field,
    schwarzian,
    swap_axes,
    validate_field,
)

UNIT = Rect(0.0, 1.0, 0.0, 1.0)


@pytest.fixture(scope="module")
def c0():
    return make_c0_family(C0Params())


@pytest.fixture(scope="module")
def c1():
    return make_family(C1Params())


@pytest.fixture(scope="module")
def canal():
    return make_canal_landau(CanalParams())


@pytest.fixture(scope="module")
def constant():
    return analytic_field(1, 1, 0.5, 0.2, Rect(0.1, 1.0, 0.1, 1.0))


class TestRect:
    def test_empty_rectangle(self):
        with pytest.raises(DomainViolation):
            Rect(1.0, 0.0, 0.0, 1.0)

    def test_inset_and_corners(self):
        inner = UNIT.inset(0.25)
        assert inner == Rect(0.25, 0.75, 0.25, 0.75)
        assert inner.corners()[2] == (0.75, 0.75)

    def test_contains(self):
        assert UNIT.contains([0.0, 1.0], [0.5, 0.5])
        assert not UNIT.contains(1.1, 0.5)

    def test_grid(self):
        r1, r2 = UNIT.grid(5, 3)
        assert np.allclose(r1, [0, 0.25, 0.5, 0.75, 1.0])
        assert len(r2) == 3


class TestCompatibility:
    def test_constant_field(self, constant):
        assert validate_field(constant) < 1e-14

    @pytest.mark.parametrize("family", ["c0", "c1", "canal"])
    def test_families_are_compatible(self, family, request):
        P = request.getfixturevalue(family)
        residual = validate_field(P)
        assert residual < TOL_GC_ANALYTIC, f"{family} 族不满足 Gauss–Codazzi 方程: {residual}"

    @pytest.mark.parametrize("family", ["c0", "c1", "canal"])
    def test_lie_gc(self, family, request):
        P = request.getfixturevalue(family)
        g1, g2 = np.meshgrid(*P.domain.inset(0.05).grid(7, 7), indexing="ij")
        residual = np.max(np.abs(lie_gc_residual(P, g1, g2)))
        assert residual < 1e-6, f"{family} 族的 Lie 相容方程残差 {residual}"

    def test_perturbation_breaks_compatibility(self, c0):
        Q = perturbed(c0, "V", "0.1*R2**2")
        assert validate_field(Q) > 0.1

    def test_incompatible_field_is_refused(self, c0):
        Q = perturbed(c0, "V", "0.1*R2**2")
        with pytest.raises(IncompatibleField):
            require_compatible(Q)

    def test_compatible_field_is_accepted(self, c0):
        assert require_compatible(c0) < TOL_GC_ANALYTIC

    def test_explicit_tolerance(self, c0):
        with pytest.raises(IncompatibleField):
            require_compatible(c0, tol=-1.0)

    def test_residual_shape(self, c0):
        g1, g2 = np.meshgrid(*UNIT.grid(3, 4), indexing="ij")
        assert gauss_codazzi_residual(c0, g1, g2).shape == (3, 3, 4)


class TestSampledField:
    @pytest.fixture(scope="class")
    def sampled(self, c0):
        r1, r2 = UNIT.grid(41, 41)
        g1, g2 = np.meshgrid(r1, r2, indexing="ij")
        values = [c0.jet(name, g1, g2) for name in c0.names]
        return sampled_field(r1, r2, *values)

    def test_compatible_within_sampled_tolerance(self, sampled):
        assert validate_field(sampled) < TOL_GC_SAMPLED

    def test_derivative_matches_analytic(self, sampled, c0):
        value = sampled.jet("p", 0.5, 0.5, 1, 0)
        assert value == pytest.approx(float(c0.jet("p", 0.5, 0.5, 1, 0)), abs=1e-6)

    def test_stencil_out_of_domain(self, sampled):
        with pytest.raises(StencilOutOfDomain):
            sampled.jet("p", 0.0, 0.5, 1, 0)

    def test_swap_axes(self, sampled):
        swapped = swap_axes(sampled)
        assert swapped.jet("p", 0.3, 0.6) == pytest.approx(float(sampled.jet("q", 0.6, 0.3)))
        assert swapped.jet("W", 0.3, 0.6) == pytest.approx(float(sampled.jet("V", 0.6, 0.3)))


def test_swap_axes_analytic(c0):
    swapped = swap_axes(c0)
    assert float(swapped.jet("q", 0.2, 0.7)) == pytest.approx(float(c0.jet("p", 0.7, 0.2)))
    assert validate_field(swapped) < TOL_GC_ANALYTIC


class TestDerived:
    def test_constant_coefficients(self, constant):
        c = derived_coeffs(constant, 0.5, 0.5)
        assert float(c.k) == pytest.approx(1.0)
        assert float(c.l) == pytest.approx(1.0)
        assert float(c.a) == pytest.approx(0.2)
        assert float(c.b) == pytest.approx(0.5)

    def test_canal_has_no_l(self, canal):
        c = derived_coeffs(canal, 1.0, 0.5)
        assert np.isnan(c.l)

    def test_zero_potential(self):
        P = analytic_field("R1", 1, 0, 0, UNIT)
        with pytest.raises(ZeroPotential):
            log_jet(P, "p", 0.0, 0.5, 1, 0)


class TestGauge:
    def test_schwarzian(self):
        assert schwarzian("t", 0.3) == 0
        assert schwarzian("t/(1 + t)", 0.5) == pytest.approx(0.0, abs=1e-12)
        assert schwarzian("t**3", 1.0) == pytest.approx(-4.0)

    def test_schwarzian_degenerate(self):
        with pytest.raises(DegenerateJet):
            schwarzian("t**2", 0.0)

    def test_compose(self):
        G = GaugeMap("2*t", "t") @ GaugeMap("t + 1", "3*t")
        assert str(G.f) == "2*t + 2"
        assert str(G.g) == "3*t"

    def test_non_monotone_rejected(self, constant):
        with pytest.raises(DegenerateJet):
            apply_gauge(constant, GaugeMap("-t", "t"))

    def test_gauge_keeps_compatibility(self, constant):
        Q = apply_gauge(constant, GaugeMap("t + 0.1*t**2", "2*t"))
        assert validate_field(Q) < TOL_GC_ANALYTIC

    def test_gauge_of_c0_family(self, c0):
        Q = apply_gauge(c0, GaugeMap("t + 0.2*t**2", "t + 0.5"))
        assert validate_field(Q, 11, 11) < TOL_GC_ANALYTIC

    def test_invariant_metric_and_cubic_form(self, constant):
        G = GaugeMap("t + 0.1*t**2", "2*t")
        Q = apply_gauge(constant, G)
        point = (0.5, 0.4)
        metric, cubic = invariant_forms(constant, point, (1.0, 1.0))
        image = (Q.charts[0].image(point[0]), Q.charts[1].image(point[1]))
        fp, gp = pullback_direction(G, point, (1.0, 1.0))
        metric_q, cubic_q = invariant_forms(Q, image, (fp, gp))
        assert metric_q == pytest.approx(metric, rel=1e-12)
        assert cubic_q == pytest.approx(fp * gp * cubic, rel=1e-12)


class TestFamilies:
    def test_c1_domain_violation(self):
        with pytest.raises(DomainViolation):
            make_family(C1Params(domain=Rect(0.4, 0.8, -0.8, -0.4)))

    def test_canal_requires_positive_field(self):
        with pytest.raises(DomainViolation):
            make_canal_landau(CanalParams(M=0.0))

    def test_c0_potentials(self, c0):
        # ψ(0) = 0, ψ'(0) = 1 ⇒ p(0, ·) = 1, q(·, 0) = −1
        assert float(c0.jet("p", 0.0, 0.5)) == pytest.approx(1.0, abs=1e-10)
        assert float(c0.jet("q", 0.5, 0.0)) == pytest.approx(-1.0, abs=1e-10)

    def test_unknown_params(self):
        with pytest.raises(TypeError):
            make_family(object())

    def test_field_table(self, canal):
        r1, r2 = canal.domain.grid(4, 3)
        table = field_table(canal, r1, r2)
        assert table.shape == (12, 6)
        assert np.allclose(table[:, 2], 2 * table[:, 0])
        assert np.all(table[:, 3] == 0)
