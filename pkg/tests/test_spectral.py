import math

import numpy as np
import pytest
from scipy.optimize import brentq

from satstab.errors import AllModesUnstable, ConvergenceFailure
from satstab.spectral import (
    BoundaryCondition,
    OperatorParams,
    composite_gauss_legendre,
    critical_set_member,
    eigen_clamped,
    eigen_closed_form,
    eigen_fd,
    eigen_residual,
    quadrature_for_modes,
    unstable_count,
)

HINGED = BoundaryCondition.HINGED
NEUMANN = BoundaryCondition.NEUMANN_CH
CLAMPED = BoundaryCondition.CLAMPED


def hinged_sigma(lam, length, k):
    mu = (k * math.pi / length) ** 2
    return mu * (lam - mu)


class TestClosedForm:
    def test_hinged_first_three(self):
        es = eigen_closed_form(OperatorParams(2.0, math.pi), HINGED, 3)
        np.testing.assert_allclose(es.values, [1.0, -8.0, -63.0], rtol=1e-14)

    def test_zero_crossing(self):
        L = 2.5
        es = eigen_closed_form(OperatorParams((math.pi / L) ** 2, L), HINGED, 2)
        assert abs(es.values[0]) < 1e-14

    def test_neumann_constant_mode(self):
        es = eigen_closed_form(OperatorParams(2.0, math.pi), NEUMANN, 3)
        # sorted: sigma = (1, 0, -8); the zero belongs to the constant mode
        np.testing.assert_allclose(es.values, [1.0, 0.0, -8.0], atol=1e-14)
        j = int(np.where(es.mode_index == 0)[0][0])
        x = np.linspace(0, math.pi, 7)
        np.testing.assert_allclose(es.modes[j](x), 1 / math.sqrt(math.pi), rtol=1e-14)

    def test_sorting_not_wavenumber_order(self):
        # lam=10, L=2*pi peaks at k=4
        es = eigen_closed_form(OperatorParams(10.0, 2 * math.pi), HINGED, 8)
        assert es.mode_index[0] == 4
        assert np.all(np.diff(es.values) <= 1e-14)

    def test_orthonormality(self):
        for bc in (HINGED, NEUMANN):
            es = eigen_closed_form(OperatorParams(2.0, math.pi), bc, 16)
            g = (es.basis * es.quadrature.weights) @ es.basis.T
            assert np.max(np.abs(g - np.eye(16))) < 1e-10

    def test_residuals(self):
        es = eigen_closed_form(OperatorParams(2.0, math.pi), HINGED, 12)
        for j in range(12):
            assert eigen_residual(es, j) < 1e-6

    def test_bc_residual_and_norm_error(self):
        for bc in (HINGED, NEUMANN):
            es = eigen_closed_form(OperatorParams(0.5, 1.0), bc, 6)
            for j in range(6):
                assert es.bc_residual(j) < 1e-10
                assert es.norm_error(j) < 1e-12

    def test_monotone_tail(self):
        es = eigen_closed_form(OperatorParams(2.0, math.pi), HINGED, 32)
        assert es.values[31] / es.values[15] >= 8.0

    def test_quadrature_refinement_stable(self):
        es = eigen_closed_form(OperatorParams(2.0, math.pi), HINGED, 8)
        fine = composite_gauss_legendre(math.pi, 64, 20)
        coarse_g = (es.basis * es.quadrature.weights) @ es.basis.T
        bf = np.array([m(fine.nodes) for m in es.modes])
        fine_g = (bf * fine.weights) @ bf.T
        assert np.max(np.abs(fine_g - coarse_g)) < 1e-12

    def test_param_validation(self):
        with pytest.raises(ValueError):
            OperatorParams(-1.0, 1.0)
        with pytest.raises(ValueError):
            OperatorParams(1.0, 0.0)
        with pytest.raises(ValueError):
            eigen_closed_form(OperatorParams(1.0, 1.0), HINGED, 0)


class TestUnstableCount:
    def test_basic(self):
        es = eigen_closed_form(OperatorParams(2.0, math.pi), HINGED, 6)
        split = unstable_count(es)
        assert split.n == 1
        assert split.eta == pytest.approx(4.0)

    def test_zero_counts_unstable(self):
        L = 2.0
        es = eigen_closed_form(OperatorParams((math.pi / L) ** 2, L), HINGED, 4)
        assert unstable_count(es).n == 1

    def test_two_unstable(self):
        es = eigen_closed_form(OperatorParams(2.0, 2 * math.pi), HINGED, 8)
        split = unstable_count(es)
        assert split.n == 2
        assert split.eta == pytest.approx(9.0 / 32.0)

    def test_invariant_under_appending_modes(self):
        p = OperatorParams(2.0, 2 * math.pi)
        a = unstable_count(eigen_closed_form(p, HINGED, 8))
        b = unstable_count(eigen_closed_form(p, HINGED, 32))
        assert a == b

    def test_all_unstable_raises(self):
        es = eigen_closed_form(OperatorParams(10.0, 2 * math.pi), HINGED, 2)
        with pytest.raises(AllModesUnstable):
            unstable_count(es)


class TestCriticalSet:
    def test_member(self):
        assert critical_set_member(10 * math.pi**2)

    def test_parity_excluded(self):
        assert not critical_set_member(5 * math.pi**2)

    def test_below_minimum(self):
        assert not critical_set_member(1.0)

    def test_tolerance_window(self):
        assert critical_set_member(10 * math.pi**2 + 1e-9, tol=1e-8)
        assert not critical_set_member(10 * math.pi**2 + 1e-3, tol=1e-8)


class TestClampedSolver:
    def test_beam_ground_state(self):
        # clamped-clamped beam: cos(s) cosh(s) = 1, mu_1 = s^4
        s1 = brentq(lambda s: math.cos(s) * math.cosh(s) - 1.0, 4.5, 5.0, xtol=1e-13)
        mu1 = s1**4
        es = eigen_clamped(OperatorParams(0.0, 1.0), 1)
        assert es.values[0] == pytest.approx(-mu1, rel=1e-4)
        # much tighter in practice
        assert es.values[0] == pytest.approx(-mu1, rel=1e-7)

    def test_hinged_stencil_cross_validation(self):
        p = OperatorParams(2.0, math.pi)
        es_fd = eigen_fd(p, HINGED, 4)
        expected = sorted((hinged_sigma(2.0, math.pi, k) for k in range(1, 5)), reverse=True)
        np.testing.assert_allclose(es_fd.values, expected, rtol=1e-6)

    def test_orthonormality_and_bc(self):
        es = eigen_clamped(OperatorParams(2.0, math.pi), 4)
        g = (es.basis * es.quadrature.weights) @ es.basis.T
        assert np.max(np.abs(g - np.eye(4))) < 1e-7
        for j in range(4):
            assert es.bc_residual(j) < 1e-7
            assert eigen_residual(es, j) < 1e-6

    def test_refinement_failure(self):
        with pytest.raises(ConvergenceFailure):
            eigen_clamped(OperatorParams(2.0, 1.0), 6, base_cells=24, rtol=1e-10)

    def test_gram_consistency_hinged_fd(self):
        # fd-with-hinged grams should approximate the analytic diagonal ones
        p = OperatorParams(2.0, math.pi)
        es_fd = eigen_fd(p, HINGED, 3)
        es_cf = eigen_closed_form(p, HINGED, 3)
        np.testing.assert_allclose(es_fd.gram_d2, es_cf.gram_d2, rtol=1e-4, atol=1e-6)


class TestQuadrature:
    def test_polynomial_exactness(self):
        q = composite_gauss_legendre(2.0, 4, 8)
        assert q.integrate(q.nodes**7) == pytest.approx(2.0**8 / 8.0, rel=1e-13)

    def test_cubic_mode_products(self):
        L = math.pi
        q = quadrature_for_modes(L, 16)
        f = np.sin(16 * math.pi * q.nodes / L) ** 2 * np.sin(14 * math.pi * q.nodes / L)
        # odd-even product integrates to zero up to rule accuracy
        assert abs(q.integrate(f)) < 1e-12
        g = np.sin(16 * math.pi * q.nodes / L) ** 2
        assert q.integrate(g) == pytest.approx(L / 2, rel=1e-13)
